"""Discretized domains, grid functions, balls, and fast ball averages.

A :class:`Domain` is the box ``[-L, L]^dim`` split into ``n`` cells per axis,
with cell centers at

.. math::
    x_i = -L + \\left(i + \\frac12\\right) h, \\qquad h = \\frac{2L}{n}.

A cell belongs to a ball when its center lies strictly inside it. Membership is
decided in index space (coordinates divided by ``h``) so that balls centered on
cell centers are exactly translation invariant, and the measure of a ball is
the discrete one, ``h**dim`` times its cell count.

Ball sums come in three flavours sharing that membership test:

* :func:`ball_mask` / :func:`ball_average_direct` -- direct summation, the oracle;
* :func:`ball_average` -- per-row spans over :class:`PrefixSums`;
* :func:`centered_ball_sums` and :func:`centered_ball_sums_varying` -- the same
  spans evaluated for every cell center at once.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import (
    CenterOutsideDomainError,
    EmptyBallError,
    InvalidDimensionError,
    NonFiniteValuesError,
    NonPositiveSizeError,
    ValidationError,
)

logger = logging.getLogger(__name__)

MeasureMode = Literal["clipped", "full"]

# centers closer than this (in cells) to a lattice point are snapped onto it
_SNAP = 1e-9


@dataclass(frozen=True)
class Domain:
    """Uniform cell-centered grid on ``[-half_width, half_width]^dim``."""

    dim: int
    half_width: float
    cells_per_axis: int

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.cells_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def axis_centers(self) -> np.ndarray:
        n = self.cells_per_axis
        return -self.half_width + (np.arange(n) + 0.5) * self.spacing

    @cached_property
    def index_grid(self) -> np.ndarray:
        """Integer multi-index of every cell, shape ``(size, dim)``, row-major."""
        axes = np.meshgrid(*[np.arange(self.cells_per_axis)] * self.dim, indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    @cached_property
    def centers(self) -> np.ndarray:
        """Coordinates of every cell center, shape ``(size, dim)``."""
        return self.axis_centers[self.index_grid]

    def cell_index(self, point: Sequence[float]) -> int:
        """Flat index of the cell containing ``point`` (faces belong to the inner cell)."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValidationError(f"point must have {self.dim} coordinates")
        if np.any(np.abs(point) > self.half_width):
            raise CenterOutsideDomainError(f"point {tuple(point)} lies outside the domain")
        idx = np.floor((point + self.half_width) / self.spacing).astype(int)
        idx = np.clip(idx, 0, self.cells_per_axis - 1)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def contains_ball(self, ball: Ball) -> bool:
        """Whether the closed ball lies inside the box geometrically."""
        c = np.asarray(ball.center)
        return bool(np.all(c - ball.radius >= -self.half_width) and np.all(c + ball.radius <= self.half_width))


def build_domain(dim: int, half_width: float, cells_per_axis: int) -> Domain:
    """Validate the grid parameters and return the :class:`Domain`."""
    if dim not in (1, 2, 3):
        raise InvalidDimensionError(f"dimension must be 1, 2 or 3, got {dim}")
    if not (math.isfinite(half_width) and half_width > 0):
        raise NonPositiveSizeError(f"half_width must be positive, got {half_width}")
    if int(cells_per_axis) != cells_per_axis or cells_per_axis < 2:
        raise NonPositiveSizeError(f"cells_per_axis must be an integer >= 2, got {cells_per_axis}")
    return Domain(int(dim), float(half_width), int(cells_per_axis))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on the cells of a domain, stored flat in row-major order."""

    domain: Domain
    values: np.ndarray
    nonneg: bool

    @classmethod
    def from_values(cls, domain: Domain, values) -> GridFunction:
        arr = np.array(values, dtype=float)
        if arr.shape == domain.shape:
            arr = arr.ravel()
        if arr.shape != (domain.size,):
            raise ValidationError(f"expected {domain.size} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValuesError("grid function values must be finite")
        arr.setflags(write=False)
        return cls(domain, arr, bool(np.all(arr >= 0)))

    @classmethod
    def constant(cls, domain: Domain, value: float) -> GridFunction:
        return cls.from_values(domain, np.full(domain.size, float(value)))

    @classmethod
    def indicator(cls, domain: Domain, mask: np.ndarray) -> GridFunction:
        return cls.from_values(domain, np.asarray(mask, dtype=float))

    def as_grid(self) -> np.ndarray:
        return self.values.reshape(self.domain.shape)

    def with_values(self, values) -> GridFunction:
        return GridFunction.from_values(self.domain, values)

    def abs(self) -> GridFunction:
        return self if self.nonneg else self.with_values(np.abs(self.values))

    def masked(self, mask: np.ndarray) -> GridFunction:
        """The product with the indicator of ``mask``."""
        return self.with_values(np.where(mask, self.values, 0.0))

    def _other(self, other) -> np.ndarray | float:
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise ValidationError("grid functions live on different domains")
            return other.values
        if isinstance(other, np.ndarray) and other.ndim > 0:
            if other.size != self.domain.size:
                raise ValidationError(f"array of size {other.size} does not match {self.domain.size} cells")
            return other.reshape(-1).astype(float)
        return float(other)

    def __add__(self, other) -> GridFunction:
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __mul__(self, other) -> GridFunction:
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> GridFunction:
        return self.with_values(self.values / self._other(other))

    def reciprocal(self) -> GridFunction:
        return self.with_values(1.0 / self.values)

    @cached_property
    def prefix(self) -> PrefixSums:
        """Row prefixes of ``|f|``, built once per function."""
        return PrefixSums.build(self)


def integrate(f: GridFunction) -> float:
    """Midpoint-rule integral ``h**dim * sum(values)`` (numpy pairwise summation)."""
    return float(f.domain.cell_volume * np.sum(f.values))


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise NonPositiveSizeError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def dilate(self, beta: float) -> Ball:
        return Ball(self.center, beta * self.radius)


def _index_center(domain: Domain, center: Sequence[float]) -> np.ndarray:
    t = (np.asarray(center, dtype=float) + domain.half_width) / domain.spacing - 0.5
    snapped = np.rint(t)
    return np.where(np.abs(t - snapped) <= _SNAP, snapped, t)


def _radius_sq(domain: Domain, radius) -> np.ndarray | float:
    return (np.asarray(radius, dtype=float) / domain.spacing) ** 2


def _sq_dist(index: np.ndarray, t: np.ndarray) -> np.ndarray:
    # fixed axis order; the span code adds the last axis to the same partial sum
    acc = (index[..., 0] - t[0]) ** 2
    for a in range(1, index.shape[-1]):
        acc = acc + (index[..., a] - t[a]) ** 2
    return acc


def ball_mask(domain: Domain, ball: Ball) -> np.ndarray:
    """Boolean mask of the cells whose centers lie in ``ball``."""
    if ball.dim != domain.dim:
        raise ValidationError(f"ball has dimension {ball.dim}, domain {domain.dim}")
    t = _index_center(domain, ball.center)
    return _sq_dist(domain.index_grid.astype(float), t) < _radius_sq(domain, ball.radius)


def _lattice_count(domain: Domain, ball: Ball) -> int:
    """Cells of the infinite grid extension inside ``ball``."""
    t = _index_center(domain, ball.center)
    reach = ball.radius / domain.spacing
    axes = [np.arange(math.floor(ta - reach), math.ceil(ta + reach) + 1, dtype=float) for ta in t]
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    return int(np.count_nonzero(_sq_dist(pts, t) < _radius_sq(domain, ball.radius)))


def ball_average_direct(
    f: GridFunction, ball: Ball, mode: MeasureMode = "clipped", absolute: bool = True
) -> float:
    """Ball average by direct summation over the mask (the reference)."""
    mask = ball_mask(f.domain, ball)
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise EmptyBallError(f"no cell center inside {ball}")
    vals = np.abs(f.values) if absolute else f.values
    denom = count if mode == "clipped" else _lattice_count(f.domain, ball)
    return float(np.sum(vals[mask]) / denom)


@dataclass(frozen=True, eq=False)
class PrefixSums:
    """Last-axis row prefixes of one grid function, plus a lazily built summed-area table.

    ``rows`` has shape ``(n,) * (dim - 1) + (n + 1,)``; ``table`` has shape
    ``(n + 1,) * dim`` with a zero first slab on every axis.
    """

    domain: Domain
    grid: np.ndarray
    rows: np.ndarray

    @classmethod
    def build(cls, f: GridFunction, absolute: bool = True) -> PrefixSums:
        grid = np.abs(f.as_grid()) if absolute else f.as_grid()
        rows = np.cumsum(np.pad(grid, [(0, 0)] * (grid.ndim - 1) + [(1, 0)]), axis=-1)
        return cls(f.domain, grid, rows)

    @cached_property
    def table(self) -> np.ndarray:
        table = np.pad(self.grid, [(1, 0)] * self.grid.ndim)
        for axis in range(self.grid.ndim):
            table = np.cumsum(table, axis=axis)
        return table

    def box_sum(self, lo: Sequence[int], hi: Sequence[int]) -> float:
        """Sum over the index box ``[lo, hi)`` (clipped to the grid)."""
        n = self.domain.cells_per_axis
        lo = [min(max(int(v), 0), n) for v in lo]
        hi = [min(max(int(v), 0), n) for v in hi]
        if any(h <= l for l, h in zip(lo, hi)):
            return 0.0
        total = 0.0
        d = self.domain.dim
        for corner in itertools.product((0, 1), repeat=d):
            idx = tuple(hi[a] if corner[a] else lo[a] for a in range(d))
            sign = -1.0 if (d - sum(corner)) % 2 else 1.0
            total += sign * self.table[idx]
        return float(total)


def _row_spans(domain: Domain, ball: Ball, clip: bool = True):
    """Leading indices and inclusive ``[lo, hi]`` last-axis spans of the ball's rows."""
    n = domain.cells_per_axis
    t = _index_center(domain, ball.center)
    r2 = float(_radius_sq(domain, ball.radius))
    reach = math.sqrt(r2)
    lead_axes = []
    for ta in t[:-1]:
        a0, a1 = math.ceil(ta - reach), math.floor(ta + reach)
        if clip:
            a0, a1 = max(a0, 0), min(a1, n - 1)
        lead_axes.append(np.arange(a0, a1 + 1, dtype=float))
    if lead_axes:
        mesh = np.meshgrid(*lead_axes, indexing="ij")
        lead_idx = np.stack([m.ravel() for m in mesh], axis=1)
        lead = _sq_dist(lead_idx, t)
    else:
        lead_idx = np.zeros((1, 0))
        lead = np.zeros(1)
    keep = lead < r2
    lead_idx, lead = lead_idx[keep], lead[keep]
    tl = t[-1]
    half = np.sqrt(np.maximum(r2 - lead, 0.0))
    lo = np.ceil(tl - half)
    hi = np.floor(tl + half)
    for _ in range(2):
        lo = np.where(lead + (lo - tl) ** 2 < r2, lo, lo + 1)
        lo = np.where(lead + (lo - 1 - tl) ** 2 < r2, lo - 1, lo)
        hi = np.where(lead + (hi - tl) ** 2 < r2, hi, hi - 1)
        hi = np.where(lead + (hi + 1 - tl) ** 2 < r2, hi + 1, hi)
    if clip:
        lo, hi = np.maximum(lo, 0), np.minimum(hi, n - 1)
    ok = lo <= hi
    return lead_idx[ok].astype(int), lo[ok].astype(int), hi[ok].astype(int)


def ball_sum(prefix: PrefixSums, ball: Ball) -> tuple[float, int]:
    """Sum of the tabulated function over the ball and the clipped cell count."""
    lead_idx, lo, hi = _row_spans(prefix.domain, ball)
    if lo.size == 0:
        return 0.0, 0
    index = tuple(lead_idx.T)
    sums = prefix.rows[index + (hi + 1,)] - prefix.rows[index + (lo,)]
    return float(np.sum(sums)), int(np.sum(hi - lo + 1))


def ball_average(
    f: GridFunction,
    ball: Ball,
    mode: MeasureMode = "clipped",
    prefix: PrefixSums | None = None,
    absolute: bool = True,
) -> float:
    """Average of ``|f|`` over ``ball`` with the discrete measure.

    ``mode="clipped"`` divides by the cells of the ball inside the domain,
    ``mode="full"`` by the cells of the ball on the infinite grid extension
    (numerators are zero-extended either way).
    """
    if ball.dim != f.domain.dim:
        raise ValidationError(f"ball has dimension {ball.dim}, domain {f.domain.dim}")
    if prefix is None:
        prefix = f.prefix if absolute else PrefixSums.build(f, absolute=False)
    total, count = ball_sum(prefix, ball)
    if count == 0:
        raise EmptyBallError(f"no cell center inside {ball}")
    if mode == "full":
        _, lo, hi = _row_spans(f.domain, ball, clip=False)
        count = int(np.sum(hi - lo + 1))
    return total / count


def discrete_measure(domain: Domain, ball: Ball, mode: MeasureMode = "clipped") -> float:
    """``h**dim`` times the number of cells in ``ball``."""
    if mode == "full":
        _, lo, hi = _row_spans(domain, ball, clip=False)
    else:
        _, lo, hi = _row_spans(domain, ball)
    return domain.cell_volume * float(np.sum(hi - lo + 1))


def _half_width(s: int, r2: float) -> int:
    """Largest ``m >= 0`` with ``s + m*m < r2`` (caller guarantees ``s < r2``)."""
    m = int(math.sqrt(r2 - s))
    while m > 0 and s + m * m >= r2:
        m -= 1
    while s + (m + 1) * (m + 1) < r2:
        m += 1
    return m


def _reach(r2: float) -> int:
    """Largest integer ``k`` with ``k*k < r2``."""
    return _half_width(0, r2) if r2 > 0 else -1


def _row_prefix(grid: np.ndarray) -> np.ndarray:
    return np.cumsum(np.pad(grid, [(0, 0)] * (grid.ndim - 1) + [(1, 0)]), axis=-1)


def _shift_slices(delta: Sequence[int], n: int):
    dst, src = [], []
    for d in delta:
        if d >= 0:
            dst.append(slice(0, n - d))
            src.append(slice(d, n))
        else:
            dst.append(slice(-d, n))
            src.append(slice(0, n + d))
    return tuple(dst), tuple(src)


def centered_ball_sums(domain: Domain, values: np.ndarray, radius: float) -> np.ndarray:
    """Sum of ``values`` over ``B(x, radius)`` for every cell center ``x``.

    Returns a flat array; the domain is zero-extended. The ball at every
    center is the same integer stencil, so each row span of the stencil is a
    shifted window sum of the row prefixes.
    """
    n, d = domain.cells_per_axis, domain.dim
    grid = np.asarray(values, dtype=float).reshape(domain.shape)
    r2 = float(_radius_sq(domain, radius))
    k = min(_reach(r2), n - 1)
    out = np.zeros(domain.shape)
    if k < 0:
        return out.ravel()
    prefix = _row_prefix(grid)
    idx = np.arange(n)
    windows: dict[int, np.ndarray] = {}
    for delta in itertools.product(range(-k, k + 1), repeat=d - 1):
        s = sum(v * v for v in delta)
        if s >= r2:
            continue
        m = _half_width(s, r2)
        if m not in windows:
            hi = np.minimum(idx + m + 1, n)
            lo = np.maximum(idx - m, 0)
            windows[m] = prefix[..., hi] - prefix[..., lo]
        dst, src = _shift_slices(delta, n)
        out[dst] += windows[m][src]
    return out.ravel()


def centered_ball_counts(domain: Domain, radius: float, mode: MeasureMode = "clipped") -> np.ndarray:
    """Cell counts of ``B(x, radius)`` for every cell center ``x``."""
    if mode == "clipped":
        return centered_ball_sums(domain, np.ones(domain.size), radius)
    r2 = float(_radius_sq(domain, radius))
    k = _reach(r2)
    total = 0
    for delta in itertools.product(range(-k, k + 1), repeat=domain.dim - 1):
        s = sum(v * v for v in delta)
        if s < r2:
            total += 2 * _half_width(s, r2) + 1
    return np.full(domain.size, float(total))


def centered_ball_sums_varying(
    domain: Domain,
    values: np.ndarray,
    radii: np.ndarray,
    cells: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sums and clipped counts over ``B(x, radii[x])`` for the given cells.

    ``radii`` has one entry per cell of the domain; ``cells`` restricts the
    evaluation to a subset of flat indices (all cells by default).
    """
    n, d = domain.cells_per_axis, domain.dim
    if cells is None:
        cells = np.arange(domain.size)
    cells = np.asarray(cells, dtype=int)
    prefix = _row_prefix(np.asarray(values, dtype=float).reshape(domain.shape))
    index = domain.index_grid[cells]
    r2 = _radius_sq(domain, np.asarray(radii, dtype=float)[cells])
    sums = np.zeros(cells.size)
    counts = np.zeros(cells.size)
    if cells.size == 0:
        return sums, counts
    k = min(_reach(float(np.max(r2))), n - 1)
    last = index[:, -1]
    for delta in itertools.product(range(-k, k + 1), repeat=d - 1):
        s = float(sum(v * v for v in delta))
        active = s < r2
        lead = []
        for a, da in enumerate(delta):
            ia = index[:, a] + da
            active &= (ia >= 0) & (ia < n)
            lead.append(ia)
        if not np.any(active):
            continue
        rem = r2[active]
        m = np.floor(np.sqrt(rem - s))
        m = np.where(s + m * m < rem, m, m - 1)
        m = np.where(s + (m + 1) * (m + 1) < rem, m + 1, m).astype(int)
        lo = np.maximum(last[active] - m, 0)
        hi = np.minimum(last[active] + m, n - 1)
        row = tuple(ia[active] for ia in lead)
        sums[active] += prefix[row + (hi + 1,)] - prefix[row + (lo,)]
        counts[active] += hi - lo + 1
    return sums, counts
