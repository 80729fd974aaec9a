"""Hardy-Littlewood, local and penalized maximal operators on a discrete radius set.

Every operator evaluates ball averages of ``|f|`` centered at cell centers
over a :class:`RadiusGrid`. Operators that know ``rho`` also evaluate the
endpoint ball ``B(x, rho(x))`` at every cell, so all of them see one common
family of averages and compare exactly.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .grid import (
    Ball,
    Domain,
    GridFunction,
    MeasureMode,
    ball_average,
    ball_mask,
    centered_ball_counts,
    centered_ball_sums,
    centered_ball_sums_varying,
)
from .parallel import ordered_map
from .rho import RhoFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiusGrid:
    radii: tuple[float, ...]

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ValidationError("radius grid is empty")
        if not all(math.isfinite(r) and r > 0 for r in radii):
            raise ValidationError("radii must be positive and finite")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValidationError("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> RadiusGrid:
        return cls(tuple(sorted(set(float(v) for v in values))))

    @classmethod
    def log_spaced(
        cls,
        domain: Domain,
        per_octave: int = 4,
        r_min: float | None = None,
        r_max: float | None = None,
    ) -> RadiusGrid:
        """Geometric radii ``r_min * 2^(k / per_octave)`` up to ``r_max`` (defaults ``h`` and ``2L``)."""
        if per_octave < 1:
            raise ValidationError(f"per_octave must be >= 1, got {per_octave}")
        lo = domain.spacing if r_min is None else float(r_min)
        hi = 2.0 * domain.half_width if r_max is None else float(r_max)
        if not 0 < lo <= hi:
            raise ValidationError(f"need 0 < r_min <= r_max, got {lo} and {hi}")
        steps = math.floor(per_octave * math.log2(hi / lo) + 1e-9)
        radii = [lo * 2.0 ** (k / per_octave) for k in range(steps + 1)]
        if radii[-1] < hi * (1 - 1e-12):
            radii.append(hi)
        return cls.from_values(radii)

    def refined(self) -> RadiusGrid:
        """Insert the geometric midpoint of every consecutive pair."""
        mids = [math.sqrt(a * b) for a, b in zip(self.radii, self.radii[1:])]
        return RadiusGrid.from_values(self.radii + tuple(mids))

    def with_radii(self, extra: Iterable[float]) -> RadiusGrid:
        return RadiusGrid.from_values(self.radii + tuple(float(r) for r in extra))

    def __iter__(self) -> Iterator[float]:
        return iter(self.radii)

    def __len__(self) -> int:
        return len(self.radii)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.radii)


def _full_counts(domain: Domain, radii: np.ndarray) -> np.ndarray:
    """Lattice counts of ``B(x, r)`` on the infinite grid, per distinct radius."""
    uniq, inverse = np.unique(radii, return_inverse=True)
    counts = np.array([centered_ball_counts(domain, r, "full")[0] for r in uniq])
    return counts[inverse]


class _Averages:
    """Ball averages of ``|f|`` at every cell for every grid radius, plus the rho endpoint."""

    def __init__(self, f: GridFunction, radii: Iterable[float], mode: MeasureMode = "clipped"):
        self.domain = f.domain
        self.mode = mode
        self.abs_values = np.abs(f.values)
        radii = tuple(radii)
        self.radii = np.array(radii)

        def one(r: float) -> np.ndarray:
            sums = centered_ball_sums(self.domain, self.abs_values, r)
            return sums / centered_ball_counts(self.domain, r, mode)

        self.table = np.array(ordered_map(one, radii)).reshape(len(radii), self.domain.size)

    def endpoint(self, rho: RhoFunction) -> np.ndarray:
        if rho.domain != self.domain:
            raise ValidationError("rho and f live on different domains")
        sums, counts = centered_ball_sums_varying(self.domain, self.abs_values, rho.array)
        if self.mode == "full":
            counts = _full_counts(self.domain, rho.array)
        return sums / counts


def _penalty(radius, rho_values: np.ndarray, theta: float) -> np.ndarray:
    """``(1 + r/rho)^(-theta)``; exactly 1 when ``theta = 0``."""
    return np.exp(-theta * np.log1p(radius / rho_values))


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not (math.isfinite(theta) and theta >= 0):
        raise ValidationError(f"theta must be >= 0, got {theta}")
    return theta


def hl_maximal(
    f: GridFunction,
    radii: RadiusGrid,
    rho: RhoFunction | None = None,
    mode: MeasureMode = "clipped",
) -> GridFunction:
    """``max_r avg_{B(x,r)} |f|`` over the grid radii and, when ``rho`` is given, ``r = rho(x)``.

    Pass the same ``rho`` as :func:`local_maximal` when comparing the two
    pointwise: without it ``rho(x)`` is not among the radii and the local
    operator can exceed this one.
    """
    avg = _Averages(f, radii, mode)
    out = avg.table.max(axis=0)
    if rho is not None:
        out = np.maximum(out, avg.endpoint(rho))
    return f.with_values(out)


def local_maximal(
    f: GridFunction, rho: RhoFunction, radii: RadiusGrid, mode: MeasureMode = "clipped"
) -> GridFunction:
    """Averages restricted to ``r <= rho(x)``; the endpoint ``rho(x)`` is always included."""
    top = float(rho.array.max())
    avg = _Averages(f, [r for r in radii if r <= top], mode)
    out = avg.endpoint(rho)
    for r, row in zip(avg.radii, avg.table):
        out = np.where(r <= rho.array, np.maximum(out, row), out)
    return f.with_values(out)


def theta_maximal(
    f: GridFunction,
    rho: RhoFunction,
    theta: float,
    radii: RadiusGrid,
    mode: MeasureMode = "clipped",
) -> GridFunction:
    """``max_r (1 + r/rho(x))^(-theta) avg_{B(x,r)} |f|`` over the grid radii and ``rho(x)``."""
    split = theta_split(f, rho, theta, radii, mode)
    return f.with_values(np.maximum(split.inner.values, split.outer.values))


class ThetaSplit(NamedTuple):
    inner: GridFunction
    outer: GridFunction
    dyadic_index: np.ndarray


def theta_split(
    f: GridFunction,
    rho: RhoFunction,
    theta: float,
    radii: RadiusGrid,
    mode: MeasureMode = "clipped",
) -> ThetaSplit:
    """Penalized suprema over ``r <= rho(x)`` (inner) and ``r > rho(x)`` (outer).

    ``dyadic_index`` holds the ``j`` with ``2^(j-1) rho(x) < r <= 2^j rho(x)``
    for the radius attaining the outer supremum, 0 where that radius set is
    empty (the outer part is then 0).
    """
    theta = _check_theta(theta)
    avg = _Averages(f, radii, mode)
    rv = rho.array
    inner = _penalty(rv, rv, theta) * avg.endpoint(rho)
    outer = np.zeros(f.domain.size)
    best_r = np.zeros(f.domain.size)
    for r, row in zip(avg.radii, avg.table):
        val = _penalty(r, rv, theta) * row
        small = r <= rv
        inner = np.where(small, np.maximum(inner, val), inner)
        better = ~small & ((best_r == 0) | (val > outer))
        outer = np.where(better, val, outer)
        best_r = np.where(better, r, best_r)
    j = np.zeros(f.domain.size, dtype=int)
    hit = best_r > 0
    j[hit] = np.ceil(np.log2(best_r[hit] / rv[hit]) - 1e-12).astype(int)
    j[hit] = np.maximum(j[hit], 1)
    return ThetaSplit(f.with_values(inner), f.with_values(outer), j)


def penalized_average(f: GridFunction, ball: Ball, eta: float, rho: RhoFunction) -> GridFunction:
    """Step function ``(1 + r/rho(x0))^(-eta) * avg_B |f| * chi_B``."""
    eta = _check_theta(eta)
    psi = float(_penalty(ball.radius, np.array(rho.value_at(ball.center)), eta))
    level = psi * ball_average(f, ball)
    return f.with_values(np.where(ball_mask(f.domain, ball), level, 0.0))
