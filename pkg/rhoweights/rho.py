"""Critical radius functions.

A positive function ``rho`` is a critical radius function when there are
constants ``c >= 1`` and ``N0 >= 1`` with

.. math::
    c^{-1} \\rho(x) (1 + |x-y|/\\rho(x))^{-N_0} \\le \\rho(y)
        \\le c \\rho(x) (1 + |x-y|/\\rho(x))^{N_0/(N_0+1)}

for all ``x, y``. Balls ``B(x, r)`` with ``r <= rho(x)`` are sub-critical.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonPositiveRhoError,
    PotentialZeroError,
    ValidationError,
    ZeroMassBallError,
)
from .grid import (
    Ball,
    GridFunction,
    PrefixSums,
    ball_sum,
    centered_ball_sums,
    centered_ball_sums_varying,
)

logger = logging.getLogger(__name__)

DEFAULT_N0_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
DEFAULT_PAIR_BUDGET = 2_000_000
BISECT_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class RhoFunction:
    values: GridFunction
    clamped: np.ndarray | None = None

    def __post_init__(self):
        arr = self.values.values
        bad = np.flatnonzero(~(arr > 0))
        if bad.size:
            raise NonPositiveRhoError(f"rho must be positive, got {arr[bad[0]]} at cell {bad[0]}")

    @property
    def domain(self):
        return self.values.domain

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    def scaled(self, beta: float) -> RhoFunction:
        if not beta > 0:
            raise ValidationError(f"scale factor must be positive, got {beta}")
        return RhoFunction(self.values * float(beta), self.clamped)

    def value_at(self, point: Sequence[float]) -> float:
        return float(self.array[self.domain.cell_index(point)])


@dataclass(frozen=True)
class RhoConstants:
    c_rho: float
    n0: float
    worst_pair: tuple[int, int]
    fits: dict[float, float] = field(default_factory=dict)


def _pair_chunks(size: int, budget: int, rng: np.random.Generator, chunk: int = 256):
    """Unordered pairs ``i < j``: all of them when affordable, else ``budget`` random ones."""
    if size * (size - 1) // 2 <= budget:
        for start in range(0, size, chunk):
            i = np.arange(start, min(start + chunk, size))
            ii, jj = np.meshgrid(i, np.arange(size), indexing="ij")
            keep = jj > ii
            yield ii[keep], jj[keep]
        return
    logger.info("critical-radius fit: subsampling %d of %d pairs", budget, size * (size - 1) // 2)
    for start in range(0, budget, 1 << 18):
        m = min(1 << 18, budget - start)
        i = rng.integers(0, size, m)
        j = (i + 1 + rng.integers(0, size - 1, m)) % size
        yield np.minimum(i, j), np.maximum(i, j)


def _required_c(a: np.ndarray, t: np.ndarray, n0: float) -> np.ndarray:
    """Smallest ``c`` satisfying both sides at ratio ``a = rho(y)/rho(x)`` and ``t = |x-y|/rho(x)``."""
    grow = np.log1p(t)
    lower = np.exp(-np.log(a) - n0 * grow)
    upper = np.exp(np.log(a) - n0 / (n0 + 1.0) * grow)
    return np.maximum(lower, upper)


def verify_critical(
    rho: RhoFunction,
    n0_grid: Iterable[float] = DEFAULT_N0_GRID,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
    seed: int = 0,
) -> RhoConstants:
    """Fit the constants of the critical-radius inequalities on cell-center pairs.

    Every sampled pair is checked in both orders. For each candidate ``N0``
    the smallest admissible ``c >= 1`` is computed; the candidate with the
    smallest ``c`` wins, ties going to the smaller ``N0``.
    """
    n0_grid = sorted(float(v) for v in n0_grid)
    if not n0_grid or n0_grid[0] < 1:
        raise ValidationError("N0 candidates must be >= 1")
    vals = rho.array
    centers = rho.domain.centers
    rng = np.random.default_rng(seed)
    # running (c, pair) maximum per N0
    best = {n0: (-math.inf, (0, 1)) for n0 in n0_grid}
    for i, j in _pair_chunks(rho.domain.size, pair_budget, rng):
        if i.size == 0:
            continue
        dist = np.sqrt(np.sum((centers[i] - centers[j]) ** 2, axis=1))
        for x, y in ((i, j), (j, i)):
            a = vals[y] / vals[x]
            t = dist / vals[x]
            for n0 in n0_grid:
                c = _required_c(a, t, n0)
                k = int(np.argmax(c))
                if c[k] > best[n0][0]:
                    best[n0] = (float(c[k]), (int(x[k]), int(y[k])))
    fits = {k: max(1.0, v[0]) for k, v in best.items()}
    n0 = min(n0_grid, key=lambda v: (fits[v], v))
    logger.debug("critical-radius fits: %s", fits)
    return RhoConstants(fits[n0], n0, best[n0][1], fits)



def is_subcritical(rho: RhoFunction, ball: Ball) -> bool:
    return ball.radius <= rho.value_at(ball.center)


def rho_from_potential(V: GridFunction, radius_grid: Sequence[float]) -> RhoFunction:
    """Auxiliary radius ``rho_V(x) = sup{r : r^(2-d) * int_{B(x,r)} V <= 1}``.

    ``F(r)`` is tabulated on ``radius_grid`` for every cell at once; the
    largest feasible grid radius is refined by bisection against the next
    grid radius. Cells with no feasible radius, or feasible at the top of the
    grid, are clamped to the grid range and flagged in ``clamped``.
    """
    domain = V.domain
    if np.any(V.values < 0):
        raise ValidationError("potential must be nonnegative")
    if not np.any(V.values > 0):
        raise PotentialZeroError("potential is identically zero")
    radii = np.array(sorted(set(float(r) for r in radius_grid)))
    if radii.size == 0 or radii[0] <= 0:
        raise ValidationError("radius grid must be nonempty and positive")
    d = domain.dim
    vol = domain.cell_volume

    def profile(r) -> np.ndarray:
        return np.power(r, 2.0 - d) * vol * centered_ball_sums(domain, V.values, r)

    # index of the largest feasible grid radius per cell, -1 if none
    last = np.full(domain.size, -1)
    for k, r in enumerate(radii):
        last = np.where(profile(r) <= 1.0, k, last)

    out = np.empty(domain.size)
    low = last < 0
    high = last == radii.size - 1
    out[low] = radii[0]
    out[high] = radii[-1]
    inner = np.flatnonzero(~low & ~high)
    lo = radii[last[inner]]
    hi = radii[last[inner] + 1]
    radius_per_cell = np.zeros(domain.size)
    iterations = 0
    while inner.size and np.any(hi - lo > BISECT_RTOL * hi):
        mid = 0.5 * (lo + hi)
        radius_per_cell[inner] = mid
        sums, _ = centered_ball_sums_varying(domain, V.values, radius_per_cell, inner)
        ok = np.power(mid, 2.0 - d) * vol * sums <= 1.0
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
        iterations += 1
    out[inner] = lo
    clamped = low | high
    if clamped.any():
        logger.warning("rho_V clamped to the radius grid at %d of %d cells", int(clamped.sum()), domain.size)
    logger.debug("rho_V bisection: %d iterations", iterations)
    return RhoFunction(V.with_values(out), clamped)


def reverse_holder_constant(V: GridFunction, q: float, balls: Iterable[Ball]) -> float:
    """``sup_B (avg_B V^q)^(1/q) / avg_B V`` with clipped-measure averages."""
    if not q > 1:
        raise ValidationError(f"reverse Hölder exponent must exceed 1, got {q}")
    if np.any(V.values < 0):
        raise ValidationError("potential must be nonnegative")
    plain = PrefixSums.build(V)
    powered = PrefixSums.build(V.with_values(V.values**q))
    worst = 1.0
    for ball in balls:
        s1, count = ball_sum(plain, ball)
        sq, _ = ball_sum(powered, ball)
        if count == 0 or s1 <= 0:
            raise ZeroMassBallError(f"potential has no mass on {ball}")
        ratio = (sq / count) ** (1.0 / q) / (s1 / count)
        worst = max(worst, ratio)
    return worst


def critical_radius_profile(rho: RhoFunction) -> dict[str, float]:
    """Summary statistics of a radius function."""
    arr = rho.array
    report = {"min": float(arr.min()), "max": float(arr.max()), "mean": float(arr.mean())}
    if rho.clamped is not None:
        report["clamped_cells"] = float(np.count_nonzero(rho.clamped))
    return report