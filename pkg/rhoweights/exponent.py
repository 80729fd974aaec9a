"""Variable exponents, conjugate exponents and log-Hölder diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConjugateOfOneError, ExponentRangeError
from .grid import GridFunction

logger = logging.getLogger(__name__)

# all-pairs scan up to this many cells, seeded subsample above it
ALL_PAIRS_LIMIT = 4096
SUBSAMPLE_PAIRS = 1_000_000
LOG_HOLDER_SEED = 20240917


@dataclass(frozen=True, eq=False)
class VariableExponent:
    values: GridFunction
    p_minus: float
    p_plus: float

    @property
    def domain(self):
        return self.values.domain

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus


def make_exponent(values: GridFunction) -> VariableExponent:
    """Wrap sampled exponent values, caching ``p_minus`` and ``p_plus``."""
    arr = values.values
    bad = np.flatnonzero(arr < 1)
    if bad.size:
        raise ExponentRangeError(f"exponent value {arr[bad[0]]} < 1 at cell {bad[0]}")
    return VariableExponent(values, float(arr.min()), float(arr.max()))


def constant_exponent(domain, value: float) -> VariableExponent:
    return make_exponent(GridFunction.constant(domain, value))


def conjugate(p: VariableExponent) -> VariableExponent:
    """Pointwise ``p' = p / (p - 1)``; cells with ``p = 1`` have no finite conjugate."""
    ones = np.flatnonzero(p.array == 1)
    if ones.size:
        raise ConjugateOfOneError(f"p = 1 at cell {ones[0]}: the conjugate exponent is infinite there")
    return make_exponent(p.values.with_values(p.array / (p.array - 1.0)))


@dataclass(frozen=True)
class LogHolderReport:
    c_local: float
    c_infty: float
    p_infty: float
    max_violation_pair: tuple[int, int]
    pairs_checked: int


def _outer_shell(domain) -> np.ndarray:
    idx = domain.index_grid
    return np.any((idx == 0) | (idx == domain.cells_per_axis - 1), axis=1)


def _pairs(size: int, rng: np.random.Generator | None = None):
    """Yield chunks of pair index arrays ``(i, j)`` with ``i != j``."""
    if size <= ALL_PAIRS_LIMIT:
        for start in range(0, size, 256):
            i = np.arange(start, min(start + 256, size))
            ii, jj = np.meshgrid(i, np.arange(size), indexing="ij")
            keep = jj > ii
            yield ii[keep], jj[keep]
        return
    i = rng.integers(0, size, SUBSAMPLE_PAIRS)
    j = (i + 1 + rng.integers(0, size - 1, SUBSAMPLE_PAIRS)) % size
    yield i, j


def log_holder_constants(p: VariableExponent, p_infty_guess: float | None = None) -> LogHolderReport:
    """Smallest constants making both log-Hölder conditions hold on the sampled pairs.

    ``c_local = max |p(x) - p(y)| log(e + 1/|x - y|)`` over cell pairs and
    ``c_infty = max |p(x) - p_infty| log(e + |x|)`` over cells, with
    ``p_infty`` estimated as the mean over the outermost cell shell unless
    supplied.
    """
    domain = p.domain
    vals = p.array
    centers = domain.centers
    if p_infty_guess is None:
        p_infty = float(np.mean(vals[_outer_shell(domain)]))
    else:
        p_infty = float(p_infty_guess)

    rng = None
    if domain.size > ALL_PAIRS_LIMIT:
        logger.info("log-Hölder scan: subsampling %d pairs (seed %d)", SUBSAMPLE_PAIRS, LOG_HOLDER_SEED)
        rng = np.random.default_rng(LOG_HOLDER_SEED)

    c_local, worst, checked = 0.0, (0, 0), 0
    for i, j in _pairs(domain.size, rng):
        dist = np.sqrt(np.sum((centers[i] - centers[j]) ** 2, axis=1))
        score = np.abs(vals[i] - vals[j]) * np.log(math.e + 1.0 / dist)
        checked += i.size
        k = int(np.argmax(score))
        if score[k] > c_local:
            c_local, worst = float(score[k]), (int(i[k]), int(j[k]))

    radius = np.sqrt(np.sum(centers**2, axis=1))
    c_infty = float(np.max(np.abs(vals - p_infty) * np.log(math.e + radius)))
    return LogHolderReport(c_local, c_infty, p_infty, worst, checked)
