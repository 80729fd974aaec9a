"""Modular, Luxemburg norm, weighted norms and the local-to-global transfer operator.

The weight acts as a multiplier: ``||f||_{p(.),w} = ||f w||_{p(.)}``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    EmptyBallError,
    NonPositiveWeightError,
    NormOverflowError,
    ValidationError,
    ZeroFunctionError,
    ZeroNormError,
)
from .exponent import VariableExponent, conjugate
from .grid import Ball, GridFunction, ball_mask
from .parallel import ordered_map

if TYPE_CHECKING:
    from .cover import BallFamily

logger = logging.getLogger(__name__)

REL_TOL = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class NormResult:
    value: float
    iterations: int
    bracket: tuple[float, float]


def _modular(a: np.ndarray, p: np.ndarray, cell_volume: float, lam: float) -> float:
    with np.errstate(over="ignore"):
        return float(cell_volume * np.sum((a / lam) ** p))


def _luxemburg(a: np.ndarray, p: np.ndarray, cell_volume: float) -> NormResult:
    """Bisection for ``inf{lam : modular(a / lam) <= 1}`` on raw arrays (``a >= 0``).

    The search runs on ``a / max(a)`` and the result is scaled back, then
    nudged up by ulps until the unscaled modular is at most 1.
    """
    scale = float(np.max(a)) if a.size else 0.0
    if not scale > 0:
        return NormResult(0.0, 0, (0.0, 0.0))
    raw, a = a, a / scale
    p_min = float(np.min(p))
    lam = float((cell_volume * np.sum(a**p_min)) ** (1.0 / p_min))
    m = _modular(a, p, cell_volume, lam) if math.isfinite(lam) and lam > 0 else math.inf
    if not math.isfinite(m):
        raise NormOverflowError("modular is not finite at the initial bracket")

    iterations = 0
    if m > 1:
        lo, hi = lam, 2.0 * lam
        while _modular(a, p, cell_volume, hi) > 1:
            lo, hi = hi, 2.0 * hi
            iterations += 1
    else:
        lo, hi = 0.5 * lam, lam
        while _modular(a, p, cell_volume, lo) <= 1:
            lo, hi = 0.5 * lo, lo
            iterations += 1
    while hi - lo > REL_TOL * hi and iterations < MAX_ITER:
        mid = 0.5 * (lo + hi)
        if _modular(a, p, cell_volume, mid) <= 1:
            hi = mid
        else:
            lo = mid
        iterations += 1
    # the upper end keeps modular(f / value) <= 1
    value = hi * scale
    if not math.isfinite(value):
        raise NormOverflowError(f"norm exceeds the float range (scale {scale:.3g})")
    while _modular(raw, p, cell_volume, value) > 1:
        value = math.nextafter(value, math.inf)
    return NormResult(value, iterations, (lo * scale, value))


def modular(f: GridFunction, p: VariableExponent, lam: float) -> float:
    """``h**dim * sum((|f| / lam) ** p)``."""
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    return _modular(np.abs(f.values), p.array, f.domain.cell_volume, float(lam))


def luxemburg_norm(f: GridFunction, p: VariableExponent) -> NormResult:
    return _luxemburg(np.abs(f.values), p.array, f.domain.cell_volume)


def _check_weight(w: GridFunction) -> None:
    bad = np.flatnonzero(~(w.values > 0))
    if bad.size:
        raise NonPositiveWeightError(f"weight must be positive, w = {w.values[bad[0]]} at cell {bad[0]}")


def weighted_norm(f: GridFunction, p: VariableExponent, w: GridFunction) -> float:
    _check_weight(w)
    return luxemburg_norm(f * w, p).value


def restricted_norm(values: np.ndarray, p: VariableExponent, mask: np.ndarray) -> float:
    """``||values * chi_mask||_{p(.)}`` computed on the masked cells only."""
    return _luxemburg(np.abs(values[mask]), p.array[mask], p.domain.cell_volume).value


def holder_defect(f: GridFunction, g: GridFunction, p: VariableExponent) -> float:
    """``int |f g| / (||f||_{p(.)} ||g||_{p'(.)})``, at most 2 by Hölder's inequality."""
    q = conjugate(p)
    nf = luxemburg_norm(f, p).value
    ng = luxemburg_norm(g, q).value
    if nf == 0 or ng == 0:
        raise ZeroNormError("Hölder defect needs two functions of nonzero norm")
    pairing = f.domain.cell_volume * float(np.sum(np.abs(f.values * g.values)))
    return pairing / (nf * ng)


def canonical_dual_witness(f: GridFunction, p: VariableExponent) -> GridFunction:
    """``g = (|f| / ||f||)^(p - 1)`` scaled to unit ``p'``-norm."""
    norm = luxemburg_norm(f, p).value
    if norm == 0:
        raise ZeroFunctionError("the zero function has no dual witness")
    q = conjugate(p)
    g = f.with_values((np.abs(f.values) / norm) ** (p.array - 1.0))
    return g * (1.0 / luxemburg_norm(g, q).value)


def duality_lower_witness(f: GridFunction, p: VariableExponent, trials: int = 16, seed: int = 0) -> float:
    """Best pairing ``int |f g|`` over unit-ball candidates ``g`` in ``L^{p'(.)}``.

    Candidates are the canonical witness plus ``trials`` seeded random
    profiles; the result is a lower bound for the dual-norm supremum.
    """
    if not np.any(f.values != 0):
        raise ZeroFunctionError("duality witness of the zero function")
    q = conjugate(p)
    vol = f.domain.cell_volume
    a = np.abs(f.values)
    canonical = canonical_dual_witness(f, p)
    best = vol * float(np.sum(a * canonical.values))
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        raw = rng.random(f.domain.size) * a ** rng.uniform(0.0, 2.0)
        if not np.any(raw > 0):
            continue
        scale = _luxemburg(raw, q.array, vol).value
        best = max(best, vol * float(np.sum(a * raw)) / scale)
    return best


def _family_masks(domain, family: Iterable[Ball]) -> list[np.ndarray]:
    masks = []
    for ball in family:
        mask = ball_mask(domain, ball)
        if not mask.any():
            raise EmptyBallError(f"no cell center inside {ball}")
        masks.append(mask)
    return masks


def transfer_function(f: GridFunction, p: VariableExponent, w: GridFunction, family: BallFamily) -> GridFunction:
    """The step function ``sum_B chi_B ||f chi_B||_{p,w} / ||chi_B||_{p,w}``."""
    _check_weight(w)
    masks = _family_masks(f.domain, family)
    fw = f.values * w.values

    def quotient(mask: np.ndarray) -> float:
        return restricted_norm(fw, p, mask) / restricted_norm(w.values, p, mask)

    step = np.zeros(f.domain.size)
    for mask, q in zip(masks, ordered_map(quotient, masks)):
        step += np.where(mask, q, 0.0)
    return f.with_values(step)


def transfer_norm(f: GridFunction, p: VariableExponent, w: GridFunction, family: BallFamily) -> float:
    """Weighted norm of :func:`transfer_function`."""
    return weighted_norm(transfer_function(f, p, w, family), p, w)


def local_global_ratio(f: GridFunction, p: VariableExponent, w: GridFunction, family: BallFamily) -> float:
    """``||sum_B chi_B f||_{p,w} / transfer_norm``; bounded above and below for N-finite families."""
    masks = _family_masks(f.domain, family)
    overlap = np.sum(masks, axis=0).astype(float)
    denom = transfer_norm(f, p, w, family)
    if denom == 0:
        raise ZeroNormError("transfer norm vanishes")
    return weighted_norm(f * overlap, p, w) / denom


def measure_equivalence_constant(p: VariableExponent, family: BallFamily) -> tuple[float, np.ndarray]:
    """Ratios ``|B| / (||chi_B||_{p(.)} ||chi_B||_{p'(.)})`` and ``K = max(max, 1/min)``."""
    q = conjugate(p)
    ones = np.ones(p.domain.size)
    vol = p.domain.cell_volume

    def ratio(mask: np.ndarray) -> float:
        measure = vol * np.count_nonzero(mask)
        return measure / (restricted_norm(ones, p, mask) * restricted_norm(ones, q, mask))

    ratios = np.array(ordered_map(ratio, _family_masks(p.domain, family)))
    return float(max(ratios.max(), 1.0 / ratios.min())), ratios


def pairing_ratio(f: GridFunction, g: GridFunction, p: VariableExponent, family: BallFamily) -> float:
    """``sum_B ||chi_B f||_{p(.)} ||chi_B g||_{p'(.)} / (||f||_{p(.)} ||g||_{p'(.)})``."""
    q = conjugate(p)
    nf, ng = luxemburg_norm(f, p).value, luxemburg_norm(g, q).value
    if nf == 0 or ng == 0:
        raise ZeroNormError("pairing ratio needs two functions of nonzero norm")

    def term(mask: np.ndarray) -> float:
        return restricted_norm(f.values, p, mask) * restricted_norm(g.values, q, mask)

    return math.fsum(ordered_map(term, _family_masks(f.domain, family))) / (nf * ng)
