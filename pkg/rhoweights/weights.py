"""Weight-class constants computed over finite ball sweeps.

For a ball ``B`` the class quotient is

.. math::
    q(B) = |B|^{-1} \\|w \\chi_B\\|_{p(\\cdot)} \\|w^{-1} \\chi_B\\|_{p'(\\cdot)}

with the discrete (clipped) measure. The three classes take its supremum over
all sweep balls, over sub-critical balls only, and over all balls after
dividing by ``(1 + r/rho(x))^theta``. Every constant is a lower bound for the
continuum supremum, reproducible from the sweep that produced it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cover import BallFamily
from .errors import (
    EmptySubsetError,
    EmptySweepError,
    NoSubcriticalBallsError,
    NonPositiveWeightError,
    QOutsideDomainError,
    ValidationError,
)
from .exponent import VariableExponent, conjugate
from .grid import Ball, Domain, GridFunction, ball_mask
from .maximal import RadiusGrid
from .norm import restricted_norm
from .parallel import ordered_map
from .rho import RhoConstants, RhoFunction, is_subcritical

logger = logging.getLogger(__name__)

DEFAULT_CAP_FACTOR = 10.0


class WeightConstant(NamedTuple):
    value: float
    witness: Ball


@dataclass(frozen=True)
class ThetaProfile:
    profile: list[tuple[float, float]]
    theta_star: float | None
    cap: float


@dataclass(frozen=True)
class ClassReport:
    ap_constant: float
    ap_local_constant: float
    theta_profile: list[tuple[float, float]]
    theta_star: float | None
    witness_balls: dict[str, Ball] = field(default_factory=dict)


def sweep_balls(domain: Domain, centers_stride: int, radii: RadiusGrid, interior_only: bool = True) -> BallFamily:
    """Balls centered on every ``stride``-th cell along each axis, one per grid radius."""
    stride = int(centers_stride)
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {centers_stride}")
    if stride > domain.cells_per_axis:
        raise EmptySweepError(f"stride {stride} exceeds the {domain.cells_per_axis} cells per axis")
    lattice = np.all(domain.index_grid % stride == 0, axis=1)
    balls = []
    for center in domain.centers[lattice]:
        for r in radii:
            ball = Ball(tuple(center), r)
            if interior_only and not domain.contains_ball(ball):
                continue
            balls.append(ball)
    if not balls:
        raise EmptySweepError("ball sweep is empty; lower the stride or the radii")
    return BallFamily(domain, tuple(balls), "sweep")


def _check_weight(w: GridFunction) -> None:
    if not np.all(w.values > 0):
        raise NonPositiveWeightError("weights must be positive at every cell")


def ball_quotients(w: GridFunction, p: VariableExponent, balls: Sequence[Ball]) -> np.ndarray:
    """The class quotient of every ball, in list order."""
    _check_weight(w)
    q = conjugate(p)
    w_inv = 1.0 / w.values
    vol = w.domain.cell_volume

    def quotient(ball: Ball) -> float:
        mask = ball_mask(w.domain, ball)
        measure = vol * np.count_nonzero(mask)
        if measure == 0:
            return 0.0
        return restricted_norm(w.values, p, mask) * restricted_norm(w_inv, q, mask) / measure

    return np.array(ordered_map(quotient, list(balls)))


def _sup(values: np.ndarray, balls: Sequence[Ball]) -> WeightConstant:
    # argmax keeps the first maximizer
    k = int(np.argmax(values))
    return WeightConstant(float(values[k]), balls[k])


def ap_constant(w: GridFunction, p: VariableExponent, balls: BallFamily) -> WeightConstant:
    return _sup(ball_quotients(w, p, balls), list(balls))


def _subcritical(rho: RhoFunction, balls: BallFamily) -> list[Ball]:
    kept = [b for b in balls if is_subcritical(rho, b)]
    if not kept:
        raise NoSubcriticalBallsError("no ball of the sweep is sub-critical for rho")
    return kept


def ap_local_constant(w: GridFunction, p: VariableExponent, rho: RhoFunction, balls: BallFamily) -> WeightConstant:
    """Supremum of the class quotient over the sub-critical balls of the sweep."""
    kept = _subcritical(rho, balls)
    return _sup(ball_quotients(w, p, kept), kept)


def _penalties(rho: RhoFunction, balls: Sequence[Ball]) -> np.ndarray:
    """``log(1 + r/rho(x))`` per ball."""
    return np.array([math.log1p(b.radius / rho.value_at(b.center)) for b in balls])


def _check_thetas(thetas: Sequence[float]) -> list[float]:
    thetas = [float(t) for t in thetas]
    if not thetas or any(t < 0 for t in thetas) or thetas != sorted(thetas):
        raise ValidationError("thetas must be nonnegative and ascending")
    return thetas


def _profile(quotients: np.ndarray, logs: np.ndarray, thetas: Sequence[float]) -> list[tuple[float, float]]:
    return [(float(t), float(np.max(quotients * np.exp(-t * logs)))) for t in thetas]


def ap_theta_profile(
    w: GridFunction,
    p: VariableExponent,
    rho: RhoFunction,
    thetas: Sequence[float],
    balls: BallFamily,
    refined_balls: BallFamily | None = None,
    cap: float | None = None,
) -> ThetaProfile:
    """Penalized suprema ``sup_B q(B) (1 + r/rho(x))^(-theta)`` for each listed theta.

    ``theta_star`` is the smallest listed theta whose supremum stays below
    ``cap`` on ``balls`` and on ``refined_balls`` when given. The cap defaults
    to ten times the sub-critical supremum on ``balls``.
    """
    thetas = _check_thetas(thetas)
    ball_list = list(balls)
    return _theta_profile(w, p, rho, thetas, ball_list, ball_quotients(w, p, ball_list), refined_balls, cap)


def _theta_profile(w, p, rho, thetas, ball_list, quotients, refined_balls, cap) -> ThetaProfile:
    profile = _profile(quotients, _penalties(rho, ball_list), thetas)
    if cap is None:
        sub = np.array([is_subcritical(rho, b) for b in ball_list])
        baseline = float(np.max(quotients[sub])) if sub.any() else 1.0
        cap = DEFAULT_CAP_FACTOR * baseline
    bounded = [s <= cap for _, s in profile]
    if refined_balls is not None:
        fine = list(refined_balls)
        fine_profile = _profile(ball_quotients(w, p, fine), _penalties(rho, fine), thetas)
        bounded = [a and s <= cap for a, (_, s) in zip(bounded, fine_profile)]
    theta_star = next((t for t, ok in zip(thetas, bounded) if ok), None)
    if theta_star is None:
        logger.info("theta profile: no listed theta keeps the supremum below %.4g", cap)
    return ThetaProfile(profile, theta_star, float(cap))


def subset_inequality_defect(w: GridFunction, p: VariableExponent, ball: Ball, subset: np.ndarray) -> float:
    """``||chi_B w|| |E| / (||chi_E w|| |B|)`` for a cell set ``E`` inside ``B``."""
    _check_weight(w)
    inside = ball_mask(w.domain, ball)
    subset = np.asarray(subset, dtype=bool)
    if not subset.any():
        raise EmptySubsetError("the subset E has no cells")
    if np.any(subset & ~inside):
        raise ValidationError("the subset E must lie inside the ball")
    e, b = np.count_nonzero(subset), np.count_nonzero(inside)
    return restricted_norm(w.values, p, inside) * e / (restricted_norm(w.values, p, subset) * b)


def beta_invariance_check(
    w: GridFunction, p: VariableExponent, rho: RhoFunction, beta: float, balls: BallFamily
) -> tuple[float, float]:
    """Local constants for ``rho`` and ``beta * rho`` over the same sweep."""
    if not beta >= 1:
        raise ValidationError(f"beta must be >= 1, got {beta}")
    first = ap_local_constant(w, p, rho, balls).value
    second = ap_local_constant(w, p, rho.scaled(beta), balls).value
    logger.debug("local constant %.6g at rho, %.6g at %g rho", first, second, beta)
    return first, second


def restriction_constant(
    w: GridFunction,
    p: VariableExponent,
    rho: RhoFunction,
    x0: Sequence[float],
    beta: float,
    balls: BallFamily,
) -> float:
    """Class constant of ``w chi_Q`` on ``Q = B(x0, beta rho(x0))``.

    Only balls meeting ``Q`` count. Both norms run over the cells of
    ``B`` inside ``Q``; the measure is the full discrete ``|B|``.
    """
    if not beta > 1:
        raise ValidationError(f"beta must exceed 1, got {beta}")
    _check_weight(w)
    q_ball = Ball(tuple(x0), beta * rho.value_at(x0))
    if not w.domain.contains_ball(q_ball):
        raise QOutsideDomainError(f"{q_ball} does not fit in the domain")
    q_mask = ball_mask(w.domain, q_ball)
    q = conjugate(p)
    w_inv = 1.0 / w.values
    vol = w.domain.cell_volume

    def quotient(ball: Ball) -> float:
        mask = ball_mask(w.domain, ball)
        both = mask & q_mask
        if not both.any():
            return 0.0
        measure = vol * np.count_nonzero(mask)
        return restricted_norm(w.values, p, both) * restricted_norm(w_inv, q, both) / measure

    values = ordered_map(quotient, list(balls))
    if not any(v > 0 for v in values):
        raise EmptySweepError("no sweep ball meets Q")
    return float(max(values))


def class_report(
    w: GridFunction,
    p: VariableExponent,
    rho: RhoFunction,
    thetas: Sequence[float],
    balls: BallFamily,
    refined_balls: BallFamily | None = None,
    cap: float | None = None,
) -> ClassReport:
    """All three class constants over one sweep."""
    ball_list = list(balls)
    quotients = ball_quotients(w, p, ball_list)
    glob = _sup(quotients, ball_list)
    sub = [i for i, b in enumerate(ball_list) if is_subcritical(rho, b)]
    if not sub:
        raise NoSubcriticalBallsError("no ball of the sweep is sub-critical for rho")
    local = _sup(quotients[sub], [ball_list[i] for i in sub])
    thetas = _check_thetas(thetas)
    theta = _theta_profile(w, p, rho, thetas, ball_list, quotients, refined_balls, cap)
    witnesses = {"ap": glob.witness, "ap_local": local.witness}
    return ClassReport(glob.value, local.value, theta.profile, theta.theta_star, witnesses)


def local_doubling_ratio(w: GridFunction, p: VariableExponent, ball: Ball) -> float:
    """``||w chi_B|| / ||w chi_{B/2}||`` with ``B/2`` the concentric half-radius ball."""
    _check_weight(w)
    outer = ball_mask(w.domain, ball)
    inner = ball_mask(w.domain, ball.dilate(0.5))
    if not inner.any():
        raise EmptySubsetError(f"half of {ball} contains no cell")
    return restricted_norm(w.values, p, outer) / restricted_norm(w.values, p, inner)


def restriction_gamma(constants: RhoConstants, beta: float) -> float:
    """``c^2 beta (1+beta)^N0 (1 + c beta (1+beta)^N0)^N0``.

    Balls meeting ``B(x0, beta rho(x0))`` with measure below it are
    sub-critical for ``gamma * rho``.
    """
    c, n0 = constants.c_rho, constants.n0
    grow = (1.0 + beta) ** n0
    return c * c * beta * grow * (1.0 + c * beta * grow) ** n0
