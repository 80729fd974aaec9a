"""Boundedness experiments for the maximal operators and the class-constant checks behind them.

An operator is judged bounded on ``L^{p(.)}(w)`` when the ratios
``||(T f) w|| / ||f w||`` over a test family stay flat along a ladder of
grids, and unbounded when they grow along it.
"""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .cover import critical_covering, localization_dilation
from .errors import ValidationError, ZeroNormError
from .exponent import VariableExponent, conjugate, make_exponent
from .expr import sample_text
from .grid import Ball, Domain, GridFunction, ball_mask, build_domain
from .maximal import RadiusGrid, hl_maximal, local_maximal, penalized_average, theta_maximal
from .norm import canonical_dual_witness, restricted_norm, weighted_norm
from .parallel import ordered_map
from .rho import (
    RhoConstants,
    RhoFunction,
    is_subcritical,
    reverse_holder_constant,
    rho_from_potential,
    verify_critical,
)
from .weights import ClassReport, class_report, sweep_balls

logger = logging.getLogger(__name__)

OperatorKind = Literal["M", "Mloc", "Mtheta"]
Trend = Literal["stable", "growing", "mixed"]

_TAG = re.compile(r"^\s*(M|Mloc|Mtheta)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*$")

STABLE_TOLERANCE = 0.15


@dataclass(frozen=True)
class OperatorSpec:
    kind: OperatorKind
    theta: float = 0.0

    @property
    def tag(self) -> str:
        return f"Mtheta({self.theta:g})" if self.kind == "Mtheta" else self.kind


def parse_operator(tag: str | OperatorSpec) -> OperatorSpec:
    """``"M"``, ``"Mloc"`` or ``"Mtheta(<theta>)"``."""
    if isinstance(tag, OperatorSpec):
        return tag
    m = _TAG.match(tag)
    if m is None:
        raise ValidationError(f"unknown operator {tag!r}; use M, Mloc or Mtheta(<theta>)")
    kind, theta = m.group(1), m.group(2)
    if kind == "Mtheta":
        if theta is None:
            raise ValidationError("Mtheta needs a penalty exponent, e.g. Mtheta(2)")
        value = float(theta)
        if value < 0:
            raise ValidationError(f"theta must be >= 0, got {value}")
        return OperatorSpec("Mtheta", value)
    if theta is not None:
        raise ValidationError(f"{kind} takes no parameter")
    return OperatorSpec(kind)


def apply_operator(op: str | OperatorSpec, f: GridFunction, rho: RhoFunction, radii: RadiusGrid) -> GridFunction:
    """Evaluate an operator; ``M`` also sees the endpoint radii ``rho(x)`` so the three compare."""
    op = parse_operator(op)
    if op.kind == "M":
        return hl_maximal(f, radii, rho)
    if op.kind == "Mloc":
        return local_maximal(f, rho, radii)
    return theta_maximal(f, rho, op.theta, radii)


@dataclass(frozen=True)
class ExperimentReport:
    operator_tag: str
    ratios: list[tuple[str, float]]
    max_ratio: float
    skipped: int = 0
    class_constants: ClassReport | None = None
    refinement_trend: list[float] = field(default_factory=list)


def default_test_functions(
    domain: Domain,
    w: GridFunction,
    ball_radii: Sequence[float] | None = None,
    max_balls: int = 4,
    random_fields: int = 2,
    seed: int = 0,
) -> list[tuple[str, GridFunction]]:
    """Ball indicators, necessity witnesses ``w^-1 chi_B``, point masses and seeded random fields."""
    if ball_radii is None:
        ball_radii = (domain.half_width / 8.0, domain.half_width / 4.0)
    stride = max(1, domain.cells_per_axis // 4)
    radii = RadiusGrid.from_values(r for r in ball_radii if r >= domain.spacing)
    family = list(sweep_balls(domain, stride, radii, interior_only=True))
    pick = np.unique(np.linspace(0, len(family) - 1, min(max_balls, len(family))).round().astype(int))
    out: list[tuple[str, GridFunction]] = []
    for k in pick:
        mask = ball_mask(domain, family[k])
        out.append((f"ball[{k}]", GridFunction.indicator(domain, mask)))
        out.append((f"witness[{k}]", GridFunction.from_values(domain, np.where(mask, 1.0 / w.values, 0.0))))
    n = domain.cells_per_axis
    for label, pos in (("center", n // 2), ("quarter", n // 4)):
        cell = int(np.ravel_multi_index((pos,) * domain.dim, domain.shape))
        spike = np.zeros(domain.size)
        spike[cell] = 1.0
        out.append((f"point[{label}]", GridFunction.from_values(domain, spike)))
    rng = np.random.default_rng(seed)
    for k in range(random_fields):
        out.append((f"random[{k}]", GridFunction.from_values(domain, rng.random(domain.size))))
    return out


def boundedness_ratios(
    op: str | OperatorSpec,
    functions: Sequence[tuple[str, GridFunction]],
    p: VariableExponent,
    w: GridFunction,
    rho: RhoFunction,
    radii: RadiusGrid,
    *,
    class_constants: ClassReport | None = None,
    ladder: LadderSpec | None = None,
) -> ExperimentReport:
    """``||(T f) w||_{p(.)} / ||f w||_{p(.)}`` for every test function; zero-norm inputs are skipped.

    ``class_constants`` is carried into the report as computed by the caller;
    with a ``ladder`` the report also holds the operator's trend along it.
    """
    op = parse_operator(op)
    if not functions:
        raise ValidationError("test family is empty")

    def ratio(item: tuple[str, GridFunction]) -> float | None:
        _, f = item
        base = weighted_norm(f, p, w)
        if base == 0:
            return None
        return weighted_norm(apply_operator(op, f, rho, radii), p, w) / base

    ratios, skipped = [], 0
    for (name, _), value in zip(functions, ordered_map(ratio, list(functions))):
        if value is None:
            skipped += 1
            continue
        ratios.append((name, value))
    if skipped:
        logger.warning("%d zero-norm test functions skipped", skipped)
    if not ratios:
        raise ZeroNormError("every test function has zero norm")
    trend = ladder_trend(op, ladder) if ladder is not None else []
    return ExperimentReport(op.tag, ratios, max(r for _, r in ratios), skipped, class_constants, trend)


@dataclass(frozen=True)
class NecessityReport:
    operator_tag: str
    eta: float
    max_quotient: float
    operator_norm: float
    constant: float
    worst_ball_slack: float

    @property
    def holds(self) -> bool:
        return self.max_quotient <= self.constant * self.operator_norm * (1 + 1e-9)


def necessity_bound(
    op: str | OperatorSpec,
    p: VariableExponent,
    w: GridFunction,
    rho: RhoFunction,
    eta: float,
    balls: Sequence[Ball],
    radii: RadiusGrid,
    constants: RhoConstants | None = None,
) -> NecessityReport:
    """Penalized class quotients against the operator ratios on their witnesses.

    For each ball the witness is ``f_B = g w^-1`` with ``g`` the canonical
    dual witness of ``w^-1 chi_B``, so ``||f_B w|| = 1`` and its average over
    ``B`` realizes the dual norm. The domination of the penalized average by
    the operator then bounds ``(1 + r/rho(x0))^(-eta) q(B)`` by
    ``2^(d+eta+1) c^theta`` times the measured operator ratio. ``Mloc`` and
    ``M`` use ``eta = 0`` and the constant ``2^(d+1)``; ``Mloc`` only sees
    sub-critical balls.
    """
    op = parse_operator(op)
    domain = w.domain
    if op.kind == "Mtheta":
        if constants is None:
            constants = verify_critical(rho)
        constant = 2.0 ** (domain.dim + eta + 1.0) * constants.c_rho**op.theta
    else:
        eta = 0.0
        constant = 2.0 ** (domain.dim + 1.0)
    ball_list = [b for b in balls if op.kind != "Mloc" or is_subcritical(rho, b)]
    if not ball_list:
        raise ValidationError("no admissible balls for the necessity check")
    q = conjugate(p)
    w_inv = w.reciprocal()
    vol = domain.cell_volume

    def one(ball: Ball) -> tuple[float, float]:
        mask = ball_mask(domain, ball)
        measure = vol * np.count_nonzero(mask)
        h = w_inv.masked(mask)
        quotient = restricted_norm(w.values, p, mask) * restricted_norm(w_inv.values, q, mask) / measure
        psi = math.exp(-eta * math.log1p(ball.radius / rho.value_at(ball.center)))
        g = canonical_dual_witness(h, q)
        f_b = g * w_inv
        ratio = weighted_norm(apply_operator(op, f_b, rho, radii), p, w) / weighted_norm(f_b, p, w)
        return psi * quotient, ratio

    results = ordered_map(one, ball_list)
    max_quotient = max(r[0] for r in results)
    operator_norm = max(r[1] for r in results)
    slack = max(qv / (constant * rv) for qv, rv in results)
    logger.info("necessity %s: quotient %.4g vs %.4g x %.4g", op.tag, max_quotient, constant, operator_norm)
    return NecessityReport(op.tag, float(eta), max_quotient, operator_norm, constant, slack)


def localization_check(f: GridFunction, rho: RhoFunction, radii: RadiusGrid, constants: RhoConstants) -> float:
    """``max_k max_{x in B_k} (M^loc f(x) - M(f chi_{beta B_k})(x))`` over the critical covering.

    Non-positive when ``beta`` is the localization dilation: local averages
    around points of ``B_k`` only see ``beta B_k``.
    """
    beta = localization_dilation(constants)
    mloc = local_maximal(f, rho, radii).values
    worst = -math.inf
    for ball in critical_covering(rho):
        inside = ball_mask(f.domain, ball)
        localized = hl_maximal(f.masked(ball_mask(f.domain, ball.dilate(beta))), radii, rho).values
        worst = max(worst, float(np.max(mloc[inside] - localized[inside])))
    return worst


def domination_check(
    f: GridFunction,
    ball: Ball,
    theta: float,
    rho: RhoFunction,
    constants: RhoConstants,
    radii: RadiusGrid,
) -> float:
    """``max_x (A^eta_B f(x) - 2^(d+eta) c^theta M^theta f(x))`` with ``eta = theta (N0 + 1)``.

    The radius grid is augmented with ``2r`` so the ball ``B(x, 2r)`` that
    swallows ``B`` is available at every ``x`` in ``B``.
    """
    eta = theta * (constants.n0 + 1.0)
    averaged = penalized_average(f, ball, eta, rho).values
    grid = radii.with_radii([2.0 * ball.radius])
    bound = 2.0 ** (f.domain.dim + eta) * constants.c_rho**theta * theta_maximal(f, rho, theta, grid).values
    return float(np.max(averaged - bound))


def theta_threshold(sigma: float, n1: float) -> float:
    """Penalty exponent ``sigma + 2 N1`` above which the outer maximal part sums over dyadic shells."""
    return float(sigma) + 2.0 * float(n1)


@dataclass(frozen=True)
class LadderSpec:
    """Expressions and grid parameters for a ladder of experiments.

    ``kind="refine"`` keeps the box and multiplies the cells per axis;
    ``kind="domain"`` multiplies the box and the cells together so the
    spacing stays fixed.
    """

    dim: int
    half_width: float
    cells_per_axis: int
    p: str
    w: str
    rho: str
    kind: Literal["refine", "domain"] = "refine"
    steps: int = 3
    factor: int = 2
    per_octave: int = 4
    seed: int = 0

    def domains(self) -> list[Domain]:
        out = []
        for k in range(self.steps):
            scale = self.factor**k
            half = self.half_width * (scale if self.kind == "domain" else 1)
            out.append(build_domain(self.dim, half, self.cells_per_axis * scale))
        return out


def ladder_trend(op: str | OperatorSpec, spec: LadderSpec) -> list[float]:
    """``max_ratio`` of the operator at each rung of the ladder.

    Rungs use the ball, witness and point-mass test functions only; seeded
    random fields differ from rung to rung and are left out.
    """
    op = parse_operator(op)
    trend = []
    for domain in spec.domains():
        p = make_exponent(sample_text(spec.p, domain))
        w = sample_text(spec.w, domain)
        rho = RhoFunction(sample_text(spec.rho, domain))
        radii = RadiusGrid.log_spaced(domain, spec.per_octave)
        family = default_test_functions(domain, w, ball_radii=(0.5, 1.0), random_fields=0, seed=spec.seed)
        report = boundedness_ratios(op, family, p, w, rho, radii)
        logger.info("%s on n=%d, L=%g: max ratio %.6g", op.tag, domain.cells_per_axis, domain.half_width, report.max_ratio)
        trend.append(report.max_ratio)
    return trend


def classify_trend(values: Sequence[float], tolerance: float = STABLE_TOLERANCE) -> Trend:
    """``stable`` within ``tolerance`` of the smallest value, ``growing`` when strictly increasing past it."""
    values = [float(v) for v in values]
    if not values:
        raise ValidationError("empty trend")
    lo, hi = min(values), max(values)
    if hi <= lo * (1.0 + tolerance):
        return "stable"
    if all(b > a for a, b in zip(values, values[1:])):
        return "growing"
    return "mixed"


@dataclass(frozen=True)
class SchrodingerReport:
    reverse_holder: float
    rho_min: float
    rho_max: float
    clamped_cells: int
    constants: RhoConstants
    local: ExperimentReport
    penalized: ExperimentReport


def schrodinger_experiment(
    V: GridFunction,
    q: float,
    p: VariableExponent,
    w: GridFunction,
    radii: RadiusGrid,
    theta: float = 2.0,
    sweep_stride: int | None = None,
    seed: int = 0,
) -> SchrodingerReport:
    """Reverse Hölder constant, ``rho_V``, its fitted constants and the two operator experiments."""
    domain = V.domain
    stride = sweep_stride or max(1, domain.cells_per_axis // 4)
    rh_radii = RadiusGrid.from_values(r for r in radii if r <= domain.half_width / 2)
    balls = sweep_balls(domain, stride, rh_radii, interior_only=True)
    rh = reverse_holder_constant(V, q, balls)
    rho = rho_from_potential(V, radii)
    constants = verify_critical(rho, seed=seed)
    family = default_test_functions(domain, w, seed=seed)
    thetas = (0.0, theta) if theta > 0 else (0.0,)
    classes = class_report(w, p, rho, thetas, balls)
    local = boundedness_ratios("Mloc", family, p, w, rho, radii, class_constants=classes)
    penalized = boundedness_ratios(
        OperatorSpec("Mtheta", theta), family, p, w, rho, radii, class_constants=classes
    )
    clamped = int(np.count_nonzero(rho.clamped)) if rho.clamped is not None else 0
    return SchrodingerReport(
        rh, float(rho.array.min()), float(rho.array.max()), clamped, constants, local, penalized
    )
