"""Greedy coverings by critical balls and by small balls inside a super-critical ball."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    CenterOutsideDomainError,
    GridTooCoarseError,
    HypothesisViolationError,
    ValidationError,
)
from .grid import Ball, Domain, _radius_sq, _sq_dist, ball_mask
from .parallel import ordered_map
from .rho import RhoConstants, RhoFunction, verify_critical

logger = logging.getLogger(__name__)

Provenance = Literal["critical-cover", "subcritical-cover", "sweep", "user"]
PROVENANCES = ("critical-cover", "subcritical-cover", "sweep", "user")

AUDIT_DILATIONS = (1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True, eq=False)
class BallFamily:
    domain: Domain
    balls: tuple[Ball, ...]
    provenance: Provenance = "user"

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        for ball in self.balls:
            if ball.dim != self.domain.dim:
                raise ValidationError(f"ball {ball} does not match dimension {self.domain.dim}")
            if any(abs(c) > self.domain.half_width for c in ball.center):
                raise CenterOutsideDomainError(f"ball center {ball.center} lies outside the domain")

    def __iter__(self) -> Iterator[Ball]:
        return iter(self.balls)

    def __len__(self) -> int:
        return len(self.balls)

    def __getitem__(self, i: int) -> Ball:
        return self.balls[i]

    def dilated(self, beta: float) -> BallFamily:
        return BallFamily(self.domain, tuple(b.dilate(beta) for b in self.balls), self.provenance)


@dataclass(frozen=True)
class OverlapReport:
    dilation: float
    max_overlap: int
    fitted_n1: float
    covered: bool
    overlaps: dict[float, int]


@dataclass(frozen=True)
class SubcriticalCovering:
    family: BallFamily
    delta0: float
    count_bound: float
    covered: bool


def critical_covering(rho: RhoFunction) -> BallFamily:
    """Pick the first uncovered cell, add ``B(x, rho(x))``, repeat until every cell is covered."""
    domain = rho.domain
    covered = np.zeros(domain.size, dtype=bool)
    balls = []
    start = 0
    while True:
        left = np.flatnonzero(~covered[start:])
        if left.size == 0:
            break
        cell = start + int(left[0])
        ball = Ball(tuple(domain.centers[cell]), float(rho.array[cell]))
        covered |= ball_mask(domain, ball)
        balls.append(ball)
        start = cell + 1
    logger.info("critical covering: %d balls for %d cells", len(balls), domain.size)
    return BallFamily(domain, tuple(balls), "critical-cover")


def overlap_counts(family: BallFamily, beta: float = 1.0) -> np.ndarray:
    """Number of balls ``beta * B`` containing each cell."""
    counts = np.zeros(family.domain.size, dtype=int)
    for mask in ordered_map(lambda b: ball_mask(family.domain, b.dilate(beta)), family):
        counts += mask
    return counts


def overlap_audit(family: BallFamily, beta: float = 1.0) -> OverlapReport:
    """Maximal overlap of the dilated family and the growth exponent over ``beta = 1, 2, 4, 8``."""
    if beta < 1:
        raise ValidationError(f"dilation must be >= 1, got {beta}")
    overlaps = {}
    for b in sorted(set(AUDIT_DILATIONS) | {float(beta)}):
        overlaps[b] = int(overlap_counts(family, b).max(initial=0))
    covered = bool(np.all(overlap_counts(family, 1.0) > 0))
    xs = np.log(AUDIT_DILATIONS)
    ys = np.log([max(overlaps[b], 1) for b in AUDIT_DILATIONS])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return OverlapReport(float(beta), overlaps[float(beta)], slope, covered, overlaps)


def localization_dilation(constants: RhoConstants) -> float:
    """``c * 2^(N0/(N0+1)) + 1``: every critical ball around a point of ``B_k`` lies in ``beta B_k``."""
    n0 = constants.n0
    return constants.c_rho * 2.0 ** (n0 / (n0 + 1.0)) + 1.0


def subcritical_count_bound(constants: RhoConstants, beta: float, dim: int) -> float:
    """Packing bound ``(9 c 3^N0)^d * beta^(d (N0 + 1))`` on the covering size."""
    c, n0 = constants.c_rho, constants.n0
    return (9.0 * c * 3.0**n0) ** dim * beta ** (dim * (n0 + 1.0))


def subcritical_covering(
    ball0: Ball,
    rho: RhoFunction,
    beta: float,
    constants: RhoConstants | None = None,
) -> SubcriticalCovering:
    """Cover a ball with ``rho(x0) < r <= beta rho(x0)`` by sub-critical balls of radius ``delta0 / 4``.

    ``delta0 = rho(x0) / (c (1 + 2r/rho(x0))^N0)`` bounds ``rho`` from below on
    ``2 B0``. Centers are chosen greedily in cell order, keeping those at
    distance at least ``delta0 / 4`` from every earlier choice, so the
    half-radius balls are disjoint and every cell of ``B0`` is covered.
    """
    if not beta > 1:
        raise ValidationError(f"beta must exceed 1, got {beta}")
    domain = rho.domain
    rho0 = rho.value_at(ball0.center)
    r = ball0.radius
    if not rho0 < r <= beta * rho0:
        raise HypothesisViolationError(
            f"radius {r} must lie in ({rho0}, {beta * rho0}] for rho(x0) = {rho0} and beta = {beta}"
        )
    if constants is None:
        constants = verify_critical(rho)
    delta0 = rho0 / (constants.c_rho * (1.0 + 2.0 * r / rho0) ** constants.n0)
    if delta0 / 8.0 < domain.spacing:
        raise GridTooCoarseError(
            f"delta0 / 8 = {delta0 / 8.0:.4g} is below the cell spacing {domain.spacing:.4g}; refine the grid"
        )

    cells = np.flatnonzero(ball_mask(domain, ball0))
    index = domain.index_grid[cells].astype(float)
    r2 = float(_radius_sq(domain, delta0 / 4.0))
    blocked = np.zeros(cells.size, dtype=bool)
    chosen = []
    for k in range(cells.size):
        if blocked[k]:
            continue
        chosen.append(int(cells[k]))
        blocked |= _sq_dist(index, index[k]) < r2
    balls = tuple(Ball(tuple(domain.centers[c]), delta0 / 4.0) for c in chosen)
    family = BallFamily(domain, balls, "subcritical-cover")

    inside = ball_mask(domain, ball0)
    reached = np.zeros(domain.size, dtype=bool)
    for ball in balls:
        reached |= ball_mask(domain, ball)
    covered = bool(np.all(reached[inside]))
    bound = subcritical_count_bound(constants, beta, domain.dim)
    logger.info("sub-critical covering: %d balls (bound %.3g), delta0 = %.4g", len(balls), bound, delta0)
    return SubcriticalCovering(family, delta0, bound, covered)


def min_center_separation(family: BallFamily) -> float:
    """Smallest distance between two centers of the family (``inf`` below two balls)."""
    if len(family) < 2:
        return math.inf
    pts = np.array([b.center for b in family])
    best = math.inf
    for i in range(len(pts) - 1):
        best = min(best, float(np.min(np.sqrt(np.sum((pts[i + 1 :] - pts[i]) ** 2, axis=1)))))
    return best


def family_header(dim: int) -> list[str]:
    return [f"x{a + 1}" for a in range(dim)] + ["radius", "tag"]


def ball_family_to_rows(family: BallFamily) -> list[list]:
    """One row per ball: center coordinates, radius, provenance tag."""
    return [[*ball.center, ball.radius, family.provenance] for ball in family]


def ball_family_from_rows(domain: Domain, rows: Iterable[Sequence]) -> BallFamily:
    balls, tags = [], set()
    for row in rows:
        if len(row) != domain.dim + 2:
            raise ValidationError(f"ball row needs {domain.dim + 2} fields, got {len(row)}")
        balls.append(Ball(tuple(float(v) for v in row[: domain.dim]), float(row[domain.dim])))
        tags.add(str(row[-1]))
    provenance = tags.pop() if len(tags) == 1 else "user"
    if provenance not in PROVENANCES:
        raise ValidationError(f"unknown ball family tag {provenance!r}")
    return BallFamily(domain, tuple(balls), provenance)
