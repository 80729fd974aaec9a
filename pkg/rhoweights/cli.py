"""Command line front end: ``rhoweights <subcommand> --config run.ini [--threads N] [--out DIR]``.

Exit status is 0 on success, 2 for invalid input and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, load_config
from .cover import (
    ball_family_to_rows,
    critical_covering,
    family_header,
    localization_dilation,
    overlap_audit,
    subcritical_covering,
)
from .errors import NumericalError, ValidationError
from .exponent import log_holder_constants, make_exponent
from .expr import sample_text
from .grid import Ball, Domain, GridFunction, build_domain
from .maximal import RadiusGrid, hl_maximal, local_maximal, theta_maximal
from .norm import duality_lower_witness, luxemburg_norm, measure_equivalence_constant, weighted_norm
from .parallel import set_thread_cap
from .reports import provenance, write_grid_csv, write_json_report, write_rows_csv
from .rho import RhoFunction, critical_radius_profile, is_subcritical, rho_from_potential, verify_critical
from .verify import (
    LadderSpec,
    boundedness_ratios,
    classify_trend,
    default_test_functions,
    necessity_bound,
    parse_operator,
    schrodinger_experiment,
)
from .weights import beta_invariance_check, class_report, sweep_balls

logger = logging.getLogger(__name__)

NECESSITY_BALLS = 8


@dataclass
class Outcome:
    summary: dict
    grids: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)


@dataclass(frozen=True)
class Setup:
    config: RunConfig
    domain: Domain
    radii: RadiusGrid

    def sample(self, key: str, default: str | None = None) -> GridFunction:
        return sample_text(self.config.expression(key, default), self.domain)

    def exponent(self):
        return make_exponent(self.sample("p", "2"))

    def rho(self) -> RhoFunction:
        return RhoFunction(self.sample("rho", "1"))

    def sweep(self, refined: bool = False):
        stride = self.config.sweep.stride
        radii = self.radii
        if refined:
            stride, radii = max(1, stride // 2), radii.refined()
        return sweep_balls(self.domain, stride, radii, self.config.sweep.interior_only)


def _setup(config: RunConfig) -> Setup:
    domain = build_domain(config.dim, config.half_width, config.cells_per_axis)
    spec = config.radii
    return Setup(config, domain, RadiusGrid.log_spaced(domain, spec.per_octave, spec.r_min, spec.r_max))


def run_norm(s: Setup) -> Outcome:
    f, p, w = s.sample("f"), s.exponent(), s.sample("w", "1")
    result = luxemburg_norm(f, p)
    holder = log_holder_constants(p)
    summary = {
        "norm": result.value,
        "iterations": result.iterations,
        "weighted_norm": weighted_norm(f, p, w),
        "p_minus": p.p_minus,
        "p_plus": p.p_plus,
        "log_holder": holder,
    }
    if p.p_minus > 1:
        k, _ = measure_equivalence_constant(p, s.sweep())
        summary["measure_equivalence_constant"] = k
        if result.value > 0:
            summary["duality_witness"] = duality_lower_witness(f, p, seed=s.config.run.seed)
    return Outcome(summary, grids={"grid.csv": {"f": f.values, "p": p.array, "w": w.values}})


def run_maximal(s: Setup) -> Outcome:
    f, rho = s.sample("f"), s.rho()
    columns = {
        "f": f.values,
        "M": hl_maximal(f, s.radii, rho).values,
        "Mloc": local_maximal(f, rho, s.radii).values,
    }
    for theta in s.config.run.thetas:
        columns[f"Mtheta({theta:g})"] = theta_maximal(f, rho, theta, s.radii).values
    summary = {name: float(np.max(col)) for name, col in columns.items()}
    summary["radii"] = list(s.radii.radii)
    return Outcome({"max": summary}, grids={"maximal.csv": columns})


def run_rho(s: Setup) -> Outcome:
    run = s.config.run
    if "V" in s.config.expressions:
        rho = rho_from_potential(s.sample("V"), s.radii)
    else:
        rho = s.rho()
    constants = verify_critical(rho, run.n0_grid, run.pair_budget, run.seed)
    columns = {"rho": rho.array}
    if rho.clamped is not None:
        columns["clamped"] = rho.clamped.astype(float)
    return Outcome({"constants": constants, "profile": critical_radius_profile(rho)}, grids={"rho.csv": columns})


def run_cover(s: Setup) -> Outcome:
    run = s.config.run
    rho = s.rho()
    constants = verify_critical(rho, run.n0_grid, run.pair_budget, run.seed)
    family = critical_covering(rho)
    summary = {
        "critical": {"size": len(family), "audit": overlap_audit(family)},
        "constants": constants,
        "localization_dilation": localization_dilation(constants),
    }
    tables = {"critical_balls.csv": (family_header(s.domain.dim), ball_family_to_rows(family))}
    if run.center is not None and run.radius is not None:
        cover = subcritical_covering(Ball(run.center, run.radius), rho, run.beta, constants)
        summary["subcritical"] = {
            "size": len(cover.family),
            "delta0": cover.delta0,
            "count_bound": cover.count_bound,
            "covered": cover.covered,
            "max_overlap": overlap_audit(cover.family).max_overlap,
        }
        tables["subcritical_balls.csv"] = (family_header(s.domain.dim), ball_family_to_rows(cover.family))
    return Outcome(summary, tables=tables)


def run_weight_class(s: Setup) -> Outcome:
    run = s.config.run
    w, p, rho = s.sample("w", "1"), s.exponent(), s.rho()
    balls = s.sweep()
    report = class_report(w, p, rho, run.thetas, balls, s.sweep(refined=True))
    local_rho, local_scaled = beta_invariance_check(w, p, rho, run.beta, balls)
    rows = [[name, *ball.center, ball.radius] for name, ball in report.witness_balls.items()]
    header = ["constant"] + [f"x{a + 1}" for a in range(s.domain.dim)] + ["radius"]
    summary = {
        "class": report,
        "sweep_size": len(balls),
        "beta_invariance": {"beta": run.beta, "rho": local_rho, "scaled": local_scaled},
    }
    return Outcome(summary, tables={"witnesses.csv": (header, rows)})


def _spread(balls: list[Ball], count: int = NECESSITY_BALLS) -> list[Ball]:
    """At most ``count`` balls evenly spaced through the sweep order."""
    if len(balls) <= count:
        return balls
    picks = np.unique(np.linspace(0, len(balls) - 1, count).round().astype(int))
    return [balls[k] for k in picks]


def run_verify(s: Setup) -> Outcome:
    cfg, run = s.config, s.config.run
    p, w, rho = s.exponent(), s.sample("w", "1"), s.rho()
    family = default_test_functions(s.domain, w, seed=run.seed)
    balls = list(s.sweep())
    constants = verify_critical(rho, run.n0_grid, run.pair_budget, run.seed)
    classes = class_report(w, p, rho, run.thetas, balls)
    ladder = None
    if run.ladder != "none":
        ladder = LadderSpec(
            cfg.dim,
            cfg.half_width,
            cfg.cells_per_axis,
            cfg.expression("p", "2"),
            cfg.expression("w", "1"),
            cfg.expression("rho", "1"),
            kind=run.ladder,
            steps=run.ladder_steps,
            per_octave=cfg.radii.per_octave,
            seed=run.seed,
        )
    summary: dict = {"operators": {}}
    rows = []
    for tag in run.operators:
        op = parse_operator(tag)
        report = boundedness_ratios(op, family, p, w, rho, s.radii, class_constants=classes, ladder=ladder)
        eta = op.theta * (constants.n0 + 1.0) if op.kind == "Mtheta" else run.eta
        admissible = [b for b in balls if op.kind != "Mloc" or is_subcritical(rho, b)]
        entry = {
            "report": report,
            "necessity": necessity_bound(op, p, w, rho, eta, _spread(admissible), s.radii, constants),
        }
        if report.refinement_trend:
            entry["trend"] = classify_trend(report.refinement_trend)
        summary["operators"][op.tag] = entry
        rows.extend([op.tag, name, value] for name, value in report.ratios)
    return Outcome(summary, tables={"ratios.csv": (["operator", "function", "ratio"], rows)})



def run_schrodinger(s: Setup) -> Outcome:
    run = s.config.run
    V, p, w = s.sample("V"), s.exponent(), s.sample("w", "1")
    theta = max(run.thetas) if run.thetas else 2.0
    report = schrodinger_experiment(V, run.q, p, w, s.radii, theta=theta, seed=run.seed)
    rows = [[r.operator_tag, name, value] for r in (report.local, report.penalized) for name, value in r.ratios]
    return Outcome({"schrodinger": report}, tables={"ratios.csv": (["operator", "function", "ratio"], rows)})


SUBCOMMANDS: dict[str, Callable[[Setup], Outcome]] = {
    "norm": run_norm,
    "maximal": run_maximal,
    "rho": run_rho,
    "cover": run_cover,
    "weight-class": run_weight_class,
    "verify": run_verify,
    "schrodinger": run_schrodinger,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhoweights", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="INI run configuration")
        cmd.add_argument("--threads", type=int, default=None, help="thread cap (default: RHOWEIGHTS_THREADS or 1)")
        cmd.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
        cmd.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def run(command: str, config_path: str, out: str | None = None) -> str:
    """Execute one subcommand and write its reports; returns the output directory."""
    config = load_config(config_path)
    setup = _setup(config)
    outcome = SUBCOMMANDS[command](setup)
    directory = out or config.output_dir
    seeds = {"run": config.run.seed}
    write_json_report(directory, {"command": command, **outcome.summary}, config.to_dict(), provenance(config.source_sha256, seeds))
    for name, columns in outcome.grids.items():
        write_grid_csv(f"{directory}/{name}", setup.domain, columns)
    for name, (header, rows) in outcome.tables.items():
        write_rows_csv(f"{directory}/{name}", header, rows)
    return directory


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    set_thread_cap(args.threads)
    try:
        directory = run(args.command, args.config, args.out)
    except ValidationError as exc:
        print(f"rhoweights: invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"rhoweights: numerical failure: {exc}", file=sys.stderr)
        return 3
    logger.info("reports written to %s", directory)
    return 0


if __name__ == "__main__":
    sys.exit(main())
