"""Run configuration files.

A run is described by an INI file with one level of sections::

    [domain]
    dim = 1
    half_width = 4
    cells_per_axis = 128

    [functions]
    f = exp(-x1^2)
    p = 2
    w = exp(x1)
    rho = 1

    [radii]
    per_octave = 4

    [sweep]
    stride = 4
    interior_only = true

    [run]
    thetas = 0, 1, 2, 4
    operators = M, Mloc, Mtheta(2)

    [output]
    directory = out

Every key is optional except the ``[domain]`` block. Diagnostics name the
offending ``section.key``.
"""

from __future__ import annotations

import configparser
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ExprError
from .expr import parse

logger = logging.getLogger(__name__)

EXPRESSION_KEYS = ("f", "p", "w", "V", "rho")


@dataclass(frozen=True)
class RadiusSpec:
    per_octave: int = 4
    r_min: float | None = None
    r_max: float | None = None


@dataclass(frozen=True)
class SweepSpec:
    stride: int = 1
    interior_only: bool = True


@dataclass(frozen=True)
class RunParams:
    seed: int = 0
    thetas: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0)
    eta: float = 0.0
    q: float = 2.0
    beta: float = 2.0
    operators: tuple[str, ...] = ("M", "Mloc", "Mtheta(2)")
    n0_grid: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
    pair_budget: int = 2_000_000
    center: tuple[float, ...] | None = None
    radius: float | None = None
    ladder: str = "none"
    ladder_steps: int = 3


@dataclass(frozen=True)
class RunConfig:
    dim: int
    half_width: float
    cells_per_axis: int
    expressions: dict[str, str] = field(default_factory=dict)
    radii: RadiusSpec = RadiusSpec()
    sweep: SweepSpec = SweepSpec()
    run: RunParams = RunParams()
    output_dir: str = "rhoweights-out"
    source_sha256: str = ""

    def expression(self, key: str, default: str | None = None) -> str:
        text = self.expressions.get(key, default)
        if text is None:
            raise ConfigError("expression is required for this subcommand", f"functions.{key}")
        return text

    def to_dict(self) -> dict:
        return {
            "domain": {"dim": self.dim, "half_width": self.half_width, "cells_per_axis": self.cells_per_axis},
            "functions": dict(self.expressions),
            "radii": vars(self.radii),
            "sweep": vars(self.sweep),
            "run": {k: list(v) if isinstance(v, tuple) else v for k, v in vars(self.run).items()},
        }


_KNOWN = {
    "domain": {"dim", "half_width", "cells_per_axis"},
    "functions": set(k.lower() for k in EXPRESSION_KEYS),
    "radii": {"per_octave", "r_min", "r_max"},
    "sweep": {"stride", "interior_only"},
    "run": set(RunParams.__dataclass_fields__),
    "output": {"directory"},
}


def _number(section: configparser.SectionProxy, key: str, kind, default=None):
    raw = section.get(key, fallback="").strip()
    if raw == "":
        return default
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", f"{section.name}.{key}") from None


def _floats(section: configparser.SectionProxy, key: str, default):
    raw = section.get(key, fallback="").strip()
    if raw == "":
        return default
    try:
        return tuple(float(v) for v in raw.split(","))
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {raw!r}", f"{section.name}.{key}") from None


def _flag(section: configparser.SectionProxy, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, fallback=default)
    except ValueError:
        raise ConfigError("expected true or false", f"{section.name}.{key}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from None
    for name in parser.sections():
        if name not in _KNOWN:
            raise ConfigError(f"unknown section [{name}]", name)
        for key in parser[name]:
            if key.lower() not in _KNOWN[name]:
                raise ConfigError("unknown key", f"{name}.{key}")
    if not parser.has_section("domain"):
        raise ConfigError("missing [domain] section", "domain")
    for name in _KNOWN:
        if not parser.has_section(name):
            parser.add_section(name)

    dom = parser["domain"]
    dim = _number(dom, "dim", int)
    half_width = _number(dom, "half_width", float)
    cells = _number(dom, "cells_per_axis", int)
    for key, value in (("dim", dim), ("half_width", half_width), ("cells_per_axis", cells)):
        if value is None:
            raise ConfigError("required", f"domain.{key}")
    if dim not in (1, 2, 3):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dim}", "domain.dim")

    expressions = {}
    for key in parser["functions"]:
        source_text = parser["functions"][key].strip()
        if not source_text:
            continue
        canonical = next(k for k in EXPRESSION_KEYS if k.lower() == key.lower())
        try:
            parse(source_text)
        except ExprError as exc:
            raise ConfigError(str(exc), f"functions.{canonical}") from None
        expressions[canonical] = source_text

    rad = parser["radii"]
    radii = RadiusSpec(
        _number(rad, "per_octave", int, 4),
        _number(rad, "r_min", float),
        _number(rad, "r_max", float),
    )
    sw = parser["sweep"]
    sweep = SweepSpec(_number(sw, "stride", int, 1), _flag(sw, "interior_only", True))
    if sweep.stride < 1:
        raise ConfigError("stride must be >= 1", "sweep.stride")

    rn = parser["run"]
    defaults = RunParams()
    operators = rn.get("operators", fallback="").strip()
    ladder = rn.get("ladder", fallback=defaults.ladder).strip()
    if ladder not in ("none", "refine", "domain"):
        raise ConfigError("ladder must be none, refine or domain", "run.ladder")
    center = _floats(rn, "center", None)
    if center is not None and len(center) != dim:
        raise ConfigError(f"center needs {dim} coordinates", "run.center")
    run = RunParams(
        seed=_number(rn, "seed", int, defaults.seed),
        thetas=_floats(rn, "thetas", defaults.thetas),
        eta=_number(rn, "eta", float, defaults.eta),
        q=_number(rn, "q", float, defaults.q),
        beta=_number(rn, "beta", float, defaults.beta),
        operators=tuple(o.strip() for o in _split_operators(operators)) if operators else defaults.operators,
        n0_grid=_floats(rn, "n0_grid", defaults.n0_grid),
        pair_budget=_number(rn, "pair_budget", int, defaults.pair_budget),
        center=center,
        radius=_number(rn, "radius", float),
        ladder=ladder,
        ladder_steps=_number(rn, "ladder_steps", int, defaults.ladder_steps),
    )
    output = parser["output"].get("directory", fallback="").strip() or "rhoweights-out"
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RunConfig(dim, half_width, cells, expressions, radii, sweep, run, output, digest)


def _split_operators(text: str) -> list[str]:
    """Split on commas outside parentheses."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
            continue
        depth += {"(": 1, ")": -1}.get(ch, 0)
        current.append(ch)
    parts.append("".join(current))
    return [p for p in (s.strip() for s in parts) if p]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    logger.debug("loaded config %s", path)
    return parse_config(text, str(path))
