from fastmcp import FastMCP
from dotenv import load_dotenv
import logging
import os

from rhoweights.cover import critical_covering as build_critical_covering
from rhoweights.cover import overlap_audit
from rhoweights.errors import RhoWeightsError
from rhoweights.exponent import make_exponent
from rhoweights.expr import sample_text
from rhoweights.grid import build_domain
from rhoweights.maximal import RadiusGrid
from rhoweights.norm import luxemburg_norm as _luxemburg_norm
from rhoweights.norm import weighted_norm
from rhoweights.reports import PINNED_PATH, to_jsonable
from rhoweights.rho import RhoFunction, critical_radius_profile, rho_from_potential, verify_critical
from rhoweights.verify import apply_operator, boundedness_ratios, default_test_functions
from rhoweights.weights import class_report, sweep_balls

load_dotenv()

logger = logging.getLogger(__name__)

mcp = FastMCP("RhoWeights")


def _error(exc):
    logger.info("tool failed: %s", exc)
    return {"status": "error", "message": str(exc)}


@mcp.tool()
def luxemburg_norm(dim: int, half_width: float, cells_per_axis: int, f: str, p: str = "2", w: str = "1"):
    '''Luxemburg norm of f in L^{p(.)}, and of f*w, on a uniform grid over [-L, L]^d.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        f (str): Expression for the function, e.g. "exp(-norm2(x)^2)".
        p (str, optional): Expression for the exponent, values in [1, inf). Defaults to "2".
        w (str, optional): Expression for a positive weight. Defaults to "1".

    Returns:
        dict: status, norm, weighted_norm, iterations, p_minus, p_plus.
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        fn, weight = sample_text(f, domain), sample_text(w, domain)
        exponent = make_exponent(sample_text(p, domain))
        result = _luxemburg_norm(fn, exponent)
        return {
            "status": "ok",
            "norm": result.value,
            "weighted_norm": weighted_norm(fn, exponent, weight),
            "iterations": result.iterations,
            "p_minus": exponent.p_minus,
            "p_plus": exponent.p_plus,
        }
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.tool()
def weight_class(
    dim: int,
    half_width: float,
    cells_per_axis: int,
    w: str,
    p: str = "2",
    rho: str = "1",
    thetas: list[float] | None = None,
    stride: int = 4,
    per_octave: int = 4,
):
    '''Global, local and penalized weight class constants of w over a sweep of balls.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        w (str): Expression for a positive weight.
        p (str, optional): Exponent expression with values in (1, inf). Defaults to "2".
        rho (str, optional): Critical radius expression. Defaults to "1".
        thetas (list[float], optional): Penalty exponents for the profile. Defaults to [0, 1, 2, 4].
        stride (int, optional): Ball centers sit on every stride-th cell. Defaults to 4.
        per_octave (int, optional): Radii per doubling of the radius grid. Defaults to 4.

    Returns:
        dict: status, the class report and the sweep size.
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        weight = sample_text(w, domain)
        exponent = make_exponent(sample_text(p, domain))
        critical = RhoFunction(sample_text(rho, domain))
        balls = sweep_balls(domain, stride, RadiusGrid.log_spaced(domain, per_octave))
        report = class_report(weight, exponent, critical, thetas or [0.0, 1.0, 2.0, 4.0], balls)
        return {"status": "ok", "report": to_jsonable(report), "sweep_size": len(balls)}
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.tool()
def critical_radius_from_potential(
    dim: int, half_width: float, cells_per_axis: int, V: str, per_octave: int = 8, seed: int = 0
):
    '''Critical radius rho_V of a nonnegative potential, with its fitted constants.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        V (str): Expression for the potential, e.g. "norm2(x)^2".
        per_octave (int, optional): Radii per doubling of the search grid. Defaults to 8.
        seed (int, optional): Seed for pair subsampling. Defaults to 0.

    Returns:
        dict: status, profile (min, max, mean, clamped cells) and constants (c_rho, N0).
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        radius = rho_from_potential(sample_text(V, domain), RadiusGrid.log_spaced(domain, per_octave))
        constants = verify_critical(radius, seed=seed)
        return {
            "status": "ok",
            "profile": critical_radius_profile(radius),
            "constants": to_jsonable(constants),
        }
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.tool()
def critical_covering(dim: int, half_width: float, cells_per_axis: int, rho: str, beta: float = 1.0):
    '''Greedy covering of the domain by critical balls B(x, rho(x)) and its overlap audit.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        rho (str): Critical radius expression.
        beta (float, optional): Dilation for the overlap audit. Defaults to 1.0.

    Returns:
        dict: status, balls (center, radius) and the overlap report.
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        family = build_critical_covering(RhoFunction(sample_text(rho, domain)))
        return {
            "status": "ok",
            "balls": to_jsonable(list(family)),
            "audit": to_jsonable(overlap_audit(family, beta)),
        }
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.tool()
def maximal_operator(
    dim: int,
    half_width: float,
    cells_per_axis: int,
    f: str,
    operator: str = "Mloc",
    rho: str = "1",
    per_octave: int = 4,
):
    '''Evaluate M, Mloc or Mtheta(theta) on a sampled function.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        f (str): Expression for the function.
        operator (str, optional): "M", "Mloc" or "Mtheta(<theta>)". Defaults to "Mloc".
        rho (str, optional): Critical radius expression. Defaults to "1".
        per_octave (int, optional): Radii per doubling of the radius grid. Defaults to 4.

    Returns:
        dict: status, operator values in row-major cell order and their maximum.
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        radii = RadiusGrid.log_spaced(domain, per_octave)
        result = apply_operator(operator, sample_text(f, domain), RhoFunction(sample_text(rho, domain)), radii)
        return {"status": "ok", "values": result.values.tolist(), "max": float(result.values.max())}
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.tool()
def boundedness_experiment(
    dim: int,
    half_width: float,
    cells_per_axis: int,
    w: str,
    operator: str = "Mloc",
    p: str = "2",
    rho: str = "1",
    per_octave: int = 4,
    seed: int = 0,
):
    '''Weighted norm ratios ||(T f) w|| / ||f w|| of an operator over the default test family.

    Args:
        dim (int): Dimension, 1 to 3.
        half_width (float): Half side L of the cube.
        cells_per_axis (int): Cells along each axis.
        w (str): Expression for a positive weight.
        operator (str, optional): "M", "Mloc" or "Mtheta(<theta>)". Defaults to "Mloc".
        p (str, optional): Exponent expression. Defaults to "2".
        rho (str, optional): Critical radius expression. Defaults to "1".
        per_octave (int, optional): Radii per doubling of the radius grid. Defaults to 4.
        seed (int, optional): Seed for the random test fields. Defaults to 0.

    Returns:
        dict: status and the experiment report (ratios per test function, max_ratio, skipped).
    '''
    try:
        domain = build_domain(dim, half_width, cells_per_axis)
        weight = sample_text(w, domain)
        report = boundedness_ratios(
            operator,
            default_test_functions(domain, weight, seed=seed),
            make_exponent(sample_text(p, domain)),
            weight,
            RhoFunction(sample_text(rho, domain)),
            RadiusGrid.log_spaced(domain, per_octave),
        )
        return {"status": "ok", "report": to_jsonable(report)}
    except RhoWeightsError as exc:
        return _error(exc)


@mcp.resource("rhoweights://pinned", mime_type="application/json")
def pinned():
    # Read fresh each time so fixtures can be edited without restarting
    with open(PINNED_PATH, "r", encoding="utf-8") as f:
        return f.read()


if __name__ == "__main__":
    mcp.run(
        transport="http",
        host=os.getenv("RHOWEIGHTS_HOST", "0.0.0.0"),
        port=int(os.getenv("RHOWEIGHTS_PORT", "8002")),
    )
