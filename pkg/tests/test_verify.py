import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhoweights.cover import critical_covering, overlap_audit
from rhoweights.errors import ValidationError, ZeroNormError
from rhoweights.exponent import constant_exponent, make_exponent
from rhoweights.expr import sample_text
from rhoweights.grid import Ball, GridFunction, build_domain
from rhoweights.maximal import RadiusGrid
from rhoweights.reports import load_pinned
from rhoweights.rho import RhoConstants, RhoFunction, rho_from_potential, verify_critical
from rhoweights.verify import (
    LadderSpec,
    OperatorSpec,
    apply_operator,
    boundedness_ratios,
    classify_trend,
    default_test_functions,
    domination_check,
    ladder_trend,
    localization_check,
    necessity_bound,
    parse_operator,
    schrodinger_experiment,
    theta_threshold,
)
from rhoweights.weights import class_report, sweep_balls


def rho_of(text, domain):
    return RhoFunction(sample_text(text, domain))


@pytest.mark.parametrize(
    "tag, kind, theta",
    [("M", "M", 0.0), (" Mloc ", "Mloc", 0.0), ("Mtheta(2)", "Mtheta", 2.0), ("Mtheta( 0.5 )", "Mtheta", 0.5)],
)
def test_parse_operator(tag, kind, theta):
    spec = parse_operator(tag)
    assert spec == OperatorSpec(kind, theta)
    assert parse_operator(spec) is spec


@pytest.mark.parametrize("tag", ["N", "Mtheta", "M(2)", "Mloc(1)", "Mtheta(-1)", ""])
def test_parse_operator_rejects(tag):
    with pytest.raises(ValidationError):
        parse_operator(tag)


def test_operator_tags():
    assert parse_operator("Mtheta(2)").tag == "Mtheta(2)"
    assert parse_operator("Mtheta(0.25)").tag == "Mtheta(0.25)"
    assert parse_operator("Mloc").tag == "Mloc"


def test_apply_operator_on_constants(line64):
    one = GridFunction.constant(line64, 1.0)
    rho = rho_of("1", line64)
    radii = RadiusGrid.log_spaced(line64)
    for tag in ("M", "Mloc"):
        np.testing.assert_allclose(apply_operator(tag, one, rho, radii).values, 1.0, rtol=1e-14)


def test_default_test_functions(line64):
    w = sample_text("exp(x1)", line64)
    family = default_test_functions(line64, w)
    names = [name for name, _ in family]
    assert {"point[center]", "point[quarter]", "random[0]", "random[1]"} <= set(names)
    balls = [n for n in names if n.startswith("ball[")]
    assert 1 <= len(balls) <= 4
    assert len([n for n in names if n.startswith("witness[")]) == len(balls)
    again = default_test_functions(line64, w)
    for (_, f), (_, g) in zip(family, again):
        np.testing.assert_array_equal(f.values, g.values)
    assert not any(n.startswith("random") for n, _ in default_test_functions(line64, w, random_fields=0))


def test_constant_function_has_unit_ratio(line64, p2):
    one = GridFunction.constant(line64, 1.0)
    report = boundedness_ratios("M", [("one", one)], p2, one, rho_of("1", line64), RadiusGrid.log_spaced(line64))
    assert report.operator_tag == "M"
    assert report.max_ratio == pytest.approx(1.0, rel=1e-12)
    assert report.skipped == 0


def test_zero_functions_are_skipped(line64, p2, caplog):
    one = GridFunction.constant(line64, 1.0)
    zero = one * 0.0
    rho = rho_of("1", line64)
    radii = RadiusGrid.log_spaced(line64)
    with caplog.at_level(logging.WARNING, logger="rhoweights.verify"):
        report = boundedness_ratios("Mloc", [("zero", zero), ("one", one)], p2, one, rho, radii)
    assert report.skipped == 1
    assert [name for name, _ in report.ratios] == ["one"]
    assert "zero-norm test functions skipped" in caplog.text
    with pytest.raises(ZeroNormError):
        boundedness_ratios("Mloc", [("zero", zero)], p2, one, rho, radii)
    with pytest.raises(ValidationError):
        boundedness_ratios("Mloc", [], p2, one, rho, radii)


def test_ratios_follow_the_pointwise_operator_order(line64):
    w = sample_text("exp(x1/2)", line64)
    p = make_exponent(sample_text("2 + 1/(1 + x1^2)", line64))
    rho = rho_of("1/(1+0.25*abs(x1))", line64)
    radii = RadiusGrid.log_spaced(line64)
    family = default_test_functions(line64, w)
    local = boundedness_ratios("Mloc", family, p, w, rho, radii)
    glob = boundedness_ratios("M", family, p, w, rho, radii)
    for (name, a), (other, b) in zip(local.ratios, glob.ratios):
        assert name == other
        assert a <= b * (1 + 1e-10)
    previous = glob.ratios
    for theta in (0.5, 1.0, 2.0, 4.0):
        current = boundedness_ratios(OperatorSpec("Mtheta", theta), family, p, w, rho, radii).ratios
        for (_, a), (_, b) in zip(current, previous):
            assert a <= b * (1 + 1e-10)
        previous = current


def test_report_carries_class_constants_and_trend():
    spec = LadderSpec(1, 2.0, 32, p="2", w="exp(x1)", rho="1", kind="domain", steps=2)
    domain = spec.domains()[0]
    w = sample_text(spec.w, domain)
    p = constant_exponent(domain, 2.0)
    rho = rho_of(spec.rho, domain)
    radii = RadiusGrid.log_spaced(domain, spec.per_octave)
    classes = class_report(w, p, rho, [0.0, 1.0], sweep_balls(domain, 4, radii))
    family = default_test_functions(domain, w, ball_radii=(0.5, 1.0), random_fields=0)
    report = boundedness_ratios("Mloc", family, p, w, rho, radii, class_constants=classes, ladder=spec)
    assert report.class_constants is classes
    assert report.refinement_trend == ladder_trend("Mloc", spec)
    assert report.refinement_trend[0] == report.max_ratio
    bare = boundedness_ratios("Mloc", family, p, w, rho, radii)
    assert bare.class_constants is None
    assert bare.refinement_trend == []


@pytest.mark.parametrize(
    "values, expected",
    [([1.0, 1.1, 1.05], "stable"), ([1.0, 2.0, 4.0], "growing"), ([1.0, 3.0, 2.0], "mixed"), ([2.0], "stable")],
)
def test_classify_trend(values, expected):
    assert classify_trend(values) == expected


def test_classify_empty_trend():
    with pytest.raises(ValidationError):
        classify_trend([])


def test_ladder_domains():
    refine = LadderSpec(1, 4.0, 64, "2", "1", "1").domains()
    assert [(d.half_width, d.cells_per_axis) for d in refine] == [(4.0, 64), (4.0, 128), (4.0, 256)]
    grow = LadderSpec(1, 4.0, 64, "2", "1", "1", kind="domain").domains()
    assert [(d.half_width, d.cells_per_axis) for d in grow] == [(4.0, 64), (8.0, 128), (16.0, 256)]
    assert len({d.spacing for d in grow}) == 1


def test_local_operator_is_bounded_where_the_global_one_is_not():
    """Exponential weight, unit rho: Mloc flat along the growing-box ladder, M increasing; under two minutes."""
    spec = LadderSpec(1, 4.0, 64, p="2", w="exp(x1)", rho="1", kind="domain")
    assert classify_trend(ladder_trend("Mloc", spec)) == "stable"
    assert classify_trend(ladder_trend("M", spec)) == "growing"


def test_penalized_operator_above_the_threshold_does_not_diverge():
    """Steep power weight with inverse-linear rho; penalty past theta_star plus twice the fitted overlap exponent."""
    domain = build_domain(1, 4.0, 64)
    w = sample_text("(1 + abs(x1))^1.5", domain)
    rho = rho_of("1/(1+abs(x1))", domain)
    balls = sweep_balls(domain, 8, RadiusGrid.log_spaced(domain))
    report = class_report(w, constant_exponent(domain, 2.0), rho, [0.0, 0.5, 1.0, 2.0, 4.0, 8.0], balls)
    assert report.theta_star is not None
    n1 = overlap_audit(critical_covering(rho)).fitted_n1
    theta = theta_threshold(report.theta_star, max(n1, 0.0))
    spec = LadderSpec(1, 4.0, 64, p="2", w="(1 + abs(x1))^1.5", rho="1/(1+abs(x1))", kind="domain")
    trend = ladder_trend(OperatorSpec("Mtheta", theta), spec)
    assert max(trend) <= 1.15 * trend[0]


def test_theta_threshold():
    assert theta_threshold(1.5, 0.75) == 3.0


@pytest.fixture(scope="module")
def slowly_varying():
    domain = build_domain(1, 4.0, 64)
    rho = rho_of("1/(1+0.25*abs(x1))", domain)
    return domain, rho, verify_critical(rho)


@settings(max_examples=20)
@given(
    index=st.integers(8, 56),
    k=st.integers(0, 8),
    theta=st.floats(0.5, 3.0),
    seed=st.integers(0, 2**16),
)
def test_penalized_average_is_dominated(slowly_varying, index, k, theta, seed):
    """Twenty sub-critical balls; exact comparison with 1e-9 slack."""
    domain, rho, constants = slowly_varying
    center = (float(domain.axis_centers[index]),)
    radius = (k + 0.5) * domain.spacing
    if radius > rho.value_at(center):
        radius = 0.5 * domain.spacing
    f = GridFunction.from_values(domain, np.random.default_rng(seed).normal(size=domain.size))
    radii = RadiusGrid.log_spaced(domain)
    assert domination_check(f, Ball(center, radius), theta, rho, constants, radii) <= 1e-9


@pytest.mark.parametrize("text", ["1", "1/(1+0.25*abs(x1))"])
def test_localization(line64, rng, text):
    rho = rho_of(text, line64)
    f = GridFunction.from_values(line64, rng.normal(size=line64.size))
    radii = RadiusGrid.log_spaced(line64)
    assert localization_check(f, rho, radii, verify_critical(rho)) <= 1e-12


def test_necessity_with_unit_weight(line64, p2):
    one = GridFunction.constant(line64, 1.0)
    rho = rho_of("1", line64)
    radii = RadiusGrid.log_spaced(line64)
    balls = [Ball((0.0625,), 0.5), Ball((-1.9375,), 1.0), Ball((2.0625,), 0.25)]
    for tag in ("M", "Mloc", "Mtheta(1)"):
        report = necessity_bound(tag, p2, one, rho, 1.0, balls, radii, RhoConstants(1.0, 1.0, (0, 0)))
        assert report.holds
        assert report.max_quotient <= 1.0 + 1e-10
    assert necessity_bound("M", p2, one, rho, 3.0, balls, radii).eta == 0.0
    assert necessity_bound("Mtheta(1)", p2, one, rho, 2.0, balls, radii, RhoConstants(1.0, 1.0, (0, 0))).constant == 16.0


def test_necessity_needs_admissible_balls(line64, p2):
    one = GridFunction.constant(line64, 1.0)
    with pytest.raises(ValidationError):
        necessity_bound("Mloc", p2, one, rho_of("0.1", line64), 0.0, [Ball((0.0625,), 1.0)], RadiusGrid.log_spaced(line64))


@pytest.fixture(scope="module")
def constant_potential_report():
    domain = build_domain(1, 4.0, 64)
    V = GridFunction.constant(domain, 0.5)
    one = GridFunction.constant(domain, 1.0)
    radii = RadiusGrid.log_spaced(domain, per_octave=2)
    return schrodinger_experiment(V, 2.0, constant_exponent(domain, 2.0), one, radii)


def test_schrodinger_pipeline(constant_potential_report):
    report = constant_potential_report
    assert report.reverse_holder == 1.0
    assert report.rho_min == pytest.approx(1.0, rel=0.05)
    assert report.rho_max >= report.rho_min
    assert report.clamped_cells == 0
    assert report.constants.c_rho >= 1.0
    assert report.local.operator_tag == "Mloc"
    assert report.penalized.operator_tag == "Mtheta(2)"
    assert report.local.max_ratio >= 1.0 - 1e-12
    assert report.local.class_constants is report.penalized.class_constants
    assert report.local.class_constants.ap_local_constant == pytest.approx(1.0, abs=1e-10)


@pytest.fixture(scope="module")
def uniform_potential_3d():
    case = load_pinned()["schrodinger"]["constant_potential"]
    domain = build_domain(case["dim"], case["half_width"], case["cells_per_axis"])
    radii = RadiusGrid.log_spaced(domain)
    return case, domain, radii, rho_from_potential(sample_text(case["V"], domain), radii)


def test_local_operator_under_uniform_potential_matches_unit_radius(uniform_potential_3d):
    case, domain, radii, rho_v = uniform_potential_3d
    one = GridFunction.constant(domain, 1.0)
    p = constant_exponent(domain, 2.0)
    family = [(name, f) for name, f in default_test_functions(domain, one, random_fields=0) if name == "point[center]"]
    under_v = boundedness_ratios("Mloc", family, p, one, rho_v, radii)
    unit = boundedness_ratios("Mloc", family, p, one, rho_of("1", domain), radii)
    assert under_v.max_ratio == pytest.approx(unit.max_ratio, rel=case["rel_tol"])
