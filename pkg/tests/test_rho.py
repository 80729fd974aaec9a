import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhoweights.errors import (
    NonPositiveRhoError,
    PotentialZeroError,
    ValidationError,
    ZeroMassBallError,
)
from rhoweights.expr import sample_text
from rhoweights.grid import Ball, GridFunction, build_domain
from rhoweights.maximal import RadiusGrid
from rhoweights.reports import load_pinned
from rhoweights.rho import (
    BISECT_RTOL,
    RhoFunction,
    _required_c,
    critical_radius_profile,
    is_subcritical,
    reverse_holder_constant,
    rho_from_potential,
    verify_critical,
)

PINNED = load_pinned()


def rho_of(text, domain):
    return RhoFunction(sample_text(text, domain))


def potential_case(name):
    case = PINNED["schrodinger"][name]
    domain = build_domain(case["dim"], case["half_width"], case["cells_per_axis"])
    V = sample_text(case["V"], domain)
    return case, domain, rho_from_potential(V, RadiusGrid.log_spaced(domain, per_octave=4))


@pytest.fixture(scope="module")
def constant_potential():
    return potential_case("constant_potential")


@pytest.fixture(scope="module")
def quadratic_potential():
    return potential_case("quadratic_potential")


def test_rho_must_be_positive(line4):
    with pytest.raises(NonPositiveRhoError):
        rho_of("x1", line4)


def test_scaled_and_value_at(line64):
    rho = rho_of("1/(1+abs(x1))", line64)
    assert rho.value_at((3.0,)) == pytest.approx(1 / 4.0625)
    np.testing.assert_array_equal(rho.scaled(2.0).array, 2.0 * rho.array)
    with pytest.raises(ValidationError):
        rho.scaled(0.0)


def test_constant_rho_is_critical_with_unit_constant(square16):
    constants = verify_critical(rho_of("1", square16))
    assert constants.c_rho == 1.0
    assert constants.n0 == 1.0
    assert set(constants.fits) == {1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}


def test_inverse_linear_rho_has_small_constant(line64):
    case = PINNED["critical_radius"]["inverse_linear_dim1_L4_n64"]
    constants = verify_critical(rho_of(case["rho"], line64))
    assert 1.0 <= constants.c_rho <= case["c_rho_max"]
    i, j = constants.worst_pair
    assert i != j


def test_worst_pair_realizes_the_fit(line64):
    rho = rho_of("1/(1 + abs(x1))", line64)
    constants = verify_critical(rho)
    vals, x = rho.array, line64.centers[:, 0]
    a, b = np.meshgrid(np.arange(line64.size), np.arange(line64.size), indexing="ij")
    off = a != b
    a, b = a[off], b[off]
    required = _required_c(vals[b] / vals[a], np.abs(x[a] - x[b]) / vals[a], constants.n0)
    i, j = constants.worst_pair
    assert i != j
    at_pair = _required_c(np.array([vals[j] / vals[i]]), np.array([abs(x[i] - x[j]) / vals[i]]), constants.n0)
    assert at_pair[0] == pytest.approx(required.max(), rel=1e-12)
    assert constants.c_rho == max(1.0, at_pair[0])


def test_gaussian_growth_is_flagged():
    fitted = []
    for half_width in (2.0, 4.0, 8.0):
        domain = build_domain(1, half_width, int(8 * half_width))
        fitted.append(verify_critical(rho_of("exp(x1^2)", domain)).c_rho)
    assert fitted[0] < fitted[1] < fitted[2]


def test_n0_candidates_must_be_at_least_one(line4):
    with pytest.raises(ValidationError):
        verify_critical(rho_of("1", line4), n0_grid=(0.5, 2.0))


def test_fit_is_seeded_when_subsampling(square16):
    rho = rho_of("1/(1+norm2(x))", square16)
    first = verify_critical(rho, pair_budget=1000, seed=3)
    again = verify_critical(rho, pair_budget=1000, seed=3)
    assert first == again


@pytest.mark.parametrize(
    "text, ball, expected",
    [
        ("1", Ball((0.0,), 0.5), True),
        ("1", Ball((0.0,), 2.0), False),
        ("1/(1+abs(x1))", Ball((3.0,), 0.5), False),
    ],
)
def test_is_subcritical(line64, text, ball, expected):
    assert is_subcritical(rho_of(text, line64), ball) is expected


def test_constant_potential_gives_unit_radius(constant_potential):
    case, domain, rho = constant_potential
    interior = np.all(np.abs(domain.centers) <= case["interior_half_width"], axis=1)
    np.testing.assert_allclose(rho.array[interior], case["rho"], rtol=case["rel_tol"])
    assert not rho.clamped.any()


def test_quadratic_potential_matches_inverse_linear_profile(quadratic_potential):
    case, domain, rho = quadratic_potential
    lo, hi = case["rho_times_one_plus_norm"]
    tol = case["rel_tol"]
    scaled = rho.array * (1.0 + np.linalg.norm(domain.centers, axis=1))
    assert lo * (1 - tol) <= scaled.min() <= lo * (1 + tol)
    assert hi * (1 - tol) <= scaled.max() <= hi * (1 + tol)
    assert int(rho.clamped.sum()) == case["clamped_cells"]



@settings(max_examples=10)
@given(seed=st.integers(0, 2**16), scale=st.floats(1.0, 4.0))
def test_rho_is_antitone_in_the_potential(seed, scale):
    domain = build_domain(2, 2.0, 16)
    rng = np.random.default_rng(seed)
    small = rng.uniform(0.1, 2.0, domain.size)
    large = scale * small + rng.uniform(0.0, 1.0, domain.size)
    radii = RadiusGrid.log_spaced(domain)
    rho_small = rho_from_potential(GridFunction.from_values(domain, small), radii)
    rho_large = rho_from_potential(GridFunction.from_values(domain, large), radii)
    assert np.all(rho_large.array <= rho_small.array * (1.0 + 2.0 * BISECT_RTOL))


def test_zero_and_negative_potentials(line4):
    radii = RadiusGrid.log_spaced(line4)
    with pytest.raises(PotentialZeroError):
        rho_from_potential(GridFunction.constant(line4, 0.0), radii)
    with pytest.raises(ValidationError):
        rho_from_potential(sample_text("x1", line4), radii)


def test_tiny_potential_clamps_to_the_grid(caplog):
    domain = build_domain(1, 1.0, 16)
    radii = RadiusGrid.log_spaced(domain)
    with caplog.at_level(logging.WARNING, logger="rhoweights.rho"):
        rho = rho_from_potential(GridFunction.constant(domain, 1e-6), radii)
    assert rho.clamped.all()
    np.testing.assert_array_equal(rho.array, radii.radii[-1])
    assert "clamped" in caplog.text
    assert critical_radius_profile(rho)["clamped_cells"] == 16.0


def test_profile(line64):
    profile = critical_radius_profile(rho_of("2", line64))
    assert profile == {"min": 2.0, "max": 2.0, "mean": 2.0}


def test_reverse_holder_of_constant(square16):
    balls = [Ball((0.0, 0.0), 1.0), Ball((1.0, -1.0), 0.4)]
    assert reverse_holder_constant(GridFunction.constant(square16, 1.0), 2.0, balls) == 1.0
    with pytest.raises(ValidationError):
        reverse_holder_constant(GridFunction.constant(square16, 1.0), 1.0, balls)


def test_reverse_holder_fails_near_a_half_space():
    constants = []
    for n in (32, 64, 128):
        domain = build_domain(1, 1.0, n)
        V = sample_text("(x1 + abs(x1))/(2*abs(x1))", domain)
        ball = Ball((-0.5,), 0.5 + 0.75 * domain.spacing)
        constants.append(reverse_holder_constant(V, 2.0, [ball]))
        with pytest.raises(ZeroMassBallError):
            reverse_holder_constant(V, 2.0, [Ball((-0.5,), 0.25)])
    assert constants[0] < constants[1] < constants[2]
    assert constants[0] == pytest.approx(np.sqrt(17.0), rel=1e-12)
