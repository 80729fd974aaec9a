import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rhoweights.errors import (
    CenterOutsideDomainError,
    EmptyBallError,
    InvalidDimensionError,
    NonFiniteValuesError,
    NonPositiveSizeError,
    ValidationError,
)
from rhoweights.grid import (
    Ball,
    GridFunction,
    PrefixSums,
    _lattice_count,
    ball_average,
    ball_average_direct,
    ball_mask,
    build_domain,
    centered_ball_counts,
    centered_ball_sums,
    centered_ball_sums_varying,
    discrete_measure,
    integrate,
)


def test_line_centers(line4):
    assert line4.spacing == 0.5
    np.testing.assert_array_equal(line4.axis_centers, [-0.75, -0.25, 0.25, 0.75])


def test_square_size():
    domain = build_domain(2, 2.0, 8)
    assert domain.size == 64
    assert domain.spacing == 0.5
    assert domain.centers.shape == (64, 2)


@pytest.mark.parametrize(
    "args, error",
    [
        ((4, 1.0, 4), InvalidDimensionError),
        ((0, 1.0, 4), InvalidDimensionError),
        ((1, 0.0, 4), NonPositiveSizeError),
        ((1, float("inf"), 4), NonPositiveSizeError),
        ((1, 1.0, 1), NonPositiveSizeError),
        ((1, 1.0, 2.5), NonPositiveSizeError),
    ],
)
def test_build_domain_contract(args, error):
    with pytest.raises(error):
        build_domain(*args)


def test_integrate_constants(line4):
    assert integrate(GridFunction.constant(line4, 1.0)) == 2.0
    assert integrate(GridFunction.constant(line4, 0.0)) == 0.0


def test_integrate_abs_matches_closed_form():
    domain = build_domain(1, 1.0, 1000)
    f = GridFunction.from_values(domain, np.abs(domain.axis_centers))
    assert integrate(f) == pytest.approx(1.0, abs=1e-3)


def test_from_values_contract(line4):
    with pytest.raises(NonFiniteValuesError):
        GridFunction.from_values(line4, [0.0, np.nan, 1.0, 2.0])
    with pytest.raises(ValidationError):
        GridFunction.from_values(line4, [1.0, 2.0])
    f = GridFunction.from_values(line4, [1.0, -2.0, 3.0, 4.0])
    assert not f.nonneg
    assert f.abs().nonneg
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_arithmetic_needs_one_domain(line4):
    other = build_domain(1, 2.0, 4)
    with pytest.raises(ValidationError):
        GridFunction.constant(line4, 1.0) + GridFunction.constant(other, 1.0)
    g = 2.0 * GridFunction.constant(line4, 3.0) + 1.0
    np.testing.assert_array_equal(g.values, [7.0] * 4)
    np.testing.assert_array_equal(g.reciprocal().values, [1 / 7.0] * 4)


def test_arithmetic_with_arrays(line4):
    g = GridFunction.constant(line4, 2.0) * np.array([0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(g.values, [0.0, 2.0, 4.0, 6.0])
    with pytest.raises(ValidationError):
        GridFunction.constant(line4, 1.0) * np.ones(3)


def test_cell_index(line4):
    assert line4.cell_index((0.0,)) == 2
    assert line4.cell_index((-1.0,)) == 0
    assert line4.cell_index((1.0,)) == 3
    with pytest.raises(CenterOutsideDomainError):
        line4.cell_index((1.5,))


def test_ball_needs_positive_radius():
    with pytest.raises(NonPositiveSizeError):
        Ball((0.0,), 0.0)
    assert Ball((0.0, 1.0), 1.0).dilate(3.0).radius == 3.0


def test_contains_ball(line4):
    assert line4.contains_ball(Ball((0.0,), 1.0))
    assert not line4.contains_ball(Ball((0.5,), 0.6))


def test_clipped_average_example(line4):
    f = GridFunction.from_values(line4, [1.0, 2.0, 3.0, 4.0])
    ball = Ball((0.0,), 0.5)
    np.testing.assert_array_equal(ball_mask(line4, ball), [False, True, True, False])
    assert ball_average(f, ball) == 2.5
    assert ball_average_direct(f, ball) == 2.5


def test_average_of_constant(square16):
    f = GridFunction.constant(square16, 3.0)
    assert ball_average(f, Ball((0.1, -0.3), 0.9)) == pytest.approx(3.0, rel=1e-14)


def test_ball_between_centers_is_empty(line4):
    f = GridFunction.constant(line4, 1.0)
    ball = Ball((0.0,), 0.2)
    with pytest.raises(EmptyBallError):
        ball_average(f, ball)
    with pytest.raises(EmptyBallError):
        ball_average_direct(f, ball)


def test_full_measure_counts_outside_cells(line4):
    f = GridFunction.constant(line4, 1.0)
    ball = Ball((0.75,), 0.6)
    assert ball_average(f, ball, mode="clipped") == 1.0
    assert ball_average(f, ball, mode="full") == pytest.approx(2.0 / 3.0)
    assert discrete_measure(line4, ball) == 1.0
    assert discrete_measure(line4, ball, mode="full") == 1.5


def test_box_sum(square16, rng):
    f = GridFunction.from_values(square16, rng.random(square16.size))
    prefix = PrefixSums.build(f)
    grid = f.as_grid()
    assert prefix.box_sum((2, 3), (7, 11)) == pytest.approx(grid[2:7, 3:11].sum(), rel=1e-12)
    assert prefix.box_sum((5, 5), (5, 9)) == 0.0


def test_prefix_is_built_once(square16, rng):
    f = GridFunction.from_values(square16, rng.normal(size=square16.size))
    assert f.prefix is f.prefix
    ball = Ball((0.3, -0.2), 1.1)
    assert ball_average(f, ball) == ball_average(f, ball, prefix=PrefixSums.build(f))


@given(
    i=st.integers(6, 14),
    k=st.integers(0, 10),
    radius_cells=st.floats(0.6, 5.5),
    seed=st.integers(0, 2**16),
)
def test_average_is_translation_invariant(i, k, radius_cells, seed):
    domain = build_domain(1, 2.0, 32)
    f = GridFunction.from_values(domain, np.random.default_rng(seed).random(domain.size))
    shifted = f.with_values(np.roll(f.values, k))
    radius = radius_cells * domain.spacing
    here = ball_average(f, Ball(tuple(domain.centers[i]), radius))
    there = ball_average(shifted, Ball(tuple(domain.centers[i + k]), radius))
    assert there == pytest.approx(here, rel=1e-12)


@given(
    a=st.floats(0.0, 5.0),
    b=st.floats(0.0, 5.0),
    x=st.floats(-1.5, 1.5),
    y=st.floats(-1.5, 1.5),
    radius=st.floats(0.3, 2.0),
    seed=st.integers(0, 2**16),
)
def test_average_is_linear_and_monotone(square16, a, b, x, y, radius, seed):
    rng = np.random.default_rng(seed)
    f = GridFunction.from_values(square16, rng.random(square16.size))
    g = GridFunction.from_values(square16, rng.random(square16.size))
    ball = Ball((x, y), radius)
    if not ball_mask(square16, ball).any():
        return
    combined = ball_average(a * f + b * g, ball)
    assert combined == pytest.approx(a * ball_average(f, ball) + b * ball_average(g, ball), rel=1e-12, abs=1e-14)
    assert ball_average(f, ball) <= ball_average(f + g, ball)


def _random_case(rng):
    dim = int(rng.integers(1, 4))
    n = int(rng.integers(2, 13 if dim < 3 else 8))
    domain = build_domain(dim, float(rng.uniform(0.5, 3.0)), n)
    f = GridFunction.from_values(domain, rng.uniform(0.5, 2.0, domain.size) * rng.choice([-1.0, 1.0], domain.size))
    center = tuple(rng.uniform(-domain.half_width, domain.half_width, dim))
    if rng.random() < 0.3:
        center = tuple(domain.centers[rng.integers(domain.size)])
    radius = float(rng.uniform(0.3, 3.0) * domain.spacing * rng.integers(1, 4))
    return f, Ball(center, radius)


def test_fast_path_matches_direct_summation():
    rng = np.random.default_rng(20240917)
    checked = 0
    while checked < 10_000:
        f, ball = _random_case(rng)
        if not ball_mask(f.domain, ball).any():
            continue
        mode = "full" if checked % 2 else "clipped"
        fast = ball_average(f, ball, mode=mode)
        direct = ball_average_direct(f, ball, mode=mode)
        assert fast == pytest.approx(direct, rel=1e-12, abs=1e-15)
        checked += 1


@given(
    dim=st.integers(1, 3),
    n=st.integers(2, 9),
    radius_cells=st.floats(0.2, 6.0),
    seed=st.integers(0, 2**16),
)
def test_centered_sums_match_masks(dim, n, radius_cells, seed):
    domain = build_domain(dim, 1.0, n)
    values = np.random.default_rng(seed).random(domain.size)
    radius = radius_cells * domain.spacing
    sums = centered_ball_sums(domain, values, radius)
    counts = centered_ball_counts(domain, radius)
    for cell in range(domain.size):
        mask = ball_mask(domain, Ball(tuple(domain.centers[cell]), radius))
        assert sums[cell] == pytest.approx(values[mask].sum(), rel=1e-12, abs=1e-14)
        assert counts[cell] == np.count_nonzero(mask)
    full = centered_ball_counts(domain, radius, mode="full")
    assert full[0] == _lattice_count(domain, Ball(tuple(domain.centers[0]), radius))


@given(dim=st.integers(1, 3), n=st.integers(2, 8), seed=st.integers(0, 2**16))
def test_varying_radii_match_masks(dim, n, seed):
    domain = build_domain(dim, 1.0, n)
    rng = np.random.default_rng(seed)
    values = rng.random(domain.size)
    radii = rng.uniform(0.2, 4.0, domain.size) * domain.spacing
    cells = np.flatnonzero(rng.random(domain.size) < 0.5)
    sums, counts = centered_ball_sums_varying(domain, values, radii, cells)
    for k, cell in enumerate(cells):
        mask = ball_mask(domain, Ball(tuple(domain.centers[cell]), radii[cell]))
        assert sums[k] == pytest.approx(values[mask].sum(), rel=1e-12, abs=1e-14)
        assert counts[k] == np.count_nonzero(mask)
