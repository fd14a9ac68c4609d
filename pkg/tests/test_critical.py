import numpy as np
import pytest

from riesz_lab.critical import (
    CriticalRadiusField,
    ShellSums,
    critical_covering,
    default_shrink,
    fit_rho_constants,
    gamma0,
    potential_growth_check,
    rh_constant,
    rh_scan,
    rho_field,
    trucho_check,
    trucho_exhaustive,
)
from riesz_lab.grid import Ball, GridFunction, ball_mask, make_grid
from riesz_lab.maximal import build_dictionary

OMEGA3 = 4 * np.pi / 3


def test_shell_sums_match_ball_mass(rng):
    g = make_grid(3, 8, 2.0)
    V = GridFunction(g, rng.random(g.size))
    S = ShellSums(V)
    for x in (0, 77, 300):
        for r in (0.2, 0.5, 0.71, 1.0):
            m = np.sum(V.values[ball_mask(g, Ball(g.coords[x], r))]) * g.cell_volume
            assert S.mass(r, [x])[0] == pytest.approx(m, rel=1e-12)


@pytest.mark.parametrize("c", [0.5, 1.0, 4.0])
def test_rho_constant_potential(c):
    g = make_grid(3, 16, 4.0)
    rho = rho_field(GridFunction.constant(g, c))
    exact = (OMEGA3 * c) ** -0.5
    assert np.ptp(rho.values) < 2 * g.spacing
    assert np.all(np.abs(rho.values - exact) <= 2 * g.spacing)
    assert rho.fitted_N0 == 1
    assert rho.fitted_C0 <= 1 + 1e-9


def test_rho_scaling_by_four(rng):
    g = make_grid(3, 16, 4.0)
    base = 0.125 + 0.125 * np.cos(2 * np.pi * g.coords[:, 0] / 4.0) ** 2
    r1 = rho_field(GridFunction(g, base)).values
    r4 = rho_field(GridFunction(g, 4 * base)).values
    assert np.all(np.abs(r4 - r1 / 2) <= 2 * g.spacing)


def test_rho_errors():
    g = make_grid(3, 8, 2.0)
    with pytest.raises(ValueError):
        rho_field(GridFunction.constant(g, 0.0))
    with pytest.raises(ValueError):
        rho_field(GridFunction.constant(make_grid(2, 8, 2.0), 1.0))


def test_rho_cap_recorded():
    g = make_grid(3, 8, 2.0)
    rho = rho_field(GridFunction.constant(g, 1e-4))
    assert rho.capped_fraction == 1.0
    assert np.all(rho.values == pytest.approx(g.side / 2))


def test_fitted_constants_hold_on_pairs(rng):
    g = make_grid(3, 8, 4.0)
    vals = rng.uniform(0.5, 2.0, g.size)
    c0, n0, _ = fit_rho_constants(g, vals, samples=3000, seed=1)
    assert 1 <= n0 <= 12 and c0 >= 1
    from riesz_lab.critical import _pair_sample

    x, y = _pair_sample(g, 3000, 1)
    dist = g.distance(g.coords[x], g.coords[y])
    upper = c0 * vals[x] * (1 + dist / vals[x]) ** (n0 / (n0 + 1))
    lower = vals[x] * (1 + dist / vals[x]) ** (-n0) / c0
    assert np.all(vals[y] <= upper * (1 + 1e-9)) and np.all(vals[y] >= lower * (1 - 1e-9))


def test_rh_constant_examples():
    g = make_grid(3, 8, 4.0)
    D = build_dictionary(g, "all", 8)
    assert rh_constant(GridFunction.constant(g, 3.0), 1.5, D) == pytest.approx(1.0, rel=1e-12)
    V = GridFunction(g, 1 + np.sin(2 * np.pi * g.coords[:, 0] / 4.0))
    best, skipped, (c, r) = rh_scan(V, 1.5, D)
    from riesz_lab.grid import ball_stencil, stencil_indices

    brute = 0.0
    for center, radius in D.balls():
        vals = V.values[stencil_indices(g, [center], ball_stencil(g, radius))[0]]
        if vals.mean() > 0:
            brute = max(brute, np.mean(vals**1.5) ** (1 / 1.5) / vals.mean())
    assert best == pytest.approx(brute, rel=1e-10)
    half = GridFunction(g, (g.coords[:, 0] < 2.0).astype(float))
    best, skipped, _ = rh_scan(half, 2.0, D)
    assert best >= 1 and skipped > 0
    with pytest.raises(ValueError):
        rh_constant(GridFunction.constant(g, 0.0), 2.0, D)


def test_potential_growth_constant_potential():
    g = make_grid(3, 16, 4.0)
    V = GridFunction.constant(g, 1.0)
    rho = rho_field(V)
    rep = potential_growth_check(V, 3.0, rho, samples=500)
    assert np.isfinite(rep.empirical_constant) and rep.condition == "LemV"
    lo, hi = rep.extra["crossing_values"]
    assert 0.9 <= lo <= hi <= 1.1
    assert rep.extra["doubling_constant"] == pytest.approx(2**3, rel=0.35)
    assert "x0" in rep.worst_sample


def test_gamma0_examples():
    assert gamma0(1, 1) == pytest.approx((-3 + np.sqrt(33)) / 12, abs=1e-9)
    for c0 in (100, 400):
        assert gamma0(c0, 2) == pytest.approx(1 / (3 * c0), rel=0.05)
    vals = [[gamma0(c, n) for n in (1, 2, 4)] for c in (1, 2, 8)]
    assert np.all(np.diff(vals, axis=0) < 0) and np.all(np.diff(vals, axis=1) < 0)
    for c, n in ((1, 1), (3, 2), (1.5, 5)):
        g = gamma0(c, n)
        assert 3 * g * c * (1 + 2 * g) ** n <= 1 + 1e-9
        assert 3 * 1.01 * g * c * (1 + 2 * 1.01 * g) ** n > 1
    with pytest.raises(ValueError):
        gamma0(0.5, 1)


def test_default_shrink_takes_minimum():
    assert default_shrink(1, 1, 3) == pytest.approx(min(gamma0(1, 1), 1 / (2 * (5 * np.sqrt(3)) ** 2)))


def test_covering_constant_quarter():
    g = make_grid(3, 8, 4.0)
    rho = CriticalRadiusField.from_values(g, np.full(g.size, 1.0))
    rep = critical_covering(rho, 1.0)
    assert rep.covered_fraction == 1.0
    assert len(rep.balls) <= 4**3
    counts = [rep.overlap_max[s] for s in (1, 2, 4, 8)]
    assert counts[0] >= 1 and counts == sorted(counts)
    assert rep.fitted_N1 >= 0
    assert all(rep.overlap_max[s] <= rep.fitted_C * s**rep.fitted_N1 * (1 + 1e-9) for s in (1, 2, 4, 8))


def test_covering_errors():
    g = make_grid(3, 8, 4.0)
    rho = CriticalRadiusField.from_values(g, np.full(g.size, 1.0))
    with pytest.raises(ValueError):
        critical_covering(rho, 0.1)
    with pytest.raises(ValueError):
        critical_covering(rho, 1.5)


def test_trucho_constant_field():
    g = make_grid(3, 8, 4.0)
    rho = CriticalRadiusField.from_values(g, np.full(g.size, 0.8))
    for rep in (trucho_check(rho, 500), trucho_exhaustive(rho)):
        assert rep.extra["part_i"] <= 1 + 1e-9
        assert rep.extra["part_ii"] <= 1 + 1e-9


def test_trucho_sampled_vs_exhaustive(rng):
    g = make_grid(3, 8, 4.0)
    base = 0.5 + 0.5 * np.cos(2 * np.pi * g.coords[:, 1] / 4.0) ** 2
    rho = rho_field(GridFunction(g, base))
    ex = trucho_exhaustive(rho)
    sa = trucho_check(rho, 3000)
    assert np.isfinite(ex.empirical_constant)
    assert sa.extra["part_i"] <= ex.extra["part_i"] * (1 + 1e-12)
    assert sa.extra["part_ii"] <= ex.extra["part_ii"] * (1 + 1e-12)
    assert sa.extra["part_i"] >= 0.9 * ex.extra["part_i"]
