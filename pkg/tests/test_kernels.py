import numpy as np
import pytest

from riesz_lab.critical import CriticalRadiusField
from riesz_lab.grid import GridFunction, make_grid
from riesz_lab.kernels import (
    annulus_slice,
    annulus_slice_norm,
    check_condition,
    comparison_check,
    draw_samples,
    g_function,
)
from riesz_lab.operators import (
    OperatorKernel,
    Identity,
    assemble_classical,
    assemble_schrodinger,
    build_operator,
    kernel_of,
)


@pytest.fixture(scope="module")
def yukawa(unit_potential_12):
    grid, V, L, rho = unit_potential_12
    return grid, V, L, rho, kernel_of(build_operator(L, "Linv"))


@pytest.fixture(scope="module")
def riesz1(unit_potential_12):
    grid, V, L, rho = unit_potential_12
    return kernel_of(build_operator(L, "R1:0")), kernel_of(assemble_classical(grid, "Riesz1", 0))


def test_annulus_identity_and_constant():
    g = make_grid(3, 8, 4.0)
    K = kernel_of(Identity(g))
    assert annulus_slice_norm(K, 0, 0, 0.6, 2.0) == 0.0
    g = make_grid(3, 16, 16.0)
    ones = OperatorKernel(g, np.ones((g.size, 8)), "one")
    R = 3.5
    val = annulus_slice_norm(ones, 0, 3, R, 2.0)
    exact = (4 * np.pi / 3 * 7 * R**3) ** 0.5
    assert val == pytest.approx(exact, rel=0.1)


def test_annulus_errors():
    g = make_grid(3, 8, 4.0)
    K = kernel_of(Identity(g))
    with pytest.raises(ValueError):
        annulus_slice(K, 0, 1, 1.0, 2.0)
    with pytest.raises(ValueError):
        annulus_slice(K, 0, 1, 0.5, 1.0)
    with pytest.raises(ValueError, match="empty"):
        annulus_slice(K, 0, 1, 0.1, 2.0, mode="ring")


def test_samples_obey_constraints(unit_potential_12):
    grid, _, _, rho = unit_potential_12
    for cond in ("A_s", "A_s_prime", "B_s", "C_s"):
        x0, y, R = draw_samples(grid, cond, rho.values, 300, seed=4)
        dist = grid.distance(grid.coords[x0], grid.coords[y])
        assert np.all(R < grid.side / 4) and np.all(R >= grid.spacing)
        if cond == "A_s_prime":
            assert np.all((dist > R) & (dist < 2 * R))
        else:
            assert np.all(dist < R / 2)
        if cond == "B_s":
            assert np.all(R <= rho.values[x0])


def test_as_monotone_in_N(riesz1, unit_potential_12):
    K, _ = riesz1
    rho = unit_potential_12[3]
    consts = [check_condition(K, "A_s", rho, 2.0, N, samples=400, seed=3).empirical_constant for N in (0, 1, 2, 4)]
    assert all(np.isfinite(consts))
    assert consts == sorted(consts)


def test_classical_riesz_size_condition():
    g = make_grid(3, 16, 4.0)
    K = kernel_of(assemble_classical(g, "Riesz1", 0))
    rep = check_condition(K, "A_s", np.full(g.size, g.side / 2), 2.0, 0.0, samples=300, seed=1)
    assert np.isfinite(rep.empirical_constant) and rep.empirical_constant > 0


def test_bs_zero_for_identical_kernels(riesz1, unit_potential_12):
    K, _ = riesz1
    rep = check_condition(K, "B_s", unit_potential_12[3], K0=K, samples=200)
    assert rep.empirical_constant == 0.0
    with pytest.raises(ValueError):
        check_condition(K, "B_s", unit_potential_12[3])


def test_bs_records_both_readings(riesz1, unit_potential_12):
    K, K0 = riesz1
    rep = check_condition(K, "B_s", unit_potential_12[3], 2.0, delta=0.5, K0=K0, samples=300, seed=2)
    assert np.isfinite(rep.empirical_constant)
    assert rep.extra["alternate_reading"] == "rho(y)"
    assert np.isfinite(rep.extra["alternate_constant"])
    inf = check_condition(K, "B_inf", unit_potential_12[3], delta=0.5, K0=K0, samples=300, seed=2)
    assert inf.extra["alternate_reading"] == "rho(x0)"


def test_cs_on_vgl_half(unit_potential_12):
    grid, V, L, rho = unit_potential_12
    q = 2.0
    K = kernel_of(build_operator(L, "VgL:0.5"))
    rep = check_condition(K, "C_s", rho, 2 * q, N=1.0, delta=2 - grid.d / q, samples=400, seed=5)
    assert np.isfinite(rep.empirical_constant) and rep.empirical_constant > 0
    assert set(rep.worst_sample) == {"x0", "y", "R"}


def test_pointwise_conditions(yukawa):
    grid, V, L, rho, G = yukawa
    rep = check_condition(G, "A_inf", rho, N=2.0, samples=500, seed=1)
    assert np.isfinite(rep.empirical_constant)


def test_as_and_as_prime_comparable(yukawa):
    grid, V, L, rho, G = yukawa
    a = check_condition(G, "A_s", rho, 2.0, 1.0, samples=400, seed=8).empirical_constant
    b = check_condition(G, "A_s_prime", rho, 2.0, 1.0, samples=400, seed=8).empirical_constant
    assert np.isfinite(a) and np.isfinite(b)
    assert 1 / 100 <= a / b <= 100


def test_reports_translation_invariant(yukawa):
    grid, V, L, rho, G = yukawa
    x0, y, R = draw_samples(grid, "A_s", rho.values, 100, seed=9)
    shift = grid.ravel(grid.index_coords + np.array([3, 1, 5]))
    a = check_condition(G, "A_s", rho, 2.0, 1.0, sample_set=(x0, y, R)).empirical_constant
    b = check_condition(G, "A_s", rho, 2.0, 1.0, sample_set=(shift[x0], shift[y], R)).empirical_constant
    assert a == pytest.approx(b, rel=1e-9)


def test_g_function_examples():
    g = make_grid(3, 96, 96.0)
    V = GridFunction.constant(g, 2.0)
    y = int(g.ravel(np.array([[48, 0, 0]]))[0])
    r = 48.0
    assert g_function(V, 0, y) == pytest.approx(2.0 * 4 * np.pi * r / 4, rel=0.1)
    small = make_grid(3, 16, 8.0)
    W = GridFunction(small, np.where(np.abs(small.coords[:, 0] - 4.0) < 1.0, 1.0, 0.0))
    yy = int(small.ravel(np.array([[0, 5, 0]]))[0])
    assert g_function(W, 0, yy) == 0.0
    U = GridFunction(small, np.random.default_rng(1).random(small.size))
    assert g_function(GridFunction(small, 2 * U.values), 0, yy) == pytest.approx(2 * g_function(U, 0, yy))
    with pytest.raises(ValueError):
        g_function(U, 0, 1)


def test_comparison_r1_trend_in_small_potential():
    g = make_grid(3, 8, 4.0)
    diffs = []
    for eps in (1e-2, 1e-3, 1e-4):
        V = GridFunction.constant(g, eps)
        L = assemble_schrodinger(g, V)
        K = kernel_of(build_operator(L, "R1:0"))
        K0 = kernel_of(assemble_classical(g, "Riesz1", 0))
        rho = CriticalRadiusField.from_values(g, np.full(g.size, g.side / 2), samples=200)
        rep = comparison_check("CompR1", K, K0, V, rho, 2.0, samples=100, seed=1)
        diffs.append(rep.extra["max_difference"])
    assert diffs[0] > diffs[1] > diffs[2]


def test_comparison_r2(unit_potential_12):
    grid, V, L, rho = unit_potential_12
    K = kernel_of(build_operator(L, "R2:00"))
    K0 = kernel_of(assemble_classical(grid, "Riesz2", 0, 0))
    G = kernel_of(build_operator(L, "Linv"))
    rep = comparison_check("CompR2", K, K0, V, rho, 2.0, samples=100, seed=2, gamma_kernel=G,
                           classical=assemble_classical(grid, "Riesz2", 0, 0))
    assert rep.parameters["delta"] == pytest.approx(0.5)
    assert np.isfinite(rep.empirical_constant)
    assert rep.extra["min_rhs"] > 0
    rep1 = comparison_check("CompR1", kernel_of(build_operator(L, "R1:0")),
                            kernel_of(assemble_classical(grid, "Riesz1", 0)), V, rho, 2.0, samples=100)
    assert np.isfinite(rep1.empirical_constant) and rep1.extra["min_rhs"] > 0
    with pytest.raises(ValueError):
        comparison_check("CompR2", K, K0, V, rho, 2.0)
    with pytest.raises(ValueError):
        comparison_check("CompR3", K, K0, V, rho, 2.0)


def test_condition_report_serialises(riesz1, unit_potential_12):
    import json

    K, _ = riesz1
    rep = check_condition(K, "A_s", unit_potential_12[3], samples=50)
    data = json.loads(json.dumps(rep.to_dict()))
    assert len(data["worst_sample"]["x0"]) == 3 and data["sample_count"] == 50
