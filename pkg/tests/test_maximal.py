import numpy as np
import pytest
from dataclasses import replace

from riesz_lab.critical import CriticalRadiusField
from riesz_lab.grid import GridFunction, ball_stencil, make_grid
from riesz_lab.maximal import (
    MaximalSpec,
    ball_filter,
    brute_force_maximal,
    build_dictionary,
    hardy_littlewood,
    maximal_apply,
    refine_check,
)
from riesz_lab.young import YoungFunction

P1 = YoungFunction("power", (1.0,))


def _rho(grid, values):
    return CriticalRadiusField.from_values(grid, values, samples=500)


def test_dictionary_examples():
    g = make_grid(1, 64, 2 * np.pi)
    D = build_dictionary(g, "all", 16)
    assert len(D) == 64 * 16
    assert D.radii[0] == pytest.approx(0.51 * g.spacing)
    assert D.groups[0].centers is None
    assert D.signature() == build_dictionary(g, "all", 16).signature()
    S = build_dictionary(g, "subsampled", 8, stride=4)
    assert len(S) == 64 + 7 * 16
    with pytest.raises(ValueError):
        build_dictionary(g, "subsampled", 8, stride=5)
    with pytest.raises(ValueError):
        build_dictionary(g, "all", 7)


@pytest.mark.parametrize("kind", ["sum", "max"])
def test_ball_filter_matches_direct(rng, kind):
    g = make_grid(3, 8, 2.0)
    field_ = rng.random(g.shape)
    flat = field_.ravel()
    for r in (0.3, 0.7, 1.0):
        offs = ball_stencil(g, r)
        got = ball_filter(field_, offs, kind).ravel()
        idx = (g.index_coords[:, None, :] + offs[None]) % g.n
        vals = flat[np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), g.shape)]
        want = vals.sum(axis=1) if kind == "sum" else vals.max(axis=1)
        assert np.allclose(got, want, rtol=1e-12, atol=0)


def test_constant_maps_to_constant():
    g = make_grid(2, 16, 4.0)
    D = build_dictionary(g, "all", 8)
    for A in (P1, YoungFunction("power", (2.0,)), YoungFunction("logpower", (1.0,))):
        out = maximal_apply(GridFunction.constant(g, 1.0), MaximalSpec(D, A)).values
        assert np.allclose(out, 1.0, rtol=1e-7)


def test_single_spike_brute_force():
    g = make_grid(1, 32, 4.0)
    v = np.zeros(g.size)
    v[11] = 1.0
    f = GridFunction(g, v)
    spec = MaximalSpec(build_dictionary(g, "all", 16))
    assert np.array_equal(maximal_apply(f, spec).values, brute_force_maximal(f, spec).values)


@pytest.mark.parametrize("mode", ["full", "local", "theta"])
@pytest.mark.parametrize("young", ["power:1", "power:2", "logpower:1"])
def test_brute_force_agreement(rng, mode, young):
    g = make_grid(2, 8, 4.0)
    rho = _rho(g, rng.uniform(0.6, 1.8, g.size))
    spec = MaximalSpec(build_dictionary(g, "all", 8), YoungFunction.parse(young), mode, rho, 1.5)
    f = GridFunction(g, rng.standard_normal(g.size))
    assert np.allclose(maximal_apply(f, spec).values, brute_force_maximal(f, spec).values, rtol=1e-7)


def test_subsampled_brute_force(rng):
    g = make_grid(2, 8, 4.0)
    spec = MaximalSpec(build_dictionary(g, "subsampled", 8, stride=2), YoungFunction.parse("power:1.5"))
    f = GridFunction(g, rng.standard_normal(g.size))
    assert np.allclose(maximal_apply(f, spec).values, brute_force_maximal(f, spec).values, rtol=1e-12)


def test_domination_properties(rng):
    g = make_grid(2, 16, 4.0)
    D = build_dictionary(g, "all", 10)
    rho = _rho(g, rng.uniform(0.3, 1.5, g.size))
    f = GridFunction(g, rng.standard_normal(g.size))
    full = maximal_apply(f, MaximalSpec(D)).values
    assert np.all(full >= np.abs(f.values) - 1e-15)
    loc = maximal_apply(f, MaximalSpec(D, P1, "local", rho)).values
    assert np.all(loc <= full + 1e-15)
    assert np.all(loc >= np.abs(f.values) - 1e-15)
    prev = full
    for theta in (0.0, 0.5, 1.0, 3.0):
        cur = maximal_apply(f, MaximalSpec(D, P1, "theta", rho, theta)).values
        if theta == 0:
            assert np.array_equal(cur, full)
        assert np.all(cur <= prev + 1e-15)
        prev = cur


def test_sublinear(rng):
    g = make_grid(2, 16, 4.0)
    D = build_dictionary(g, "all", 10)
    spec = MaximalSpec(D)
    for _ in range(5):
        f, h = rng.standard_normal((2, g.size))
        lhs = maximal_apply(GridFunction(g, f + h), spec).values
        rhs = maximal_apply(GridFunction(g, f), spec).values + maximal_apply(GridFunction(g, h), spec).values
        assert np.all(lhs <= rhs + 1e-12)


def test_young_monotonicity_and_composition(rng):
    g = make_grid(2, 16, 4.0)
    D = build_dictionary(g, "all", 10)
    w = GridFunction(g, rng.random(g.size) ** 4)
    m1 = maximal_apply(w, MaximalSpec(D)).values
    m2 = maximal_apply(w, MaximalSpec(D, YoungFunction("power", (2.0,)))).values
    mm = hardy_littlewood(w, D, times=2).values
    assert np.all(m1 <= m2 * (1 + 1e-12))
    assert np.all(mm >= m1 - 1e-15)
    assert np.all(np.isfinite(mm / m2))


def test_refine_check_converges_on_smooth_data():
    g = make_grid(1, 128, 2 * np.pi)
    f = GridFunction(g, 2 + np.sin(g.coords[:, 0]))
    changes = [refine_check(f, MaximalSpec(build_dictionary(g, "all", k))) for k in (8, 16, 32)]
    assert changes[0] > changes[1] > changes[2]
    assert changes[2] < 0.01


def test_spec_validation(rng):
    g = make_grid(2, 8, 4.0)
    D = build_dictionary(g, "all", 8)
    with pytest.raises(ValueError):
        MaximalSpec(D, P1, "local")
    with pytest.raises(ValueError):
        MaximalSpec(D, P1, "theta", np.ones(g.size), -1.0)
    with pytest.raises(ValueError):
        MaximalSpec(D, P1, "bogus")
    other = make_grid(2, 16, 4.0)
    with pytest.raises(ValueError):
        maximal_apply(GridFunction.constant(other, 1.0), MaximalSpec(D))
    spec = MaximalSpec(D, P1, "theta", np.ones(g.size), 2.0, 1)
    assert spec.describe() == "theta:power:1:theta=2+M^1"
    assert replace(spec, theta=0.0).describe() == "theta:power:1:theta=0+M^1"


def test_fefferman_stein_running_constant_stabilises(rng):
    g = make_grid(1, 64, 2 * np.pi)
    D = build_dictionary(g, "all", 16)
    spec = MaximalSpec(D)
    run = []
    best = 0.0
    for _ in range(400):
        f = GridFunction(g, rng.standard_normal(g.size))
        w = GridFunction(g, np.exp(2 * rng.standard_normal(g.size)))
        Mf = maximal_apply(f, spec).values
        Mw = maximal_apply(w, spec).values
        ratio = np.sum(Mf**2 * w.values) / np.sum(f.values**2 * Mw)
        best = max(best, ratio)
        run.append(best)
    assert abs(run[-1] / run[199] - 1) < 0.05
