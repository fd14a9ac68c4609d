import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riesz_lab.grid import Ball, GridFunction, make_grid
from riesz_lab.young import YoungFunction, dp_membership, is_convex_increasing, luxemburg_avg, luxemburg_rows, young_eval

FAMS = [YoungFunction("power", (1.0,)), YoungFunction("power", (2.5,)), YoungFunction("logpower", (1.0,)),
        YoungFunction("logpower", (0.5,)), YoungFunction("loglog", (1.0, 2.0))]


def test_young_eval_examples():
    P2 = YoungFunction("power", (2.0,))
    assert young_eval(P2, 3.0) == pytest.approx(9.0)
    assert young_eval(P2, 9.0, "inverse") == pytest.approx(3.0, rel=1e-12)
    assert young_eval(YoungFunction("logpower", (1.0,)), 1.0) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        young_eval(P2, -1.0)


@pytest.mark.parametrize("A", FAMS, ids=str)
def test_normalised_convex_increasing(A):
    assert A(0.0) == 0.0
    assert A(1.0) == pytest.approx(1.0, rel=1e-12)
    assert is_convex_increasing(A)


@pytest.mark.parametrize("A", FAMS, ids=str)
def test_inverse_roundtrip(A):
    t = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 60)])
    assert np.allclose(A.inverse(A(t)), t, rtol=1e-10, atol=0)


def test_parse_and_errors():
    assert YoungFunction.parse("loglog:1,2") == YoungFunction("loglog", (1.0, 2.0))
    assert str(YoungFunction.parse("power:1.5")) == "power:1.5"
    for bad in ("power:0.5", "cubic:1", "logpower:-1", "loglog:1", "power:x"):
        with pytest.raises(ValueError):
            YoungFunction.parse(bad)


@pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 3.0])
def test_luxemburg_matches_power_mean(rng, r):
    g = make_grid(2, 16, 4.0)
    A = YoungFunction("power", (r,))
    for _ in range(5):
        f = GridFunction(g, rng.standard_normal(g.size))
        ball = Ball(rng.random(2) * 4, rng.uniform(0.3, 2.0))
        from riesz_lab.grid import ball_points

        vals = np.abs(f.values[ball_points(g, ball)])
        exact = np.mean(vals**r) ** (1 / r)
        assert luxemburg_avg(f, ball, A) == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("A", FAMS, ids=str)
def test_luxemburg_constant_and_indicator(A):
    g = make_grid(2, 16, 4.0)
    assert luxemburg_avg(GridFunction.constant(g, 2.5), Ball((1, 1), 1.2), A) == pytest.approx(2.5, rel=1e-8)
    chi = GridFunction(g, (g.distances_from(np.array([2.0, 2.0])) < 1.5).astype(float))
    assert luxemburg_avg(chi, Ball((2.0, 2.0), 0.8), A) == pytest.approx(1.0, rel=1e-8)
    assert luxemburg_avg(GridFunction.constant(g, 0.0), Ball((1, 1), 1.2), A) == 0.0


def test_luxemburg_empty_ball():
    g = make_grid(2, 8, 4.0)
    with pytest.raises(ValueError):
        luxemburg_avg(GridFunction.constant(g, 1.0), Ball((0.25, 0.25), 0.1), FAMS[0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=12, max_size=12), st.floats(-50, 50), st.sampled_from(FAMS))
def test_luxemburg_homogeneous_and_monotone(vals, c, A):
    row = np.array(vals)
    base = luxemburg_rows(row, A)[0]
    assert luxemburg_rows(c * row, A)[0] == pytest.approx(abs(c) * base, rel=1e-7, abs=1e-12)
    assert luxemburg_rows(row + 1.0, A)[0] >= base * (1 - 1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_dp_examples(p):
    assert dp_membership(YoungFunction("power", (p,)), p).verdict is True
    assert dp_membership(YoungFunction("power", (1.0,)), p).verdict is False
    for eps in (0.1, 0.5, 1.0):
        assert dp_membership(YoungFunction("logpower", (p - 1 + eps,)), p).verdict is True
    assert dp_membership(YoungFunction("logpower", (p - 1,)), p).verdict is False


def test_dp_result_fields():
    res = dp_membership(YoungFunction("logpower", (1.5,)), 2.0)
    verdict, tail = res
    assert verdict is True and tail > 0
    assert res.status == "convergent"
    assert len(res.block_sums) >= 8
    with pytest.raises(ValueError):
        dp_membership(YoungFunction("power", (2.0,)), 1.0)
