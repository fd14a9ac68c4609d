"""Empirical constants of weighted inequalities ``int |Tf|^p w <= C int |f|^p Mw``,
envelopes of damped maximal functions of indicators, and integrability trends."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .critical import CriticalRadiusField
from .grid import Ball, Grid, GridFunction, ball_mask
from .maximal import MaximalSpec, build_dictionary, maximal_apply
from .young import YoungFunction

FAMILIES = ("fourier", "spike", "indicator", "power")
LAMBDA_POINTS = 40


# ---------------------------------------------------------------- ratios


class MaximalTransform:
    """A maximal operator in the role of ``T`` (sublinear, no adjoint)."""

    def __init__(self, spec):
        self.spec = spec
        self.grid = spec.dictionary.grid
        self.name = spec.describe()

    def apply(self, a):
        return maximal_apply(GridFunction(self.grid, a), self.spec).values


def _weighted_pnorm_p(vals, p, weight, h_d):
    return float(np.sum(np.abs(vals) ** p * weight) * h_d)


def strong_ratio(T, spec, p, f, w, Mw=None):
    """``int |Tf|^p w / int |f|^p (Mw)``."""
    if p < 1:
        raise ValueError(f"strong type needs p >= 1, got {p}")
    Mw = maximal_apply(w, spec) if Mw is None else Mw
    h_d = f.grid.cell_volume
    den = _weighted_pnorm_p(f.values, p, Mw.values, h_d)
    if not den > 0:
        raise ValueError("zero denominator: f vanishes where the maximal weight lives")
    return _weighted_pnorm_p(T.apply(f.values), p, w.values, h_d) / den


def lambda_grid(Tf_max, points=LAMBDA_POINTS):
    return np.geomspace(1e-3, 1.0, points) * Tf_max


def weak_ratio(T, spec, f, w, lambdas=None, Mw=None):
    """``max_lambda lambda * w({|Tf| > lambda}) / int |f| (Mw)``."""
    Mw = maximal_apply(w, spec) if Mw is None else Mw
    h_d = f.grid.cell_volume
    den = _weighted_pnorm_p(f.values, 1.0, Mw.values, h_d)
    if not den > 0:
        raise ValueError("zero denominator: f vanishes where the maximal weight lives")
    Tf = np.abs(T.apply(f.values))
    if lambdas is None:
        if Tf.max() == 0:
            return 0.0
        lambdas = lambda_grid(Tf.max())
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0):
        raise ValueError("levels must be positive")
    order = np.argsort(Tf)
    sorted_tf = Tf[order]
    tail_w = np.concatenate([np.cumsum(w.values[order][::-1])[::-1], [0.0]])
    above = tail_w[np.searchsorted(sorted_tf, lambdas, side="right")] * h_d
    return float(np.max(lambdas * above) / den)


# ---------------------------------------------------------------- trial families


def _smooth_field(grid, rng, kmax):
    """Random real trigonometric polynomial with frequencies ``|k_j| <= kmax``."""
    coef = np.zeros(grid.shape, dtype=complex)
    idx = np.fft.fftfreq(grid.n, 1.0 / grid.n).astype(int)
    keep = np.abs(idx) <= kmax
    mask = np.ones(grid.shape, dtype=bool)
    for j in range(grid.d):
        shape = [1] * grid.d
        shape[j] = grid.n
        mask = mask & keep.reshape(shape)
    coef[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    return np.fft.ifftn(coef).real.ravel() * grid.size


def _bump(grid, rng, width):
    c = grid.coords[rng.integers(grid.size)]
    dist = grid.distances_from(c)
    return np.exp(-0.5 * (dist / width) ** 2)


def _width(grid, rng):
    """Log-uniform length between one cell and side/8."""
    return float(np.exp(rng.uniform(np.log(grid.spacing), np.log(grid.side / 8))))


def _ball_indicator(grid, rng, center=None):
    c = grid.coords[rng.integers(grid.size)] if center is None else center
    r = min(_width(grid, rng) * 1.5, grid.side / 2)
    return ball_mask(grid, Ball(c, r)).astype(float), c, r


def draw_trial(grid, family, rng):
    """One ``(f, w)`` pair of arrays from a named family."""
    if family == "fourier":
        kmax = int(rng.integers(1, max(2, grid.n // 8) + 1))
        f = _smooth_field(grid, rng, kmax)
        g = _smooth_field(grid, rng, kmax)
        w = np.exp(g / (np.std(g) + 1e-300))
    elif family == "spike":
        f = _bump(grid, rng, _width(grid, rng)) * rng.choice([-1, 1])
        f += 0.5 * _bump(grid, rng, _width(grid, rng)) * rng.choice([-1, 1])
        w = _bump(grid, rng, _width(grid, rng))
        if rng.random() < 0.5:
            w = np.zeros(grid.size)  # single-cell spike weight
        w[rng.integers(grid.size)] += 1.0
    elif family == "indicator":
        w, c, r = _ball_indicator(grid, rng)
        w = w + 1e-3 * rng.random()
        # odd pair of indicators straddling the weight, or a plain indicator
        f, _, _ = _ball_indicator(grid, rng)
        if rng.random() < 0.5:
            shift = np.zeros(grid.d)
            shift[rng.integers(grid.d)] = r
            plus = ball_mask(grid, Ball((c + shift) % grid.side, r)).astype(float)
            f = plus - ball_mask(grid, Ball((c - shift) % grid.side, r))
    elif family == "power":
        c = grid.coords[rng.integers(grid.size)]
        dist = grid.distances_from(c)
        eps = _width(grid, rng)
        alpha = rng.uniform(-0.95 * grid.d, 2.0 * grid.d)
        w = (eps + dist) ** alpha
        w /= w.max()
        f = _smooth_field(grid, rng, 2) * (eps + dist) ** rng.uniform(-0.5, 0.5)
    else:
        raise ValueError(f"unknown trial family {family!r}")
    return np.asarray(f, dtype=float), np.asarray(w, dtype=float)


# ---------------------------------------------------------------- estimation


@dataclass
class InequalityTask:
    """``operator`` and ``maximal`` with exponent ``p``; ``kind`` is "strong" or "weak".

    ``trials`` random pairs are split evenly over ``families``; each random weight is
    paired with a matched ``f`` by ``match_steps`` steps of the nonlinear power method.
    ``restarts`` best trials are then refined by ``steps`` of coordinate ascent.
    """

    operator: object
    maximal: MaximalSpec
    p: float = 2.0
    kind: str = "strong"
    trials: int = 500
    families: tuple = FAMILIES
    match_steps: int = 40
    restarts: int = 2
    steps: int = 200
    seed: int = 0
    task_index: int = 0
    name: str = "task"

    def __post_init__(self):
        if self.kind not in ("strong", "weak"):
            raise ValueError(f"kind must be 'strong' or 'weak', got {self.kind!r}")
        if self.kind == "strong" and self.p < 1:
            raise ValueError(f"strong type needs p >= 1, got {self.p}")
        if self.kind == "weak" and self.p != 1:
            raise ValueError("weak type is evaluated with p = 1")
        for fam in self.families:
            if fam not in FAMILIES:
                raise ValueError(f"unknown trial family {fam!r}")


@dataclass
class ConstantReport:
    best_ratio: float
    argmax: dict
    trace: list
    stability: float
    samples: int
    skipped: int = 0
    family_best: dict = field(default_factory=dict)
    ascent_gain: float = 0.0

    def to_dict(self):
        return {
            "best_ratio": self.best_ratio,
            "argmax": self.argmax,
            "trace": list(self.trace),
            "stability": self.stability,
            "samples": self.samples,
            "skipped": self.skipped,
            "family_best": self.family_best,
            "ascent_gain": self.ascent_gain,
        }


class _Evaluator:
    def __init__(self, task):
        self.task = task
        self.T = task.operator
        try:
            self.Tstar = self.T.adjoint()
        except (AttributeError, NotImplementedError):
            self.Tstar = None  # nonlinear T: no matched f, random trials and ascent only
        self.grid = self.T.grid

    def maximal(self, w):
        return maximal_apply(GridFunction(self.grid, w), self.task.maximal).values

    def ratio(self, f, w, Mw):
        t, h_d = self.task, self.grid.cell_volume
        if t.kind == "strong":
            den = _weighted_pnorm_p(f, t.p, Mw, h_d)
            if not den > 0:
                return None
            return _weighted_pnorm_p(self.T.apply(f), t.p, w, h_d) / den
        den = _weighted_pnorm_p(f, 1.0, Mw, h_d)
        if not den > 0:
            return None
        return weak_ratio(self.T, None, GridFunction(self.grid, f), GridFunction(self.grid, w), Mw=GridFunction(self.grid, Mw))

    def match(self, f, w, Mw):
        """Nonlinear power method for the best ``f`` against a fixed weight (strong type)."""
        p = self.task.p if self.task.kind == "strong" else 2.0
        best_f, best = f, self.ratio(f, w, Mw)
        if best is None or p == 1 or self.Tstar is None:
            return best_f, best
        for _ in range(self.task.match_steps):
            Tf = self.T.apply(f)
            g = self.Tstar.apply(w * np.sign(Tf) * np.abs(Tf) ** (p - 1))
            f = np.sign(g) * (np.abs(g) / Mw) ** (1.0 / (p - 1))
            scale = np.max(np.abs(f))
            if not scale > 0 or not np.isfinite(scale):
                break
            f = f / scale
            r = self.ratio(f, w, Mw)
            if r is None:
                break
            if r > best:
                best_f, best = f, r
        return best_f, best


def _trial(ev, index):
    t = ev.task
    rng = np.random.default_rng(np.random.SeedSequence([t.seed, t.task_index, index]))
    family = t.families[index % len(t.families)]
    f, w = draw_trial(ev.grid, family, rng)
    if not np.all(np.isfinite(f)) or not np.all(np.isfinite(w)) or not np.any(f) or not np.any(w):
        return index, family, None, None, None
    Mw = ev.maximal(w)
    r0 = ev.ratio(f, w, Mw)
    if r0 is None:
        return index, family, None, None, None
    fm, rm = ev.match(f, w, Mw)
    if rm is not None and rm > r0:
        return index, family, rm, fm, w
    return index, family, r0, f, w


def _ascent(ev, f, w, start, rng, steps):
    """Coordinate ascent on cell values of ``f`` and ``w``; a move is kept iff the ratio grows."""
    best = start
    Mw = ev.maximal(w)
    trace = []
    n = ev.grid.size
    for _ in range(steps):
        i = int(rng.integers(n))
        if rng.random() < 0.5:
            g = f.copy()
            move = rng.integers(3)
            if move == 0:
                g[i] = -g[i] if g[i] != 0 else np.max(np.abs(f))
            else:
                g[i] *= (2.0, 0.5)[move - 1]
            r = ev.ratio(g, w, Mw)
            if r is not None and r > best:
                f, best = g, r
        else:
            v = w.copy()
            v[i] = v[i] * rng.choice([4.0, 0.25]) if v[i] > 0 else np.max(w)
            Mv = ev.maximal(v)
            r = ev.ratio(f, v, Mv)
            if r is not None and r > best:
                w, Mw, best = v, Mv, r
        trace.append(best)
    return f, w, best, trace


def estimate_constant(task, threads=1):
    """Best empirical ratio over seeded random trials followed by coordinate ascent."""
    ev = _Evaluator(task)
    idx = range(task.trials)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda i: _trial(ev, i), idx))
    else:
        results = [_trial(ev, i) for i in idx]
    trace, running = [], 0.0
    family_best = {fam: 0.0 for fam in task.families}
    skipped = 0
    kept = []
    for i, fam, r, f, w in results:
        if r is None:
            skipped += 1
        else:
            family_best[fam] = max(family_best[fam], r)
            kept.append((r, i, fam, f, w))
            running = max(running, r)
        trace.append(running)
    if not kept:
        raise ValueError("every trial was degenerate")
    half = trace[max(0, task.trials // 2 - 1)]
    best_random = running
    kept.sort(key=lambda row: (-row[0], row[1]))
    argmax = {"phase": "random", "trial": kept[0][1], "family": kept[0][2]}
    best = best_random
    for k, (r, i, fam, f, w) in enumerate(kept[: task.restarts]):
        rng = np.random.default_rng(np.random.SeedSequence([task.seed, task.task_index, task.trials + k]))
        _, _, r_up, steps_trace = _ascent(ev, f, w, r, rng, task.steps)
        for v in steps_trace:
            running = max(running, v)
            trace.append(running)
        if r_up > best:
            best = r_up
            argmax = {"phase": "ascent", "trial": i, "family": fam, "restart": k}
    stability = (best_random - half) / best_random if best_random > 0 else 0.0
    return ConstantReport(
        float(best),
        argmax,
        [float(v) for v in trace],
        float(stability),
        task.trials,
        skipped,
        {k: float(v) for k, v in family_best.items()},
        float(best / best_random - 1.0),
    )


# ---------------------------------------------------------------- envelopes


@dataclass
class EnvelopeReport:
    c1: float
    sigma1: float
    c2: float
    sigma2: float
    fit_residual: float
    far_field_exponent: float
    inside_min: float
    inside_max: float
    witness_ok: bool
    unit_average_bound_fraction: float
    clipped_witnesses: int
    u: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.c1, self.sigma1, self.c2, self.sigma2, self.fit_residual))

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "c1", "sigma1", "c2", "sigma2", "fit_residual", "far_field_exponent", "inside_min",
            "inside_max", "witness_ok", "unit_average_bound_fraction", "clipped_witnesses")}
        out["u"] = self.u.tolist()
        out["values"] = self.values.tolist()
        return out


def _envelope_fit(lu, lv, side, sigma_min=None):
    """Least squares line ``log c - sigma * lu`` lying above (side=+1) or below (-1) the data."""
    A = np.stack([np.ones_like(lu), -lu], axis=1)
    start, *_ = np.linalg.lstsq(A, lv, rcond=None)
    # start from a feasible point: shift the unconstrained line
    start[0] += np.max(side * (lv - A @ start)) * side
    cons = [{"type": "ineq", "fun": lambda x: side * (A @ x - lv), "jac": lambda x: side * A}]
    if sigma_min is not None:
        cons.append({"type": "ineq", "fun": lambda x: x[1] - sigma_min})
        if start[1] < sigma_min:
            start[1] = sigma_min
            start[0] = np.max(side * (lv + sigma_min * lu)) * side
    res = minimize(
        lambda x: np.sum((A @ x - lv) ** 2),
        start,
        jac=lambda x: 2 * A.T @ (A @ x - lv),
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 500},
    )
    x = res.x
    if sigma_min is not None:
        x[1] = max(x[1], sigma_min)
    # enforce exact feasibility against solver slack
    x[0] += max(0.0, np.max(side * (lv - A @ x))) * side
    return float(np.exp(x[0])), float(x[1]), float(np.sqrt(np.mean((A @ x - lv) ** 2)))


def chi_envelope(rho, theta, young=None, x0=None, k_radii=16):
    """Fit ``c1 u^-sigma1 <= M^theta_young(chi_Q) <= c2 u^-sigma2`` with ``u = 1 + |x-x0|/rho(x0)``
    and ``Q = B(x0, rho(x0))``; the dictionary is augmented with ``B(x, |x-x0| + rho(x0))``."""
    grid = rho.grid
    young = young or YoungFunction("power", (1.0,))
    x0 = 0 if x0 is None else int(x0)
    r0 = float(rho.values[x0])
    dist = grid.distances_from(grid.coords[x0])
    chi = (dist < r0).astype(float)
    if chi.sum() == 0:
        raise ValueError("critical ball contains no grid points")
    wit_r = dist + r0
    D = build_dictionary(grid, "all", k_radii).with_balls(np.arange(grid.size), wit_r)
    spec = MaximalSpec(D, young, "theta", rho, float(theta))
    vals = maximal_apply(GridFunction(grid, chi), spec).values
    u = 1 + dist / r0
    lu, lv = np.log(u), np.log(vals)
    far = dist >= 2 * r0
    if np.unique(np.round(dist[far], 12)).size < 2:
        raise ValueError("degenerate envelope fit: the grid does not reach beyond 2 critical radii")
    c2, s2, res2 = _envelope_fit(lu, lv, +1)
    c1, s1, res1 = _envelope_fit(lu, lv, -1, sigma_min=s2)
    far_exp = float(-np.polyfit(lu[far], lv[far], 1)[0])

    # witness balls: their own damped average is a pointwise lower bound
    clipped = wit_r > grid.side / 2
    radius = np.minimum(wit_r, grid.side / 2)
    counts = _hits(grid, chi, radius)
    mass = counts[:, 1] / counts[:, 0]
    witness = young_avg_indicator(young, mass) * (1 + radius / rho.values) ** (-theta)
    unit_bound = 2.0 ** (-theta) * u ** (-theta)
    inside = chi > 0
    return EnvelopeReport(
        c1, s1, c2, s2, max(res1, res2), far_exp,
        float(vals[inside].min()), float(vals[inside].max()),
        bool(np.all(vals >= witness * (1 - 1e-12))),
        float(np.mean(vals >= unit_bound * (1 - 1e-12))),
        int(clipped.sum()), u, vals,
    )


def young_avg_indicator(A, fraction):
    """``||chi_E||_{A,B}`` when ``|B cap E| / |B| = fraction``."""
    fraction = np.asarray(fraction, dtype=float)
    out = np.zeros_like(fraction)
    pos = fraction > 0
    out[pos] = 1.0 / A.inverse(1.0 / fraction[pos])
    return out


def _hits(grid, chi, radius):
    """Per point: number of cells in ``B(x, radius[x])`` and how many lie in ``chi``."""
    out = np.zeros((grid.size, 2))
    for x in range(grid.size):
        m = grid.distances_from(grid.coords[x]) < radius[x]
        out[x] = m.sum(), chi[m].sum()
    return out


# ---------------------------------------------------------------- integrability


@dataclass
class IntegrabilityReport:
    sides: list
    maximal_integrals: list
    weight_integrals: list
    maximal_increment: float
    weight_increment: float
    maximal_verdict: str
    weight_verdict: str
    agree: bool
    growth_rate: float
    params: dict

    def to_dict(self):
        return dict(self.__dict__)


def _trend(values, tol):
    inc = (values[-1] - values[-2]) / values[-1] if values[-1] > 0 else 0.0
    return float(inc), ("integrable-trend" if inc < tol else "divergent-trend")


def integrability_verdict(beta, p, sigma, theta=1.0, d=3, sides=(8, 16, 32), spacing=1.0, rho0=1.0,
                          young=None, k_radii=16, tol=0.05):
    """Trend of ``int |f|^p M^theta(chi_Q)`` and of ``int |f|^p (1+|x|)^-sigma`` over growing boxes,
    for ``|f| = (1+|x|)^beta (1 + cos(x_1)/2)``, ``Q = B(0, rho0)`` and constant ``rho = rho0``."""
    young = young or YoungFunction("power", (1.0,))
    mi, wi = [], []
    for side in sides:
        n = int(round(side / spacing))
        grid = Grid(d, n + n % 2, float(side))
        center = grid.coords[grid.ravel(np.full((1, d), grid.n // 2))[0]]
        r = grid.distances_from(center)
        f_p = ((1 + r) ** beta * (1 + 0.5 * np.cos(grid.coords[:, 0] - center[0]))) ** p
        rho = CriticalRadiusField(grid, GridFunction.constant(grid, rho0), 1.0, 1, 0.0, np.zeros(grid.size, bool))
        chi = GridFunction(grid, (r < rho0).astype(float))
        spec = MaximalSpec(build_dictionary(grid, "all", k_radii), young, "theta", rho, float(theta))
        M = maximal_apply(chi, spec).values
        h_d = grid.cell_volume
        mi.append(float(np.sum(f_p * M) * h_d))
        wi.append(float(np.sum(f_p * (1 + r) ** (-sigma)) * h_d))
    m_inc, m_v = _trend(mi, tol)
    w_inc, w_v = _trend(wi, tol)
    growth = float(np.polyfit(np.log(sides), np.log(mi), 1)[0])
    return IntegrabilityReport(
        list(sides), mi, wi, m_inc, w_inc, m_v, w_v, m_v == w_v, growth,
        {"beta": beta, "p": p, "sigma": sigma, "theta": theta, "d": d, "rho0": rho0, "young": str(young), "tol": tol},
    )
