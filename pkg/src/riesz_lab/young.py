"""Young functions, Luxemburg averages over balls and the D_p tail test."""

from dataclasses import dataclass, field
from math import e, log

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .grid import ball_points

FAMILIES = ("power", "logpower", "loglog")


def _raw(family, params, t):
    t = np.asarray(t, dtype=float)
    if family == "power":
        return t ** params[0]
    lp = np.log1p(t)
    if family == "logpower":
        return t * lp ** params[0]
    a, b = params
    return t * lp**a * np.log(e + lp) ** b


def _raw_log(family, params, t):
    """log of the raw function for t > 0, safe for huge t."""
    t = np.asarray(t, dtype=float)
    lt = np.log(t)
    if family == "power":
        return params[0] * lt
    lp = np.log1p(t)
    out = lt + params[0] * np.log(lp)
    if family == "loglog":
        out = out + params[1] * np.log(e + lp)
    return out


@dataclass(frozen=True)
class YoungFunction:
    """Convex increasing ``A`` with ``A(0) = 0``, rescaled in its argument so ``A(1) = 1``.

    ``A(t) = raw(scale * t)`` where ``raw`` is one of ``t**r``, ``t log^a(1+t)`` and
    ``t log^a(1+t) log^b(e + log(1+t))``.
    """

    family: str
    params: tuple
    scale: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown Young family {self.family!r}")
        params = tuple(float(x) for x in np.atleast_1d(self.params))
        object.__setattr__(self, "params", params)
        want = 2 if self.family == "loglog" else 1
        if len(params) != want:
            raise ValueError(f"{self.family} takes {want} parameter(s), got {params}")
        if self.family == "power" and params[0] < 1:
            raise ValueError(f"power exponent must be >= 1, got {params[0]}")
        if self.family != "power" and params[0] < 0:
            raise ValueError(f"log exponent must be >= 0, got {params[0]}")
        if self.family == "power":
            scale = 1.0
        else:
            scale = brentq(lambda s: _raw(self.family, params, s) - 1.0, 1e-12, 1e12, xtol=1e-300, rtol=1e-15)
        object.__setattr__(self, "scale", float(scale))
        if not is_convex_increasing(self):
            raise ValueError(f"{self} is not convex and increasing on sampled points")

    @classmethod
    def parse(cls, text):
        """Parse ``"power:r"``, ``"logpower:a"`` or ``"loglog:a,b"``."""
        try:
            family, _, args = text.strip().partition(":")
            params = tuple(float(x) for x in args.split(","))
        except ValueError as exc:
            raise ValueError(f"cannot parse Young function {text!r}") from exc
        return cls(family.lower(), params)

    def __str__(self):
        return f"{self.family}:{','.join(f'{p:g}' for p in self.params)}"

    @property
    def is_power(self):
        return self.family == "power"

    @property
    def power(self):
        return self.params[0] if self.is_power else None

    def __call__(self, t):
        return _raw(self.family, self.params, self.scale * np.asarray(t, dtype=float))

    def log(self, t):
        return _raw_log(self.family, self.params, self.scale * np.asarray(t, dtype=float))

    def inverse(self, s, rtol=1e-12):
        """``A^{-1}(s)`` for ``s >= 0`` (vectorised)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("Young inverse needs non-negative arguments")
        if self.is_power:
            return s ** (1.0 / self.power)
        return _increasing_inverse(self, s, rtol)


def _increasing_inverse(A, s, rtol):
    flat = s.reshape(-1)
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    for _ in range(2100):
        short = A(hi) < flat
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, hi * 2, hi)
    for _ in range(200):
        if np.all(hi - lo <= rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        below = A(mid) < flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(flat == 0, 0.0, 0.5 * (lo + hi))
    return out.reshape(s.shape) if s.ndim else float(out[0])


def is_convex_increasing(A, ts=None, tol=1e-9):
    if ts is None:
        ts = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 400)])
    v = A(ts)
    if v[0] != 0 or np.any(np.diff(v) <= 0):
        return False
    slopes = np.diff(v) / np.diff(ts)
    return bool(np.all(np.diff(slopes) >= -tol * np.maximum(1.0, np.abs(slopes[1:]))))


def young_eval(A, t, direction="forward"):
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"Young functions are evaluated on t >= 0, got {t}")
    if direction == "forward":
        out = A(t)
    elif direction == "inverse":
        out = A.inverse(t)
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return float(out) if np.ndim(out) == 0 else out


def luxemburg_rows(rows, A, rtol=1e-8, weights=None):
    """Luxemburg average of every row of ``rows`` (equal cell weights).

    Returns ``inf{lam > 0 : mean(A(|row| / lam)) <= 1}`` per row, by doubling
    down from ``max|row|`` (always admissible because ``A(1) = 1``) and bisecting.
    ``weights`` optionally masks cells (1 inside the ball, 0 outside) for ragged rows.
    """
    rows = np.abs(np.atleast_2d(np.asarray(rows, dtype=float)))
    if weights is None:
        weights = np.ones_like(rows)
    count = weights.sum(axis=1)
    if np.any(count == 0):
        raise ValueError("Luxemburg average over an empty ball")
    rows = rows * weights

    def mean(lam):
        with np.errstate(over="ignore"):
            return np.sum(A(rows / lam[:, None]) * weights, axis=1) / count

    hi = rows.max(axis=1)
    nonzero = hi > 0
    hi = np.where(nonzero, hi, 1.0)
    lo = hi.copy()
    for _ in range(2100):
        ok = (mean(lo) <= 1) & nonzero
        if not ok.any():
            break
        hi = np.where(ok, lo, hi)
        lo = np.where(ok, lo / 2, lo)
    for _ in range(200):
        if np.all(hi - lo <= rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        ok = mean(mid) <= 1
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return np.where(nonzero, hi, 0.0)


def luxemburg_avg(f, ball, A, rtol=1e-8):
    """``||f||_{A,B}`` with the cell-sum measure of the grid points in ``ball``."""
    pts = ball_points(f.grid, ball)
    if pts.size == 0:
        raise ValueError(f"{ball} contains no grid points")
    return float(luxemburg_rows(f.values[pts][None, :], A, rtol)[0])


@dataclass
class DpResult:
    status: str
    tail_estimate: float
    block_sums: np.ndarray
    block_ratios: np.ndarray
    extrapolated_ratio: float

    @property
    def verdict(self):
        """True/False for a settled classification, None when inconclusive."""
        return {"convergent": True, "divergent": False}.get(self.status)

    def __iter__(self):
        return iter((self.verdict, self.tail_estimate))


def dp_membership(A, p, t_max=1e12, block_growth=2**0.5, tol=1e-3):
    """Classify ``A`` in or out of D_p from the tail of ``int_1^inf (t/A(t))^(p'-1) dt/t``.

    With ``u = log t`` the integrand is ``g(u) du``.  Blocks ``[u_k, u_k * block_growth]``
    have constant sums exactly at the critical ``g ~ 1/u`` and decay geometrically
    for ``g ~ u^{-a}``, ``a > 1``.  The per-octave block ratio is extrapolated in the
    ``1/u`` corrections; a limit below ``1 - tol`` is convergent, anything else
    (stable or growing blocks) is divergent.  If the last two extrapolations
    disagree by more than ``tol`` across that threshold the outcome is inconclusive.
    """
    if not p > 1:
        raise ValueError(f"D_p needs p > 1, got {p}")
    q = p / (p - 1)
    u_max = log(t_max)

    def g(u):
        return float(np.exp((q - 1) * (u - A.log(np.exp(u)))))

    edges = [0.0, 1.0]
    while edges[-1] * block_growth <= u_max:
        edges.append(edges[-1] * block_growth)
    sums = np.array([quad(g, a, b, epsabs=0, epsrel=1e-12, limit=200)[0] for a, b in zip(edges, edges[1:])])
    tail = float(sums.sum() + quad(g, edges[-1], u_max, epsabs=0, epsrel=1e-12, limit=200)[0])

    # per-octave ratios of the blocks beyond u = 1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (sums[2:] / sums[1:-1]) ** (1 / np.log2(block_growth))
    ratios = np.nan_to_num(ratios, nan=0.0, posinf=np.inf)
    b = block_growth
    rich = (b * ratios[1:] - ratios[:-1]) / (b - 1)
    last, prev = max(rich[-1], 0.0), max(rich[-2], 0.0)
    threshold = 1 - tol
    if abs(last - prev) > tol and (last < threshold) != (prev < threshold):
        status = "inconclusive"
    elif last < threshold:
        status = "convergent"
    else:
        status = "divergent"
    return DpResult(status, tail, sums, ratios, float(last))
