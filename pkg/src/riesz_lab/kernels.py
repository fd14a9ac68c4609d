"""Kernel decay conditions, the G function and kernel comparison checks."""

from dataclasses import dataclass, field

import numpy as np


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


@dataclass
class ConditionReport:
    condition: str
    parameters: dict
    empirical_constant: float
    worst_sample: dict
    sample_count: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return _plain(
            {
                "condition": self.condition,
                "parameters": self.parameters,
                "empirical_constant": self.empirical_constant,
                "worst_sample": self.worst_sample,
                "sample_count": self.sample_count,
                "extra": self.extra,
            }
        )


CONDITIONS = ("A_s", "A_s_prime", "B_s", "C_s", "A_inf", "B_inf")


def _index(grid, point):
    """Flat grid index from an index or a physical point (nearest grid point)."""
    if np.ndim(point) == 0:
        return int(point)
    idx = np.rint(np.asarray(point, dtype=float) / grid.spacing).astype(int)
    return int(grid.ravel(idx[None, :])[0])


def _region(grid, x0, R, mode):
    dist = grid.distances_from(grid.coords[x0])
    if mode == "ring":
        return (dist > R) & (dist < 2 * R)
    if mode == "ball":
        return dist < R / 2
    raise ValueError(f"mode must be 'ring' or 'ball', got {mode!r}")


def annulus_slice(K, x0, y, R, s, mode="ring", K0=None):
    """``(value, diagonal_excluded)`` for the s-norm of ``K(., y)`` (or ``K - K0``) over
    the ring ``R < |x - x0| < 2R`` or the ball ``B(x0, R/2)``."""
    grid = K.grid
    if not s > 1:
        raise ValueError(f"s must exceed 1, got {s}")
    if not R < grid.side / 4:
        raise ValueError(f"R = {R} must stay below side/4 = {grid.side / 4}")
    x0, y = _index(grid, x0), _index(grid, y)
    mask = _region(grid, x0, R, mode)
    excluded = bool(mask[y])
    mask[y] = False
    if not mask.any():
        raise ValueError(f"empty {mode} at R = {R} (grid spacing {grid.spacing})")
    col = K.K[:, y] if K0 is None else K.K[:, y] - K0.K[:, y]
    val = np.sum(np.abs(col[mask]) ** s) * grid.cell_volume
    return float(val ** (1.0 / s)), excluded


def annulus_slice_norm(K, x0, y, R, s, mode="ring"):
    """Quadrature ``(int |K(x, y)|^s dx)^(1/s)`` over the ring around ``x0`` (or the ball
    ``B(x0, R/2)`` with ``mode="ball"``); the cell ``x = y`` is left out."""
    return annulus_slice(K, x0, y, R, s, mode)[0]


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def draw_samples(grid, condition, rho, count, seed=0):
    """Seeded ``(x0, y, R)`` triples obeying the condition's constraints.

    Pointwise conditions return ``(x, y, |x - y|)`` with ``x != y``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, CONDITIONS.index(condition)]))
    h, quarter = grid.spacing, grid.side / 4
    x0s, ys, Rs = [], [], []
    attempts = 0
    while len(x0s) < count and attempts < 50 * count:
        attempts += 1
        x0 = int(rng.integers(grid.size))
        if condition in ("A_inf", "B_inf"):
            y = int(rng.integers(grid.size))
            r = float(grid.distance(grid.coords[x0], grid.coords[y]))
            if r == 0:
                continue
            x0s.append(x0), ys.append(y), Rs.append(r)
            continue
        hi = quarter * (1 - 1e-9)
        if condition == "B_s":
            hi = min(hi, rho[x0])
        if hi <= h:
            continue
        R = float(_log_uniform(rng, h, hi, 1)[0])
        dist = grid.distances_from(grid.coords[x0])
        if condition == "A_s_prime":
            cand = np.flatnonzero((dist > R) & (dist < 2 * R))
        else:
            cand = np.flatnonzero(dist < R / 2)
        if cand.size == 0:
            continue
        x0s.append(x0), ys.append(int(rng.choice(cand))), Rs.append(R)
    if not x0s:
        raise ValueError(f"no admissible samples for {condition} on this grid (too coarse)")
    return np.array(x0s), np.array(ys), np.array(Rs)


def check_condition(K, condition, rho, s=2.0, N=0.0, delta=0.5, K0=None, samples=2000, seed=0, sample_set=None):
    """Empirical constant ``sup LHS / RHS`` of a kernel condition over seeded samples.

    ``rho`` is a CriticalRadiusField, GridFunction or array of radii.  ``B_s`` and ``B_inf``
    need the comparison kernel ``K0``.  ``sample_set`` overrides sampling with explicit
    ``(x0, y, R)`` arrays.
    """
    from .maximal import _rho_values

    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if condition in ("B_s", "B_inf") and K0 is None:
        raise ValueError(f"{condition} needs the comparison kernel K0")
    grid = K.grid
    d = grid.d
    rho = _rho_values(rho) * np.ones(grid.size)
    x0, y, R = sample_set if sample_set is not None else draw_samples(grid, condition, rho, samples, seed)
    x0, y, R = np.asarray(x0), np.asarray(y), np.asarray(R, dtype=float)
    sp = s / (s - 1) if s > 1 else np.inf
    ratios = np.empty(len(x0))
    alt = np.full(len(x0), np.nan)
    excluded = 0
    if condition in ("A_inf", "B_inf"):
        diff = K.K[x0, y] - (K0.K[x0, y] if condition == "B_inf" else 0.0)
        if condition == "A_inf":
            rhs = R ** (-d) * (1 + R / rho[x0]) ** (-N)
        else:
            rhs = R ** (-d) * (R / rho[y]) ** delta
            alt = np.abs(diff) / (R ** (-d) * (R / rho[x0]) ** delta)
        ratios = np.abs(diff) / rhs
    else:
        mode = "ball" if condition == "A_s_prime" else "ring"
        for i in range(len(x0)):
            lhs, exc = annulus_slice(K, x0[i], y[i], R[i], s, mode, K0 if condition == "B_s" else None)
            excluded += exc
            r0 = rho[x0[i]]
            base = R[i] ** (-d / sp)
            if condition in ("A_s", "A_s_prime"):
                rhs = base * (1 + R[i] / r0) ** (-N)
            elif condition == "C_s":
                rhs = base * (1 + r0 / R[i]) ** (-delta) * (1 + R[i] / r0) ** (-N)
            else:
                rhs = base * (R[i] / r0) ** delta
                alt[i] = lhs / (base * (R[i] / rho[y[i]]) ** delta)
            ratios[i] = lhs / rhs
    k = int(np.argmax(ratios))
    extra = {"diagonal_excluded": int(excluded)}
    if condition in ("B_s", "B_inf"):
        # the two readings of which point's radius normalises the comparison bound
        other = "rho(x0)" if condition == "B_inf" else "rho(y)"
        extra["alternate_reading"] = other
        extra["alternate_constant"] = float(np.nanmax(alt))
    return ConditionReport(
        condition,
        {"s": s, "N": N, "delta": delta},
        float(ratios[k]),
        {"x0": grid.coords[x0[k]], "y": grid.coords[y[k]], "R": float(R[k])},
        len(x0),
        extra,
    )


def g_function(V, x, y):
    """``int_{B(x, |x-y|/4)} V(u) |u - x|^(1-d) du`` with the singular cell ``u = x`` left out."""
    grid = V.grid
    xi, yi = _index(grid, x), _index(grid, y)
    r = float(grid.distance(grid.coords[xi], grid.coords[yi]))
    if r < 4 * grid.spacing:
        raise ValueError(f"|x - y| = {r} is below 4 * spacing")
    dist = grid.distances_from(grid.coords[xi])
    mask = (dist < r / 4) & (dist > 0)
    return float(np.sum(V.values[mask] / dist[mask] ** (grid.d - 1)) * grid.cell_volume)


def comparison_check(kind, K, K0, V, rho, q, samples=500, seed=0, gamma_kernel=None, classical=None):
    """Empirical constant of the local kernel comparison bounds.

    ``CompR1``: ``|K - K0|(x, y) |x-y|^(d-1) / (G(x, y) + |x-y|^-1 (|x-y|/rho(x))^(2-d/q))``
    over pairs with ``|x - y| >= 4 spacing``.
    ``CompR2``: ``|K - K0|(x, y) / (|R2(V Gamma(y, .) chi_B(x0, R/4))(x)| + R^-d (R/rho(x0))^delta)``
    with ``delta = min(1, 2 - d/q)``, ``R <= |y - x0| <= rho(x0)`` and ``x`` in ``B(x0, R/8)``;
    ``gamma_kernel`` is the kernel of ``L^-1`` and ``classical`` the matching classical multiplier.
    """
    from .maximal import _rho_values

    grid = K.grid
    d, h = grid.d, grid.spacing
    rho = _rho_values(rho) * np.ones(grid.size)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 10 + ("CompR1", "CompR2").index(kind)]))
    rows = []
    attempts = 0
    if kind == "CompR1":
        while len(rows) < samples and attempts < 50 * samples:
            attempts += 1
            x, y = (int(v) for v in rng.integers(grid.size, size=2))
            r = float(grid.distance(grid.coords[x], grid.coords[y]))
            if r < 4 * h:
                continue
            lhs = abs(K.K[x, y] - K0.K[x, y])
            rhs = r ** (1 - d) * (g_function(V, x, y) + (r / rho[x]) ** (2 - d / q) / r)
            rows.append((lhs / rhs, lhs, rhs, x, y, r))
        params = {"q": q}
    elif kind == "CompR2":
        if gamma_kernel is None or classical is None:
            raise ValueError("CompR2 needs gamma_kernel (kernel of L^-1) and the classical operator")
        delta = min(1.0, 2 - d / q)
        while len(rows) < samples and attempts < 50 * samples:
            attempts += 1
            x0 = int(rng.integers(grid.size))
            if rho[x0] <= h:
                continue
            R = float(_log_uniform(rng, h, rho[x0], 1)[0])
            dist0 = grid.distances_from(grid.coords[x0])
            ys = np.flatnonzero((dist0 >= R) & (dist0 <= rho[x0]))
            xs = np.flatnonzero(dist0 < R / 8)
            if ys.size == 0 or xs.size == 0:
                continue
            y, x = int(rng.choice(ys)), int(rng.choice(xs))
            field_ = V.values * gamma_kernel.K[:, y] * (dist0 < R / 4)
            first = abs(classical.apply(field_)[x])
            rhs = first + R ** (-d) * (R / rho[x0]) ** delta
            lhs = abs(K.K[x, y] - K0.K[x, y])
            rows.append((lhs / rhs, lhs, rhs, x, y, R, x0))
        params = {"q": q, "delta": delta}
    else:
        raise ValueError(f"unknown comparison kind {kind!r}")
    if not rows:
        raise ValueError(f"no admissible samples for {kind}: grid too coarse for the constraints")
    ratios = np.array([r[0] for r in rows])
    k = int(np.argmax(ratios))
    best = rows[k]
    worst = {"x": grid.coords[best[3]], "y": grid.coords[best[4]], "R": best[5]}
    if kind == "CompR2":
        worst["x0"] = grid.coords[best[6]]
    return ConditionReport(
        kind,
        params,
        float(ratios[k]),
        worst,
        len(rows),
        {
            "max_difference": float(max(r[1] for r in rows)),
            "min_rhs": float(min(r[2] for r in rows)),
        },
    )
