"""Critical radius geometry of a nonnegative potential on the torus.

``rho(x) = sup{r : r^(2-d) * int_{B(x,r)} V <= 1}``, its regularity constants
``(C0, N0)``, reverse Hoelder constants, greedy critical coverings and ``gamma0``.
"""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .grid import Ball, GridFunction, ball_mask, ball_stencil
from .kernels import ConditionReport
from .maximal import ball_averages

RHO_MESH = 64


class ShellSums:
    """Cumulative sums of ``V`` over lattice shells around every grid point.

    ``sums[x, j]`` is the sum of V over offsets with ``|o| <= shell_radii[j]``
    (physical units), for offsets strictly inside the ``side/2`` ball.
    """

    def __init__(self, V):
        grid = V.grid
        offs = ball_stencil(grid, grid.side / 2)
        sq = np.sum(offs.astype(np.int64) ** 2, axis=1)
        shells, inverse = np.unique(sq, return_inverse=True)
        self.grid = grid
        self.shell_radii = np.sqrt(shells) * grid.spacing
        field_ = V.field
        per_shell = np.zeros((grid.size, len(shells)))
        for o, j in zip(offs, inverse):
            per_shell[:, j] += np.roll(field_, tuple(-o), axis=tuple(range(grid.d))).ravel()
        self.sums = np.cumsum(per_shell, axis=1)

    def mass(self, r, points=None):
        """``int_{B(x, r)} V`` (cell-sum) at every point, or at ``points``; ``r`` broadcasts."""
        r = np.asarray(r, dtype=float)
        j = np.searchsorted(self.shell_radii, r, side="left") - 1
        rows = self.sums if points is None else self.sums[points]
        if r.ndim == 0:
            vals = rows[:, j] if j >= 0 else np.zeros(len(rows))
        else:
            vals = np.where(j >= 0, np.take_along_axis(rows, np.maximum(j, 0)[:, None], axis=1)[:, 0], 0.0)
        return vals * self.grid.cell_volume


@dataclass(frozen=True, eq=False)
class CriticalRadiusField:
    grid: object
    rho: GridFunction
    fitted_C0: float
    fitted_N0: int
    capped_fraction: float = 0.0
    capped: np.ndarray = field(default=None, repr=False)
    fit_table: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_values(cls, grid, values, samples=10_000, seed=0):
        """Wrap a directly supplied radius field and fit its regularity constants."""
        rho = GridFunction(grid, values)
        if np.any(rho.values <= 0) or np.any(rho.values > grid.side / 2 * (1 + 1e-12)):
            raise ValueError("critical radii must lie in (0, side/2]")
        c0, n0, table = fit_rho_constants(grid, rho.values, samples, seed)
        capped = rho.values >= grid.side / 2
        return cls(grid, rho, c0, n0, float(capped.mean()), capped, table)

    @property
    def values(self):
        return self.rho.values


def _pair_sample(grid, samples, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    if grid.size**2 <= samples:
        i, j = np.divmod(np.arange(grid.size**2), grid.size)
    else:
        i = rng.integers(0, grid.size, samples)
        j = rng.integers(0, grid.size, samples)
    return i, j


def rho_constant_bounds(grid, rho, i, j, n0):
    """Smallest C0 making both sides of the regularity inequality hold on pairs ``(i, j)``."""
    rx, ry = rho[i], rho[j]
    u = 1.0 + grid.distance(grid.coords[i], grid.coords[j]) / rx
    lower = rx * u ** (-n0) / ry
    upper = ry / (rx * u ** (n0 / (n0 + 1.0)))
    return max(1.0, float(lower.max()), float(upper.max()))


def fit_rho_constants(grid, rho, samples=10_000, seed=0, n_max=12, slack=0.05):
    """Return ``(C0, N0, table)``: the smallest integer ``N0`` whose minimal ``C0`` is
    within ``slack`` of the best ``C0`` over ``N0 <= n_max`` (``C0`` is non-increasing in ``N0``)."""
    i, j = _pair_sample(grid, samples, seed)
    table = {n: rho_constant_bounds(grid, rho, i, j, n) for n in range(1, n_max + 1)}
    best = min(table.values())
    n0 = next(n for n in range(1, n_max + 1) if table[n] <= best * (1 + slack))
    return table[n0], n0, table


def rho_field(V, q=None, samples=10_000, seed=0, mesh=RHO_MESH, shells=None):
    """Critical radius of ``V`` at every grid point (``d >= 3``).

    A geometric radius mesh from spacing/2 to side/2 locates the last sub-level radius
    of ``F(r) = r^(2-d) int_{B(x,r)} V``, refined by bisection to spacing/10; radii that
    stay sub-level up to side/2 are capped there.  ``q`` is carried for reporting only.
    """
    grid = V.grid
    if grid.d < 3:
        raise ValueError(f"critical radius needs d >= 3, got d = {grid.d}")
    if np.any(V.values < 0):
        raise ValueError("potential must be nonnegative")
    if not np.any(V.values > 0):
        raise ValueError("V vanishes identically: the critical radius is infinite")
    shells = shells or ShellSums(V)
    h, d = grid.spacing, grid.d
    radii = np.geomspace(h / 2, grid.side / 2, mesh)

    def F(r, pts=None):
        return np.asarray(r) ** (2 - d) * shells.mass(r, pts)

    below = np.stack([F(r) <= 1 for r in radii], axis=1)
    if not np.all(below[:, 0]):
        raise ValueError("potential too large for this grid: F > 1 already at spacing/2")
    last = below.shape[1] - 1 - np.argmax(below[:, ::-1], axis=1)
    capped = last == mesh - 1
    rho = np.full(grid.size, grid.side / 2)
    todo = np.flatnonzero(~capped)
    lo, hi = radii[last[todo]], radii[last[todo] + 1]
    while np.any(hi - lo > h / 10):
        mid = 0.5 * (lo + hi)
        ok = F(mid, todo) <= 1
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    rho[todo] = lo
    c0, n0, table = fit_rho_constants(grid, rho, samples, seed)
    return CriticalRadiusField(grid, GridFunction(grid, rho), c0, n0, float(capped.mean()), capped, table)


def rh_scan(V, q, dictionary):
    """Reverse Hoelder ratio over dictionary balls: ``(max ratio, skipped balls, worst ball)``."""
    if np.any(V.values < 0):
        raise ValueError("potential must be nonnegative")
    if not np.any(V.values > 0):
        raise ValueError("reverse Hoelder constant undefined for V = 0")
    if not q > 1:
        raise ValueError(f"reverse Hoelder exponent must exceed 1, got {q}")
    from .young import YoungFunction

    grid = V.grid
    mean_q, mean_1 = YoungFunction("power", q), YoungFunction("power", 1.0)
    best, worst, skipped = 0.0, None, 0
    for g in dictionary.groups:
        num = ball_averages(V.values, grid, g.radius, mean_q, g.centers)
        den = ball_averages(V.values, grid, g.radius, mean_1, g.centers)
        pos = den > 0
        skipped += int(np.sum(~pos))
        if not np.any(pos):
            continue
        ratio = np.where(pos, num / np.where(pos, den, 1.0), 0.0)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            center = k if g.centers is None else int(g.centers[k])
            best, worst = float(ratio[k]), (center, g.radius)
    return best, skipped, worst


def rh_constant(V, q, dictionary):
    """Largest ``(avg_B V^q)^(1/q) / avg_B V`` over dictionary balls with positive mass."""
    return rh_scan(V, q, dictionary)[0]


def _geometric_choice(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def potential_growth_check(V, q, rho, samples=2000, seed=0, shells=None):
    """Empirical constant in ``R^(2-d) int_{B(x0,R)} V <= C (1+R/rho)^N0 (1+rho/R)^(d/q-2)``,
    the doubling constant of ``V`` and the crossing value ``F(rho(x0))``."""
    grid = V.grid
    d, h = grid.d, grid.spacing
    shells = shells or ShellSums(V)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    x0 = rng.integers(0, grid.size, samples)
    R = _geometric_choice(rng, h, grid.side / 2, samples)
    r0 = rho.values[x0]
    lhs = R ** (2 - d) * shells.mass(R, x0)
    rhs = (1 + R / r0) ** rho.fitted_N0 * (1 + r0 / R) ** (d / q - 2)
    ratio = lhs / rhs
    k = int(np.argmax(ratio))

    R2 = _geometric_choice(rng, 4 * h, grid.side / 4, samples)
    inner_mass = shells.mass(R2, x0)
    outer_mass = shells.mass(2 * R2, x0)
    ok = inner_mass > 0
    doubling = outer_mass[ok] / inner_mass[ok]
    j = int(np.argmax(doubling)) if doubling.size else None

    free = ~rho.capped[x0]
    crossing = r0[free] ** (2 - d) * shells.mass(r0[free], x0[free])
    return ConditionReport(
        "LemV",
        {"q": q, "N0": rho.fitted_N0, "d": d},
        float(ratio[k]),
        {"x0": grid.coords[x0[k]], "R": float(R[k])},
        samples,
        {
            "doubling_constant": float(doubling[j]) if j is not None else None,
            "doubling_worst": {"x0": grid.coords[x0[ok][j]], "R": float(R2[ok][j])} if j is not None else None,
            "doubling_skipped": int(np.sum(~ok)),
            "crossing_values": [float(crossing.min()), float(crossing.max())] if crossing.size else None,
            "near_cap": int(np.sum(~free)),
        },
    )


@dataclass
class CoveringReport:
    balls: list
    overlap_max: dict
    fitted_N1: float
    fitted_C: float
    r_squared: float
    shrink: float
    covered_fraction: float
    clipped_sigmas: list = field(default_factory=list)

    def to_dict(self):
        return {
            "balls": [{"center": list(b.center), "radius": b.radius} for b in self.balls],
            "overlap_max": {str(k): v for k, v in self.overlap_max.items()},
            "fitted_N1": self.fitted_N1,
            "fitted_C": self.fitted_C,
            "r_squared": self.r_squared,
            "shrink": self.shrink,
            "covered_fraction": self.covered_fraction,
            "clipped_sigmas": self.clipped_sigmas,
        }


def critical_covering(rho, shrink=1.0, sigmas=(1, 2, 4, 8)):
    """Greedy covering by ``B(x, shrink * rho(x))`` taking the first uncovered point in
    row-major order; overlap counts of the dilates ``sigma * Q_j`` and a power-law fit."""
    if not 0 < shrink <= 1:
        raise ValueError(f"shrink must lie in (0, 1], got {shrink}")
    grid = rho.grid
    radii = shrink * rho.values
    if np.any(radii < grid.spacing):
        raise ValueError("shrink * rho falls below the grid spacing; the covering would not terminate")
    covered = np.zeros(grid.size, dtype=bool)
    balls = []
    while not covered.all():
        x = int(np.argmax(~covered))
        ball = Ball(grid.coords[x], radii[x])
        balls.append(ball)
        covered |= ball_mask(grid, ball)
        covered[x] = True
    overlap, clipped = {}, []
    for s in sigmas:
        count = np.zeros(grid.size, dtype=int)
        for b in balls:
            r = s * b.radius
            if r > grid.side / 2:
                r = grid.side / 2
                clipped.append(s)
            count += ball_mask(grid, Ball(b.center, r))
        overlap[s] = int(count.max())
    ls = np.log(np.asarray(sigmas, dtype=float))
    lo = np.log(np.asarray([overlap[s] for s in sigmas], dtype=float))
    n1, logc = np.polyfit(ls, lo, 1)
    n1 = max(float(n1), 0.0)
    resid = lo - (logc + n1 * ls)
    total = np.sum((lo - lo.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / total if total > 0 else 1.0
    c = float(max(overlap[s] / s**n1 for s in sigmas))
    return CoveringReport(balls, overlap, n1, c, float(r2), float(shrink), float(covered.mean()), sorted(set(clipped)))


def gamma0(C0, N0, tol=1e-10):
    """Largest ``gamma`` in (0, 1] with ``3 gamma C0 (1 + 2 gamma)^N0 <= 1``."""
    if C0 < 1 or N0 < 1:
        raise ValueError(f"need C0 >= 1 and N0 >= 1, got {C0}, {N0}")

    def lhs(g):
        return 3 * g * C0 * (1 + 2 * g) ** N0

    if lhs(1.0) <= 1:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lhs(mid) <= 1:
            lo = mid
        else:
            hi = mid
    return lo


def default_shrink(C0, N0, d):
    """Covering dilation used by the inequality checks."""
    return min(gamma0(C0, N0), 1.0 / (2 * C0 * (5 * sqrt(d)) ** (N0 + 1)))


def _trucho_ratios(grid, rho, n0, x0, R0, x, y, r):
    gam = n0 * (1 + n0 / (n0 + 1))
    base = 1 + R0 / rho[x0]
    part1 = (1 + R0 / rho[y]) / base**n0
    part2 = (1 + r / rho[y]) / (base**gam * (1 + r / rho[x]))
    return part1, part2


def _trucho_menus(grid):
    R0s = np.geomspace(grid.spacing, grid.side / 2, 8)
    return R0s, np.array([1.5, 2.0, 4.0, 8.0])


def _trucho_report(grid, rho, n0, parts, samples, mode):
    x0, R0, x, y, r, p1, p2 = parts
    k1, k2 = int(np.argmax(p1)), int(np.argmax(p2))
    return ConditionReport(
        "Trucho",
        {"N0": n0, "gamma": n0 * (1 + n0 / (n0 + 1)), "mode": mode},
        float(max(p1[k1], p2[k2])),
        {"x0": grid.coords[x0[k2]], "x": grid.coords[x[k2]], "y": grid.coords[y[k2]], "R0": float(R0[k2]), "r": float(r[k2])},
        samples,
        {
            "part_i": float(p1[k1]),
            "part_ii": float(p2[k2]),
            "part_i_worst": {"x0": grid.coords[x0[k1]], "y": grid.coords[y[k1]], "R0": float(R0[k1])},
        },
    )


def trucho_check(rho, samples=2000, seed=0):
    """Sampled sup of the two ratios controlling ``rho`` at nearby points and larger radii."""
    grid = rho.grid
    vals, n0 = rho.values, rho.fitted_N0
    R0s, factors = _trucho_menus(grid)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    x0 = rng.integers(0, grid.size, samples)
    R0 = R0s[rng.integers(0, len(R0s), samples)]
    r = R0 * factors[rng.integers(0, len(factors), samples)]
    x = np.empty(samples, dtype=int)
    y = np.empty(samples, dtype=int)
    for i in range(samples):
        pts = np.flatnonzero(ball_mask(grid, Ball(grid.coords[x0[i]], R0[i])))
        x[i], y[i] = rng.choice(pts, 2)
    p1, p2 = _trucho_ratios(grid, vals, n0, x0, R0, x, y, r)
    return _trucho_report(grid, rho, n0, (x0, R0, x, y, r, p1, p2), samples, "sampled")


def trucho_exhaustive(rho):
    """Same ratios over every centre, menu radius and pair of points in the ball (small grids)."""
    grid = rho.grid
    if grid.size > 1024:
        raise ValueError("exhaustive check is meant for grids with at most 1024 points")
    vals, n0 = rho.values, rho.fitted_N0
    R0s, factors = _trucho_menus(grid)
    rows = []
    for c in range(grid.size):
        for R0 in R0s:
            pts = np.flatnonzero(ball_mask(grid, Ball(grid.coords[c], R0)))
            # part (i) depends only on y; part (ii) is largest at the y with the smallest
            # rho and the x with the largest rho
            y = pts[np.argmin(vals[pts])]
            x = pts[np.argmax(vals[pts])]
            for fct in factors:
                rows.append((c, R0, x, y, R0 * fct))
    x0, R0, x, y, r = (np.array(col) for col in zip(*rows))
    p1, p2 = _trucho_ratios(grid, vals, n0, x0, R0, x, y, r)
    return _trucho_report(grid, rho, n0, (x0, R0, x, y, r, p1, p2), len(rows), "exhaustive")
