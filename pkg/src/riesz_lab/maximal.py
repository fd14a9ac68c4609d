"""Orlicz maximal operators over a finite dictionary of balls centred at grid points.

Every dictionary ball is ``B(c, r)`` with ``c`` a grid point, so its points are
``c + offsets(r)`` for a fixed integer stencil.  Stencils are symmetric, which makes
``x in B(c, r)`` equivalent to ``c in B(x, r)``; the uncentred sup over balls
containing ``x`` is then a max filter of the per-centre averages.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .grid import GridFunction, ball_stencil, stencil_indices
from .young import YoungFunction, luxemburg_rows

SINGLE_CELL = 0.51
_CHUNK = 2_000_000  # max gathered entries per block in the general Orlicz path


@dataclass(frozen=True)
class BallGroup:
    radius: float
    centers: np.ndarray | None  # flat indices, None for every grid point


@dataclass(frozen=True, eq=False)
class BallDictionary:
    grid: object
    policy: str
    k_radii: int
    stride: int
    radii: np.ndarray
    groups: tuple = field(repr=False)

    def __len__(self):
        return sum(self.grid.size if g.centers is None else len(g.centers) for g in self.groups)

    def balls(self):
        """Iterate ``(center_index, radius)`` in the dictionary's deterministic order."""
        for g in self.groups:
            cs = range(self.grid.size) if g.centers is None else g.centers
            for c in cs:
                yield int(c), g.radius

    def with_balls(self, centers, radii):
        """Copy of the dictionary with extra balls ``B(centers[i], radii[i])`` (radii clipped to side/2)."""
        centers = np.asarray(centers, dtype=int).ravel()
        radii = np.minimum(np.asarray(radii, dtype=float).ravel(), self.grid.side / 2)
        if np.any(radii <= 0):
            raise ValueError("extra balls need positive radii")
        extra = []
        for r in np.unique(radii):
            extra.append(BallGroup(float(r), np.sort(centers[radii == r])))
        return replace(self, groups=self.groups + tuple(extra))

    def signature(self):
        """Hashable description used to compare dictionaries."""
        return tuple((g.radius, None if g.centers is None else g.centers.tobytes()) for g in self.groups)


def build_dictionary(grid, policy="all", k_radii=16, stride=1):
    """Balls at every centre (``policy="all"``) or every ``stride``-th centre per axis
    (``policy="subsampled"``) with ``k_radii`` geometric radii from ``0.51*spacing`` to ``side/2``.

    Single-cell balls are kept at every grid point in both policies.
    """
    if k_radii < 8:
        raise ValueError(f"k_radii must be >= 8, got {k_radii}")
    h = grid.spacing
    radii = np.geomspace(SINGLE_CELL * h, grid.side / 2, int(k_radii))
    if policy == "all":
        centers = None
        stride = 1
    elif policy == "subsampled":
        if stride < 1 or grid.n % stride:
            raise ValueError(f"stride {stride} must divide n = {grid.n}")
        keep = np.all(grid.index_coords % stride == 0, axis=1)
        centers = np.flatnonzero(keep)
        if stride == 1:
            centers = None
    else:
        raise ValueError(f"unknown dictionary policy {policy!r}")
    groups = [BallGroup(float(radii[0]), None)]
    groups += [BallGroup(float(r), centers) for r in radii[1:]]
    return BallDictionary(grid, policy, int(k_radii), int(stride), radii, tuple(groups))


@dataclass(frozen=True, eq=False)
class MaximalSpec:
    """What to maximise: ``young`` averages, ``mode`` in {"full", "local", "theta"}.

    ``rho`` is a CriticalRadiusField (or a GridFunction of radii) for local/theta modes.
    """

    dictionary: BallDictionary
    young: YoungFunction = YoungFunction("power", (1.0,))
    mode: str = "full"
    rho: object = None
    theta: float = 0.0
    compose_with_hl: int = 0

    def __post_init__(self):
        if self.mode not in ("full", "local", "theta"):
            raise ValueError(f"unknown maximal mode {self.mode!r}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.compose_with_hl < 0 or int(self.compose_with_hl) != self.compose_with_hl:
            raise ValueError("compose_with_hl must be a non-negative integer")
        if self.mode != "full":
            if self.rho is None:
                raise ValueError(f"mode {self.mode!r} needs a critical radius field")
            if _rho_values(self.rho).size != self.dictionary.grid.size:
                raise ValueError("critical radius field lives on a different grid")

    def describe(self):
        s = f"{self.mode}:{self.young}"
        if self.mode == "theta":
            s += f":theta={self.theta:g}"
        if self.compose_with_hl:
            s += f"+M^{self.compose_with_hl}"
        return s


def _rho_values(rho):
    rho = getattr(rho, "rho", rho)
    return np.asarray(getattr(rho, "values", rho), dtype=float)


def _chords(offsets):
    """Split a symmetric convex stencil into last-axis chords ``{(lead, half_length)}``."""
    lead = offsets[:, :-1]
    last = np.abs(offsets[:, -1])
    keys, inv = np.unique(lead, axis=0, return_inverse=True)
    half = np.zeros(len(keys), dtype=int)
    np.maximum.at(half, inv.ravel(), last)
    return keys, half


def ball_filter(field_, offsets, kind="sum"):
    """Periodic sum or max of ``field_`` over ``x + offsets`` for every x.

    Each chord is a 1D window along the last axis, then shifted along the leading axes;
    sums of nonnegative data stay nonnegative (no FFT round-off).
    """
    d = field_.ndim
    keys, half = _chords(offsets)
    axis = d - 1
    windows = {}
    for L in np.unique(half):
        if kind == "sum":
            windows[L] = ndimage.convolve1d(field_, np.ones(2 * L + 1), axis=axis, mode="wrap")
        else:
            windows[L] = ndimage.maximum_filter1d(field_, 2 * L + 1, axis=axis, mode="wrap")
    out = None
    for key, L in zip(keys, half):
        shifted = np.roll(windows[L], tuple(-key), axis=tuple(range(d - 1))) if d > 1 else windows[L]
        if out is None:
            out = shifted.copy()
        elif kind == "sum":
            out += shifted
        else:
            np.maximum(out, shifted, out=out)
    return out


def _indicator_level(vals):
    """Return ``c`` when ``vals`` takes only the values 0 and ``c > 0``, else None."""
    nz = vals[vals != 0]
    if nz.size == 0:
        return None
    c = nz[0]
    return c if np.all(nz == c) else None


def ball_averages(f_abs, grid, radius, A, centers=None):
    """``||f||_{A, B(c, radius)}`` for every centre (or the listed ``centers``)."""
    offs = ball_stencil(grid, radius)
    m = len(offs)
    if centers is not None and len(centers) == 0:
        return np.zeros(0)

    def ball_sums(vals):
        if centers is None:
            return ball_filter(vals.reshape(grid.shape), offs, "sum").ravel()
        return vals[stencil_indices(grid, centers, offs)].sum(axis=1)

    if A.is_power:
        r = A.power
        return (ball_sums(f_abs**r) / m) ** (1.0 / r)
    c = _indicator_level(f_abs)
    if c is not None:
        hits = ball_sums((f_abs > 0).astype(float))
        out = np.zeros(hits.shape)
        pos = hits > 0
        out[pos] = c / A.inverse(m / hits[pos])
        return out
    idx_centers = np.arange(grid.size) if centers is None else np.asarray(centers)
    out = np.empty(len(idx_centers))
    step = max(1, _CHUNK // m)
    for i in range(0, len(idx_centers), step):
        cs = idx_centers[i : i + step]
        rows = f_abs[stencil_indices(grid, cs, offs)]
        out[i : i + step] = luxemburg_rows(rows, A)
    return out


def _spread_max(out, grid, radius, values, centers):
    """``out[x] = max(out[x], values[c])`` for every ball ``B(c, radius)`` containing x."""
    offs = ball_stencil(grid, radius)
    if centers is None:
        spread = ball_filter(values.reshape(grid.shape), offs, "max").ravel()
        np.maximum(out, spread, out=out)
    else:
        idx = stencil_indices(grid, centers, offs)
        np.maximum.at(out, idx.ravel(), np.repeat(values, len(offs)))


def _apply_once(f_abs, grid, spec, young, mode):
    out = np.full(grid.size, -np.inf)
    rho = _rho_values(spec.rho) if mode != "full" else None
    single = spec.dictionary.radii[0]
    for g in spec.dictionary.groups:
        vals = ball_averages(f_abs, grid, g.radius, young, g.centers)
        if mode != "full":
            r_c = rho if g.centers is None else rho[g.centers]
            if mode == "local":
                # the single-cell ball is always admissible so the sup is never empty
                if g.radius > single:
                    vals = np.where(g.radius <= r_c, vals, -np.inf)
            elif spec.theta != 0:
                vals = vals * (1.0 + g.radius / r_c) ** (-spec.theta)
        _spread_max(out, grid, g.radius, vals, g.centers)
    if not np.all(np.isfinite(out)):
        raise RuntimeError("some grid point is not covered by an admissible dictionary ball")
    return out


def maximal_apply(f, spec):
    """Apply the maximal operator described by ``spec`` to ``f``; returns a GridFunction."""
    grid = f.grid
    if spec.dictionary.grid != grid:
        raise ValueError("maximal dictionary was built on a different grid")
    vals = _apply_once(np.abs(f.values), grid, spec, spec.young, spec.mode)
    plain = YoungFunction("power", (1.0,))
    for _ in range(spec.compose_with_hl):
        vals = _apply_once(vals, grid, spec, plain, "full")
    return GridFunction(grid, vals)


def hardy_littlewood(f, dictionary, times=1):
    """Plain uncentred ``M`` (``times`` >= 1 compositions) over ``dictionary``."""
    spec = MaximalSpec(dictionary, compose_with_hl=times - 1)
    return maximal_apply(f, spec)


def brute_force_maximal(f, spec):
    """Ball-by-ball reference implementation; O(|dictionary| * ball size)."""
    grid = f.grid
    f_abs = np.abs(f.values)
    out = np.full(grid.size, -np.inf)
    rho = _rho_values(spec.rho) if spec.mode != "full" else None
    single = spec.dictionary.radii[0]
    for c, r in spec.dictionary.balls():
        offs = ball_stencil(grid, r)
        pts = stencil_indices(grid, [c], offs)[0]
        if spec.young.is_power:
            v = float(np.mean(f_abs[pts] ** spec.young.power) ** (1 / spec.young.power))
        else:
            v = float(luxemburg_rows(f_abs[pts][None, :], spec.young)[0])
        if spec.mode == "local" and r > single and r > rho[c]:
            continue
        if spec.mode == "theta" and spec.theta != 0:
            v *= (1.0 + r / rho[c]) ** (-spec.theta)
        out[pts] = np.maximum(out[pts], v)
    return GridFunction(grid, out)


def refine_check(f, spec):
    """Largest relative change of ``maximal_apply`` when the number of radii doubles."""
    d = spec.dictionary
    finer = build_dictionary(d.grid, d.policy, 2 * d.k_radii, d.stride)
    a = maximal_apply(f, spec).values
    b = maximal_apply(f, replace(spec, dictionary=finer)).values
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(b - a) / scale))
