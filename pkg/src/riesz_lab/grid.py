"""Periodic grids, fields on them, balls under the periodic metric and quadrature."""

from dataclasses import dataclass
from functools import cached_property
from math import gamma, pi

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``n**d`` points on the torus ``[0, side)^d``."""

    d: int
    n: int
    side: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.d}")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"points per axis must be an integer >= 4, got {self.n}")
        if self.n % 2:
            raise ValueError(f"points per axis must be even (Nyquist symmetry), got {self.n}")
        if not self.side > 0:
            raise ValueError(f"side must be positive, got {self.side}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "side", float(self.side))

    @property
    def spacing(self):
        return self.side / self.n

    @property
    def size(self):
        return self.n**self.d

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def cell_volume(self):
        return self.spacing**self.d

    @cached_property
    def index_coords(self):
        """Integer coordinates of every point, shape ``(size, d)``, row-major."""
        idx = np.indices(self.shape).reshape(self.d, -1).T
        idx.setflags(write=False)
        return idx

    @cached_property
    def coords(self):
        """Physical coordinates of every point, shape ``(size, d)``."""
        c = self.index_coords * self.spacing
        c.setflags(write=False)
        return c

    def ravel(self, index_coords):
        return np.ravel_multi_index(tuple(np.asarray(index_coords).T % self.n), self.shape)

    def point(self, index):
        """Physical coordinates of the point with flat index ``index``."""
        return self.coords[index].copy()

    def distance(self, x, y):
        """Periodic Euclidean distance; broadcasts over leading axes."""
        diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % self.side
        diff = np.minimum(diff, self.side - diff)
        return np.sqrt(np.sum(diff**2, axis=-1))

    def distances_from(self, x):
        """Distance from ``x`` to every grid point."""
        return self.distance(self.coords, np.asarray(x, dtype=float)[None, :])


def make_grid(d, n, side):
    return Grid(d, n, side)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real field on a grid, stored flat in row-major order; values are read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_callable(cls, grid, fn):
        """Sample ``fn(coords)`` where ``coords`` has shape ``(size, d)``."""
        return cls(grid, np.broadcast_to(fn(grid.coords), (grid.size,)))

    @property
    def field(self):
        return self.values.reshape(self.grid.shape)

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0))

    def __repr__(self):
        return f"GridFunction({self.grid}, min={self.values.min():.4g}, max={self.values.max():.4g})"


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


def ball_volume(d, r):
    """Lebesgue measure of a Euclidean ball of radius ``r`` in dimension ``d``."""
    return pi ** (d / 2) / gamma(d / 2 + 1) * r**d


def _check_same_grid(*fns):
    grids = {f.grid for f in fns if f is not None}
    if len(grids) > 1:
        raise ValueError("grid functions live on different grids")


def _check_ball(grid, ball):
    if len(ball.center) != grid.d:
        raise ValueError(f"ball center has {len(ball.center)} coordinates, grid has d={grid.d}")
    if ball.radius > grid.side / 2 * (1 + 1e-12):
        raise ValueError(f"ball radius {ball.radius} exceeds side/2 = {grid.side / 2}")


def ball_mask(grid, ball):
    _check_ball(grid, ball)
    return grid.distances_from(ball.center) < ball.radius


def ball_points(grid, ball):
    """Flat indices of grid points at periodic distance < radius, ascending."""
    return np.flatnonzero(ball_mask(grid, ball))


def integrate(f, w=None, region=None):
    """Midpoint cell-sum of ``f * w`` over ``region`` (a Ball, a boolean mask or None)."""
    _check_same_grid(f, w)
    grid = f.grid
    vals = f.values if w is None else f.values * w.values
    if region is None:
        return float(np.sum(vals) * grid.cell_volume)
    mask = ball_mask(grid, region) if isinstance(region, Ball) else np.asarray(region, dtype=bool)
    return float(np.sum(vals[mask]) * grid.cell_volume)


def lp_norm(f, p, w=None):
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    _check_same_grid(f, w)
    g = GridFunction(f.grid, np.abs(f.values) ** p)
    return integrate(g, w) ** (1.0 / p)


def level_measure(f, w, lam):
    """Weighted measure ``w({|f| > lam})``."""
    if not lam > 0:
        raise ValueError(f"level must be positive, got {lam}")
    _check_same_grid(f, w)
    return integrate(w, region=np.abs(f.values) > lam)


def inner(f, g):
    """Quadrature inner product ``sum f*g*spacing^d``."""
    _check_same_grid(f, g)
    return float(np.dot(f.values, g.values) * f.grid.cell_volume)


def ball_stencil(grid, radius):
    """Integer offsets ``o`` with ``|o| * spacing < radius``, shape ``(m, d)``.

    Radii up to ``side/2`` never produce two offsets that wrap onto the same point.
    """
    if not 0 < radius <= grid.side / 2 * (1 + 1e-12):
        raise ValueError(f"stencil radius {radius} outside (0, side/2]")
    reach = min(int(np.ceil(radius / grid.spacing)), grid.n // 2)
    axis = np.arange(-reach, reach + 1)
    offs = np.stack(np.meshgrid(*([axis] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    radius = min(radius, grid.side / 2)
    keep = np.sqrt(np.sum(offs.astype(float) ** 2, axis=1)) * grid.spacing < radius
    return offs[keep]


def stencil_footprint(offsets, d):
    """Boolean footprint array (odd side length) centred at the zero offset."""
    reach = int(np.max(np.abs(offsets))) if len(offsets) else 0
    fp = np.zeros((2 * reach + 1,) * d, dtype=bool)
    fp[tuple((offsets + reach).T)] = True
    return fp


def stencil_indices(grid, centers, offsets):
    """Flat indices of ``center + offset`` for every pair, shape ``(len(centers), m)``."""
    c = grid.index_coords[np.asarray(centers)]
    pts = (c[:, None, :] + offsets[None, :, :]) % grid.n
    return np.ravel_multi_index(tuple(np.moveaxis(pts, -1, 0)), grid.shape)
