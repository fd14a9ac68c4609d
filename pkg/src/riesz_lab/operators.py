"""Fourier multipliers, the Schroedinger operator ``L = -Laplacian + V`` and its functional calculus.

Frequencies are ``xi = 2 pi k / side``.  The first-order derivative symbol is
``i xi_j`` except at the Nyquist index of axis ``j``, where the (self-conjugate) symbol
is the real number ``|xi_j|``; this keeps real fields real and makes
``grad^* grad = -Laplacian`` exactly with the full symbol ``|xi|^2``.
Every operator acts on flat arrays of length ``n**d`` or on stacks of columns.
"""

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import GridFunction

BUDGET = 20_000


# ---------------------------------------------------------------- symbols


def frequencies(grid):
    """Per-axis angular frequencies, each broadcastable to the grid shape."""
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    xi = 2 * np.pi * k / grid.side
    out = []
    for j in range(grid.d):
        shape = [1] * grid.d
        shape[j] = grid.n
        out.append(xi.reshape(shape))
    return out


def xi_squared(grid):
    return sum(x**2 for x in frequencies(grid)) + np.zeros(grid.shape)


def gradient_symbol(grid, j):
    xi = frequencies(grid)[j]
    nyq = np.fft.fftfreq(grid.n, 1.0 / grid.n).reshape(xi.shape) == -grid.n // 2
    sym = np.where(nyq, np.abs(xi), 1j * xi)
    return np.broadcast_to(sym, grid.shape).astype(complex)


def hermitian_part(grid, sym):
    """Symbol of ``Re(ifft(sym * fft(f)))``: ``(m(k) + conj(m(-k))) / 2``."""
    flipped = np.conj(np.roll(np.flip(sym), 1, axis=tuple(range(grid.d))))
    return 0.5 * (sym + flipped)


def hessian_symbol(grid, j, k):
    xi = frequencies(grid)
    return hermitian_part(grid, np.broadcast_to(-xi[j] * xi[k], grid.shape).astype(complex))


# ---------------------------------------------------------------- operators


def _as_columns(f, grid):
    a = np.asarray(f.values if isinstance(f, GridFunction) else f)
    if a.shape[0] != grid.size:
        raise ValueError(f"expected arrays with leading length {grid.size}, got {a.shape}")
    return a


class LinearOperator:
    """Base class: ``T(f)`` accepts a GridFunction (returns one) or a flat array / column stack."""

    grid = None
    name = "T"

    def apply(self, a):
        raise NotImplementedError

    def adjoint(self):
        raise NotImplementedError

    def __call__(self, f):
        out = self.apply(_as_columns(f, self.grid))
        if isinstance(f, GridFunction):
            return GridFunction(self.grid, out)
        return out

    def __matmul__(self, other):
        return Composition([self, other])

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Identity(LinearOperator):
    def __init__(self, grid, name="Id"):
        self.grid, self.name = grid, name

    def apply(self, a):
        return np.array(a, dtype=float)

    def adjoint(self):
        return self


class Multiplier(LinearOperator):
    """Fourier multiplier; output is the real part (symbols here are Hermitian)."""

    def __init__(self, grid, symbol, name, mean_zero=False):
        self.grid, self.name = grid, name
        self.symbol = np.asarray(symbol, dtype=complex).reshape(grid.shape)
        self.mean_zero = mean_zero

    def apply(self, a):
        a = np.asarray(a, dtype=float)
        if self.mean_zero:
            cols = a.reshape(self.grid.size, -1)
            scale = np.sqrt(np.mean(cols**2, axis=0))
            if np.any(np.abs(cols.mean(axis=0)) > 1e-10 * np.maximum(scale, 1e-300)):
                raise ValueError(f"{self.name} is defined on mean-zero inputs only (zero mode has no symbol)")
        extra = a.shape[1:]
        arr = a.reshape(self.grid.shape + extra)
        axes = tuple(range(self.grid.d))
        sym = self.symbol.reshape(self.grid.shape + (1,) * len(extra))
        out = np.fft.ifftn(sym * np.fft.fftn(arr, axes=axes), axes=axes).real
        return out.reshape(a.shape)

    def adjoint(self):
        return Multiplier(self.grid, np.conj(self.symbol), _adjoint_name(self.name), self.mean_zero)


class Dense(LinearOperator):
    def __init__(self, grid, matrix, name):
        self.grid, self.name = grid, name
        self.matrix = np.asarray(matrix, dtype=float)

    def apply(self, a):
        return self.matrix @ np.asarray(a, dtype=float)

    def adjoint(self):
        return Dense(self.grid, self.matrix.T, _adjoint_name(self.name))


class Diagonal(LinearOperator):
    """Pointwise multiplication by a field."""

    def __init__(self, grid, values, name):
        self.grid, self.name = grid, name
        self.values = np.asarray(values, dtype=float).reshape(grid.size)

    def apply(self, a):
        a = np.asarray(a, dtype=float)
        return self.values.reshape((-1,) + (1,) * (a.ndim - 1)) * a

    def adjoint(self):
        return self


class Spectral(LinearOperator):
    """``g(L) = U g(Lambda) U^T`` for a Schroedinger operator ``L``."""

    def __init__(self, L, g_values, name):
        self.grid, self.name, self.L = L.grid, name, L
        self.g_values = np.asarray(g_values, dtype=float)

    def apply(self, a):
        a = np.asarray(a, dtype=float)
        U = self.L.eigenvectors
        g = self.g_values.reshape((-1,) + (1,) * (a.ndim - 1))
        return U @ (g * (U.T @ a))

    def adjoint(self):
        return self


class Composition(LinearOperator):
    """``factors[0] o factors[1] o ...``; the last factor acts first."""

    def __init__(self, factors, name=None):
        flat = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Composition) else [f])
        grids = {f.grid for f in flat}
        if len(grids) != 1:
            raise ValueError("composed operators live on different grids")
        self.factors = flat
        self.grid = flat[0].grid
        self.name = name or " o ".join(f.name for f in flat)

    def apply(self, a):
        out = np.asarray(a, dtype=float)
        for f in reversed(self.factors):
            out = f.apply(out)
        return out

    def adjoint(self):
        return Composition([f.adjoint() for f in reversed(self.factors)], _adjoint_name(self.name))


def _adjoint_name(name):
    return name[:-1] if name.endswith("*") else name + "*"


def gradient(grid, j):
    return Multiplier(grid, gradient_symbol(grid, j), f"d{j}")


def divergence_parts(grid):
    """Multipliers ``D_j`` with ``div F = sum_j D_j F_j = -grad^* F``."""
    return [Multiplier(grid, -np.conj(gradient_symbol(grid, j)), f"div{j}") for j in range(grid.d)]


def hessian(grid, j, k):
    return Multiplier(grid, hessian_symbol(grid, j, k), f"d{j}d{k}")


def laplacian(grid):
    return Multiplier(grid, -xi_squared(grid), "Laplacian")


# ---------------------------------------------------------------- classical


def _inverse_power(grid, power):
    x2 = xi_squared(grid)
    out = np.zeros(grid.shape)
    nz = x2 > 0
    out[nz] = x2[nz] ** (-power)
    return out


def assemble_classical(grid, name, j=0, k=0, gamma=0.5):
    """Classical multipliers: ``"Riesz1"`` (component ``j``), ``"Riesz2"`` (``j, k``),
    ``"FracLap"`` (``|xi|^(-2 gamma)``) and ``"FracInt"`` (``|xi|^-1``); zero mode maps to 0."""
    for idx in (j, k):
        if not 0 <= idx < grid.d:
            raise ValueError(f"component {idx} out of range for d = {grid.d}")
    if name == "Riesz1":
        return Multiplier(grid, gradient_symbol(grid, j) * _inverse_power(grid, 0.5), f"classical:R1{j}")
    if name == "Riesz2":
        return Multiplier(grid, hessian_symbol(grid, j, k) * _inverse_power(grid, 1.0), f"classical:R2{j}{k}")
    if name == "FracLap":
        if not gamma > 0:
            raise ValueError(f"FracLap needs gamma > 0, got {gamma}")
        return Multiplier(grid, _inverse_power(grid, gamma), f"classical:FracLap:{gamma:g}", mean_zero=True)
    if name == "FracInt":
        return Multiplier(grid, _inverse_power(grid, 0.5), "classical:FracInt", mean_zero=True)
    raise ValueError(f"unknown classical operator {name!r}")


# ---------------------------------------------------------------- Schroedinger


def laplacian_matrix(grid):
    """Dense ``-Laplacian`` (spectral, circulant) over grid points."""
    col = np.fft.ifftn(xi_squared(grid)).real.ravel()
    ic = grid.index_coords
    diff = (ic[:, None, :] - ic[None, :, :]) % grid.n
    return col[np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), grid.shape)]


@dataclass(eq=False)
class SchrodingerOperator:
    grid: object
    V: GridFunction
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    discretization: str = "SpectralLaplacian"

    def apply(self, a):
        return self.matrix @ np.asarray(a, dtype=float)

    def function(self, g, name):
        """Spectral function ``g(L)`` with ``g`` a callable on eigenvalues."""
        return Spectral(self, g(self.eigenvalues), name)

    @cached_property
    def sqrt_V(self):
        return np.sqrt(self.V.values)


def _check_budget(grid):
    if grid.size > BUDGET:
        raise ValueError(f"grid has {grid.size} points; dense Schroedinger budget is {BUDGET}")


def assemble_schrodinger(grid, V):
    """Dense ``L = -Laplacian + diag(V)`` and its full symmetric eigendecomposition."""
    if grid.d < 3:
        raise ValueError(f"Schroedinger operators need d >= 3, got d = {grid.d}")
    _check_budget(grid)
    if V.grid != grid:
        raise ValueError("potential lives on a different grid")
    if np.any(V.values < 0):
        raise ValueError("potential must be nonnegative")
    if not np.any(V.values > 0):
        raise ValueError("potential vanishes identically; L is not invertible")
    mat = laplacian_matrix(grid)
    mat = 0.5 * (mat + mat.T)
    mat[np.diag_indices_from(mat)] += V.values
    lam, U = np.linalg.eigh(mat)
    if lam[0] <= 0:
        raise ValueError("L is not positive definite at this resolution")
    return SchrodingerOperator(grid, V, mat, lam, U)


_NAME = re.compile(r"^(?P<base>[A-Za-z_]+?[0-9]?)(?P<star>\*)?(?::(?P<arg>[^:]+))?(?::(?P<comp>\d+))?$")


def parse_operator_name(name):
    """Split ``"mixed*:0.75"``-style tags into ``(base, adjoint, gamma, components)``."""
    m = _NAME.match(name.strip())
    if not m:
        raise ValueError(f"cannot parse operator name {name!r}")
    base, star, arg, comp = m.group("base"), bool(m.group("star")), m.group("arg"), m.group("comp")
    if base in ("R1", "R2") and arg is not None and comp is None:
        comp, arg = arg, None
    gamma = None
    if arg is not None:
        try:
            gamma = float(arg)
        except ValueError as exc:
            raise ValueError(f"bad parameter in operator name {name!r}") from exc
    comps = tuple(int(c) for c in comp) if comp else ()
    return base, star, gamma, comps


def check_gamma(family, gamma, d):
    if family == "VgL" and not 0 < gamma < d / 2:
        raise ValueError(f"VgL needs 0 < gamma < d/2 = {d / 2:g}, got {gamma}")
    if family == "mixed" and not 0.5 < gamma <= 1:
        raise ValueError(f"mixed needs 1/2 < gamma <= 1, got {gamma}")


def build_operator(L, name):
    """Operators of ``L`` by tag: ``R1[:j]``, ``R2[:jk]``, ``VgL:g``, ``mixed:g[:j]``,
    ``Linv``, ``Lhalf_inv``, ``Id``; a trailing ``*`` on the base gives the adjoint."""
    grid = L.grid
    base, star, gamma, comps = parse_operator_name(name)
    for c in comps:
        if not 0 <= c < grid.d:
            raise ValueError(f"component {c} out of range for d = {grid.d}")
    lam = L.eigenvalues
    if base == "R1":
        (j,) = comps or (0,)
        op = Composition([gradient(grid, j), Spectral(L, lam**-0.5, "L^-1/2")], f"R1:{j}")
    elif base == "R2":
        j, k = comps or (0, 0)
        op = Composition([hessian(grid, j, k), Spectral(L, 1 / lam, "L^-1")], f"R2:{j}{k}")
    elif base == "VgL":
        if gamma is None:
            raise ValueError("VgL needs a gamma, e.g. 'VgL:0.5'")
        check_gamma("VgL", gamma, grid.d)
        op = Composition(
            [Diagonal(grid, L.V.values**gamma, f"V^{gamma:g}"), Spectral(L, lam**-gamma, f"L^-{gamma:g}")],
            f"VgL:{gamma:g}",
        )
    elif base == "mixed":
        if gamma is None:
            raise ValueError("mixed needs a gamma, e.g. 'mixed:0.75'")
        check_gamma("mixed", gamma, grid.d)
        (j,) = comps or (0,)
        op = Composition(
            [
                Diagonal(grid, L.V.values ** (gamma - 0.5), f"V^{gamma - 0.5:g}"),
                gradient(grid, j),
                Spectral(L, lam**-gamma, f"L^-{gamma:g}"),
            ],
            f"mixed:{gamma:g}:{j}",
        )
    elif base == "Linv":
        op = Spectral(L, 1 / lam, "Linv")
    elif base == "Lhalf_inv":
        op = Spectral(L, lam**-0.5, "Lhalf_inv")
    elif base == "Id":
        op = Identity(grid)
    else:
        raise ValueError(f"unknown operator {name!r}")
    return op.adjoint() if star else op


ZOO = ("R1:0", "R1:2", "R2:00", "R2:01", "R2:12", "VgL:0.25", "VgL:1", "VgL:1.4", "mixed:0.75", "mixed:1:1",
       "Linv", "Lhalf_inv", "Id")
CLASSICAL_ZOO = ("classical:R10", "classical:R12", "classical:R200", "classical:R201", "classical:FracLap:0.5",
                 "classical:FracInt")


def operator_zoo(L):
    """Every named operator of ``L`` and every classical multiplier, with their adjoints, as ``{name: T}``."""
    out = {}
    for name in ZOO:
        base, _, rest = name.partition(":")
        out[name] = build_operator(L, name)
        out[base + "*" + (":" + rest if rest else "")] = build_operator(L, base + "*" + (":" + rest if rest else ""))
    for name in CLASSICAL_ZOO:
        out[name] = classical_from_name(L.grid, name)
    return out


def classical_from_name(grid, name):
    """``"classical:R1j"``, ``"classical:R2jk"``, ``"classical:FracLap:g"``, ``"classical:FracInt"``."""
    body = name.split(":", 1)[1] if name.startswith("classical:") else name
    star = body.endswith("*")
    body = body.rstrip("*")
    m = re.fullmatch(r"R1(\d)", body)
    if m:
        op = assemble_classical(grid, "Riesz1", j=int(m.group(1)))
    elif re.fullmatch(r"R2(\d)(\d)", body):
        j, k = int(body[2]), int(body[3])
        op = assemble_classical(grid, "Riesz2", j=j, k=k)
    elif body.startswith("FracLap"):
        op = assemble_classical(grid, "FracLap", gamma=float(body.split(":")[1]))
    elif body == "FracInt":
        op = assemble_classical(grid, "FracInt")
    else:
        raise ValueError(f"unknown classical operator {name!r}")
    return op.adjoint() if star else op


# ---------------------------------------------------------------- kernels


@dataclass(eq=False)
class OperatorKernel:
    """``K[x, y]`` such that ``(Tf)(x) = sum_y K[x, y] f(y) spacing^d``."""

    grid: object
    K: np.ndarray
    name: str

    def apply(self, f):
        vals = f.values if isinstance(f, GridFunction) else np.asarray(f)
        return self.K @ vals * self.grid.cell_volume

    def column(self, y):
        return GridFunction(self.grid, self.K[:, y])

    def transpose(self):
        return OperatorKernel(self.grid, self.K.T.copy(), _adjoint_name(self.name))


def kernel_of(T, columns=None):
    """Kernel matrix of ``T`` from cell indicators ``e_y / spacing^d``."""
    grid = T.grid
    _check_budget(grid)
    cols = np.arange(grid.size) if columns is None else np.asarray(columns)
    E = np.zeros((grid.size, len(cols)))
    E[cols, np.arange(len(cols))] = 1.0 / grid.cell_volume
    return OperatorKernel(grid, T.apply(E), T.name)


# ---------------------------------------------------------------- checks


def adjoint_defect(T, f, g, Tstar=None):
    """``|<Tf, g> - <f, T*g>|`` relative to ``|Tf| |g| + |f| |T*g|``."""
    Tstar = Tstar or T.adjoint()
    Tf, Tsg = T.apply(f), Tstar.apply(g)
    lhs, rhs = np.dot(Tf, g), np.dot(f, Tsg)
    scale = np.linalg.norm(Tf) * np.linalg.norm(g) + np.linalg.norm(f) * np.linalg.norm(Tsg)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def operator_norm(T, iters=200, seed=0, tol=1e-10):
    """Power iteration for ``||T||_{2->2}`` on ``T^* T``."""
    Tstar = T.adjoint()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(T.grid.size)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = Tstar.apply(T.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(nw - est) <= tol * nw:
            est = nw
            break
        est = nw
    return float(np.sqrt(est))


# ---------------------------------------------------------------- PDE


@dataclass
class PDESolution:
    u: GridFunction
    grad_u: list
    hess_u: list
    Vu: GridFunction
    sqrtV_grad_u: list
    sqrtV_u: GridFunction
    rhs: GridFunction
    residual: float


def solve_pde(L, source=None, flux=None):
    """Solve ``-Laplacian u + V u = source`` or ``= div(flux)`` (``flux``: list of d fields)."""
    grid = L.grid
    if (source is None) == (flux is None):
        raise ValueError("give exactly one of source or flux")
    if source is not None:
        rhs = np.asarray(source.values, dtype=float)
    else:
        if len(flux) != grid.d:
            raise ValueError(f"flux needs {grid.d} components")
        rhs = sum(D.apply(F.values) for D, F in zip(divergence_parts(grid), flux))
    u = Spectral(L, 1 / L.eigenvalues, "Linv").apply(rhs)
    grads = [gradient(grid, j).apply(u) for j in range(grid.d)]
    hess = [[hessian(grid, j, k).apply(u) for k in range(grid.d)] for j in range(grid.d)]
    sv = L.sqrt_V
    res = np.linalg.norm(L.apply(u) - rhs) / max(np.linalg.norm(rhs), 1e-300)
    gf = lambda a: GridFunction(grid, a)  # noqa: E731
    return PDESolution(
        gf(u),
        [gf(a) for a in grads],
        [[gf(a) for a in row] for row in hess],
        gf(L.V.values * u),
        [gf(sv * a) for a in grads],
        gf(sv * u),
        gf(rhs),
        float(res),
    )
