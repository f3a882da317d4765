"""Discretized integral kernels on tori, integer lattices and unions of intervals.

A kernel ``K(x, y)`` is sampled on a row grid (the ``x`` variable) and a
column grid (the ``y`` variable), each carrying quadrature weights.  The
matrix ``diag(sqrt(w_x)) K diag(sqrt(w_y))`` then has the singular values of
the discretized operator ``L^2(mu_y) -> L^2(mu_x)``.

Grid points are always ordered lexicographically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma

from .errors import InputError, ParameterError
from .spectral import SingularSpectrum

TWO_PI = 2.0 * math.pi
KINDS = ("torus", "lattice", "interval-union")


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes and weights for one variable of a kernel.

    ``axis_counts`` gives the number of nodes per axis; ``size_param`` is the
    points-per-axis ``N`` of a torus or the truncation radius ``R`` of a
    lattice.  ``half_open`` lattices use the box ``[-R, R-1]`` so that each
    axis has a power-of-two length when ``R`` is one.
    """

    kind: str
    dimension: int
    points: np.ndarray
    weights: np.ndarray
    axis_counts: tuple
    size_param: int | None = None
    half_open: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown grid kind {self.kind!r}")
        pts = np.asarray(self.points)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise InputError("points must have shape (n, dimension)")
        if w.shape != (pts.shape[0],):
            raise InputError("weights must have one entry per point")
        if not np.all(w > 0):
            raise InputError("quadrature weights must be strictly positive")
        for a in (pts, w):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]

    def same_as(self, other: "Grid") -> bool:
        return (
            self.kind == other.kind
            and self.dimension == other.dimension
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )


def _product_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def torus_grid(N: int, dimension: int = 1) -> Grid:
    if N < 4:
        raise ParameterError(f"torus grids need N >= 4 points per axis, got {N}")
    axis = TWO_PI * np.arange(N) / N
    pts = _product_points([axis] * dimension)
    w = np.full(len(pts), (TWO_PI / N) ** dimension)
    return Grid("torus", dimension, pts, w, (N,) * dimension, N)


def lattice_grid(R: int, dimension: int = 1, half_open: bool = False) -> Grid:
    if R < 1:
        raise ParameterError(f"lattice truncation radius must be >= 1, got {R}")
    axis = np.arange(-R, R if half_open else R + 1)
    pts = _product_points([axis] * dimension)
    return Grid("lattice", dimension, pts, np.ones(len(pts)), (len(axis),) * dimension, R, half_open)


def interval_grid(intervals, N: int) -> Grid:
    """Midpoint rule on a union of disjoint intervals, ``N`` nodes in total.

    Nodes are shared between intervals in proportion to their lengths
    (largest remainder rounding, at least one node each).
    """
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    if not ivs:
        raise InputError("need at least one interval")
    for a, b in ivs:
        if not b > a:
            raise InputError(f"interval ({a}, {b}) has non-positive length")
    for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
        if a1 < b0:
            raise InputError(f"intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
    if N < len(ivs):
        raise ParameterError(f"need at least one node per interval, got N={N}")
    lengths = np.array([b - a for a, b in ivs])
    share = N * lengths / lengths.sum()
    counts = np.maximum(np.floor(share).astype(int), 1)
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    i = 0
    while counts.sum() < N:
        counts[order[i % len(order)]] += 1
        i += 1
    while counts.sum() > N:
        j = int(np.argmax(counts))
        counts[j] -= 1
    pts, w = [], []
    for (a, b), n in zip(ivs, counts):
        h = (b - a) / n
        pts.append(a + h * (np.arange(n) + 0.5))
        w.append(np.full(n, h))
    pts = np.concatenate(pts)[:, None]
    return Grid("interval-union", 1, pts, np.concatenate(w), (N,), None)


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """Kernel samples ``values[i, j] = K(x_i, y_j)`` on a pair of grids."""

    row_grid: Grid
    col_grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.row_grid), len(self.col_grid)):
            raise InputError(
                f"values shape {v.shape} does not match grids "
                f"({len(self.row_grid)}, {len(self.col_grid)})"
            )
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise InputError(f"non-finite kernel value at index {tuple(int(b) for b in bad)}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def is_square(self) -> bool:
        return self.row_grid.same_as(self.col_grid)

    @property
    def operator_matrix(self) -> np.ndarray:
        rw = np.sqrt(self.row_grid.weights)
        cw = np.sqrt(self.col_grid.weights)
        return rw[:, None] * self.values * cw[None, :]

    def with_values(self, values) -> "DiscretizedKernel":
        return DiscretizedKernel(self.row_grid, self.col_grid, values)


def _coordinates(grid: Grid, as_rows: bool, flat: bool) -> np.ndarray:
    pts = grid.points
    if flat:
        c = pts[:, 0]
        return c[:, None] if as_rows else c[None, :]
    return pts[:, None, :] if as_rows else pts[None, :, :]


def sample_kernel(f: Callable, row_grid: Grid, col_grid: Grid) -> DiscretizedKernel:
    """Evaluate a vectorized callable on all grid pairs.

    One-dimensional grids pass ``f`` arrays of shape ``(n, 1)`` and ``(1, m)``;
    higher dimensions pass ``(n, 1, d_x)`` and ``(1, m, d_y)``.
    """
    flat = row_grid.dimension == 1 and col_grid.dimension == 1
    x = _coordinates(row_grid, True, flat)
    y = _coordinates(col_grid, False, flat)
    with np.errstate(all="ignore"):
        raw = np.asarray(f(x, y))
    vals = np.array(np.broadcast_to(raw, (len(row_grid), len(col_grid))))
    if not np.all(np.isfinite(vals)):
        i, j = np.argwhere(~np.isfinite(vals))[0]
        raise InputError(
            f"kernel is not finite at x={tuple(row_grid.points[i])}, y={tuple(col_grid.points[j])}"
        )
    return DiscretizedKernel(row_grid, col_grid, vals)


def build_torus_kernel(f: Callable, N: int, dim_x: int = 1, dim_y: int = 1) -> DiscretizedKernel:
    """Sample ``f`` on uniform grids of ``[0, 2pi)^dim`` with ``N`` points per axis."""
    return sample_kernel(f, torus_grid(N, dim_x), torus_grid(N, dim_y))


def build_lattice_kernel(
    f: Callable, R: int, dim_x: int = 1, dim_y: int = 1, half_open: bool = False
) -> DiscretizedKernel:
    """Sample ``f`` on the integer box ``[-R, R]^dim`` (counting measure)."""
    return sample_kernel(f, lattice_grid(R, dim_x, half_open), lattice_grid(R, dim_y, half_open))


def build_convolution_kernel(
    c, frequencies=None, M: int | None = None
) -> tuple[DiscretizedKernel, SingularSpectrum]:
    """Normalized convolution ``(1/2pi) int kappa(x - y) f(y) dy`` on the circle.

    ``kappa(t) = sum_k c_k e^{ikt}``.  By default ``c`` is indexed by
    ``-N..N`` and sampled on ``M = 2N + 1`` points; explicit ``frequencies``
    may be given instead, in which case ``M`` defaults to their span.  The
    frequencies must be distinct modulo ``M``, which makes the operator
    matrix circulant with eigenvalues ``c_k``.  Returns the kernel and the
    exact spectrum ``sorted |c_k|`` padded with zeros.
    """
    c = np.asarray(c, dtype=complex)
    if c.ndim != 1 or len(c) == 0:
        raise InputError("coefficients must be a nonempty one-dimensional sequence")
    if not np.all(np.isfinite(c)):
        raise InputError("coefficients must be finite")
    if frequencies is None:
        if len(c) % 2 != 1:
            raise InputError("coefficients indexed -N..N must have odd length")
        half = len(c) // 2
        freqs = np.arange(-half, half + 1)
    else:
        freqs = np.asarray(frequencies, dtype=np.int64)
        if freqs.shape != c.shape:
            raise InputError("frequencies and coefficients differ in length")
    if M is None:
        M = int(freqs.max() - freqs.min() + 1)
    M = max(int(M), 4)
    residues = np.mod(freqs, M)
    if len(np.unique(residues)) != len(freqs):
        raise ParameterError(f"frequencies are not distinct modulo M={M}")

    spectrum_line = np.zeros(M, dtype=complex)
    spectrum_line[residues] = c
    kappa = M * np.fft.ifft(spectrum_line)
    idx = np.mod(np.arange(M)[:, None] - np.arange(M)[None, :], M)
    values = kappa[idx] / TWO_PI

    # conjugate-symmetric coefficients give a real kernel
    lookup = dict(zip(freqs.tolist(), c.tolist()))
    if all(lookup.get(-k, 0.0) == np.conj(v) for k, v in lookup.items()):
        values = values.real

    grid = torus_grid(M)
    exact = np.zeros(M)
    exact[: len(c)] = np.abs(c)
    return DiscretizedKernel(grid, grid, values), SingularSpectrum.from_unsorted(exact, "circulant")


def riesz_constant(alpha: float, n: int = 1) -> float:
    """``c_{alpha,n} = 2^(alpha-n) pi^(-n/2) Gamma(alpha/2) / Gamma((n-alpha)/2)``."""
    return 2.0 ** (alpha - n) * math.pi ** (-n / 2) * gamma(alpha / 2) / gamma((n - alpha) / 2)


def build_riesz_kernel(alpha: float, intervals, N: int) -> DiscretizedKernel:
    """Riesz potential kernel ``c |x - y|^(alpha - 1)`` on a union of intervals.

    Off the diagonal the kernel is sampled at midpoints.  The diagonal entry
    of each cell is the exact average of ``c |t|^(alpha-1)`` over the cell
    width ``h``, namely ``c (2/alpha) (h/2)^alpha / h``.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    grid = interval_grid(intervals, N)
    x = grid.points[:, 0]
    c = riesz_constant(alpha, 1)
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, 1.0)
    values = c * dist ** (alpha - 1.0)
    h = grid.weights
    np.fill_diagonal(values, c * (2.0 / alpha) * (h / 2.0) ** alpha / h)
    return DiscretizedKernel(grid, grid, values)


def hilbert_schmidt_norm(K: DiscretizedKernel) -> float:
    """Weighted ``L^2`` norm of the kernel."""
    w = np.outer(K.row_grid.weights, K.col_grid.weights)
    return float(np.sqrt(np.sum(w * np.abs(K.values) ** 2)))


def mixed_norm(K: DiscretizedKernel, p: float, q: float) -> float:
    """``( int ( int |K(x,y)|^p dx )^(q/p) dy )^(1/q)``, inner integral over rows."""
    if p < 1 or q < 1:
        raise ParameterError(f"mixed norm exponents must be >= 1, got p={p}, q={q}")
    absK = np.abs(K.values)
    wx = K.row_grid.weights[:, None]
    wy = K.col_grid.weights
    if math.isinf(p):
        inner = absK.max(axis=0)
    else:
        inner = np.sum(wx * absK**p, axis=0) ** (1.0 / p)
    if math.isinf(q):
        return float(inner.max())
    return float(np.sum(wy * inner**q) ** (1.0 / q))


def adjoint_kernel(K: DiscretizedKernel) -> DiscretizedKernel:
    """``K*(x, y) = conj(K(y, x))`` with the grids swapped."""
    return DiscretizedKernel(K.col_grid, K.row_grid, K.values.conj().T)


# text serialization ---------------------------------------------------------

def _format_number(z) -> str:
    if isinstance(z, complex) or np.iscomplexobj(z):
        z = complex(z)
        sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
        return f"{z.real!r}{sign}{abs(z.imag)!r}j"
    return repr(float(z))


def _grid_header(prefix: str, grid: Grid) -> list[str]:
    lines = [f"{prefix}.kind={grid.kind}", f"{prefix}.dimension={grid.dimension}"]
    if grid.kind == "torus":
        lines.append(f"{prefix}.N={grid.size_param}")
    elif grid.kind == "lattice":
        lines.append(f"{prefix}.R={grid.size_param}")
        lines.append(f"{prefix}.half_open={int(grid.half_open)}")
    else:
        lines.append(f"{prefix}.points=" + ",".join(repr(float(p)) for p in grid.points[:, 0]))
    w = grid.weights
    if np.all(w == w[0]):
        lines.append(f"{prefix}.weights={w[0]!r}")
    else:
        lines.append(f"{prefix}.weights=" + ",".join(repr(float(v)) for v in w))
    return lines


def kernel_to_text(K: DiscretizedKernel) -> str:
    """Header ``key=value`` lines, a ``values`` marker, then row-major CSV."""
    cplx = np.iscomplexobj(K.values)
    lines = ["# schatten-lab kernel"]
    lines += _grid_header("row", K.row_grid)
    lines += _grid_header("col", K.col_grid)
    lines.append(f"shape={K.shape[0]},{K.shape[1]}")
    lines.append(f"dtype={'complex' if cplx else 'real'}")
    lines.append("values")
    conv = (lambda z: _format_number(complex(z))) if cplx else (lambda z: repr(float(z)))
    for row in K.values:
        lines.append(",".join(conv(z) for z in row))
    return "\n".join(lines) + "\n"


def _grid_from_header(prefix: str, hdr: dict) -> Grid:
    kind = hdr[f"{prefix}.kind"]
    dim = int(hdr[f"{prefix}.dimension"])
    if kind == "torus":
        return torus_grid(int(hdr[f"{prefix}.N"]), dim)
    if kind == "lattice":
        return lattice_grid(int(hdr[f"{prefix}.R"]), dim, bool(int(hdr[f"{prefix}.half_open"])))
    pts = np.array([float(v) for v in hdr[f"{prefix}.points"].split(",")])
    wvals = [float(v) for v in hdr[f"{prefix}.weights"].split(",")]
    w = np.array(wvals if len(wvals) > 1 else wvals * len(pts))
    return Grid("interval-union", 1, pts[:, None], w, (len(pts),), None)


def kernel_from_text(text: str) -> DiscretizedKernel:
    hdr: dict[str, str] = {}
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("#") or not line.strip():
            continue
        if line.strip() == "values":
            body = lines[i + 1:]
            break
        key, _, val = line.partition("=")
        hdr[key.strip()] = val.strip()
    else:
        raise InputError("kernel text has no 'values' section")
    cplx = hdr.get("dtype") == "complex"
    conv = complex if cplx else float
    rows = [[conv(tok) for tok in ln.split(",")] for ln in body if ln.strip()]
    values = np.array(rows, dtype=complex if cplx else float)
    return DiscretizedKernel(_grid_from_header("row", hdr), _grid_from_header("col", hdr), values)
