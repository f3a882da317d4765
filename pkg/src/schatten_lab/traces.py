"""Three trace estimates: diagonal quadrature, dyadic cell averages, eigenvalue sum.

On a finite grid the diagonal samples of a kernel are ordinary matrix entries,
so a pointwise change of the diagonal changes the operator too.  The
continuum situation, where the kernel is only defined almost everywhere and
its diagonal values do not affect the operator, is modelled by passing the
operator separately: ``averaged_trace(K, j_max, operator=T)`` reads the
pointwise kernel ``K`` for the diagonal and averaged traces and the
eigenvalues from ``T``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InputError, ParameterError
from .kernels import DiscretizedKernel, Grid

PATHOLOGY_TOLERANCE = 0.01


def _require_square(K: DiscretizedKernel) -> None:
    if not K.is_square:
        raise InputError("trace estimates need identical row and column grids")


def diagonal_trace(K: DiscretizedKernel) -> complex:
    """Quadrature of the sampled diagonal, ``sum_i w_i K(x_i, x_i)``."""
    _require_square(K)
    return complex(np.sum(K.row_grid.weights * np.diag(K.values)))


def eigen_trace(K: DiscretizedKernel) -> complex:
    """Sum of the eigenvalues of the weighted operator matrix."""
    _require_square(K)
    A = K.operator_matrix
    if np.array_equal(A, A.conj().T):
        ev = scipy.linalg.eigvalsh(A, check_finite=False)
    else:
        ev = scipy.linalg.eigvals(A, check_finite=False)
    return complex(np.sum(ev))


def _cell_labels(grid: Grid, j: int) -> tuple[np.ndarray, int]:
    """Dyadic cell index of every grid point at level ``j`` and the cell count."""
    cells_per_axis = 2**j
    for n in grid.axis_counts:
        if n % cells_per_axis:
            raise ParameterError(
                f"axis length {n} is not divisible into {cells_per_axis} dyadic cells"
            )
    pos = np.unravel_index(np.arange(len(grid)), grid.axis_counts)
    sub = [p // (n // cells_per_axis) for p, n in zip(pos, grid.axis_counts)]
    labels = np.ravel_multi_index(sub, (cells_per_axis,) * len(grid.axis_counts))
    return labels, cells_per_axis ** len(grid.axis_counts)


def dyadic_average(K: DiscretizedKernel, j: int) -> DiscretizedKernel:
    """Replace ``K`` on each product cell ``C_j(x) x C_j(y)`` by its weighted average.

    Level ``j`` splits every axis into ``2**j`` equal index blocks.  Cells on
    which ``K`` is constant keep that value exactly.
    """
    _require_square(K)
    if j < 0:
        raise ParameterError(f"level must be nonnegative, got {j}")
    grid = K.row_grid
    labels, ncell = _cell_labels(grid, j)
    order = np.argsort(labels, kind="stable")
    m = len(grid) // ncell
    w = grid.weights[order]
    V = K.values[np.ix_(order, order)]
    block = (w[:, None] * V * w[None, :]).reshape(ncell, m, ncell, m)
    cell_w = w.reshape(ncell, m).sum(axis=1)
    avg = block.sum(axis=(1, 3)) / np.outer(cell_w, cell_w)

    Vb = V.reshape(ncell, m, ncell, m)
    if np.iscomplexobj(V):
        const = (Vb.real.max(axis=(1, 3)) == Vb.real.min(axis=(1, 3))) & (
            Vb.imag.max(axis=(1, 3)) == Vb.imag.min(axis=(1, 3))
        )
    else:
        const = Vb.max(axis=(1, 3)) == Vb.min(axis=(1, 3))
    avg = np.where(const, Vb[:, 0, :, 0], avg)

    cell_of = np.empty(len(grid), dtype=int)
    cell_of[order] = np.repeat(np.arange(ncell), m)
    return K.with_values(avg[np.ix_(cell_of, cell_of)])


def max_dyadic_level(grid: Grid) -> int:
    """Finest level at which every axis still splits evenly."""
    level = 0
    while all(n % 2 ** (level + 1) == 0 for n in grid.axis_counts):
        level += 1
    return level


@dataclass
class TraceReport:
    diagonal_trace: complex
    averaged_trace_by_level: list
    eigen_trace: complex
    discrepancy_flags: set = field(default_factory=set)
    levels: list = field(default_factory=list)

    @property
    def finest_averaged_trace(self) -> complex | None:
        return self.averaged_trace_by_level[-1] if self.averaged_trace_by_level else None

    def to_dict(self) -> dict:
        def c(z):
            return {"re": z.real, "im": z.imag}

        return {
            "diagonal_trace": c(self.diagonal_trace),
            "eigen_trace": c(self.eigen_trace),
            "averaged_trace_by_level": [
                {"j": j, "trace": c(t)} for j, t in zip(self.levels, self.averaged_trace_by_level)
            ],
            "discrepancy_flags": sorted(self.discrepancy_flags),
        }

    def levels_to_csv(self, path) -> None:
        complex_valued = any(t.imag != 0 for t in self.averaged_trace_by_level)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["j", "trace"])
            for j, t in zip(self.levels, self.averaged_trace_by_level):
                writer.writerow([j, repr(t) if complex_valued else repr(t.real)])


def _rel_gap(a: complex, b: complex) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def averaged_trace(
    K: DiscretizedKernel,
    j_max: int | None = None,
    operator: DiscretizedKernel | None = None,
    tolerance: float = PATHOLOGY_TOLERANCE,
) -> TraceReport:
    """Diagonal, dyadic-averaged (levels ``1..j_max``) and eigenvalue traces.

    Flags ``diagonal-pathology`` when the raw diagonal misses the eigenvalue
    trace by more than ``tolerance`` (relative) while the finest averaged
    trace matches it, and ``non-convergent-averaging`` when the finest
    averaged trace misses it.
    """
    _require_square(K)
    op = K if operator is None else operator
    if not op.row_grid.same_as(K.row_grid):
        raise InputError("operator and kernel must share a grid")
    if j_max is None:
        j_max = max_dyadic_level(K.row_grid)
    levels = list(range(1, j_max + 1))
    averaged = [diagonal_trace(dyadic_average(K, j)) for j in levels]
    diag = diagonal_trace(K)
    eig = eigen_trace(op)
    flags = set()
    if averaged:
        final_ok = _rel_gap(averaged[-1], eig) <= tolerance
        if not final_ok:
            flags.add("non-convergent-averaging")
        if _rel_gap(diag, eig) > tolerance and final_ok:
            flags.add("diagonal-pathology")
    return TraceReport(diag, averaged, eig, flags, levels)
