"""Schatten index predictions, sufficient-condition norms and membership verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError
from .kernels import DiscretizedKernel, adjoint_kernel, hilbert_schmidt_norm, mixed_norm
from .multipliers import DiagonalSymbol, apply_symbol, grid_frequencies, inverse_schatten_threshold
from .spectral import (
    SingularSpectrum,
    TailFit,
    fit_tail_exponent,
    schatten_norm,
    singular_values,
    within_tolerance,
)

EXPONENT_TOLERANCE = 0.05
DRIFT_LIMIT = 0.05


def _inv(p: float | None) -> float:
    if p is None:
        return 0.0
    if not p > 0:
        raise ParameterError(f"Schatten exponents must be positive, got {p}")
    return 0.0 if math.isinf(p) else 1.0 / p


def conjugate_exponent(q: float) -> float:
    if q == 1:
        return math.inf
    return q / (q - 1.0)


def predict_r_main(p1: float | None, p2: float | None) -> float:
    """``r`` with ``1/r = 1/2 + 1/p1 + 1/p2``; an absent index drops its term.

    The result always lies strictly between 0 and 2 for finite indices.
    """
    if p1 is None and p2 is None:
        raise ParameterError("at least one of p1, p2 is required")
    return 1.0 / (0.5 + _inv(p1) + _inv(p2))


def predict_r_mixed(q: float, p1: float | None = None, p2: float | None = None) -> float:
    """``r`` with ``1/r = 1/q' + 1/p1 + 1/p2`` for mixed ``L^{q'}(L^q)`` hypotheses.

    With no indices this is ``q'``, which exceeds 2 whenever ``q < 2``.
    """
    if not 1.0 < q <= 2.0:
        raise ParameterError(f"q must lie in (1, 2], got {q}")
    return 1.0 / (1.0 / conjugate_exponent(q) + _inv(p1) + _inv(p2))


def predict_decay(p1: float | None, p2: float | None, qprime: float = 2.0) -> float:
    """Decay exponent ``tau = 1/q' + 1/p1 + 1/p2`` of ``s_k = o(k^-tau)``."""
    if p1 is None and p2 is None:
        raise ParameterError("at least one of p1, p2 is required")
    if qprime < 2:
        raise ParameterError(f"q' must be >= 2, got {qprime}")
    return _inv(qprime) + _inv(p1) + _inv(p2)


@dataclass(frozen=True)
class RussoReport:
    bound: float
    measured: float
    holds: bool
    p: float

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    def to_dict(self) -> dict:
        return {"p": self.p, "bound": self.bound, "measured": self.measured, "holds": self.holds}


def russo_bound(K: DiscretizedKernel, p: float) -> RussoReport:
    """Compare ``||T||_{S_p'}`` with ``(||K||_{p,p'} ||K*||_{p,p'})^(1/2)``, ``1 < p < 2``."""
    if not 1.0 < p < 2.0:
        raise ParameterError(f"p must lie in (1, 2), got {p}")
    if not K.is_square:
        raise InputError("Russo's bound needs the same grid in both variables")
    pp = conjugate_exponent(p)
    bound = math.sqrt(mixed_norm(K, p, pp) * mixed_norm(adjoint_kernel(K), p, pp))
    measured = schatten_norm(singular_values(K.operator_matrix), pp)
    return RussoReport(bound, measured, within_tolerance(measured, bound), p)


@dataclass(frozen=True)
class ConditionNorm:
    """A hypothesis norm with a drift check between half and full truncation.

    ``partial_sum`` is the weighted sum whose root is ``norm``;
    ``half_partial_sum`` restricts it to half the truncation radius (lattices)
    or half the frequency band (tori).  ``drift`` is the relative growth from
    the half to the full sum and ``divergent`` flags growth above the limit.
    """

    norm: float
    partial_sum: float
    half_partial_sum: float | None
    drift: float | None
    divergent: bool

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "partial_sum": self.partial_sum,
            "half_partial_sum": self.half_partial_sum,
            "drift": self.drift,
            "divergent": self.divergent,
        }


def _half_box(grid) -> np.ndarray:
    return np.max(np.abs(grid.points), axis=1) <= grid.size_param // 2


def _half_band_sum(A: DiscretizedKernel) -> float:
    """Weighted L2 mass of the low half of the frequency band, via Parseval."""
    rg, cg = A.row_grid, A.col_grid
    dims = tuple(rg.axis_counts) + tuple(cg.axis_counts)
    spec = np.fft.fftn(A.values.reshape(dims))
    low_r = np.max(np.abs(grid_frequencies(rg)), axis=1) <= rg.size_param // 4
    low_c = np.max(np.abs(grid_frequencies(cg)), axis=1) <= cg.size_param // 4
    mass = np.abs(spec.reshape(len(rg), len(cg))) ** 2
    scale = rg.weights[0] * cg.weights[0] / (len(rg) * len(cg))
    return float(scale * np.sum(mass[np.ix_(low_r, low_c)]))


def _condition(partial: float, half: float | None, drift_limit: float) -> ConditionNorm:
    finite = math.isfinite(partial)
    if half is None or not finite:
        return ConditionNorm(math.sqrt(partial) if finite else math.inf, partial, half, None, not finite)
    drift = (partial - half) / half if half > 0 else (math.inf if partial > 0 else 0.0)
    return ConditionNorm(math.sqrt(partial), partial, half, drift, bool(drift > drift_limit))


def l2_condition(A: DiscretizedKernel, drift_limit: float = DRIFT_LIMIT) -> ConditionNorm:
    """Weighted L2 norm of a (transformed) kernel with a truncation drift check."""
    w = np.outer(A.row_grid.weights, A.col_grid.weights) * np.abs(A.values) ** 2
    partial = float(np.sum(w))
    half = None
    kinds = {A.row_grid.kind, A.col_grid.kind}
    if kinds == {"lattice"}:
        half = float(np.sum(w[np.ix_(_half_box(A.row_grid), _half_box(A.col_grid))]))
    elif kinds == {"torus"}:
        half = _half_band_sum(A)
    return _condition(partial, half, drift_limit)


def lattice_condition_norm(
    K: DiscretizedKernel, alpha: float, beta: float, drift_limit: float = DRIFT_LIMIT
) -> ConditionNorm:
    """``(sum (1+|k|)^(2 alpha) (1+|l|)^(2 beta) |K(k,l)|^2)^(1/2)`` over the truncation box."""
    if K.row_grid.kind != "lattice" or K.col_grid.kind != "lattice":
        raise InputError("lattice condition norms need lattice grids")
    if alpha < 0 or beta < 0:
        raise ParameterError("alpha and beta must be nonnegative")
    wk = (1.0 + np.linalg.norm(K.row_grid.points.astype(float), axis=1)) ** (2 * alpha)
    wl = (1.0 + np.linalg.norm(K.col_grid.points.astype(float), axis=1)) ** (2 * beta)
    terms = wk[:, None] * wl[None, :] * np.abs(K.values) ** 2
    partial = float(np.sum(terms))
    half = float(np.sum(terms[np.ix_(_half_box(K.row_grid), _half_box(K.col_grid))]))
    return _condition(partial, half, drift_limit)


@dataclass
class MembershipReport:
    """Predicted index and decay against the measured spectrum of one kernel."""

    predicted_r: float | None
    predicted_decay_tau: float | None
    condition_norms: dict
    measured_tail: TailFit | None
    verdict: str
    notes: str = ""
    thresholds: dict = field(default_factory=dict)
    q: float = 2.0
    spectrum: SingularSpectrum | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "predicted_r": self.predicted_r,
            "predicted_decay_tau": self.predicted_decay_tau,
            "q": self.q,
            "thresholds": dict(self.thresholds),
            "condition_norms": {
                k: v.to_dict() if hasattr(v, "to_dict") else v for k, v in self.condition_norms.items()
            },
            "measured_tail": None if self.measured_tail is None else self.measured_tail.to_dict(),
            "verdict": self.verdict,
            "notes": self.notes,
        }


def verify_membership(
    K: DiscretizedKernel,
    E1: DiagonalSymbol | None = None,
    E2: DiagonalSymbol | None = None,
    q: float = 2.0,
    *,
    k_min: int = 10,
    k_max: int | None = None,
    tolerance: float = EXPONENT_TOLERANCE,
    drift_limit: float = DRIFT_LIMIT,
) -> MembershipReport:
    """Check the measured singular-value decay of ``K`` against the predicted rate.

    ``E2`` acts in ``x`` and ``E1`` in ``y``.  The hypothesis is that the
    transformed kernel ``(E2)_x (E1)_y K`` is in ``L^2`` (``q = 2``) or, together
    with its adjoint, in ``L^{q'}(L^q)``.  When the hypothesis norm drifts
    under truncation refinement the verdict is ``inconclusive``; otherwise
    the tail fit must reach ``tau - tolerance``.
    """
    if E1 is None and E2 is None and q == 2.0:
        raise ParameterError("at least one symbol is needed for an L^2 hypothesis")
    if not 1.0 < q <= 2.0:
        raise ParameterError(f"q must lie in (1, 2], got {q}")
    A = K
    if E2 is not None:
        A = apply_symbol(A, E2, "x")
    if E1 is not None:
        A = apply_symbol(A, E1, "y")

    norms: dict = {"kernel_L2": hilbert_schmidt_norm(K)}
    notes = []
    if q == 2.0:
        cond = l2_condition(A, drift_limit)
        norms["transformed_L2"] = cond
        failed = cond.divergent
    else:
        qp = conjugate_exponent(q)
        fwd = mixed_norm(A, q, qp)
        adj = mixed_norm(adjoint_kernel(A), q, qp)
        norms["transformed_mixed"] = fwd
        norms["transformed_adjoint_mixed"] = adj
        failed = not (math.isfinite(fwd) and math.isfinite(adj))
        if A.row_grid.kind == "lattice" and A.col_grid.kind == "lattice":
            sub_r, sub_c = _half_box(A.row_grid), _half_box(A.col_grid)
            half = A.with_values(A.values * np.outer(sub_r, sub_c))
            drift = max(fwd / mixed_norm(half, q, qp), adj / mixed_norm(adjoint_kernel(half), q, qp)) - 1.0
            norms["transformed_mixed_drift"] = drift
            failed = failed or drift > drift_limit

    thresholds = {}
    p1 = p2 = None
    if E1 is not None:
        p1 = thresholds["p1"] = inverse_schatten_threshold(E1)
    if E2 is not None:
        p2 = thresholds["p2"] = inverse_schatten_threshold(E2)
    if q == 2.0:
        r = predict_r_main(p1, p2)
    else:
        r = predict_r_mixed(q, p1, p2)
    qprime = conjugate_exponent(q)
    tau = 1.0 / qprime if p1 is None and p2 is None else predict_decay(p1, p2, qprime)

    spectrum = singular_values(K.operator_matrix, "verify_membership")
    tail = fit_tail_exponent(spectrum, k_min, k_max)

    if failed:
        verdict = "inconclusive"
        notes.append("condition-failed: hypothesis norm grows under truncation refinement")
    elif tail.super_polynomial or tail.exponent >= tau - tolerance:
        verdict = "consistent"
    else:
        verdict = "violated"
        notes.append(f"measured exponent {tail.exponent:.4g} below predicted {tau:.4g}")
    return MembershipReport(r, tau, norms, tail, verdict, "; ".join(notes), thresholds, q, spectrum)
