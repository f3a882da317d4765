"""Dense singular spectra, Schatten quasi-norms and classical operator inequalities.

All singular value computations are dense LAPACK calls.  Hermitian inputs
take the cheaper symmetric eigensolver route, since then the singular values
are the moduli of the eigenvalues.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrumError, InputError, ParameterError

ABS_TOL = 1e-9
REL_TOL = 1e-9
# singular values below this fraction of s_1 are numerical zeros in fits
ZERO_FLOOR = 1e-12
MIN_FIT_POINTS = 8


def within_tolerance(lhs: float, rhs: float, atol: float = ABS_TOL, rtol: float = REL_TOL) -> bool:
    """``lhs <= rhs`` up to an absolute plus relative slack on the larger side."""
    return lhs <= rhs + atol + rtol * max(abs(lhs), abs(rhs))


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Non-increasing, nonnegative singular values with a provenance label."""

    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise InputError("singular values must form a one-dimensional sequence")
        if not np.all(np.isfinite(v)):
            raise InputError("singular values must be finite")
        if np.any(v < 0):
            raise InputError("singular values must be nonnegative")
        if np.any(np.diff(v) > 0):
            raise InputError("singular values must be sorted non-increasing")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_unsorted(cls, values, source: str = "") -> "SingularSpectrum":
        v = np.asarray(values, dtype=float)
        return cls(np.sort(v)[::-1], source)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def to_csv(self, path) -> None:
        """Write ``k,s_k`` rows with 1-based ``k``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "s_k"])
            for k, s in enumerate(self.values, start=1):
                writer.writerow([k, repr(float(s))])

    @classmethod
    def from_csv(cls, path, source: str | None = None) -> "SingularSpectrum":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        values = [float(r["s_k"]) for r in rows]
        return cls(np.array(values), Path(path).stem if source is None else source)


@dataclass(frozen=True)
class TailFit:
    """Least-squares slope of ``log s_k`` against ``log k``.

    ``exponent`` is the decay magnitude, so ``s_k ~ exp(intercept) * k**-exponent``.
    ``super_polynomial`` is set when a log-linear model (geometric decay)
    explains the tail far better than the power law.
    """

    exponent: float
    intercept: float
    residual: float
    k_min: int
    k_max: int
    n_points: int
    super_polynomial: bool = False

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residual": self.residual,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "n_points": self.n_points,
            "super_polynomial": self.super_polynomial,
        }


@dataclass(frozen=True)
class CheckReport:
    """Outcome of an inequality ``lhs <= rhs`` check.

    For checks over many index pairs, ``lhs``/``rhs`` belong to the pair
    with the smallest margin, which is recorded in ``worst_index``.
    """

    lhs: float
    rhs: float
    holds: bool
    margin: float
    worst_index: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "margin": self.margin,
            "worst_index": list(self.worst_index),
        }


def _as_finite_matrix(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2 or A.size == 0:
        raise InputError(f"{name} must be a nonempty two-dimensional array")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


def singular_values(M, source: str = "") -> SingularSpectrum:
    """All ``min(rows, cols)`` singular values of ``M``, sorted non-increasing."""
    A = _as_finite_matrix(M)
    if A.shape[0] == A.shape[1] and np.array_equal(A, A.conj().T):
        ev = scipy.linalg.eigvalsh(A, check_finite=False)
        s = np.abs(ev)
    else:
        s = scipy.linalg.svdvals(A, check_finite=False)
    return SingularSpectrum.from_unsorted(s, source)


def schatten_norm(s: SingularSpectrum, p: float) -> float:
    """``(sum s_k^p)^(1/p)``; ``p = inf`` gives the operator norm ``s_1``.

    For ``0 < p < 1`` this is only a quasi-norm.
    """
    if not p > 0:
        raise ParameterError(f"Schatten index must be positive, got {p}")
    v = s.values if isinstance(s, SingularSpectrum) else SingularSpectrum.from_unsorted(s).values
    if len(v) == 0:
        return 0.0
    top = float(v[0])
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    scaled = v / top
    return top * float(np.sum(scaled**p)) ** (1.0 / p)


def weyl_check(eigenvalues, s: SingularSpectrum, p: float) -> CheckReport:
    """Check ``sum |lambda_n|^p <= sum s_n^p`` for one square matrix."""
    if not p > 0:
        raise ParameterError(f"p must be positive, got {p}")
    lam = np.asarray(eigenvalues)
    if lam.ndim != 1 or len(lam) != len(s):
        raise InputError(
            f"eigenvalue count {lam.size} does not match singular value count {len(s)}"
        )
    lhs = float(np.sum(np.abs(lam) ** p))
    rhs = float(np.sum(s.values**p))
    return CheckReport(lhs, rhs, within_tolerance(lhs, rhs), rhs - lhs)


def _padded(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: min(n, len(v))] = v[:n]
    return out


def fan_check(B, C) -> CheckReport:
    """Check ``s_{k+l-1}(BC) <= s_k(B) s_l(C)`` for every admissible ``(k, l)``.

    Indices are 1-based in ``worst_index``.  Singular values past the
    matrix dimensions are zero, so every pair with ``k + l - 1`` within the
    spectrum of ``BC`` is checked.
    """
    B = _as_finite_matrix(B, "B")
    C = _as_finite_matrix(C, "C")
    if B.shape[1] != C.shape[0]:
        raise InputError(f"cannot multiply shapes {B.shape} and {C.shape}")
    sB = singular_values(B).values
    sC = singular_values(C).values
    sBC = singular_values(B @ C).values
    n = len(sBC)
    kk, ll = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    valid = kk + ll - 1 <= n
    lhs = np.where(valid, sBC[np.clip(kk + ll - 2, 0, n - 1)], 0.0)
    rhs = np.outer(_padded(sB, n), _padded(sC, n))
    slack = ABS_TOL + REL_TOL * np.maximum(np.abs(lhs), np.abs(rhs))
    margin = np.where(valid, rhs - lhs, np.inf)
    worst = np.unravel_index(np.argmin(margin), margin.shape)
    holds = bool(np.all(~valid | (lhs <= rhs + slack)))
    return CheckReport(
        float(lhs[worst]),
        float(rhs[worst]),
        holds,
        float(margin[worst]),
        (int(worst[0]) + 1, int(worst[1]) + 1),
    )


def product_norm_check(A, B, p: float, q: float) -> CheckReport:
    """Check ``||AB||_{S_r} <= 2^(1/r) ||A||_{S_q} ||B||_{S_p}`` with ``1/r = 1/p + 1/q``."""
    if not (p > 0 and q > 0):
        raise ParameterError(f"Schatten indices must be positive, got p={p}, q={q}")
    A = _as_finite_matrix(A, "A")
    B = _as_finite_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise InputError(f"cannot multiply shapes {A.shape} and {B.shape}")
    r = 1.0 / (1.0 / p + 1.0 / q)
    lhs = schatten_norm(singular_values(A @ B), r)
    rhs = 2.0 ** (1.0 / r) * schatten_norm(singular_values(A), q) * schatten_norm(singular_values(B), p)
    return CheckReport(lhs, rhs, within_tolerance(lhs, rhs), rhs - lhs)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_tail_exponent(s: SingularSpectrum, k_min: int = 1, k_max: int | None = None) -> TailFit:
    """Fit ``s_k ~ C k^-tau`` over ``k_min <= k <= k_max`` (1-based) in log-log space.

    Values below ``1e-12 * s_1`` are dropped as numerically zero.
    """
    if k_min < 1:
        raise ParameterError(f"k_min must be a positive integer, got {k_min}")
    v = s.values
    n = len(v)
    hi = n if k_max is None else min(int(k_max), n)
    k = np.arange(1, n + 1)
    floor = ZERO_FLOOR * v[0] if n else 0.0
    mask = (k >= k_min) & (k <= hi) & (v > floor) & (v > 0)
    if mask.sum() < MIN_FIT_POINTS:
        raise DegenerateSpectrumError(
            f"need at least {MIN_FIT_POINTS} positive singular values in [{k_min}, {hi}], "
            f"found {int(mask.sum())}"
        )
    kk = k[mask].astype(float)
    logs = np.log(v[mask])
    slope, intercept, resid = _ols(np.log(kk), logs)
    _, _, lin_resid = _ols(kk, logs)
    super_poly = bool(resid > 0 and lin_resid < 0.1 * resid)
    return TailFit(
        exponent=-slope,
        intercept=intercept,
        residual=resid,
        k_min=int(k_min),
        k_max=int(kk[-1]),
        n_points=int(mask.sum()),
        super_polynomial=super_poly,
    )
