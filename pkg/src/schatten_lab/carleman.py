"""Bounded convolution kernels whose operators lie outside every S_p with p < 2.

Carleman's 1916 phases are replaced by Rudin-Shapiro blocks: block ``n``
occupies frequencies ``[2^n, 2^(n+1))`` with the ``+-1`` coefficients of the
level-``n`` Rudin-Shapiro polynomial scaled by ``2^(-n/2) n^(-2)``.  The
Rudin-Shapiro identity ``|P|^2 + |Q|^2 = 2^(n+1)`` bounds each block's sup
norm by ``sqrt(2) n^(-2)``, so all partial sums stay below
``sqrt(2) pi^2 / 6``, while ``sum |c_k|^p`` has block terms
``2^(n (1 - p/2)) n^(-2p)`` that diverge for ``p < 2``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernels import DiscretizedKernel, build_convolution_kernel
from .spectral import SingularSpectrum

log = logging.getLogger(__name__)

MAX_RUDIN_SHAPIRO_LEVEL = 26
DEFAULT_MODE_CAP = 4096


def rudin_shapiro(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient vectors ``(P_n, Q_n)`` of length ``2^n``.

    ``P_1 = (1, 1)``, ``Q_1 = (1, -1)``, ``P_{n+1} = (P_n, Q_n)``,
    ``Q_{n+1} = (P_n, -Q_n)``.
    """
    if n < 1:
        raise ParameterError(f"level must be >= 1, got {n}")
    if n > MAX_RUDIN_SHAPIRO_LEVEL:
        raise ParameterError(f"level {n} exceeds the supported maximum {MAX_RUDIN_SHAPIRO_LEVEL}")
    P = np.array([1, 1], dtype=np.int8)
    Q = np.array([1, -1], dtype=np.int8)
    for _ in range(n - 1):
        P, Q = np.concatenate([P, Q]), np.concatenate([P, -Q])
    return P, Q


def block_scale(n: int) -> float:
    return 2.0 ** (-n / 2.0) * float(n) ** -2


def block_power_sum(n: int, p: float) -> float:
    """Closed form ``sum_{k in block n} |c_k|^p = 2^(n (1 - p/2)) n^(-2p)``."""
    return 2.0 ** (n * (1.0 - p / 2.0)) * float(n) ** (-2.0 * p)


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    frequencies: np.ndarray
    coefficients: np.ndarray
    block_count: int
    construction: str = "rudin-shapiro-blocks"

    def block(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies and coefficients of block ``n`` (1-based)."""
        if not 1 <= n <= self.block_count:
            raise ParameterError(f"block {n} outside 1..{self.block_count}")
        sel = (self.frequencies >= 2**n) & (self.frequencies < 2 ** (n + 1))
        return self.frequencies[sel], self.coefficients[sel]

    def with_coefficients(self, coefficients) -> "CoefficientSequence":
        return CoefficientSequence(self.frequencies, np.asarray(coefficients, dtype=complex),
                                   self.block_count, self.construction)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frequency", "re", "im"])
            for f, c in zip(self.frequencies, self.coefficients):
                writer.writerow([int(f), repr(float(c.real)), repr(float(c.imag))])


def carleman_coefficients(B: int) -> CoefficientSequence:
    """Blocks ``1..B`` of the Rudin-Shapiro substitute for Carleman's series."""
    if B < 3:
        raise ParameterError(f"need at least 3 blocks, got {B}")
    freqs, coefs = [], []
    for n in range(1, B + 1):
        P, _ = rudin_shapiro(n)
        freqs.append(np.arange(2**n, 2 ** (n + 1)))
        coefs.append(block_scale(n) * P.astype(float))
    return CoefficientSequence(
        np.concatenate(freqs), np.concatenate(coefs).astype(complex), B
    )


def lp_block_sums(c: CoefficientSequence, p: float) -> np.ndarray:
    """Numerically summed ``sum |c_k|^p`` of each block."""
    return np.array([np.sum(np.abs(c.block(n)[1]) ** p) for n in range(1, c.block_count + 1)])


def lp_partial_sums(c: CoefficientSequence, p: float) -> np.ndarray:
    """``sum |c_k|^p`` over blocks ``1..B'`` for ``B' = 1..B``."""
    return np.cumsum(lp_block_sums(c, p))


def divergence_table(c: CoefficientSequence, p_values) -> list[tuple[int, float, float]]:
    """Rows ``(B', p, partial sum)``."""
    rows = []
    for p in p_values:
        for b, s in enumerate(lp_partial_sums(c, p), start=1):
            rows.append((b, float(p), float(s)))
    return rows


def write_divergence_table(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["B", "p", "partial_sum"])
        for b, p, s in rows:
            writer.writerow([b, repr(p), repr(s)])


def _check_sampling(c: CoefficientSequence, M: int, freqs: np.ndarray) -> None:
    top = int(freqs.max()) if len(freqs) else 0
    if M < 4 * top:
        raise ParameterError(f"M={M} undersamples the highest frequency {top}; need M >= {4 * top}")


def default_sample_count(c: CoefficientSequence) -> int:
    top = int(c.frequencies.max())
    return int(2 ** int(np.ceil(np.log2(4 * top))))


def partial_sup_norms(c: CoefficientSequence, M: int | None = None) -> np.ndarray:
    """Sampled sup norm of the partial sums over blocks ``1..B'`` for every ``B'``."""
    M = default_sample_count(c) if M is None else int(M)
    _check_sampling(c, M, c.frequencies)
    acc = np.zeros(M, dtype=complex)
    sups = []
    for n in range(1, c.block_count + 1):
        f, v = c.block(n)
        line = np.zeros(M, dtype=complex)
        line[np.mod(f, M)] = v
        acc += M * np.fft.ifft(line)
        sups.append(float(np.max(np.abs(acc))))
    return np.array(sups)


def sup_norm_estimate(c: CoefficientSequence, M: int | None = None, blocks=None) -> float:
    """Max of ``|sum c_k e^{ik theta}|`` over ``M`` equispaced samples, summed blockwise."""
    M = default_sample_count(c) if M is None else int(M)
    chosen = range(1, c.block_count + 1) if blocks is None else blocks
    freqs = np.concatenate([c.block(n)[0] for n in chosen]) if len(list(chosen)) else np.array([0])
    _check_sampling(c, M, freqs)
    acc = np.zeros(M, dtype=complex)
    for n in chosen:
        f, v = c.block(n)
        line = np.zeros(M, dtype=complex)
        line[np.mod(f, M)] = v
        acc += M * np.fft.ifft(line)
    return float(np.max(np.abs(acc)))


def exact_spectrum(c: CoefficientSequence) -> SingularSpectrum:
    """Singular values ``|c_k|`` of the convolution operator on the circle."""
    return SingularSpectrum.from_unsorted(np.abs(c.coefficients), "carleman exact")


def carleman_operator(
    c: CoefficientSequence, max_modes: int | None = DEFAULT_MODE_CAP, blocks=None
) -> tuple[DiscretizedKernel, SingularSpectrum]:
    """Convolution kernel of the retained modes and its exact spectrum.

    The lowest ``max_modes`` frequencies of the chosen blocks are kept; the
    cap is logged when it bites.
    """
    chosen = range(1, c.block_count + 1) if blocks is None else list(blocks)
    parts = [c.block(n) for n in chosen]
    freqs = np.concatenate([p[0] for p in parts])
    coefs = np.concatenate([p[1] for p in parts])
    order = np.argsort(freqs, kind="stable")
    freqs, coefs = freqs[order], coefs[order]
    if max_modes is not None and len(freqs) > max_modes:
        log.warning("carleman operator capped at %d of %d modes (highest kept frequency %d)",
                    max_modes, len(freqs), int(freqs[max_modes - 1]))
        freqs, coefs = freqs[:max_modes], coefs[:max_modes]
    return build_convolution_kernel(coefs, frequencies=freqs)
