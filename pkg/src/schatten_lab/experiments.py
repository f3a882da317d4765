"""Registry of named experiments with typed parameter schemas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import carleman as crl
from .conditions import predict_decay, russo_bound, verify_membership
from .errors import InputError
from .kernels import (
    DiscretizedKernel,
    build_riesz_kernel,
    build_torus_kernel,
    interval_grid,
    lattice_grid,
)
from .multipliers import (
    anharmonic_exponent,
    discretize_anharmonic,
    discretize_higher_anharmonic,
    fit_counting,
    higher_anharmonic_exponent,
    lattice_weight_symbol,
    sobolev_inclusion_constants,
)
from .spectral import (
    SingularSpectrum,
    fan_check,
    fit_tail_exponent,
    product_norm_check,
    singular_values,
    weyl_check,
)
from .traces import averaged_trace

# rank1-zeroed averages over 2**3 = 8 cells per axis by default
RANK1_CELL_LEVEL = 3

EXIT_CODES = {"consistent": 0, "holds": 0, "violated": 3, "inconclusive": 4}


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, str, bool, floats, auto-int, auto-float
    default: Any
    help: str = ""
    choices: tuple = ()
    minimum: float | None = None

    def parse(self, name: str, raw: Any) -> Any:
        if raw is None and self.kind.startswith("auto-"):
            return None
        if not isinstance(raw, str):
            value = raw
        elif self.kind.startswith("auto-") and raw.strip().lower() in ("auto", "none", ""):
            return None
        else:
            value = _parse_text(self.kind, raw.strip(), name)
        if self.kind == "int" or self.kind == "auto-int":
            if isinstance(value, bool) or int(value) != value:
                raise InputError(f"{name} must be an integer")
            value = int(value)
        if self.kind in ("float", "auto-float"):
            value = float(value)
            if not math.isfinite(value):
                raise InputError(f"{name} must be finite")
        if self.choices and value not in self.choices:
            raise InputError(f"{name} must be one of {', '.join(self.choices)}")
        if self.minimum is not None and value is not None:
            items = value if isinstance(value, (list, tuple)) else [value]
            if any(v < self.minimum for v in items):
                raise InputError(f"{name} must be >= {self.minimum:g}")
        return value


def _parse_text(kind: str, raw: str, name: str) -> Any:
    try:
        if kind.endswith("int"):
            return int(raw)
        if kind.endswith("float"):
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse {name}={raw!r} as {kind}") from None
    return raw


@dataclass
class ExperimentResult:
    verdict: str
    report: dict
    spectrum: SingularSpectrum | None = None
    extra_csv: dict = field(default_factory=dict)  # file name -> callable(path)


@dataclass(frozen=True)
class Experiment:
    name: str
    citation: str
    params: dict
    runner: Callable[[dict, np.random.Generator], ExperimentResult]

    def resolve(self, overrides: dict) -> dict:
        unknown = sorted(set(overrides) - set(self.params))
        if unknown:
            raise InputError(f"unknown parameter(s) for {self.name}: {', '.join(unknown)}")
        config = {}
        for key, spec in self.params.items():
            config[key] = spec.parse(key, overrides[key]) if key in overrides else spec.default
        return config

    def run(self, overrides: dict, seed: int = 0) -> ExperimentResult:
        config = self.resolve(overrides)
        return self.runner(config, np.random.default_rng(seed))


def _agree(a: complex, b: complex, tol: float) -> bool:
    return abs(a - b) <= tol


def _torus_generator(name: str) -> Callable:
    gens = {
        "exp-cos": lambda x, y: np.exp(np.cos(x - y)),
        "cos": lambda x, y: np.cos(x - y),
        "const": lambda x, y: np.ones(np.broadcast_shapes(np.shape(x), np.shape(y))),
    }
    return gens[name]


def _run_torus_trace(cfg: dict, rng) -> ExperimentResult:
    if cfg["kernel"] == "rank1-zeroed":
        grid = lattice_grid(cfg["R"], 1, half_open=True)
        n = len(grid)
        operator = DiscretizedKernel(grid, grid, np.ones((n, n)))
        K = operator.with_values(np.ones((n, n)) - np.eye(n))
    else:
        operator = None
        K = build_torus_kernel(_torus_generator(cfg["kernel"]), cfg["N"])
    j_max = cfg["j_max"]
    if j_max is None and operator is not None:
        j_max = RANK1_CELL_LEVEL
    rep = averaged_trace(K, j_max, operator=operator, tolerance=cfg["pathology_tolerance"])
    finest = rep.finest_averaged_trace
    if cfg["kernel"] == "rank1-zeroed":
        rel = abs(finest - rep.eigen_trace) / abs(rep.eigen_trace)
        ok = "diagonal-pathology" in rep.discrepancy_flags and rel <= cfg["averaged_tolerance"]
        checks = {"finest_relative_gap": rel}
    else:
        ok = _agree(rep.diagonal_trace, rep.eigen_trace, cfg["tolerance"]) and (
            finest is None or _agree(finest, rep.eigen_trace, cfg["tolerance"])
        )
        checks = {
            "diagonal_minus_eigen": abs(rep.diagonal_trace - rep.eigen_trace),
            "averaged_minus_eigen": None if finest is None else abs(finest - rep.eigen_trace),
        }
    spectrum = singular_values((operator or K).operator_matrix, "torus-trace")
    return ExperimentResult(
        "holds" if ok else "violated",
        {"trace": rep.to_dict(), "checks": checks},
        spectrum,
        {"trace_levels.csv": rep.levels_to_csv},
    )


def _run_lattice_schatten(cfg: dict, rng) -> ExperimentResult:
    grid = lattice_grid(cfg["R"], 1)
    d = (1.0 + np.abs(grid.points[:, 0])) ** -cfg["gamma"]
    K = DiscretizedKernel(grid, grid, np.diag(d))
    E_x = lattice_weight_symbol(cfg["alpha"], grid)
    E_y = lattice_weight_symbol(cfg["beta"], grid)
    rep = verify_membership(
        K, E1=E_y, E2=E_x, k_min=cfg["k_min"], tolerance=cfg["tolerance"],
        drift_limit=cfg["drift_limit"],
    )
    report = rep.to_dict()
    report["exact_decay_tau"] = predict_decay(1.0 / cfg["beta"], 1.0 / cfg["alpha"])
    report["gap"] = rep.measured_tail.exponent - rep.predicted_decay_tau
    return ExperimentResult(rep.verdict, report, rep.spectrum)


def _counting_result(E, predicted: float, tolerance: float) -> ExperimentResult:
    fit = fit_counting(E)
    rel = abs(fit.exponent_p - predicted) / predicted
    report = {
        "symbol": E.label,
        "trusted_eigenvalues": len(E.trusted_eigenvalues),
        "lowest_eigenvalues": [float(v) for v in E.trusted_eigenvalues[:10]],
        "predicted_p": predicted,
        "counting_fit": fit.to_dict(),
        "relative_error": rel,
    }
    return ExperimentResult(
        "consistent" if rel <= tolerance else "violated",
        report,
        E.inverse_spectrum(),
        {"symbol.csv": E.to_csv},
    )


def _run_oscillator(cfg: dict, rng) -> ExperimentResult:
    E = discretize_anharmonic(cfg["a"], cfg["L"], cfg["N"])
    return _counting_result(E, anharmonic_exponent(cfg["a"]), cfg["tolerance"])


def _run_higher_oscillator(cfg: dict, rng) -> ExperimentResult:
    E = discretize_higher_anharmonic(cfg["k"], cfg["ell"], cfg["L"], cfg["N"])
    return _counting_result(E, higher_anharmonic_exponent(cfg["k"], cfg["ell"]), cfg["tolerance"])


def _parse_intervals(text: str) -> list[tuple[float, float]]:
    out = []
    for part in text.split(","):
        try:
            a, b = part.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise InputError(f"intervals must look like 0:1,2:3, got {text!r}") from None
    return out


def _run_riesz(cfg: dict, rng) -> ExperimentResult:
    K = build_riesz_kernel(cfg["alpha"], _parse_intervals(cfg["intervals"]), cfg["N"])
    A = K.operator_matrix
    eig = np.linalg.eigvalsh(A)
    spectrum = SingularSpectrum.from_unsorted(np.abs(eig), "riesz")
    s1 = spectrum.values[0]
    tail = fit_tail_exponent(spectrum, cfg["k_min"], cfg["k_max"])
    k = np.arange(cfg["k_min"], cfg["k_max"] + 1)
    scaled = spectrum.values[k - 1] * k ** cfg["alpha"]
    spread = float(scaled.max() / scaled.min())
    positive = bool(eig.min() >= -1e-10 * s1)
    rel = abs(tail.exponent - cfg["alpha"]) / cfg["alpha"]
    ok = positive and rel <= cfg["tolerance"] and spread <= cfg["spread_limit"]
    report = {
        "min_eigenvalue": float(eig.min()),
        "largest_singular_value": float(s1),
        "positive": positive,
        "predicted_decay": cfg["alpha"],
        "tail_fit": tail.to_dict(),
        "relative_error": rel,
        "scaled_spread": spread,
    }
    return ExperimentResult("consistent" if ok else "violated", report, spectrum)


def _random_kernel(rng, n: int) -> DiscretizedKernel:
    grid = interval_grid([(0.0, 1.0)], n)
    vals = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return DiscretizedKernel(grid, grid, vals)


def _run_russo(cfg: dict, rng) -> ExperimentResult:
    by_p = {}
    violations = 0
    for p in cfg["p"]:
        worst = math.inf
        count = 0
        for _ in range(cfg["trials"]):
            rep = russo_bound(_random_kernel(rng, cfg["n"]), p)
            worst = min(worst, rep.margin)
            count += not rep.holds
        violations += count
        by_p[repr(p)] = {"violations": count, "worst_margin": worst}
    report = {"trials_per_p": cfg["trials"], "by_p": by_p, "violations": violations}
    return ExperimentResult("holds" if violations == 0 else "violated", report)


def _random_matrix(rng, n: int) -> np.ndarray:
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def _run_inequality_suite(cfg: dict, rng) -> ExperimentResult:
    n, trials = cfg["n"], cfg["trials"]
    sections: dict = {}
    violations = 0

    weyl = {}
    for p in cfg["weyl_p"]:
        bad, worst = 0, math.inf
        for _ in range(trials):
            M = _random_matrix(rng, n)
            rep = weyl_check(np.linalg.eigvals(M), singular_values(M), p)
            bad += not rep.holds
            worst = min(worst, rep.margin)
        weyl[repr(p)] = {"violations": bad, "worst_margin": worst}
        violations += bad
    sections["weyl"] = weyl

    bad, worst = 0, math.inf
    for _ in range(trials):
        rep = fan_check(_random_matrix(rng, n), _random_matrix(rng, n))
        bad += not rep.holds
        worst = min(worst, rep.margin)
    sections["fan"] = {"violations": bad, "worst_margin": worst}
    violations += bad

    bad, worst = 0, math.inf
    for _ in range(trials):
        p, q = rng.uniform(0.5, 4.0, size=2)
        rep = product_norm_check(_random_matrix(rng, n), _random_matrix(rng, n), p, q)
        bad += not rep.holds
        worst = min(worst, rep.margin)
    sections["product_norm"] = {"violations": bad, "worst_margin": worst}
    violations += bad

    inclusions = []
    for mu in cfg["mu"]:
        row = sobolev_inclusion_constants(cfg["sobolev_N"], mu, mu)
        inclusions.append(row)
        violations += not (row["left_holds_with_unit_constant"] and row["right_holds_with_unit_constant"])
    sections["sobolev_inclusions"] = inclusions
    sections["violations"] = violations
    return ExperimentResult("holds" if violations == 0 else "violated", sections)


def _run_carleman(cfg: dict, rng) -> ExperimentResult:
    B, p = cfg["B"], cfg["p"]
    c = crl.carleman_coefficients(B)
    sups = crl.partial_sup_norms(c)
    psums = crl.lp_partial_sums(c, p)
    closed = np.array([crl.block_power_sum(n, p) for n in range(1, B + 1)])
    increment_error = float(np.max(np.abs(crl.lp_block_sums(c, p) / closed - 1.0)))
    l2 = np.sqrt(crl.lp_partial_sums(c, 2.0))
    monotone = bool(np.all(np.diff(psums) > 0))
    report = {
        "B": B,
        "p": p,
        "construction": c.construction,
        "partial_sup_norms": sups.tolist(),
        "sup_limit": cfg["sup_limit"],
        "l2_norm": float(l2[-1]),
        "l2_increments": np.diff(l2).tolist(),
        "lp_partial_sums": psums.tolist(),
        "lp_monotone": monotone,
        "block_increment_relative_error": increment_error,
    }
    ok = bool(sups.max() < cfg["sup_limit"]) and monotone and increment_error <= 0.01
    exact = crl.exact_spectrum(c)
    svd_blocks = min(cfg["svd_blocks"], B)
    if svd_blocks > 0:
        K, spec = crl.carleman_operator(c, cfg["max_modes"], blocks=range(1, svd_blocks + 1))
        s = singular_values(K.operator_matrix, "carleman")
        err = float(np.max(np.abs(s.values - spec.values[: len(s)])))
        report["svd_blocks"] = svd_blocks
        report["svd_modes"] = K.shape[0]
        report["svd_max_error"] = err
        ok = ok and err <= 1e-9
    table = crl.divergence_table(c, [p, 2.0])
    return ExperimentResult(
        "holds" if ok else "violated",
        report,
        exact,
        {
            "coefficients.csv": c.to_csv,
            "divergence.csv": lambda path: crl.write_divergence_table(table, path),
        },
    )


REGISTRY: dict[str, Experiment] = {
    e.name: e
    for e in sorted(
        [
            Experiment(
                "torus-trace",
                "trace of a trace-class operator equals the integral of its averaged kernel along the diagonal, and the eigenvalue sum",
                {
                    "N": Param("int", 256, "torus nodes", minimum=4),
                    "kernel": Param("str", "exp-cos", "generator",
                                    choices=("exp-cos", "cos", "const", "rank1-zeroed")),
                    "R": Param("int", 512, "lattice radius for rank1-zeroed", minimum=1),
                    "j_max": Param("auto-int", None, "finest dyadic level", minimum=0),
                    "tolerance": Param("float", 1e-6, "absolute trace agreement"),
                    "averaged_tolerance": Param("float", 0.02, "relative gap for rank1-zeroed"),
                    "pathology_tolerance": Param("float", 0.01, "relative gap flag threshold"),
                },
                _run_torus_trace,
            ),
            Experiment(
                "lattice-schatten",
                "weighted l^2 kernels on Z^n: (1+|k|)^alpha (1+|l|)^beta K in l^2 gives S_r with 1/r = 1/2 + alpha/n + beta/n",
                {
                    "gamma": Param("float", 2.3, "diagonal decay exponent", minimum=0),
                    "alpha": Param("float", 0.8, "weight in x", minimum=0),
                    "beta": Param("float", 0.8, "weight in y", minimum=0),
                    "R": Param("int", 2000, "lattice radius", minimum=10),
                    "k_min": Param("int", 10, "first fitted index", minimum=1),
                    "tolerance": Param("float", 0.05, "exponent slack"),
                    "drift_limit": Param("float", 0.05, "half-box drift limit"),
                },
                _run_lattice_schatten,
            ),
            Experiment(
                "oscillator-counting",
                "anharmonic oscillator -Laplacian + |x|^a has N(lambda) <= C (1+lambda)^(n(1/a+1/2))",
                {
                    "a": Param("float", 2.0, "potential exponent", minimum=0),
                    "L": Param("auto-float", None, "half-width of the box"),
                    "N": Param("int", 2048, "interior nodes", minimum=64),
                    "tolerance": Param("float", 0.10, "relative exponent tolerance"),
                },
                _run_oscillator,
            ),
            Experiment(
                "higher-oscillator",
                "(-Laplacian)^k + |x|^(2l) has N(lambda) <= C (1+lambda)^((n/2)(1/k+1/l))",
                {
                    "k": Param("int", 2, "derivative order", minimum=1),
                    "ell": Param("int", 1, "potential half-degree", minimum=1),
                    "L": Param("auto-float", None, "half-width of the box"),
                    "N": Param("int", 2048, "interior nodes", minimum=64),
                    "tolerance": Param("float", 0.10, "relative exponent tolerance"),
                },
                _run_higher_oscillator,
            ),
            Experiment(
                "riesz",
                "Riesz potential of order alpha on a bounded domain is positive with s_k of order k^(-alpha/n)",
                {
                    "alpha": Param("float", 0.5, "order in (0, 1)"),
                    "intervals": Param("str", "0:1", "union of intervals a:b,c:d"),
                    "N": Param("int", 256, "nodes", minimum=16),
                    "k_min": Param("int", 10, "first fitted index", minimum=1),
                    "k_max": Param("int", 100, "last fitted index", minimum=2),
                    "tolerance": Param("float", 0.10, "relative exponent tolerance"),
                    "spread_limit": Param("float", 1.5, "max/min of s_k k^alpha"),
                },
                _run_riesz,
            ),
            Experiment(
                "russo",
                "Russo: ||T||_{S_p'} <= (||K||_{p,p'} ||K*||_{p,p'})^(1/2) for 1 < p < 2",
                {
                    "trials": Param("int", 100, "kernels per exponent", minimum=1),
                    "n": Param("int", 32, "grid size", minimum=2),
                    "p": Param("floats", [1.25, 1.5, 1.9], "exponents in (1, 2)"),
                },
                _run_russo,
            ),
            Experiment(
                "carleman",
                "a bounded convolution kernel on the circle whose operator lies outside every S_p, p < 2",
                {
                    "B": Param("int", 12, "number of blocks", minimum=3),
                    "p": Param("float", 1.9, "summation exponent", minimum=0),
                    "sup_limit": Param("float", 2.4, "bound for partial sup norms"),
                    "svd_blocks": Param("int", 10, "blocks in the SVD cross-check (0 skips)", minimum=0),
                    "max_modes": Param("int", 4096, "mode cap for the SVD", minimum=1),
                },
                _run_carleman,
            ),
            Experiment(
                "inequality-suite",
                "Weyl, Fan and Schatten-Holder product inequalities plus mixed Sobolev weight inclusions on the torus",
                {
                    "trials": Param("int", 100, "random trials per check", minimum=1),
                    "n": Param("int", 32, "matrix size", minimum=2),
                    "weyl_p": Param("floats", [1.0, 1.5, 2.0], "Weyl exponents", minimum=0),
                    "mu": Param("floats", [0.5, 1.0, 2.0], "Bessel orders", minimum=0),
                    "sobolev_N": Param("int", 512, "frequency grid size", minimum=2),
                },
                _run_inequality_suite,
            ),
        ],
        key=lambda e: e.name,
    )
}


def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise InputError(f"unknown experiment {name!r}; choose from {', '.join(REGISTRY)}") from None


def list_experiments() -> list[tuple[str, str]]:
    return [(e.name, e.citation) for e in REGISTRY.values()]
