"""``schatten-lab`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import traceback
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import InputError, ParameterError, SchattenLabError
from .experiments import EXIT_CODES, get_experiment, list_experiments

EXIT_NUMERIC = 1
EXIT_USAGE = 2
SIGNIFICANT_DIGITS = 12
THREADS_ENV = "SCHATTEN_LAB_THREADS"

ALIASES = {"γ": "gamma", "α": "alpha", "β": "beta", "ℓ": "ell", "μ": "mu", "l": "ell"}

class UsageError(Exception):
    pass


def _canonical(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    return ALIASES.get(key, key)


def parse_assignment(text: str) -> dict[str, str]:
    """``a=b=0.8`` assigns ``0.8`` to both ``a`` and ``b``."""
    parts = text.split("=")
    if len(parts) < 2:
        raise UsageError(f"expected key=value, got {text!r}")
    keys = [_canonical(k) for k in parts[:-1]]
    if any(not k for k in keys):
        raise UsageError(f"empty key in {text!r}")
    return {k: parts[-1].strip() for k in keys}


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        out.update(parse_assignment(line))
    return out


def _round(x: float) -> float | str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return 0.0 if x == 0 else float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def normalize(obj):
    """JSON-safe copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [normalize(v) for v in items]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round(obj.real), "im": _round(obj.imag)}
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(normalize(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_plotdata(spectrum, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("log_k,log_s_k\n")
        if spectrum is None:
            return
        for k, s in enumerate(spectrum.values, start=1):
            if s > 0:
                fh.write(f"{math.log(k)!r},{math.log(s)!r}\n")


def _provenance(exc: BaseException) -> str:
    """Name of the innermost package module on the traceback."""
    name = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = Path(frame.filename).parts
        if "schatten_lab" in parts:
            name = Path(frame.filename).stem
    return name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schatten-lab",
        description="Run a registered Schatten-class experiment.",
        epilog="Parameters are given as key=value or --key=value; 'a=b=v' sets both.",
    )
    parser.add_argument("experiment", help="experiment name, or 'list'")
    parser.add_argument("--config", help="flat key = value file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="unsigned RNG seed")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    if args.experiment == "list":
        for name, cite in list_experiments():
            print(f"{name}\t{cite}")
        return 0
    if args.seed < 0:
        raise UsageError("seed must be nonnegative")
    experiment = get_experiment(args.experiment)
    overrides = read_config(args.config) if args.config else {}
    for token in rest:
        overrides.update(parse_assignment(token))
    overrides.pop("seed", None)

    threads = os.environ.get(THREADS_ENV)
    limit = None
    if threads:
        try:
            limit = int(threads)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    with threadpool_limits(limits=limit):
        config = experiment.resolve(overrides)
        result = experiment.run(config, args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "experiment": experiment.name,
        "citation": experiment.citation,
        "config": config,
        "seed": args.seed,
        "verdict": result.verdict,
        "result": result.report,
    }
    (out / "report.json").write_text(dump_report(report), encoding="utf-8")
    if result.spectrum is not None:
        result.spectrum.to_csv(out / "spectrum.csv")
    else:
        (out / "spectrum.csv").write_text("k,s_k\n", encoding="utf-8")
    write_plotdata(result.spectrum, out / "plotdata.csv")
    for name, writer in sorted(result.extra_csv.items()):
        writer(out / name)
    print(f"{experiment.name}: {result.verdict}")
    return EXIT_CODES[result.verdict]


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return run(argv)
    except SystemExit as exc:  # argparse
        return EXIT_USAGE if exc.code else 0
    except (UsageError, InputError, ParameterError) as exc:
        print(f"schatten-lab: usage error ({_provenance(exc)}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchattenLabError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"schatten-lab: numeric failure in {_provenance(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
