"""Batch experiment runner.

One experiment per config file, flat ``key = value`` lines (``#`` comments)::

    operator     = volterra            # volterra | symm | heat | diagonal
    rhs          = const-one           # const-one | identity-x | sine | picard-borderline | coeffs
    domain_basis = trig                # trig | legendre | haar | pwc | singular
    range_basis  = trig
    n_values     = 4, 8, 16, 32, 64, 128, 256
    truncation   = none                # none | relative[:tau] | absolute:tau

See ``CONFIG_KEYS`` for the full schema and defaults. Outputs per experiment
``<name>.sweep.csv`` (``n,norm,residual,effective_rank``),
``<name>.picard.csv`` (``k,sigma,coeff_abs,partial_sum``) and
``<name>.summary.txt``; ``--format records`` writes JSON lines instead of CSV.

Exit codes: 0 success, 2 invalid config, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np

from .bases import FAMILY_NAMES
from .diagnostics import (
    HEAT_DEFAULT_N_CAP,
    SINGULAR,
    classify_growth,
    picard_report,
    run_sweep,
)
from .errors import NumericalError, ValidationError
from .galerkin import Truncation
from .numerics import FunctionHandle, Interval
from .operators import (
    OPERATOR_NAMES,
    OperatorSpec,
    backward_heat_operator,
    sigma_sequence,
    spectral_function,
    symm_circle_operator,
    synthetic_diagonal_operator,
    volterra_operator,
)

log = logging.getLogger("pgdiverge")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

RHS_NAMES = ("const-one", "identity-x", "sine", "picard-borderline", "coeffs")
BASIS_NAMES = FAMILY_NAMES + (SINGULAR,)
DEFAULT_N_VALUES = (4, 8, 16, 32, 64, 128, 256)
HEAT_N_VALUES = (2, 3, 4, 5, 6)
SWEEP_HEADER = ("n", "norm", "residual", "effective_rank")
PICARD_HEADER = ("k", "sigma", "coeff_abs", "partial_sum")

# key -> (default, description); None marks a required key
CONFIG_KEYS: Dict[str, tuple] = {
    "operator": (None, "volterra | symm | heat | diagonal"),
    "rhs": (None, "const-one | identity-x | sine | picard-borderline | coeffs"),
    "rhs_coeffs": ("", "comma list: coefficients of b in the operator's range-side singular system (rhs = coeffs)"),
    "name": ("", "experiment name used for output files (default: config file stem)"),
    "interval": ("", "a, b for volterra and diagonal (default 0, 2*pi)"),
    "radius": ("2.0", "symm: circle radius, |radius - 1| >= 1e-3"),
    "mode_cap": ("256", "symm: highest Fourier mode kept by the apply map"),
    "series_cap": ("24", "heat: number of kernel terms"),
    "sigma": ("harmonic", "diagonal: harmonic | gaussian-exp | comma list"),
    "sigma_count": ("256", "diagonal: length of a generated sigma list"),
    "range_complete": ("false", "diagonal: whether the u-system is declared complete"),
    "domain_basis": ("trig", "trig | legendre | haar | pwc | singular"),
    "range_basis": ("trig", "trig | legendre | haar | pwc | singular"),
    "n_values": ("", "comma list of increasing sizes (default 4..256 doubling; heat 2..6)"),
    "max_n": ("", "override the heat sweep cap of 6"),
    "truncation": ("none", "none | relative[:tau] | absolute:tau"),
    "ratio_threshold": ("10", "growth ratio required for a Diverging verdict"),
    "picard_kmax": ("", "Picard terms to evaluate, 0 to skip (default 64; heat 6)"),
    "out_dir": ("", "output directory (overridden by --out)"),
    "format": ("csv", "csv | records"),
}

PRESETS = {
    "operators": [
        ("volterra", "numerical differentiation: (A phi)(x) = integral of phi from 0 to x on (0, 2 pi)"),
        ("symm", "circle boundary: Symm's log-kernel single-layer operator, keys radius, mode_cap"),
        ("heat", "backward heat conduction: kernel sum_n e^{-n^2} sin(n tau) sin(n x) on (0, pi)"),
        ("diagonal", "synthetic diagonal operator on the trigonometric frame, sigma = harmonic | gaussian-exp | list"),
    ],
    "bases": [
        ("trig", "1, sin, cos, sin 2x, cos 2x, ... normalized"),
        ("legendre", "shifted Legendre polynomials, normalized"),
        ("haar", "Haar scaling function and wavelets in dyadic order"),
        ("pwc", "indicators of n equal cells (n a power of 2)"),
        ("singular", "the operator's own singular functions (v on the domain, u on the range side)"),
    ],
    "rhs": [
        ("const-one", "b(x) = 1; outside the Volterra range since b(0) != 0"),
        ("identity-x", "b(x) = x"),
        ("sine", "b(x) = sin x; equals A cos for volterra"),
        ("picard-borderline", "b_k = sigma_k / sqrt(k): Picard terms 1/k, logarithmic divergence"),
        ("coeffs", "b = sum_k c_k u_k with rhs_coeffs = c_1, c_2, ..."),
    ],
}


def list_presets() -> str:
    lines = []
    for section, items in PRESETS.items():
        lines.append(f"{section}:")
        lines.extend(f"  {k} — {desc}" for k, desc in items)
    return "\n".join(lines)


# ------------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    name: str
    operator: str
    rhs: str
    rhs_coeffs: List[float] = field(default_factory=list)
    interval: Optional[Interval] = None
    radius: float = 2.0
    mode_cap: int = 256
    series_cap: int = 24
    sigma: object = "harmonic"
    sigma_count: int = 256
    range_complete: bool = False
    domain_basis: str = "trig"
    range_basis: str = "trig"
    n_values: List[int] = field(default_factory=lambda: list(DEFAULT_N_VALUES))
    max_n: Optional[int] = None
    truncation: Truncation = field(default_factory=Truncation.none)
    ratio_threshold: float = 10.0
    picard_kmax: int = 64
    out_dir: Optional[Path] = None
    format: str = "csv"


def _floats(text: str, key: str) -> List[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from None


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{key}: expected an integer, got {text!r}") from None


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{key}: expected a number, got {text!r}") from None


def _choice(value: str, key: str, valid: Sequence[str]) -> str:
    if value not in valid:
        raise ValidationError(f"{key}: unknown value {value!r}; valid: {', '.join(valid)}")
    return value


def parse_config(text: str, default_name: str = "experiment") -> ExperimentConfig:
    """Parse and validate a flat key-value config. Raises :class:`ValidationError`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    raw = dict(parser["experiment"])
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}; valid keys: {', '.join(CONFIG_KEYS)}")
    for key, (default, _) in CONFIG_KEYS.items():
        if default is None and not raw.get(key, "").strip():
            raise ValidationError(f"missing required config key: {key}")
    get = lambda k: raw.get(k, CONFIG_KEYS[k][0]).strip()  # noqa: E731

    op = _choice(get("operator").lower(), "operator", OPERATOR_NAMES)
    cfg = ExperimentConfig(
        name=get("name") or default_name,
        operator=op,
        rhs=_choice(get("rhs").lower(), "rhs", RHS_NAMES),
        domain_basis=_choice(get("domain_basis").lower(), "domain_basis", BASIS_NAMES),
        range_basis=_choice(get("range_basis").lower(), "range_basis", BASIS_NAMES),
        format=_choice(get("format").lower(), "format", ("csv", "records")),
    )
    cfg.rhs_coeffs = _floats(get("rhs_coeffs"), "rhs_coeffs")
    if cfg.rhs == "coeffs" and not cfg.rhs_coeffs:
        raise ValidationError("rhs = coeffs needs a nonempty rhs_coeffs list")
    if get("interval"):
        ab = _floats(get("interval"), "interval")
        if len(ab) != 2:
            raise ValidationError("interval: expected exactly two numbers a, b")
        if op in ("symm", "heat"):
            raise ValidationError(f"interval is fixed for {op}")
        cfg.interval = Interval(*ab)
    cfg.radius = _float(get("radius"), "radius")
    cfg.mode_cap = _int(get("mode_cap"), "mode_cap")
    cfg.series_cap = _int(get("series_cap"), "series_cap")
    sigma = get("sigma")
    cfg.sigma = sigma if sigma in ("harmonic", "gaussian-exp") else _floats(sigma, "sigma")
    cfg.sigma_count = _int(get("sigma_count"), "sigma_count")
    rc = get("range_complete").lower()
    cfg.range_complete = _choice(rc, "range_complete", ("true", "false", "yes", "no", "1", "0")) in ("true", "yes", "1")
    if get("n_values"):
        cfg.n_values = [_int(t.strip(), "n_values") for t in get("n_values").split(",") if t.strip()]
    elif op == "heat":
        cfg.n_values = list(HEAT_N_VALUES)
    cfg.max_n = _int(get("max_n"), "max_n") if get("max_n") else None
    try:
        cfg.truncation = Truncation.parse(get("truncation"))
    except ValidationError as exc:
        raise ValidationError(f"truncation: {exc}") from None
    cfg.ratio_threshold = _float(get("ratio_threshold"), "ratio_threshold")
    if get("picard_kmax"):
        cfg.picard_kmax = _int(get("picard_kmax"), "picard_kmax")
    elif op == "heat":
        cfg.picard_kmax = HEAT_DEFAULT_N_CAP
    if get("out_dir"):
        cfg.out_dir = Path(get("out_dir"))
    return cfg


def load_config(path: Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, default_name=Path(path).stem)


def build_operator(cfg: ExperimentConfig) -> OperatorSpec:
    if cfg.operator == "volterra":
        return volterra_operator(cfg.interval) if cfg.interval else volterra_operator()
    if cfg.operator == "symm":
        return symm_circle_operator(cfg.radius, cfg.mode_cap)
    if cfg.operator == "heat":
        return backward_heat_operator(cfg.series_cap)
    sigma = sigma_sequence(cfg.sigma, cfg.sigma_count)
    kw = {"interval": cfg.interval} if cfg.interval else {}
    return synthetic_diagonal_operator(sigma, cfg.range_complete, **kw)


def build_rhs(cfg: ExperimentConfig, op: OperatorSpec) -> FunctionHandle:
    d = op.range_interval
    if cfg.rhs == "const-one":
        return FunctionHandle(lambda x: np.ones_like(x), d, label="const-one")
    if cfg.rhs == "identity-x":
        return FunctionHandle(lambda x: x, d, label="identity-x")
    if cfg.rhs == "sine":
        return FunctionHandle(np.sin, d, label="sine")
    if op.singular is None:
        raise ValidationError(f"rhs = {cfg.rhs} needs an operator with a singular system")
    s = op.singular
    if cfg.rhs == "coeffs":
        if s.count is not None and len(cfg.rhs_coeffs) > s.count:
            raise ValidationError(f"rhs_coeffs has {len(cfg.rhs_coeffs)} entries, {op.name} has {s.count} modes")
        return spectral_function(s, cfg.rhs_coeffs, label=f"coeffs[{len(cfg.rhs_coeffs)}]")
    K = max([cfg.picard_kmax] + list(cfg.n_values))
    if s.count is not None:
        K = min(K, s.count)
    ks = np.arange(1, K + 1)
    return spectral_function(s, s.sigmas(K) / np.sqrt(ks), label=f"picard-borderline[{K}]")


# ------------------------------------------------------------------ running


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


class _Table:
    """Row writer for CSV or JSON-lines output; flushes every row."""

    def __init__(self, path: Path, header: Sequence[str], fmt: str):
        self.fmt, self.header = fmt, tuple(header)
        self.path = path.parent / (path.name + (".csv" if fmt == "csv" else ".jsonl"))
        self._fh: TextIO = open(self.path, "w", newline="")
        if fmt == "csv":
            self._csv = csv.writer(self._fh, lineterminator="\n")
            self._csv.writerow(self.header)

    def row(self, values):
        if self.fmt == "csv":
            self._csv.writerow([_fmt(v) for v in values])
        else:
            rec = {k: (float(v) if isinstance(v, (float, np.floating)) else int(v)) for k, v in zip(self.header, values)}
            self._fh.write(json.dumps(rec) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


@dataclass
class ExperimentOutcome:
    name: str
    exit_code: int
    summary: str
    files: List[Path] = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
    """Run one validated experiment, writing its tables into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"experiment: {cfg.name}",
        f"truncation: {cfg.truncation}",
    ]
    files: List[Path] = []
    try:
        op = build_operator(cfg)
        b = build_rhs(cfg, op)
    except ValidationError as exc:
        lines.append(f"error: {exc}")
        return ExperimentOutcome(cfg.name, EXIT_INVALID, "\n".join(lines))
    lines += [
        f"operator: {op.describe()} on {op.domain_interval} -> {op.range_interval}",
        f"domain basis: {cfg.domain_basis}",
        f"range basis: {cfg.range_basis}",
        f"rhs: {b.label}",
        f"n_values: {', '.join(map(str, cfg.n_values))}",
    ]
    code = EXIT_OK
    sweep_table = _Table(out_dir / f"{cfg.name}.sweep", SWEEP_HEADER, cfg.format)
    files.append(sweep_table.path)
    try:
        results = []
        max_n = cfg.max_n
        for n in cfg.n_values:
            s = run_sweep(op, cfg.domain_basis, cfg.range_basis, b, [n], cfg.truncation, max_n=max_n)
            sweep_table.row((n, s.norms[0], s.residuals[0], s.effective_ranks[0]))
            results.append(s)
        if len(results) >= 4:
            from .diagnostics import SweepResult

            merged = SweepResult(
                n_values=[r.n_values[0] for r in results],
                norms=[r.norms[0] for r in results],
                residuals=[r.residuals[0] for r in results],
                effective_ranks=[r.effective_ranks[0] for r in results],
            )
            lines.append(f"sweep verdict: {classify_growth(merged, cfg.ratio_threshold)}")
        else:
            lines.append(f"sweep verdict: not classified (needs >= 4 sizes, got {len(results)})")
        if results:
            lines.append(f"final norm: {results[-1].norms[0]:.10g} at n={results[-1].n_values[0]}")
    except ValidationError as exc:
        lines.append(f"error: {exc}")
        code = EXIT_INVALID
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        lines.append(f"numerical failure: {exc}")
        code = EXIT_NUMERICAL
    finally:
        sweep_table.close()

    if code == EXIT_OK and cfg.picard_kmax > 0 and op.singular is not None:
        table = None
        try:
            rep = picard_report(op, b, cfg.picard_kmax)
            table = _Table(out_dir / f"{cfg.name}.picard", PICARD_HEADER, cfg.format)
            files.append(table.path)
            for (k, c, s), S in zip(rep.coefficients, rep.partial_sums):
                table.row((k, s, c, S))
            lines.append(
                f"picard verdict: {rep.verdict} (k_max={rep.k_max}, partial sum {rep.partial_sums[-1]:.10g}, "
                f"{'exact' if rep.exact_coefficients else 'quadrature'} coefficients)"
            )
        except ValidationError as exc:
            lines.append(f"picard error: {exc}")
            code = EXIT_INVALID
        except NumericalError as exc:
            lines.append(f"picard numerical failure: {exc}")
            code = EXIT_NUMERICAL
        finally:
            if table:
                table.close()

    summary = "\n".join(lines)
    summary_path = out_dir / f"{cfg.name}.summary.txt"
    summary_path.write_text(summary + "\n")
    files.append(summary_path)
    return ExperimentOutcome(cfg.name, code, summary, files)


def run(config_path, out_dir=None, fmt=None, stream: Optional[TextIO] = None) -> int:
    """Run one config file; print its summary and return the exit code."""
    stream = stream or sys.stdout
    try:
        cfg = load_config(Path(config_path))
    except ValidationError as exc:
        print(f"invalid config {config_path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if fmt:
        cfg.format = fmt
    target = Path(out_dir) if out_dir else (cfg.out_dir or Path("."))
    outcome = run_experiment(cfg, target)
    print(outcome.summary, file=stream)
    return outcome.exit_code


def run_batch(directory, out_dir=None, fmt=None, workers: int = 4, stream: Optional[TextIO] = None) -> int:
    """Run every ``*.cfg`` in ``directory`` concurrently; summaries print in file order."""
    stream = stream or sys.stdout
    paths = sorted(Path(directory).glob("*.cfg"))
    if not paths:
        print(f"no *.cfg files in {directory}", file=sys.stderr)
        return EXIT_INVALID
    lock = threading.Lock()
    buffers: Dict[Path, str] = {}

    def one(path):
        import io

        buf = io.StringIO()
        code = run(path, out_dir, fmt, stream=buf)
        with lock:
            buffers[path] = buf.getvalue()
        return code

    with ThreadPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(one, paths))
    for p in paths:
        stream.write(buffers[p] + "\n")
    return max(codes)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="pgdiverge",
        description="Petrov-Galerkin divergence experiments for first-kind operator equations.",
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config (or a directory with --batch)")
    p_run.add_argument("config", nargs="?", help="config file")
    p_run.add_argument("--batch", metavar="DIR", help="run every *.cfg in DIR")
    p_run.add_argument("--out", metavar="DIR", help="output directory")
    p_run.add_argument("--format", choices=("csv", "records"), help="table format")
    p_run.add_argument("--workers", type=int, default=4, help="concurrent experiments in --batch mode")

    sub.add_parser("list-presets", help="print operator, basis and rhs vocabularies")
    sub.add_parser("config-keys", help="print the config schema with defaults")

    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-presets":
        print(list_presets())
        return EXIT_OK
    if args.command == "config-keys":
        for k, (default, desc) in CONFIG_KEYS.items():
            print(f"{k:16s} {'(required)' if default is None else repr(default):12s} {desc}")
        return EXIT_OK
    if bool(args.config) == bool(args.batch):
        print("run: give exactly one of CONFIG or --batch DIR", file=sys.stderr)
        return EXIT_INVALID
    if args.batch:
        return run_batch(args.batch, args.out, args.format, args.workers)
    return run(args.config, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
