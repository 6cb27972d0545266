"""Experiment configuration, runners and deterministic table output."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .branching import QubitPrep, build_ensemble, enumerate_branches
from .decoherence import (
    DECOHERENCE_COLUMNS,
    PointerModel,
    decoherence_rate,
    interference_visibility,
    pointer_overlap,
)
from .envariance import spin_born_derivation
from .exactnum import LogReal, as_fraction, format_exact, format_fixed
from .measures import (
    ASYMPTOTIC,
    DEFAULT_EXACT_CAP,
    EXACT,
    MODES,
    MaverickRule,
    MeasureSpec,
    SweepRow,
    born_rate,
    born_rate_empirical,
    counting_rate,
    counting_rate_empirical,
    measure_mass,
    sweep,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("maverick", "sweep", "envariance", "decoherence", "ratefn", "selftest")
FORMATS = ("csv", "json")

SWEEP_COLUMNS = (
    "n", "p", "epsilon", "alpha", "mode",
    "maverick_mass", "nonmaverick_mass", "hoeffding_bound", "ln_maverick_mass", "status",
)
RATEFN_COLUMNS = ("a", "p", "n", "counting_rate", "counting_rate_empirical", "born_rate", "born_rate_empirical")
SELFTEST_COLUMNS = ("check", "n", "p", "epsilon", "status")

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION = 0, 1, 2

# experiment -> keys that have no default
REQUIRED = {
    "maverick": ("n", "p"),
    "sweep": ("n", "p"),
    "envariance": ("p",),
    "decoherence": ("n", "gamma"),
    "ratefn": ("p", "a"),
    "selftest": (),
}


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ComputationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: tuple[int, ...] = ()
    p: Fraction | None = None
    epsilon: Fraction = Fraction(1, 10)
    alpha: tuple[Fraction, ...] = (Fraction(0), Fraction(1))
    gamma: Fraction | None = None
    a: tuple[Fraction, ...] = ()
    comparison: str = "strict"
    mode: str = EXACT
    exact_cap: int = DEFAULT_EXACT_CAP
    out: str | None = None
    format: str = "csv"
    figure: str | None = None
    jobs: int = 1

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = format_exact(v)
            elif isinstance(v, tuple):
                v = [format_exact(x) if isinstance(x, Fraction) else x for x in v]
            out[f.name] = v
        return out

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def output_path(self) -> Path:
        return Path(self.out or f"{self.experiment}.{self.format}")


_KEYS = {f.name for f in fields(ExperimentConfig)}


def _int_list(value, key, errors) -> tuple[int, ...]:
    items = value if isinstance(value, list) else [value]
    out = []
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (int, str)):
            errors.append(f"{key}: expected an integer, got {item!r}")
            continue
        try:
            v = int(item)
        except ValueError:
            errors.append(f"{key}: expected an integer, got {item!r}")
            continue
        if v < 1:
            errors.append(f"{key}: value out of range, must be >= 1 (got {v})")
        out.append(v)
    if not out and not errors:
        errors.append(f"{key}: empty list")
    return tuple(out)


def _rational(value, key, errors, lo=None, hi=None, lo_open=False, hi_open=False, what="value"):
    try:
        x = as_fraction(value if not isinstance(value, float) else str(value))
    except (TypeError, ValueError):
        errors.append(f"{key}: malformed rational {value!r} (use num/den)")
        return None
    bad = (lo is not None and (x < lo or (lo_open and x == lo))) or (
        hi is not None and (x > hi or (hi_open and x == hi))
    )
    if bad:
        errors.append(f"{key}: {what} out of range ({format_exact(x)})")
        return None
    return x


def parse_mapping(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a decoded config; every problem is collected before raising."""
    errors: list[str] = []
    for key in sorted(set(raw) - _KEYS):
        errors.append(f"unknown key {key!r}")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)} (got {experiment!r})")
    else:
        for key in REQUIRED[experiment]:
            if raw.get(key) is None:
                errors.append(f"{key}: required for {experiment}")

    kw: dict[str, Any] = {}
    if raw.get("n") not in (None, []):
        kw["n"] = _int_list(raw["n"], "n", errors)
        if experiment == "maverick" and len(kw["n"]) > 1:
            errors.append("n: maverick takes a single n (use sweep for a list)")
    if raw.get("p") is not None:
        kw["p"] = _rational(raw["p"], "p", errors, 0, 1, what="probability")
    if raw.get("epsilon") is not None:
        kw["epsilon"] = _rational(raw["epsilon"], "epsilon", errors, 0, 1, True, True)
    if raw.get("alpha") is not None:
        items = raw["alpha"] if isinstance(raw["alpha"], list) else [raw["alpha"]]
        vals = [_rational(x, "alpha", errors, 0) for x in items]
        kw["alpha"] = tuple(sorted({v for v in vals if v is not None}))
    if raw.get("gamma") is not None:
        kw["gamma"] = _rational(raw["gamma"], "gamma", errors, 0, 1)
    if raw.get("a") is not None:
        items = raw["a"] if isinstance(raw["a"], list) else [raw["a"]]
        vals = [_rational(x, "a", errors, Fraction(1, 2), 1, True, True) for x in items]
        kw["a"] = tuple(v for v in vals if v is not None)
    for key, allowed in (("comparison", ("strict", "inclusive")), ("mode", MODES), ("format", FORMATS)):
        if raw.get(key) is not None:
            if raw[key] not in allowed:
                errors.append(f"{key}: must be one of {', '.join(allowed)} (got {raw[key]!r})")
            else:
                kw[key] = raw[key]
    for key in ("exact_cap", "jobs"):
        if raw.get(key) is not None:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                errors.append(f"{key}: expected a positive integer (got {v!r})")
            else:
                kw[key] = v
    for key in ("out", "figure"):
        if raw.get(key) is not None:
            kw[key] = str(raw[key])
    if (
        experiment == "ratefn"
        and kw.get("p") is not None
        and not 0 < kw["p"] < 1
    ):
        errors.append("p: probability out of range for ratefn (needs 0 < p < 1)")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(experiment=experiment, **kw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a JSON config document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return parse_mapping(raw)


# ---------------------------------------------------------------------------
# output


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return format_exact(value)
    if isinstance(value, LogReal):
        return value.format()
    if isinstance(value, float):
        return format_fixed(value)
    return str(value)


def emit_csv(rows: Sequence[Mapping[str, Any]], schema: Sequence[str]) -> bytes:
    """Header then one line per row; values rendered without locale."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for row in rows:
        if set(row) != set(schema):
            missing = sorted(set(schema) - set(row))
            extra = sorted(set(row) - set(schema))
            raise ValueError(f"schema mismatch: missing {missing}, unexpected {extra}")
        writer.writerow([_cell(row[c]) for c in schema])
    return buf.getvalue().encode("utf-8")


def emit_json(rows: Sequence[Mapping[str, Any]], schema: Sequence[str], config: ExperimentConfig) -> bytes:
    doc = {
        "tool": "mwlab",
        "version": __version__,
        "config": config.to_dict(),
        "columns": list(schema),
        "rows": [{c: _cell(row[c]) for c in schema} for row in rows],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


@dataclass
class RunResult:
    schema: tuple[str, ...]
    rows: list[dict[str, Any]]
    status: int = EXIT_OK
    extra_files: dict[str, bytes] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)


def sweep_rows(rows: Sequence[SweepRow]) -> list[dict[str, Any]]:
    out = []
    for r in rows:
        rep = r.report
        out.append(
            {
                "n": r.n,
                "p": r.p,
                "epsilon": r.epsilon,
                "alpha": r.alpha,
                "mode": r.mode,
                "maverick_mass": rep.maverick_mass if rep else None,
                "nonmaverick_mass": rep.nonmaverick_mass if rep else None,
                "hoeffding_bound": r.hoeffding,
                "ln_maverick_mass": rep.ln_maverick_mass if rep else None,
                "status": "ok" if r.error is None else f"error: {r.error}",
            }
        )
    return out


def _run_sweep(cfg: ExperimentConfig) -> RunResult:
    rows = sweep(cfg.n, cfg.p, cfg.epsilon, cfg.alpha, cfg.mode, cfg.comparison, cfg.exact_cap, cfg.jobs)
    result = RunResult(SWEEP_COLUMNS, sweep_rows(rows))
    failed = [r for r in rows if r.error]
    if failed:
        result.status = EXIT_COMPUTATION
        result.messages += [f"n={r.n} alpha={format_exact(r.alpha)}: {r.error}" for r in failed]
    return result


def _run_envariance(cfg: ExperimentConfig) -> RunResult:
    (pp, pm), lines = spin_born_derivation(cfg.p)
    row = {"p": cfg.p, "cells": sum(1 for ln in lines if ln.startswith("cell ")), "p_plus": pp, "p_minus": pm}
    cert = ("\n".join(lines) + "\n").encode("utf-8")
    return RunResult(("p", "cells", "p_plus", "p_minus"), [row], extra_files={".cert.txt": cert})


def _run_decoherence(cfg: ExperimentConfig) -> RunResult:
    rows = []
    x = cfg.p if cfg.p is not None else Fraction(1, 2)
    for n in sorted(set(cfg.n)):
        model = PointerModel(n, cfg.gamma)
        overlap = pointer_overlap(model, log=cfg.mode == ASYMPTOTIC)
        try:
            rate: Any = decoherence_rate(model)
        except ValueError:
            rate = None
        rows.append(
            {
                "n_env": n,
                "gamma": cfg.gamma,
                "overlap": overlap,
                "visibility_ln": interference_visibility(x, model),
                "rate": rate,
            }
        )
    return RunResult(DECOHERENCE_COLUMNS, rows)


def _run_ratefn(cfg: ExperimentConfig) -> RunResult:
    ns = sorted(set(cfg.n)) or [2000]
    rows = []
    for n in ns:
        if n > cfg.exact_cap:
            raise ComputationError(f"exact tails refuse n={n} above the cap {cfg.exact_cap}")
        for a in sorted(set(cfg.a)):
            rows.append(
                {
                    "a": a,
                    "p": cfg.p,
                    "n": n,
                    "counting_rate": counting_rate(a),
                    "counting_rate_empirical": counting_rate_empirical(n, a),
                    "born_rate": born_rate(a, cfg.p),
                    "born_rate_empirical": born_rate_empirical(n, a, cfg.p),
                }
            )
    return RunResult(RATEFN_COLUMNS, rows)


SELFTEST_P = (Fraction(1, 2), Fraction(2, 3), Fraction(9, 10))
SELFTEST_EPS = (Fraction(1, 10), Fraction(1, 4))


def selftest_rows(max_n: int = 12) -> list[dict[str, Any]]:
    """Aggregated results against brute-force enumeration of every outcome string."""
    rows = []
    for n in range(1, max_n + 1):
        for p in SELFTEST_P:
            ens = build_ensemble(n, QubitPrep(p))
            counts = [0] * (n + 1)
            weights = [Fraction(0)] * (n + 1)
            for bits, w in enumerate_branches(n, p):
                k = bits.count("+")
                counts[k] += 1
                weights[k] += w
            ok = list(ens.counts) == counts and list(ens.born_weights()) == weights
            rows.append({"check": "ensemble", "n": n, "p": p, "epsilon": None, "status": "pass" if ok else "FAIL"})
            for eps in SELFTEST_EPS:
                rule = MaverickRule(eps)
                mav_count = Fraction(0)
                mav_born = Fraction(0)
                for bits, w in enumerate_branches(n, p):
                    if rule.is_maverick(bits.count("+"), n, p):
                        mav_count += Fraction(1, 2**n)
                        mav_born += w
                got_c = measure_mass(ens, MeasureSpec.counting(), rule).maverick_mass
                got_b = measure_mass(ens, MeasureSpec.born(), rule).maverick_mass
                ok = got_c == mav_count and got_b == mav_born
                rows.append({"check": "maverick", "n": n, "p": p, "epsilon": eps, "status": "pass" if ok else "FAIL"})
    return rows


def _run_selftest(cfg: ExperimentConfig) -> RunResult:
    rows = selftest_rows(max(cfg.n) if cfg.n else 12)
    failed = [r for r in rows if r["status"] != "pass"]
    result = RunResult(SELFTEST_COLUMNS, rows)
    if failed:
        result.status = EXIT_COMPUTATION
        result.messages.append(f"{len(failed)} oracle checks failed")
    return result


RUNNERS = {
    "maverick": _run_sweep,
    "sweep": _run_sweep,
    "envariance": _run_envariance,
    "decoherence": _run_decoherence,
    "ratefn": _run_ratefn,
    "selftest": _run_selftest,
}


def execute(cfg: ExperimentConfig) -> RunResult:
    """Compute an experiment's table without touching the filesystem."""
    try:
        return RUNNERS[cfg.experiment](cfg)
    except ComputationError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise ComputationError(str(exc)) from exc


def render(cfg: ExperimentConfig, result: RunResult) -> bytes:
    if cfg.format == "json":
        return emit_json(result.rows, result.schema, cfg)
    return emit_csv(result.rows, result.schema)


def run(cfg: ExperimentConfig) -> int:
    """Run, write the output file (plus any certificate or figure), return an exit code."""
    try:
        result = execute(cfg)
    except ComputationError as exc:
        log.error("%s", exc)
        return EXIT_COMPUTATION
    path = cfg.output_path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render(cfg, result))
    log.info("wrote %s (%d rows)", path, len(result.rows))
    for suffix, payload in result.extra_files.items():
        extra = path.with_suffix(suffix)
        extra.write_bytes(payload)
        log.info("wrote %s", extra)
    if cfg.figure:
        from .plotting import render_figure

        render_figure(cfg, result.rows, cfg.figure)
        log.info("wrote %s", cfg.figure)
    for msg in result.messages:
        log.error("%s", msg)
    if result.status == EXIT_COMPUTATION and cfg.mode == EXACT and any("cap" in m for m in result.messages):
        log.error("hint: rerun with --mode asymptotic for large n")
    return result.status


def config_from_sources(file_text: str | None, overrides: Mapping[str, Any], experiment: str) -> ExperimentConfig:
    """Merge with precedence flag > file > default."""
    raw: dict[str, Any] = {}
    if file_text is not None:
        try:
            loaded = json.loads(file_text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file is not valid JSON: {exc}"]) from None
        if not isinstance(loaded, dict):
            raise ConfigError(["config must be a JSON object"])
        raw.update(loaded)
    if raw.get("experiment") not in (None, experiment):
        raise ConfigError([f"config file is for {raw['experiment']!r}, not {experiment!r}"])
    raw["experiment"] = experiment
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return parse_mapping(raw)

