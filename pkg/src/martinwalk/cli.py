"""Configuration-driven entry point.

Commands: ``verify`` (exact invariant suites), ``kernel`` (tabulate lattice
and boundary kernels), ``simulate`` (trajectories), ``estimate``
(directing-measure recovery), ``lift`` (binary-expansion pipeline).

Configs are strict JSON: unknown keys are rejected, rationals travel as
"p/q" strings, and floats require ``"mode": "float"``.  Outputs are
canonical (sorted keys, no timestamps) so a fixed config and seed yield
byte-identical reports, regardless of worker count.  Exit status: 0 all
checks pass, 1 check failure, 2 bad config, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .compositions import alpha_walk, boundary_kernel, uniform_walk
from .definetti import (
    MarkovSource,
    MixtureSource,
    PolyaUrnSource,
    binary_digits,
    estimate_directing_measure,
    lift_point_masses,
    projection_consistency_check,
    reconstruct_real,
)
from .errors import BudgetExceededError, ConfigError
from .prob import Prob, format_prob, parse_prob, validate_simplex
from .reports import CheckReport, MonteCarloResult
from .suites import full_verification

COMMANDS = ("verify", "kernel", "simulate", "estimate", "lift")

#: largest level budget the exact verification suites will accept
MAX_EXACT_BUDGET = 12

_COMMON_KEYS = {"command", "seed", "workers", "out", "format", "mode"}
_COMMAND_KEYS = {
    "verify": {"d", "budget"},
    "kernel": {"d", "budget", "alpha"},
    "simulate": {"d", "alpha", "horizon", "replicates"},
    "estimate": {"source", "horizon", "replicates"},
    "lift": {"points", "depth"},
}
_SOURCE_KEYS = {
    "mixture": {"kind", "atoms", "weights"},
    "polya": {"kind", "initial"},
    "markov": {"kind", "initial", "rows"},
}

_RECORD_FIELDS = (
    "name",
    "mode",
    "status",
    "checked",
    "violations",
    "residual",
    "estimate",
    "std_error",
    "z_score",
    "target",
    "replicates",
)


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 0
    workers: int = 1
    mode: str = "exact"
    d: int = 2
    budget: int = 6
    alpha: Optional[tuple[Prob, ...]] = None
    source: Optional[object] = None
    horizon: int = 1000
    replicates: int = 100
    points: tuple[Prob, ...] = ()
    depth: int = 8
    out: Optional[str] = None
    format: str = "json"

    def echo(self) -> dict:
        """Resolved semantic parameters, seed always explicit.

        ``workers`` and ``out`` are deliberately not echoed: they affect
        scheduling and destination only, never the report content, and the
        output must be byte-identical across worker counts.
        """
        doc: dict = {
            "command": self.command,
            "seed": self.seed,
            "mode": self.mode,
            "format": self.format,
        }
        if self.command in ("verify", "kernel", "simulate"):
            doc["d"] = self.d
        if self.command in ("verify", "kernel"):
            doc["budget"] = self.budget
        if self.alpha is not None:
            doc["alpha"] = [format_prob(a) for a in self.alpha]
        if self.source is not None:
            doc["source"] = _echo_source(self.source)
        if self.command in ("simulate", "estimate"):
            doc["horizon"] = self.horizon
            doc["replicates"] = self.replicates
        if self.command == "lift":
            doc["points"] = [format_prob(p) for p in self.points]
            doc["depth"] = self.depth
        return doc


@dataclass
class Report:
    config: dict
    records: list[dict] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.get("status") != "fail" for r in self.records)

    def finish(self) -> "Report":
        failed = sum(1 for r in self.records if r.get("status") == "fail")
        self.summary.setdefault("checks", len(self.records))
        self.summary.setdefault("failed", failed)
        self.summary.setdefault("status", "pass" if failed == 0 else "fail")
        return self


# -- config parsing ---------------------------------------------------------------


def _require_int(doc: dict, key: str, default: int, minimum: int = 0) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def _parse_alpha(raw, mode: str) -> tuple[Prob, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"alpha must be a list, got {raw!r}")
    coords = tuple(parse_prob(a, mode) for a in raw)
    try:
        return validate_simplex(coords)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_source(raw, mode: str):
    if not isinstance(raw, dict):
        raise ConfigError("source must be an object")
    kind = raw.get("kind")
    if kind not in _SOURCE_KEYS:
        raise ConfigError(f"unknown source kind {kind!r}")
    unknown = set(raw) - _SOURCE_KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown source keys {sorted(unknown)}")
    try:
        if kind == "mixture":
            atoms = tuple(
                tuple(parse_prob(a, mode) for a in atom) for atom in raw.get("atoms", ())
            )
            weights = tuple(parse_prob(w, mode) for w in raw.get("weights", ()))
            return MixtureSource(atoms=atoms, weights=weights)
        if kind == "polya":
            return PolyaUrnSource(tuple(raw.get("initial", ())))
        initial = tuple(parse_prob(p, mode) for p in raw.get("initial", ()))
        rows = tuple(
            tuple(parse_prob(p, mode) for p in row) for row in raw.get("rows", ())
        )
        return MarkovSource(initial=initial, rows=rows)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad {kind} source: {exc}") from exc


def _echo_source(source) -> dict:
    if isinstance(source, MixtureSource):
        return {
            "kind": "mixture",
            "atoms": [[format_prob(a) for a in atom] for atom in source.atoms],
            "weights": [format_prob(w) for w in source.weights],
        }
    if isinstance(source, PolyaUrnSource):
        return {"kind": "polya", "initial": list(source.initial)}
    return {
        "kind": "markov",
        "initial": [format_prob(p) for p in source.initial],
        "rows": [[format_prob(p) for p in row] for row in source.rows],
    }


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Strict parse of a JSON config document; unknown keys are errors."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            if key == "command" and "command" in doc and doc["command"] != value:
                raise ConfigError(
                    f"config command {doc['command']!r} conflicts with requested {value!r}"
                )
            doc[key] = value
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    allowed = _COMMON_KEYS | _COMMAND_KEYS[command]
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    mode = doc.get("mode", "exact")
    if mode not in ("exact", "float"):
        raise ConfigError(f"mode must be \"exact\" or \"float\", got {mode!r}")
    fmt = doc.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format must be \"json\" or \"csv\", got {fmt!r}")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out must be a path string")
    alpha = _parse_alpha(doc["alpha"], mode) if "alpha" in doc else None
    d_value = _require_int(doc, "d", 2, minimum=1)
    if alpha is not None:
        if "d" in doc and len(alpha) != d_value:
            raise ConfigError(f"alpha has {len(alpha)} parts but d={d_value}")
        d_value = len(alpha)
    source = _parse_source(doc["source"], mode) if "source" in doc else None
    if command == "estimate" and source is None:
        raise ConfigError("estimate requires a source")
    points: tuple[Prob, ...] = ()
    if command == "lift":
        raw_points = doc.get("points")
        if not isinstance(raw_points, list) or not raw_points:
            raise ConfigError("lift requires a non-empty list of points")
        points = tuple(parse_prob(p, mode) for p in raw_points)
        for p in points:
            if not 0 <= p < 1:
                raise ConfigError(f"lift points must lie in [0, 1), got {format_prob(p)}")
    return RunConfig(
        command=command,
        seed=_require_int(doc, "seed", 0),
        workers=_require_int(doc, "workers", 1, minimum=1),
        mode=mode,
        d=d_value,
        budget=_require_int(doc, "budget", 6, minimum=1),
        alpha=alpha,
        source=source,
        horizon=_require_int(doc, "horizon", 1000, minimum=1),
        replicates=_require_int(doc, "replicates", 100, minimum=1),
        points=points,
        depth=_require_int(doc, "depth", 8, minimum=1),
        out=out,
        format=fmt,
    )


# -- records ------------------------------------------------------------------------


def _exact_record(report: CheckReport) -> dict:
    if report.ok:
        residual = format_prob(Fraction(0))
    else:
        residual = format_prob(report.violations[0].residual)
    return {
        "name": report.name,
        "mode": "exact",
        "status": "pass" if report.ok else "fail",
        "checked": report.checked,
        "violations": len(report.violations),
        "residual": residual,
    }


def _mc_record(result: MonteCarloResult, z_limit: float = 3.0) -> dict:
    return {
        "name": result.name,
        "mode": "montecarlo",
        "status": "pass" if result.within(z_limit) else "fail",
        "estimate": result.estimate,
        "std_error": result.std_error,
        "z_score": result.z_score,
        "target": result.target,
        "replicates": result.replicates,
    }


# -- commands -------------------------------------------------------------------------


def _check_budget(config: RunConfig) -> None:
    if config.budget > MAX_EXACT_BUDGET:
        raise BudgetExceededError(
            f"budget {config.budget} exceeds the exact-suite maximum {MAX_EXACT_BUDGET}"
        )


def _run_verify(config: RunConfig, report: Report) -> None:
    _check_budget(config)
    report.records.extend(
        _exact_record(r) for r in full_verification(config.d, config.budget)
    )


def _run_kernel(config: RunConfig, report: Report) -> None:
    _check_budget(config)
    chain = uniform_walk(config.d, level_budget=config.budget)
    for m in range(config.budget + 1):
        for x in chain.enumerate_level(m):
            for n in range(m, config.budget + 1):
                for y in chain.enumerate_level(n):
                    report.rows.append(
                        {
                            "kind": "lattice",
                            "x": str(x.payload),
                            "m": m,
                            "y": str(y.payload),
                            "n": n,
                            "value": format_prob(chain.martin_kernel(x, y)),
                        }
                    )
    if config.alpha is not None:
        for m in range(config.budget + 1):
            for x in chain.enumerate_level(m):
                report.rows.append(
                    {
                        "kind": "boundary",
                        "x": str(x.payload),
                        "m": m,
                        "y": "",
                        "n": "",
                        "value": format_prob(boundary_kernel(x, config.alpha)),
                    }
                )


def _run_simulate(config: RunConfig, report: Report) -> None:
    if config.alpha is not None:
        walk = alpha_walk(config.alpha, level_budget=config.budget)
    else:
        walk = uniform_walk(config.d, level_budget=config.budget)
    d = config.d
    for r in range(config.replicates):
        path = walk.sample_path(config.horizon, config.seed, r)
        for state in path:
            row = {"replicate": r, "step": state.level}
            for i in range(d):
                row[f"part_{i + 1}"] = state.payload[i]
            report.rows.append(row)


def _run_estimate(config: RunConfig, report: Report) -> None:
    estimate = estimate_directing_measure(
        config.source,
        horizon=config.horizon,
        replicates=config.replicates,
        seed=config.seed,
        workers=config.workers,
    )
    d = config.source.d
    for r in range(estimate.replicates):
        row = {"replicate": r}
        for i in range(d):
            row[f"coord_{i + 1}"] = float(estimate.samples[r, i])
        report.rows.append(row)
    means, seconds = estimate.coordinate_moments()
    report.summary["coordinate_means"] = list(means)
    report.summary["coordinate_second_moments"] = list(seconds)
    if isinstance(config.source, MixtureSource):
        report.summary["clusters"] = [
            {
                "atom": [float(a) for a in c.atom],
                "weight": c.weight,
                "mean": list(c.mean),
                "count": c.count,
            }
            for c in estimate.cluster_summary(config.source.atoms)
        ]


def _run_lift(config: RunConfig, report: Report) -> None:
    bound = Fraction(1, 2**config.depth)
    for p in config.points:
        digits = binary_digits(p, config.depth)
        back = reconstruct_real(digits)
        gap = abs(Fraction(p) - back)
        report.rows.append(
            {
                "point": format_prob(p),
                "digits": "".join(map(str, digits)),
                "reconstructed": format_prob(back),
            }
        )
        report.records.append(
            {
                "name": f"digit-roundtrip@{format_prob(p)}",
                "mode": "exact",
                "status": "pass" if gap < bound else "fail",
                "checked": 1,
                "violations": 0 if gap < bound else 1,
                "residual": format_prob(gap),
            }
        )
    if config.depth >= 2:
        weight = Fraction(1, len(config.points))
        masses: dict = {}
        for p in config.points:
            masses[p] = masses.get(p, 0) + weight
        consistency = projection_consistency_check(
            lift_point_masses(masses, config.depth),
            lift_point_masses(masses, config.depth - 1),
        )
        report.records.append(_exact_record(consistency))


def run(config: RunConfig) -> tuple[Report, int]:
    """Execute the configured command; exit status 0 iff all checks pass."""
    report = Report(config=config.echo())
    try:
        if config.command == "verify":
            _run_verify(config, report)
        elif config.command == "kernel":
            _run_kernel(config, report)
        elif config.command == "simulate":
            _run_simulate(config, report)
        elif config.command == "estimate":
            _run_estimate(config, report)
        else:
            _run_lift(config, report)
    except BudgetExceededError:
        raise
    report.finish()
    return report, 0 if report.passed else 1


# -- output ---------------------------------------------------------------------------


def emit(report: Report, fmt: str = "json") -> bytes:
    """Render a report: canonical JSON, or CSV with the config echo in comments."""
    if fmt == "json":
        doc = {
            "config": report.config,
            "records": report.records,
            "rows": report.rows,
            "summary": report.summary,
        }
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    buffer = io.StringIO()
    for key in sorted(report.config):
        buffer.write(f"# {key}={json.dumps(report.config[key], sort_keys=True)}\n")
    if report.rows:
        fields = list(report.rows[0])
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(report.rows)
    else:
        writer = csv.DictWriter(
            buffer, fieldnames=_RECORD_FIELDS, restval="", lineterminator="\n"
        )
        writer.writeheader()
        writer.writerows(report.records)
    return buffer.getvalue().encode()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="martinwalk",
        description="Exact kernels, transforms and Monte Carlo checks for graded chains.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON config document")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), dest="fmt")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(
            text,
            overrides={
                "command": args.command,
                "seed": args.seed,
                "workers": args.workers,
                "out": args.out,
                "format": args.fmt,
            },
        )
        report, status = run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    payload = emit(report, config.format)
    if config.out:
        with open(config.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload.decode())
    return status


if __name__ == "__main__":
    sys.exit(main())
