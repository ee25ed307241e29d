"""Command-line driver: ``compoundlab <command> [--config FILE] [flags]``.

Each command runs either the bundled presets (optionally narrowed with
``--example`` / ``--bounded``) or, when the config carries a ``model``
section, a custom experiment on that model.  Results land in ``--out`` as one
CSV per table, ``checks.csv``, ``summary.json`` and ``report.txt``.

Exit codes: 0 when every check passes, 2 when some check fails, 1 for usage
or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema

from . import __version__
from .alphabet import IsiMap
from .capacity import capacity_report, capacity_row, closed_form
from .coding import (DECODE_CAP, coding_row, run_error_sweep, run_feedback_comparison,
                     FeedbackEncoder)
from .converse import converse_from_samples, converse_row, ordering_report
from .errors import CompoundLabError
from .noise import StateSchedule, model_from_dict
from .presets import Outcome, mode_rows, run_preset, select
from .props import ordering_checks, property_suite
from .report import COLUMNS, emit_report, write_csv, write_json, write_tables
from .spectrum import EstimationSettings, estimate_bounds, sample_densities, spectrum_rows

log = logging.getLogger("compoundlab")

COMMANDS = ("spectrum", "capacity", "strong-converse", "coding", "props", "replicate-paper")
PRESET_KINDS = {
    "spectrum": ("spectrum", "synthetic"),
    "capacity": ("spectrum",),
    "strong-converse": ("spectrum", "best-state-gap"),
    "coding": ("coding",),
    "props": ("props",),
}
EXIT_OK, EXIT_USAGE, EXIT_CHECKS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; here 2 means failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config (schema version 1)")
    common.add_argument("--out", type=Path, help="output directory (default: results)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, help="worker threads; results do not depend on it")
    common.add_argument("--trials-scale", type=float, dest="trials_scale",
                        help="multiply every trial count (quick < 1 < thorough)")
    common.add_argument("--example", type=int, choices=[1, 2, 3, 4],
                        help="restrict presets to one worked example")
    common.add_argument("--bounded", type=int, metavar="S",
                        help="use the bounded variant with states s <= S")
    common.add_argument("-q", "--quiet", action="store_true", help="do not print the report")

    p = _Parser(prog="compoundlab", description="Compound additive-noise channel laboratory.")
    p.add_argument("--version", action="version", version=f"compoundlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "spectrum": "estimate the four compound spectral bounds of the noise entropy density",
        "capacity": "compound and worst-case capacity estimates with the Tx-CSI gain",
        "strong-converse": "strong converse condition verdicts and ordering diagnostics",
        "coding": "random-coding error rates under ML decoding",
        "props": "operator property suite on synthetic sequences",
        "replicate-paper": "run the bundled replication presets",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return p


# ---------------------------------------------------------------------------
# config

def load_schema() -> dict:
    text = resources.files("compoundlab").joinpath("schema/config-v1.json").read_text()
    return json.loads(text)


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) with command-line flags and validate it."""
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        if cfg.get("command", args.command) != args.command:
            raise UsageError(f"config is for {cfg['command']!r}, not {args.command!r}")
    else:
        # without a config file the seed defaults to 0: still fixed, never clock-derived
        cfg = {"schema_version": 1, "master_seed": 0}
    cfg = dict(cfg, command=args.command)
    for key in ("workers", "trials_scale", "example", "bounded"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.out is not None:
        cfg["output"] = str(args.out)
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "config"
        raise UsageError(f"schema error at {where}: {exc.message}") from exc
    if "model" in cfg:
        try:
            model_from_dict(cfg["model"])
            StateSchedule.from_dict(cfg.get("schedule", {"fixed": [1]}))
        except (CompoundLabError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid model or schedule: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# runs

def _settings(cfg: dict) -> EstimationSettings:
    est = dict(cfg.get("estimator", {}))
    est.pop("uniformity_deltas", None)
    if "n_grid" in est:
        est["n_grid"] = tuple(sorted(est["n_grid"]))
    st = replace(EstimationSettings(), seed=cfg["master_seed"], workers=cfg.get("workers", 1),
                 **est)
    return st.scaled(cfg.get("trials_scale", 1.0))


def preset_list(cfg: dict) -> list:
    cmd = cfg["command"]
    chosen = select(cfg.get("example"), cfg.get("bounded"))
    if cmd != "replicate-paper":
        chosen = [p for p in chosen if p.kind in PRESET_KINDS[cmd]]
    if not chosen:
        raise UsageError(f"no bundled preset matches {cmd} with example={cfg.get('example')} "
                         f"bounded={cfg.get('bounded')}")
    return chosen


def _failed(name: str, exc: Exception) -> Outcome:
    out = Outcome(name)
    out.check("run completed", f"{type(exc).__name__}: {exc}", False)
    return out


def run_presets(cfg: dict) -> list[Outcome]:
    outcomes = []
    for p in preset_list(cfg):
        log.info("running preset %s", p.name)
        try:
            outcomes.append(run_preset(p, cfg["master_seed"], cfg.get("trials_scale", 1.0),
                                       cfg.get("workers", 1)))
        except CompoundLabError as exc:       # infeasible item: report it and keep going
            log.error("preset %s failed: %s", p.name, exc)
            outcomes.append(_failed(p.name, exc))
    return outcomes


def run_custom(cfg: dict) -> list[Outcome]:
    """Experiment on the config's own model and schedule."""
    cmd = cfg["command"]
    model = model_from_dict(cfg["model"])
    schedule = StateSchedule.from_dict(cfg.get("schedule", {"fixed": [1]}))
    out = Outcome(f"custom-{cmd}")
    seed = cfg["master_seed"]

    if cmd == "coding":
        return [_custom_coding(cfg, model, schedule, out)]

    st = _settings(cfg)
    samples = sample_densities(model, schedule, st.n_grid, st.trials, seed, workers=st.workers)
    bounds = estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=seed)
    out.rows["spectrum"] = spectrum_rows(bounds, model.kind, seed)
    for c in ordering_checks(bounds):
        out.check(c["check"], [c[k] for k in ("uuline", "uln", "oln", "ooline")], c["passed"])
    if cmd == "props":
        rows = []
        for c in property_suite(samples, st.epsilon):
            out.check(c["check"], c.get("lhs"), c["passed"], c.get("rhs"), c.get("tol"))
            rows.append({"sequence": model.kind, "check": c["check"], "passed": c["passed"],
                         "lhs": c.get("lhs", ""), "rhs": c.get("rhs", ""), "tol": c.get("tol", "")})
        out.rows["props"] = rows
    elif cmd in ("capacity", "strong-converse"):
        conv = converse_from_samples(samples, bounds, st)
        cap = capacity_report(bounds, model.M, conv.uniformity_verdict)
        out.summary = {"capacity": cap.to_dict(), "converse": conv.to_dict()}
        out.rows["capacity"] = [capacity_row(cap, cfg.get("example", ""), cfg["model"])]
        if cmd == "capacity" and "example" in cfg:
            ref = closed_form(cfg["example"], {**cfg["model"],
                                               "bounded": schedule.is_bounded})
            out.rows["capacity"].append(capacity_row(ref, cfg["example"], cfg["model"]))
            out.near("C_compound", cap.C_compound, ref.C_compound)
            out.near("C_worst", cap.C_worst, ref.C_worst)
            out.near("delta_C", cap.delta_C, ref.delta_C)
        if cmd == "strong-converse":
            order = ordering_report(conv)
            out.check("ordering diagnostic", order["status"], order["status"] != "estimator-bug")
            out.rows["converse"] = [converse_row(conv, model.kind, repr(schedule))]
            out.rows["modes"] = [{"preset": out.name, **r} for r in mode_rows(samples)]
    out.summary.update({"settings": st.to_dict(), "bounds": bounds.limit})
    return [out]


def _custom_coding(cfg: dict, model, schedule, out: Outcome) -> Outcome:
    cc = cfg.get("coding", {})
    scale = cfg.get("trials_scale", 1.0)
    trials = max(200, int(round(cc.get("trials", 1000) * scale)))
    n_grid = cc.get("n_grid", [16, 24, 32])
    rates = cc.get("rate_grid", [0.25, 0.5])
    g = IsiMap(cc.get("isi_depth", 0))
    cap = cc.get("decode_cap", DECODE_CAP)
    seed = cfg["master_seed"]
    schemes = [s for s in cc.get("schemes", ["baseline"]) if s != "baseline"]
    rows = []
    res = run_error_sweep(model, schedule, g, n_grid, rates, trials, seed, cap,
                          cc.get("method", "auto"), FeedbackEncoder(), cfg.get("workers", 1))
    rows += [coding_row(r) for r in res]
    done = {(r.state, r.n, r.R) for r in res}
    for n in n_grid:
        for R in rates:
            for label, _ in schedule.states_at(n):
                if (label, n, float(R)) not in done:   # skipped by the sweep: infeasible
                    out.check(f"cell run [{label}, n={n}, R={R:g}]", "codebook over decode cap",
                              False)
    for r in res:
        out.check(f"error rate in [0, 1] [{r.state}, n={r.n}, R={r.R:g}]", r.error_rate,
                  0.0 <= r.error_rate <= 1.0)
    if schemes:
        for n in n_grid:
            for R in rates:
                try:
                    fc = run_feedback_comparison(model, schedule, g, ["baseline", *schemes], n, R,
                                                 trials, seed, cap)
                except CompoundLabError as exc:
                    out.check(f"feedback comparison n={n}, R={R:g}", str(exc), False)
                    continue
                out.check(f"feedback gain / sigma at n={n}, R={R:g}", fc.max_z(),
                          fc.max_z() <= 3.0, "<= 3")
                for d in fc.schemes.values():
                    rows += [coding_row(r) for r in d.values()]
    out.rows["coding"] = rows
    return out


def execute(cfg: dict) -> list[Outcome]:
    if "model" in cfg and cfg["command"] != "replicate-paper":
        try:
            return run_custom(cfg)
        except CompoundLabError as exc:
            log.error("run failed: %s", exc)
            return [_failed(f"custom-{cfg['command']}", exc)]
    return run_presets(cfg)


# ---------------------------------------------------------------------------
# artifacts

def collect_tables(outcomes: Sequence[Outcome]) -> dict[str, list[dict]]:
    tables: dict[str, list[dict]] = {}
    for o in outcomes:
        for name, rows in o.rows.items():
            tables.setdefault(name, []).extend(rows)
    return tables


def write_artifacts(out_dir: Path, cfg: dict, outcomes: Sequence[Outcome]) -> str:
    tables = collect_tables(outcomes)
    write_tables(out_dir, tables)
    checks = [c for o in outcomes for c in o.checks]
    write_csv(out_dir / "checks.csv", COLUMNS["checks"], checks)
    summary = {
        "inputs": cfg,
        "passed": all(o.passed for o in outcomes),
        "presets": {o.name: {"passed": o.passed, "checks": o.checks, **o.summary}
                    for o in outcomes},
    }
    write_json(out_dir / "summary.json", summary)
    text = emit_report(outcomes, tables)
    (out_dir / "report.txt").write_text(text + "\n")
    return text


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out_dir = Path(cfg.get("output", "results"))
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out_dir}: {exc}") from exc
        outcomes = execute(cfg)
        try:
            text = write_artifacts(out_dir, cfg, outcomes)
        except OSError as exc:
            raise UsageError(f"cannot write results to {out_dir}: {exc}") from exc
    except UsageError as exc:
        print(f"compoundlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.quiet:
        print(text)
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_CHECKS


if __name__ == "__main__":
    sys.exit(main())
