"""Command line front end.

Seven subcommands cover the workflow: generate a synthetic frame, score
it (metrics), draw a sample, estimate from an annotated sample, run
replicated experiments (simulate), combine stratum estimates into an F1
(f1), and merge estimate records into a table (report).

Settings resolve as defaults < config file < command-line flags.  Config
files are flat ``key = value`` text.  Every artifact starts with an
audit header recording the command, seed and all result-affecting
settings; rerunning a stochastic command from that header reproduces
the artifact byte for byte.  Exit codes: 0 success, 2 configuration or
schema problems, 3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import classifier_sim, designs, estimators, f1_estimation, montecarlo
from .errors import (
    AllocationError,
    CalibrationError,
    ConfigError,
    IngestionError,
    SweepError,
    UndefinedMetricError,
    VarianceUndefinedError,
)
from .population import Frame, STRATUM_ONE, STRATUM_ZERO, load_frame, stratify_by_prediction, write_frame

PAPER_Z = 2.0

# keys that steer where output lands (or how it is computed in parallel)
# but not what it contains; they stay out of audit headers
_NON_RESULT_KEYS = ("out", "config", "workers")


def _is_result_key(key: str) -> bool:
    return key not in _NON_RESULT_KEYS and not key.startswith("out_")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(raw) -> list[str]:
    if isinstance(raw, list):
        return raw
    return [part.strip() for part in raw.split(",") if part.strip()]


_PARSERS = {int: int, float: float, str: str, bool: _parse_bool, list: _parse_list}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, raw = line.partition("=")
                if not sep:
                    raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
                values[key.strip()] = raw.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return values


def _resolve(args, spec: dict) -> dict:
    """Merge defaults, config file and flags for one command."""
    resolved = {key: default for key, (_, default) in spec.items()}
    if args.config:
        file_values = read_config_file(args.config)
        unknown = set(file_values) - set(spec)
        if unknown:
            raise ConfigError(
                f"{args.config}: unknown keys for '{args.command}': {sorted(unknown)}"
            )
        for key, raw in file_values.items():
            typ = spec[key][0]
            try:
                resolved[key] = _PARSERS[typ](raw)
            except ValueError as exc:
                raise ConfigError(f"{args.config}: key {key}: {exc}") from None
    for key in spec:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    return resolved


def _require(resolved: dict, *keys: str):
    missing = [k for k in keys if resolved.get(k) is None]
    if missing:
        raise ConfigError(f"missing required settings: {missing}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _audit(command: str, resolved: dict) -> dict:
    audit = {"command": command}
    for key in sorted(resolved):
        if _is_result_key(key) and resolved[key] is not None:
            audit[key] = resolved[key]
    return audit


def _audit_lines(audit: dict) -> list[str]:
    return [f"{key} = {_fmt(value)}" for key, value in audit.items()]


def audit_to_config_lines(audit: dict) -> list[str]:
    """Config-file lines that rerun the audited command.

    Only keys the audited command accepts are kept; artifact files may
    carry extra schema lines (a sample's parent_N, say) next to the
    audit proper.
    """
    spec = _COMMANDS[audit["command"]][1]
    return [
        f"{key} = {_fmt(value)}"
        for key, value in audit.items()
        if key in spec and _is_result_key(key)
    ]


def read_audit(path) -> dict:
    """Audit header of an artifact (JSON or # commented CSV)."""
    if str(path).endswith(".json"):
        with open(path) as fh:
            return json.load(fh)["audit"]
    return designs.read_header_fields(path)


def _out_path(args, name: str) -> str:
    out = args.out or "."
    return f"{out}/{name}"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _write_json(path, audit: dict, payload: dict):
    doc = {"audit": _jsonable(audit)}
    doc.update(_jsonable(payload))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_record_csv(path, audit: dict, records: list[dict]):
    with open(path, "w", newline="") as fh:
        for line in _audit_lines(audit):
            fh.write(f"# {line}\n")
        fh.write(",".join(estimators.RECORD_FIELDS) + "\n")
        for record in records:
            cells = []
            for field in estimators.RECORD_FIELDS:
                value = record.get(field)
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append(repr(float(value)))
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")


def _resolve_z(resolved, args) -> float:
    if resolved.get("z") is not None:
        return resolved["z"]
    return PAPER_Z if args.paper_mode else estimators.DEFAULT_Z


# ---------------------------------------------------------------------------
# command implementations

GENERATE_SPEC = {
    "N": (int, None),
    "positives": (int, None),
    "a1": (float, None),
    "b1": (float, None),
    "a0": (float, None),
    "b0": (float, None),
    "target_loss": (float, None),
    "target_f1": (float, None),
    "tau": (float, 0.5),
    "seed": (int, None),
    "out_frame": (str, "frame.csv"),
}


def cmd_generate(args) -> int:
    resolved = _resolve(args, GENERATE_SPEC)
    _require(resolved, "N", "positives", "seed")
    N, positives = resolved["N"], resolved["positives"]
    if not 0 <= positives <= N:
        raise ConfigError(f"positives={positives} must lie in [0, N={N}]")
    labels = np.zeros(N)
    labels[:positives] = 1.0
    base = Frame([f"u{i}" for i in range(N)], np.full(N, 0.5), labels)

    shapes = [resolved[k] for k in ("a1", "b1", "a0", "b0")]
    targets = [k for k in ("target_loss", "target_f1") if resolved[k] is not None]
    if all(v is not None for v in shapes):
        profile = classifier_sim.QualityProfile(
            shape_pos=(shapes[0], shapes[1]), shape_neg=(shapes[2], shapes[3])
        )
    elif len(targets) == 1:
        kwargs = {targets[0]: resolved[targets[0]]}
        cal = classifier_sim.calibrate_profile(
            base, tau=resolved["tau"], seed=resolved["seed"], **kwargs
        )
        profile = cal.profile
        (resolved["a1"], resolved["b1"]) = profile.shape_pos
        (resolved["a0"], resolved["b0"]) = profile.shape_neg
    else:
        raise ConfigError(
            "give all of a1,b1,a0,b0 or exactly one of target_loss/target_f1"
        )
    frame = classifier_sim.simulate_predictions(base, profile, resolved["seed"])
    audit = _audit("generate", resolved)
    write_frame(frame, _out_path(args, resolved["out_frame"]), _audit_lines(audit))
    return 0


METRICS_SPEC = {
    "frame": (str, None),
    "tau": (float, 0.5),
    "out_metrics": (str, "metrics.json"),
}


def cmd_metrics(args) -> int:
    resolved = _resolve(args, METRICS_SPEC)
    _require(resolved, "frame")
    frame = load_frame(resolved["frame"])
    if not frame.fully_labeled:
        raise ConfigError("metrics needs a fully labeled frame")
    counts = classifier_sim.confusion_counts(frame, resolved["tau"])
    loss = classifier_sim.population_loss(frame)
    payload = {
        "N": frame.N,
        "true_total": frame.true_total,
        "aux_total": frame.aux_total,
        "loss_total": loss,
        "loss_per_unit": loss / frame.N,
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
        "tn": counts.tn,
        "f1": classifier_sim.f1_from_counts(counts),
    }
    _write_json(
        _out_path(args, resolved["out_metrics"]), _audit("metrics", resolved), payload
    )
    return 0


SAMPLE_SPEC = {
    "frame": (str, None),
    "design": (str, None),
    "n": (int, None),
    "tau": (float, 0.5),
    "allocation": (str, None),
    "seed": (int, None),
    "out_sample": (str, "sample.csv"),
}


def cmd_sample(args) -> int:
    resolved = _resolve(args, SAMPLE_SPEC)
    _require(resolved, "frame", "design", "n", "seed")
    design = resolved["design"]
    if design not in montecarlo.DESIGN_CHOICES:
        raise ConfigError(
            f"unknown design {design!r}; choose from {montecarlo.DESIGN_CHOICES}"
        )
    frame = load_frame(resolved["frame"])
    audit = _audit("sample", resolved)
    lines = _audit_lines(audit)
    if design == "pps":
        sample = designs.pps_wr(frame, resolved["n"], resolved["seed"])
        designs.write_sample(sample, _out_path(args, resolved["out_sample"]), lines)
    elif design == "srs":
        sample = designs.srs_wor(frame, resolved["n"], resolved["seed"])
        designs.write_sample(sample, _out_path(args, resolved["out_sample"]), lines)
    else:
        if resolved["allocation"] is None:
            raise ConfigError("stratified sampling needs an allocation rule")
        strat = stratify_by_prediction(frame, resolved["tau"])
        plan = designs.allocate(strat, resolved["n"], resolved["allocation"])
        rng = np.random.default_rng(resolved["seed"])
        stem = resolved["out_sample"]
        stem = stem[:-4] if stem.endswith(".csv") else stem
        for name in (STRATUM_ONE, STRATUM_ZERO):
            n_h = plan.sizes[name]
            if n_h == 0:
                continue
            sample = designs.srs_wor(strat.strata[name], n_h, rng)
            designs.write_sample(sample, _out_path(args, f"{stem}_{name}.csv"), lines)
    return 0


ESTIMATE_SPEC = {
    "sample": (str, None),
    "sample_one": (str, None),
    "sample_zero": (str, None),
    "estimator": (str, None),
    "zero_estimator": (str, "srs"),
    "z": (float, None),
    "baseline_se": (float, None),
    "out_record": (str, "record.csv"),
}

_SINGLE_ESTIMATORS = {
    "hh": estimators.hh_estimate,
    "srs": estimators.srs_estimate,
    "diff": estimators.difference_estimate,
}


def cmd_estimate(args) -> int:
    resolved = _resolve(args, ESTIMATE_SPEC)
    stratified = resolved["sample_one"] is not None or resolved["sample_zero"] is not None
    if stratified and resolved["sample"] is not None:
        raise ConfigError("give either sample or sample_one/sample_zero, not both")
    z = _resolve_z(resolved, args)
    if stratified:
        _require(resolved, "sample_one", "sample_zero")
        if resolved["zero_estimator"] not in ("srs", "diff"):
            raise ConfigError("zero_estimator must be 'srs' or 'diff'")
        one = designs.load_sample(resolved["sample_one"])
        zero = designs.load_sample(resolved["sample_zero"])
        zero_fn = (
            estimators.srs_estimate
            if resolved["zero_estimator"] == "srs"
            else estimators.difference_estimate
        )
        estimate = estimators.stratified_estimate(
            [
                (STRATUM_ONE, estimators.srs_estimate(one)),
                (STRATUM_ZERO, zero_fn(zero)),
            ]
        )
    else:
        _require(resolved, "sample", "estimator")
        if resolved["estimator"] not in _SINGLE_ESTIMATORS:
            raise ConfigError("estimator must be one of 'hh', 'srs', 'diff'")
        sample = designs.load_sample(resolved["sample"])
        estimate = _SINGLE_ESTIMATORS[resolved["estimator"]](sample)
    record = estimators.estimate_record(estimate, z=z, baseline_se=resolved["baseline_se"])
    resolved["z"] = z
    _write_record_csv(
        _out_path(args, resolved["out_record"]), _audit("estimate", resolved), [record]
    )
    return 0


SIMULATE_SPEC = {
    "frame": (str, None),
    "design": (str, None),
    "estimator": (str, None),
    "n": (int, None),
    "R": (int, None),
    "tau": (float, 0.5),
    "allocation": (str, None),
    "seed": (int, None),
    "workers": (int, 1),
    "baseline_se": (float, None),
    "out_report": (str, "report.json"),
    "out_replicates": (str, "replicates.csv"),
    "out_histogram": (str, "histogram.csv"),
}


def cmd_simulate(args) -> int:
    resolved = _resolve(args, SIMULATE_SPEC)
    _require(resolved, "frame", "design", "estimator", "n", "R", "seed")
    frame = load_frame(resolved["frame"])
    report = montecarlo.run_replications(
        frame,
        design=resolved["design"],
        estimator=resolved["estimator"],
        n=resolved["n"],
        R=resolved["R"],
        seed=resolved["seed"],
        tau=resolved["tau"],
        allocation=resolved["allocation"],
        srs_baseline_se=resolved["baseline_se"],
        workers=resolved["workers"],
    )
    audit = _audit("simulate", resolved)
    _write_json(_out_path(args, resolved["out_report"]), audit, report.summary_dict())

    lines = _audit_lines(audit)
    with open(_out_path(args, resolved["out_replicates"]), "w", newline="") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        zero = report.zero_stratum_estimates
        if zero is None:
            fh.write("replicate,estimate,estimated_variance\n")
            for r in range(report.R):
                fh.write(
                    f"{r},{float(report.estimates[r])!r},"
                    f"{float(report.estimated_variances[r])!r}\n"
                )
        else:
            fh.write("replicate,estimate,estimated_variance,zero_stratum_estimate\n")
            for r in range(report.R):
                fh.write(
                    f"{r},{float(report.estimates[r])!r},"
                    f"{float(report.estimated_variances[r])!r},{float(zero[r])!r}\n"
                )
    with open(_out_path(args, resolved["out_histogram"]), "w", newline="") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        fh.write("bin_lo,bin_hi,count\n")
        for b in report.bins:
            fh.write(f"{float(b.lo)!r},{float(b.hi)!r},{int(b.count)}\n")
    return 0


F1_SPEC = {
    "sample_one": (str, None),
    "sample_zero": (str, None),
    "flagged_tp": (int, None),
    "flagged_fn": (int, None),
    "c": (int, None),
    "out_f1": (str, "f1.json"),
}


def cmd_f1(args) -> int:
    resolved = _resolve(args, F1_SPEC)
    _require(resolved, "sample_one", "sample_zero", "flagged_tp", "flagged_fn", "c")
    one = estimators.srs_estimate(designs.load_sample(resolved["sample_one"]))
    zero = estimators.hh_estimate(designs.load_sample(resolved["sample_zero"]))
    flagged = classifier_sim.ConfusionCounts(
        tp=resolved["flagged_tp"], fp=0, fn=resolved["flagged_fn"], tn=0
    )
    f1, se = f1_estimation.estimate_f1_two_stratum(one, zero, flagged, resolved["c"])
    payload = {
        "f1": f1,
        "se": se,
        "tp_hat": flagged.tp + one.total,
        "fn_hat": flagged.fn + zero.total,
        "var_tp": one.variance,
        "var_fn": zero.variance,
        "c": resolved["c"],
    }
    _write_json(_out_path(args, resolved["out_f1"]), _audit("f1", resolved), payload)
    return 0


REPORT_SPEC = {
    "inputs": (list, None),
    "out_table": (str, "table.txt"),
}


def _format_table(rows: list[dict], paper_mode: bool) -> str:
    header = ["estimator", "total", "se", "ci_lo", "ci_hi", "deff"]

    def show(field, value):
        if value in (None, ""):
            return ""
        if field == "estimator":
            return str(value)
        value = float(value)
        if field == "deff":
            return f"{value:.4f}"
        if paper_mode:
            return str(round(value))
        return f"{value:.6g}"

    table = [header] + [[show(f, row.get(f)) for f in header] for row in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    out = []
    for line in table:
        cells = [line[0].ljust(widths[0])] + [
            line[i].rjust(widths[i]) for i in range(1, len(header))
        ]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    resolved = _resolve(args, REPORT_SPEC)
    _require(resolved, "inputs")
    rows = []
    for path in resolved["inputs"]:
        rows.extend(_read_record_rows(path))
    if not rows:
        raise ConfigError("no estimate records found in the inputs")
    text = _format_table(rows, bool(args.paper_mode))
    with open(_out_path(args, resolved["out_table"]), "w") as fh:
        for line in _audit_lines(_audit("report", resolved)):
            fh.write(f"# {line}\n")
        fh.write(text)
    sys.stdout.write(text)
    return 0


def _read_record_rows(path) -> list[dict]:
    import csv as _csv

    try:
        with open(path, newline="") as fh:
            reader = _csv.DictReader(line for line in fh if not line.startswith("#"))
            if reader.fieldnames is None or "total" not in reader.fieldnames:
                raise ConfigError(f"{path}: not an estimate record file")
            return list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


# ---------------------------------------------------------------------------

_COMMANDS = {
    "generate": (cmd_generate, GENERATE_SPEC),
    "metrics": (cmd_metrics, METRICS_SPEC),
    "sample": (cmd_sample, SAMPLE_SPEC),
    "estimate": (cmd_estimate, ESTIMATE_SPEC),
    "simulate": (cmd_simulate, SIMULATE_SPEC),
    "f1": (cmd_f1, F1_SPEC),
    "report": (cmd_report, REPORT_SPEC),
}

_HELP = {
    "generate": "write a synthetic labeled frame with simulated scores",
    "metrics": "population loss, confusion counts and F1 of a labeled frame",
    "sample": "draw a sample (pps, srs, or stratified) from a frame",
    "estimate": "turn an annotated sample into an estimate record",
    "simulate": "replicated sampling experiment on a labeled frame",
    "f1": "delta-method F1 from two stratum samples plus audited counts",
    "report": "merge estimate records into an aligned table",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auxcount",
        description="Design-based estimation of rare totals with classifier scores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, spec) in _COMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--seed", type=int, help="RNG seed (required when stochastic)")
        p.add_argument(
            "--paper-mode",
            action="store_true",
            default=None,
            dest="paper_mode",
            help="z = 2.0 and integer-rounded tables",
        )
        for key, (typ, _) in spec.items():
            if key == "seed":
                continue
            flag = "--" + key.replace("_", "-")
            if typ is list:
                p.add_argument(flag, dest=key, nargs="+")
            else:
                p.add_argument(flag, dest=key, type=typ)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command, _ = _COMMANDS[args.command]
    try:
        return command(args)
    except (VarianceUndefinedError, UndefinedMetricError, CalibrationError, SweepError) as exc:
        print(f"auxcount: error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, IngestionError, AllocationError, ValueError, OSError) as exc:
        print(f"auxcount: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
