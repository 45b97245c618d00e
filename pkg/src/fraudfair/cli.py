"""Command-line entry point: ``fraudfair <command> [options]``.

Commands mirror the experiment stages (generate, featurize, downsample,
train, score, audit, summarize) plus ``pipeline``, which runs them all for
several seeds and aggregates the audits. Every command that writes a file
also writes ``<output>.manifest.json`` with its configuration, seeds and the
SHA-256 of each input and output.

Exit codes: 0 success, 1 other failure, 2 invalid configuration or input
schema, 3 I/O failure, 4 audit found bias (a significant normalised parity).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import GLOBAL, GROUPWISE, AuditConfig, AuditReport, run_audit
from .exceptions import (
    ArityMismatchError,
    FraudFairError,
    InvalidConfigError,
    RecordError,
    TargetUnreachableError,
    ValidationError,
)
from .features import FeatureConfig, FeatureMatrix, TransactionFeaturizer
from .pipeline import VARIANTS, ExperimentConfig, aggregate_experiments, run_experiment
from .records import ScoredBatch, read_scored_csv, read_transactions_csv, write_scored_csv, write_transactions_csv
from .scorer import LogisticScorer, downsample_negatives
from .serialize import dump, dumps, file_sha256
from .synthgen import GeneratorConfig, generate, summarize

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_BIAS = 4

_INVALID = (InvalidConfigError, ValidationError, TargetUnreachableError, ArityMismatchError, ValueError)


class _Log:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, message: str):
        if not self.quiet:
            print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# helpers


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidConfigError(f"config file {path} must hold a JSON object")
    return data


def _overrides(args, mapping: dict) -> dict:
    """Flag values that were given explicitly, keyed by config field."""
    return {field: getattr(args, dest) for dest, field in mapping.items() if getattr(args, dest, None) is not None}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _hashes(paths) -> dict:
    return {str(p): file_sha256(p) for p in paths}


def write_manifest(path, command: str, config: dict, seeds, inputs=(), outputs=()) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seeds": list(seeds),
        "inputs": _hashes(inputs),
        "outputs": _hashes(outputs),
    }
    dump(manifest, path)
    return manifest


def _manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def _check_parent(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory {parent} does not exist")


# ---------------------------------------------------------------------------
# commands

_GENERATOR_FLAGS = {
    "cards": "n_cards", "days": "duration_days", "txn_rate": "txn_rate", "merchants": "n_merchants",
    "merchant_codes": "n_merchant_codes", "fraud_rate": "base_fraud_rate", "gender_split": "gender_split",
    "gap": "fraud_rate_gender_gap", "gap_gender": "gap_gender", "proxy_strength": "proxy_strength",
}


def _generator_config(args, base: dict) -> GeneratorConfig:
    data = {**base, **_overrides(args, _GENERATOR_FLAGS)}
    if args.seed is not None:
        data["seed"] = args.seed
    return GeneratorConfig.from_dict(data)


def cmd_generate(args, log) -> int:
    config = _generator_config(args, _load_config(args.config))
    _check_parent(args.out)
    table = generate(config)
    write_transactions_csv(table, args.out)
    write_manifest(_manifest_path(args.out), "generate", config.to_dict(), [config.seed], outputs=[args.out])
    log(f"wrote {len(table)} transactions to {args.out}")
    return EXIT_OK


def cmd_summarize(args, log) -> int:
    table = read_transactions_csv(args.transactions)
    text = dumps(summarize(table))
    if args.out:
        _check_parent(args.out)
        Path(args.out).write_text(text, encoding="utf-8")
        write_manifest(_manifest_path(args.out), "summarize", {}, [], inputs=[args.transactions], outputs=[args.out])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_featurize(args, log) -> int:
    data = _load_config(args.config)
    if args.windows is not None:
        data["windows"] = [w.strip() for w in args.windows.split(",") if w.strip()]
    if args.no_gender:
        data["include_gender"] = False
    if args.interaction_keys is not None:
        data["interaction_keys"] = [k.strip() for k in args.interaction_keys.split(",") if k.strip()]
    if args.smoothing is not None:
        data["smoothing"] = args.smoothing
    config = FeatureConfig.from_dict(data)
    _check_parent(args.out)
    table = read_transactions_csv(args.transactions)
    fit_path = args.fit_on or args.transactions
    fit_table = table if args.fit_on is None else read_transactions_csv(args.fit_on)
    featurizer = TransactionFeaturizer(config.windows, config.include_gender, config.interaction_keys,
                                       config.smoothing).fit(fit_table)
    featurizer.featurize(table).to_csv(args.out)
    inputs = [args.transactions] if fit_path == args.transactions else [args.transactions, fit_path]
    write_manifest(_manifest_path(args.out), "featurize", config.to_dict(), [], inputs=inputs, outputs=[args.out])
    log(f"wrote {len(table)} feature rows to {args.out}")
    return EXIT_OK


def cmd_downsample(args, log) -> int:
    _check_parent(args.out)
    with open(args.input, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or "label" not in rows[0]:
        raise ValidationError([_schema_error("input needs a header with a 'label' column")])
    header, body = rows[0], rows[1:]
    col = header.index("label")
    try:
        labels = np.array([int(float(r[col])) for r in body], dtype=np.int8)
    except (ValueError, IndexError) as exc:
        raise ValidationError([_schema_error(f"unreadable label: {exc}")]) from exc
    keep = downsample_negatives(labels, args.target_rate, args.seed or 0)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body[i] for i in keep)
    config = {"target_fraud_rate": args.target_rate}
    write_manifest(_manifest_path(args.out), "downsample", config, [args.seed or 0],
                   inputs=[args.input], outputs=[args.out])
    log(f"kept {len(keep)} of {len(body)} rows (fraud rate {labels[keep].mean():.4f})")
    return EXIT_OK


def _schema_error(message):
    return RecordError(-1, "MalformedRow", message)


_SCORER_FLAGS = {"learning_rate": "learning_rate", "epochs": "epochs", "l2": "l2", "class_weight": "class_weight"}


def cmd_train(args, log) -> int:
    params = {**_load_config(args.config), **_overrides(args, _SCORER_FLAGS)}
    unknown = set(params) - set(_SCORER_FLAGS.values())
    if unknown:
        raise InvalidConfigError(f"unknown scorer settings {sorted(unknown)}")
    _check_parent(args.out)
    fm = FeatureMatrix.from_csv(args.features)
    seed = args.seed or 0
    model = LogisticScorer(seed=seed, **params).fit(fm.X, fm.y, feature_names=fm.feature_names)
    dump(model.to_dict(), args.out)
    write_manifest(_manifest_path(args.out), "train", model.get_params(), [seed],
                   inputs=[args.features], outputs=[args.out])
    log(f"trained on {len(fm)} rows; final loss {model.loss_curve_[-1]:.6f}")
    return EXIT_OK


def cmd_score(args, log) -> int:
    _check_parent(args.out)
    with open(args.model, encoding="utf-8") as fh:
        model = LogisticScorer.from_dict(json.load(fh))
    fm = FeatureMatrix.from_csv(args.features)
    names = model.feature_names_ or fm.feature_names
    missing = [n for n in names if n not in fm.feature_names]
    if missing or len(names) != len(model.coef_):
        raise ArityMismatchError(f"feature file lacks model features {missing}")
    X = fm.X[:, [fm.feature_names.index(n) for n in names]]
    scores = model.predict_proba(X)[:, 1]
    batch = ScoredBatch.from_arrays(scores, fm.y, fm.group, fm.value, fm.card_id)
    write_scored_csv(batch, args.out)
    write_manifest(_manifest_path(args.out), "score", {}, [], inputs=[args.model, args.features], outputs=[args.out])
    log(f"scored {len(batch)} rows")
    return EXIT_OK


def _audit_config(args) -> AuditConfig:
    data = _load_config(args.config)
    if args.mode is not None:
        data["mode"] = args.mode
    if args.fp_ratio is not None:
        data["global_fp_ratio"] = args.fp_ratio
    if args.fp_ratio_grid is not None:
        data["fp_ratio_grid"] = list(args.fp_ratio_grid)
    if args.bias_threshold is not None:
        data["bias_threshold"] = args.bias_threshold
    if args.metrics is not None:
        data["enabled_metrics"] = [m.strip() for m in args.metrics.split(",") if m.strip()]
    return AuditConfig.from_dict(data)


def cmd_audit(args, log) -> int:
    config = _audit_config(args)
    for path in (args.out, args.csv):
        if path:
            _check_parent(path)
    batch = read_scored_csv(args.scored)
    report = run_audit(batch, config)
    text = report.to_json()
    outputs = []
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        outputs.append(args.out)
    else:
        sys.stdout.write(text)
    if args.csv:
        rows = report.flat_rows()
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["metric"], lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        outputs.append(args.csv)
    if outputs:
        write_manifest(_manifest_path(outputs[0]), "audit", config.to_dict(), [], inputs=[args.scored], outputs=outputs)
    flagged = [p.metric_name if p.fp_ratio is None else f"{p.metric_name}@{p.fp_ratio:g}"
               for p in report.parities if p.significant_normalized]
    if flagged:
        log(f"bias found in {len(flagged)} parities: " + ", ".join(flagged))
        return EXIT_BIAS
    log("no significant normalised parity")
    return EXIT_OK


# -- pipeline ---------------------------------------------------------------


def _experiment_config(args) -> ExperimentConfig:
    data = _load_config(args.config)
    generator = {**data.get("generator", {}), **_overrides(args, _GENERATOR_FLAGS)}
    if args.seed is not None:
        generator["seed"] = args.seed
    data["generator"] = generator
    if args.seeds is not None:
        if args.seeds < 1:
            raise InvalidConfigError("--seeds must be at least 1")
        data["seeds"] = list(range(args.seeds))
    return ExperimentConfig.from_dict(data)


class _Stages:
    """Manifest-backed record of finished stages, for resuming interrupted runs."""

    def __init__(self, out: Path, config: ExperimentConfig, log):
        self.out = out
        self.log = log
        self.path = out / "manifest.json"
        self.config = config.to_dict()
        self.manifest = {
            "command": "pipeline",
            "version": __version__,
            "config": self.config,
            "seeds": list(config.seeds),
            "stages": {},
        }
        if self.path.exists():
            try:
                previous = json.loads(self.path.read_text(encoding="utf-8"))
            except ValueError:
                previous = None
            if previous and previous.get("config") == json.loads(dumps(self.config)) \
                    and previous.get("version") == __version__:
                self.manifest["stages"] = previous.get("stages", {})

    def done(self, name: str, inputs=()) -> bool:
        """True when the stage ran with the same inputs and its outputs are intact."""
        stage = self.manifest["stages"].get(name)
        if not stage or stage.get("inputs", {}) != self._hash(inputs):
            return False
        for rel, digest in stage["outputs"].items():
            path = self.out / rel
            if not path.exists() or file_sha256(path) != digest:
                return False
        self.log(f"[{name}] up to date, skipping")
        return True

    def finish(self, name: str, outputs, inputs=()):
        self.manifest["stages"][name] = {"inputs": self._hash(inputs), "outputs": self._hash(outputs)}
        dump(self.manifest, self.path)

    def _hash(self, rels):
        return {rel: file_sha256(self.out / rel) for rel in rels}


def cmd_pipeline(args, log) -> int:
    config = _experiment_config(args)
    out = Path(args.out)
    if not out.parent.resolve().is_dir():
        raise FileNotFoundError(f"output directory {out.parent} does not exist")
    (out / "runs").mkdir(parents=True, exist_ok=True)
    stages = _Stages(out, config, log)

    if not stages.done("generate"):
        log("[generate] building synthetic world")
        write_transactions_csv(generate(config.generator), out / "world.csv")
        stages.finish("generate", ["world.csv"])
    world = read_transactions_csv(out / "world.csv")

    runs, run_files = [], []
    for seed in config.seeds:
        name, rel = f"run-{seed}", f"runs/seed_{seed}.json"
        if not stages.done(name, ["world.csv"]):
            log(f"[{name}] featurize, downsample, train, score, audit")
            try:
                result = run_experiment(config, seed, table=world)
            except FraudFairError as exc:
                exc.args = (f"stage {name}: {exc}",) + exc.args[1:]
                raise
            dump({v: {m: r.to_dict() for m, r in modes.items()} for v, modes in result.items()}, out / rel)
            stages.finish(name, [rel], ["world.csv"])
        run_files.append(rel)
        with open(out / rel, encoding="utf-8") as fh:
            data = json.load(fh)
        runs.append({v: {m: AuditReport.from_dict(d) for m, d in modes.items()} for v, modes in data.items()})

    if not stages.done("aggregate", run_files):
        log("[aggregate] combining runs")
        aggregated = aggregate_experiments(runs)
        for variant in VARIANTS:
            dump({m: r.to_dict() for m, r in aggregated[variant].items()}, out / f"{variant}.json")
        stages.finish("aggregate", [f"{v}.json" for v in VARIANTS], run_files)
    log(f"report bundle in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--config", default=None, help="JSON config file; explicit flags override it")
    common.add_argument("--out", "-o", default=None, help="output path")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return common


def _generator_flags(p):
    g = p.add_argument_group("synthetic world")
    g.add_argument("--cards", type=int, dest="cards")
    g.add_argument("--days", type=int, dest="days")
    g.add_argument("--txn-rate", type=float, dest="txn_rate", help="mean transactions per card per day")
    g.add_argument("--merchants", type=int)
    g.add_argument("--merchant-codes", type=int, dest="merchant_codes")
    g.add_argument("--fraud-rate", type=float, dest="fraud_rate", help="overall fraud rate as a fraction")
    g.add_argument("--gender-split", type=float, dest="gender_split", help="fraction of male cards")
    g.add_argument("--gap", type=float, help="fraud-rate multiplier for --gap-gender")
    g.add_argument("--gap-gender", choices=["M", "F"], dest="gap_gender")
    g.add_argument("--proxy-strength", type=float, dest="proxy_strength", help="0 (none) to 1 (full)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraudfair", description="Group-fairness audits for fraud classifiers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("generate", parents=[common], help="generate a synthetic transactions CSV")
    _generator_flags(p)
    p.set_defaults(func=cmd_generate, needs_out=True)

    p = sub.add_parser("summarize", parents=[common], help="dataset statistics per gender as JSON")
    p.add_argument("transactions")
    p.set_defaults(func=cmd_summarize, needs_out=False)

    p = sub.add_parser("featurize", parents=[common], help="transactions CSV to feature matrix CSV")
    p.add_argument("transactions")
    p.add_argument("--fit-on", dest="fit_on", help="fit encoders and scaler on this transactions CSV instead")
    p.add_argument("--windows", help="comma-separated windows, e.g. 1d,7d,30d")
    p.add_argument("--no-gender", action="store_true", dest="no_gender", help="drop the gender feature")
    p.add_argument("--interaction-keys", dest="interaction_keys")
    p.add_argument("--smoothing", type=float)
    p.set_defaults(func=cmd_featurize, needs_out=True)

    p = sub.add_parser("downsample", parents=[common], help="keep all frauds and a seeded subset of genuine rows")
    p.add_argument("input", help="any CSV with a label column")
    p.add_argument("--target-rate", type=float, default=0.0478, dest="target_rate")
    p.set_defaults(func=cmd_downsample, needs_out=True)

    p = sub.add_parser("train", parents=[common], help="fit the logistic scorer on a feature CSV")
    p.add_argument("features")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--class-weight", choices=["balanced", "none"], dest="class_weight")
    p.set_defaults(func=cmd_train, needs_out=True)

    p = sub.add_parser("score", parents=[common], help="score a feature CSV into the audit schema")
    p.add_argument("model")
    p.add_argument("features")
    p.set_defaults(func=cmd_score, needs_out=True)

    p = sub.add_parser("audit", parents=[common], help="bias audit of a scored CSV")
    p.add_argument("scored")
    p.add_argument("--mode", choices=[GLOBAL, GROUPWISE])
    p.add_argument("--fp-ratio", type=float, dest="fp_ratio", help="global-threshold FP ratio (default 5.0)")
    p.add_argument("--fp-ratio-grid", type=_floats, dest="fp_ratio_grid", help="group-wise ratios, e.g. 5,2,1,0.5")
    p.add_argument("--bias-threshold", type=float, dest="bias_threshold", help="significance cutoff (default 0.05)")
    p.add_argument("--metrics", help="comma-separated parity metrics to enable")
    p.add_argument("--csv", help="also write a flat per-parity CSV")
    p.set_defaults(func=cmd_audit, needs_out=False)

    p = sub.add_parser("pipeline", parents=[common], help="end-to-end standard vs unaware experiment")
    _generator_flags(p)
    p.add_argument("--seeds", type=int, help="number of training seeds (0..N-1)")
    p.set_defaults(func=cmd_pipeline, needs_out=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = _Log(args.quiet)
    if args.needs_out and not args.out:
        parser.error(f"{args.command} needs --out")
    try:
        return args.func(args, log)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for err in exc.errors[:50]:
            print(f"  {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FraudFairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
