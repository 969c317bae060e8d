"""Command-line entry point.

Option precedence: command-line flags override values from ``--config``,
which override built-in defaults.  The config file is flat ``key = value``
text; keys are the long option names with dashes or underscores.

Exit codes: 0 success, 2 invalid configuration, 3 data validation failure,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import CheckpointError, ConfigError, NumericError, ValidationError

log = logging.getLogger("botamp")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _models(text) -> tuple[str, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(text)
    return tuple(m.strip() for m in str(text).split(",") if m.strip())


# name -> (type, default, help); shared by flags and config keys
OPTIONS: dict[str, tuple] = {
    "in": (str, None, "input directory holding articles.jsonl|csv and scores.csv"),
    "articles": (str, None, "articles file (JSONL or CSV)"),
    "scores": (str, None, "per-user metrics file (CSV or JSONL)"),
    "labeled": (str, None, "labeled articles CSV"),
    "out": (str, "out", "output directory"),
    "threshold": (float, 20.0, "spam label threshold on the article median score"),
    "train_fraction": (float, 0.7, "share of each class used for training"),
    "stratified": (_bool, True, "stratify the split by label"),
    "models": (_models, ("lr", "knn", "svm"), "comma-separated subset of lr,knn,svm"),
    "k": (int, 34, "neighbours for KNN"),
    "lr_rate": (float, 0.5, "logistic regression initial step"),
    "lr_epochs": (int, 500, "logistic regression epochs"),
    "lr_tol": (float, 1e-8, "logistic regression loss-change tolerance"),
    "lr_l2": (float, 0.0, "logistic regression L2 penalty"),
    "svm_step": (float, 0.5, "SVM base step"),
    "svm_epochs": (int, 500, "SVM epochs"),
    "svm_l2": (float, 1e-4, "SVM L2 penalty"),
    "resample_before_split": (_bool, False, "upsample before splitting (duplicates reach the test set)"),
    "bootstrap_rounds": (int, 11, "bootstrap refits for feature importance"),
    "seed": (int, 42, "top-level random seed"),
    # synth
    "n": (int, 10_000, "number of synthetic articles"),
    "signal": (float, 0.0, "planted signal strength (0 = none)"),
    "prevalence": (float, 0.1443, "target spammed share"),
    "health_share": (float, 1_178_085 / 1_398_007, "share of health-discipline articles"),
    "health_shift": (float, 0.0, "extra log-odds of amplification for health disciplines"),
    # ztest
    "counts": (str, None, "x1,n1,x2,n2 instead of a labeled file"),
    # harvest
    "users": (str, None, "user ID list (one per line) or an articles file"),
    "source": (str, None, "metrics file served as the score provider"),
    "checkpoint": (str, None, "append-only checkpoint file"),
    "limit": (float, 10.0, "request rate limit per second"),
    "max_attempts": (int, 5, "attempts per user before giving up"),
    "simulated_clock": (_bool, False, "advance a simulated clock instead of sleeping"),
}

PIPELINE_KEYS = ("threshold", "train_fraction", "stratified", "models", "k", "lr_rate", "lr_epochs",
                 "lr_tol", "lr_l2", "svm_step", "svm_epochs", "svm_l2", "resample_before_split",
                 "bootstrap_rounds", "seed")
INPUT_KEYS = ("in", "articles", "scores", "labeled", "out")

COMMANDS: dict[str, tuple[str, tuple[str, ...]]] = {
    "score": ("per-user bot scores and their summary", ("in", "scores", "out")),
    "label": ("label articles by their median tweeter score", ("in", "articles", "scores", "threshold", "out")),
    "train": ("train classifiers and save model files", INPUT_KEYS + PIPELINE_KEYS),
    "eval": ("evaluate saved models on the held-out split", INPUT_KEYS + PIPELINE_KEYS),
    "ztest": ("health versus other two-proportion z-test", ("in", "articles", "scores", "labeled", "threshold",
                                                             "counts", "out")),
    "summarize": ("group ratios, medians and feature correlation", ("in", "articles", "scores", "labeled",
                                                                  "threshold", "out")),
    "synth": ("write a synthetic dataset", ("n", "seed", "signal", "prevalence", "health_share",
                                            "health_shift", "out")),
    "harvest": ("collect per-user metrics under a rate limit", ("users", "source", "checkpoint", "limit",
                                                               "max_attempts", "simulated_clock", "out")),
    "report": ("run the whole pipeline and write report.json", INPUT_KEYS + PIPELINE_KEYS),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="botamp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"botamp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for cmd, (help_text, keys) in COMMANDS.items():
        p = sub.add_parser(cmd, help=help_text, description=help_text + ". Flags override --config values, "
                           "which override defaults.")
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for key in keys:
            typ, default, h = OPTIONS[key]
            shown = ",".join(default) if isinstance(default, tuple) else default
            if typ is _bool:
                p.add_argument(_flag(key), dest=key, action=argparse.BooleanOptionalAction,
                               default=None, help=f"{h} (default {shown})")
            else:
                p.add_argument(_flag(key), dest=key, type=typ, default=None,
                               help=f"{h} (default {shown})")
    return parser


def read_config(path: str, allowed: tuple[str, ...]) -> dict:
    """Parse a flat key = value file into typed values for ``allowed`` keys."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string("[config]\n" + p.read_text(encoding="utf-8"), source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from None
    out = {}
    for raw_key, raw_value in cp["config"].items():
        key = raw_key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"{p}: unknown key {raw_key!r} for this command")
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(raw_value)
        except ValueError as exc:
            raise ConfigError(f"{p}: key {raw_key!r}: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    keys = COMMANDS[args.command][1]
    values = {k: OPTIONS[k][1] for k in keys}
    explicit = set()
    if args.config:
        from_file = read_config(args.config, keys)
        values.update(from_file)
        explicit.update(from_file)
    for k in keys:
        v = getattr(args, k)
        if v is not None:
            values[k] = v
            explicit.add(k)
    values["explicit"] = frozenset(explicit)
    return values


def pipeline_config(values: dict):
    from .pipeline import PipelineConfig
    kw = {k: values[k] for k in PIPELINE_KEYS if k in values}
    cfg = PipelineConfig(
        input_dir=values.get("in"), articles=values.get("articles"), scores=values.get("scores"),
        labeled=values.get("labeled"), out=values.get("out") or "out", **kw)
    return cfg.validate()


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# -- subcommands -------------------------------------------------------------


def cmd_synth(v: dict) -> None:
    from .synth import SynthConfig, generate_dataset, write_dataset
    try:
        cfg = SynthConfig(n_articles=v["n"], seed=v["seed"], signal=v["signal"], spam_prevalence=v["prevalence"],
                          health_share=v["health_share"], health_shift=v["health_shift"])
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    ds = generate_dataset(cfg)
    write_dataset(ds, v["out"], cfg)
    _emit(ds.stats)


def cmd_score(v: dict) -> None:
    from .ingest import parse_scores
    from .pipeline import write_json
    from .scoring import score_summary, user_bot_score
    path = v.get("scores")
    if path is None and v.get("in"):
        path = str(Path(v["in"]) / "scores.csv")
    if path is None or not Path(path).exists():
        raise ConfigError(f"scores file not found: {path}")
    store = parse_scores(path)
    if not store:
        raise ValidationError(f"{path}: no valid score rows")
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    scores = []
    with open(out / "user_scores.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user_id,bot_score\n")
        for uid in sorted(store):
            s = user_bot_score(store[uid])
            scores.append(s)
            fh.write(f"{uid},{s!r}\n")
    summary = {"users": len(store), "rows_rejected": len(store.rejects), "duplicates": store.duplicates,
               "summary": score_summary(scores).to_json()}
    write_json(summary, out / "score_summary.json")
    _emit(summary)


def _labeled_articles(v: dict):
    from .pipeline import PipelineConfig, load_labeled
    cfg = PipelineConfig(input_dir=v.get("in"), articles=v.get("articles"), scores=v.get("scores"),
                         labeled=v.get("labeled"), threshold=v.get("threshold", 20.0))
    cfg.validate()
    data = load_labeled(cfg)
    if v.get("labeled") and not (v.get("in") or v.get("articles")) and "threshold" in v["explicit"]:
        from .scoring import relabel
        return relabel(data.articles, cfg.threshold), data
    return data.articles, data


def cmd_label(v: dict) -> None:
    from .pipeline import write_json
    from .scoring import write_labeled
    arts, data = _labeled_articles(v)
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_labeled(arts, out / "labeled.csv")
    summary = {"articles": len(arts), "spammed": sum(a.is_spammed for a in arts),
               "threshold": v["threshold"], **data.counts}
    write_json(summary, out / "label_summary.json")
    _emit(summary)


def _parse_counts(text: str) -> tuple[int, int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        parts = ()
    if len(parts) != 4:
        raise ConfigError(f"counts: expected four integers x1,n1,x2,n2, got {text!r}")
    return parts


def cmd_ztest(v: dict) -> None:
    from .pipeline import write_json
    from .stats import LabeledTable, health_ztest, two_proportion_ztest
    if v.get("counts"):
        res = two_proportion_ztest(*_parse_counts(v["counts"]))
    elif v.get("labeled") and not (v.get("in") or v.get("articles")):
        if not Path(v["labeled"]).exists():
            raise ConfigError(f"input file not found: {v['labeled']}")
        table = LabeledTable.from_csv(v["labeled"])
        if "threshold" in v["explicit"]:
            table = dataclasses.replace(table, is_spammed=table.overall_score > v["threshold"])
        res = health_ztest(table)
    else:
        arts, _ = _labeled_articles(v)
        res = health_ztest(LabeledTable.from_articles(arts))
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(res.to_json(), out / "ztest.json")
    _emit(res.to_json())


def cmd_summarize(v: dict) -> None:
    from .features import assemble_features, feature_correlation
    from .pipeline import group_rows, write_correlation_csv, write_json
    from .scoring import score_summary
    from .stats import LabeledTable, group_median_score, write_groups_csv
    arts, _ = _labeled_articles(v)
    table = LabeledTable.from_articles(arts)
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_groups_csv(group_rows(table), out / "groups.csv")
    write_correlation_csv(feature_correlation(assemble_features(arts)), out / "correlation.csv")
    summary = {
        "overall_score_summary": score_summary([a.overall_score for a in arts]).to_json(),
        "median_score_by_group": {key: {s.key: s.median_overall_score for s in group_median_score(table, key)}
                                  for key in ("discipline", "author_location")},
    }
    write_json(summary, out / "summary.json")
    _emit({"articles": len(arts), "files": ["groups.csv", "correlation.csv", "summary.json"]})


def cmd_train(v: dict) -> None:
    from .features import write_vocabularies
    from .learn import save_model
    from .pipeline import load_labeled, model_extra, prepare_data, train_model
    cfg = pipeline_config(v)
    prep = prepare_data(load_labeled(cfg).articles, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_vocabularies(prep.train.vocabs, out / "vocab.json")
    written = []
    for kind in cfg.models:
        model = train_model(kind, prep.train, cfg)
        save_model(out / f"model_{kind}.json", model, seed=cfg.seed, vocabs=prep.train.vocabs,
                   fit=prep.train.fit, extra=model_extra(cfg, prep))
        written.append(f"model_{kind}.json")
    _emit({"train_rows": len(prep.train), "models": written})


def cmd_eval(v: dict) -> None:
    from .evaluation import write_roc_csv
    from .learn import load_model
    from .pipeline import evaluate_model, load_labeled, prepare_data, vocab_fingerprints, write_json
    cfg = pipeline_config(v)
    out = Path(cfg.out)
    prep = prepare_data(load_labeled(cfg).articles, cfg)
    expected = vocab_fingerprints(prep.train.vocabs)
    results = {}
    for kind in cfg.models:
        path = out / f"model_{kind}.json"
        if not path.exists():
            raise ConfigError(f"model file not found: {path} (run train first)")
        model, meta = load_model(path)
        if meta.get("vocab_fingerprints") != expected:
            raise ValidationError(f"{path}: category encodings differ from this data and config")
        result, curve = evaluate_model(model, prep.test)
        if curve is not None:
            write_roc_csv(curve, out / f"roc_{kind}.csv")
        results[kind] = result
    write_json(results, out / "eval.json")
    _emit(results)


def _user_list(path: str) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"users file not found: {p}")
    if p.suffix.lower() in (".jsonl", ".csv") and p.name.startswith("articles"):
        from .ingest import parse_articles
        return [u for rec in parse_articles(p).records for u in rec.tweeter_user_ids]
    return [line.strip() for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def cmd_harvest(v: dict) -> None:
    from .harvest import HarvestCheckpoint, MappingProvider, MockClock, SystemClock, harvest_scores
    from .ingest import parse_scores, write_scores
    for key in ("users", "source"):
        if not v.get(key):
            raise ConfigError(f"{key}: required for harvest")
    if not Path(v["source"]).exists():
        raise ConfigError(f"source file not found: {v['source']}")
    if v["limit"] <= 0:
        raise ConfigError("limit: must be > 0")
    users = _user_list(v["users"])
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    provider = MappingProvider(parse_scores(v["source"]))
    clock = MockClock() if v["simulated_clock"] else SystemClock()
    ckpt_path = v.get("checkpoint") or str(out / "harvest.ckpt.jsonl")
    with HarvestCheckpoint(ckpt_path) as ckpt:
        res = harvest_scores(users, provider, v["limit"], ckpt, clock=clock, max_attempts=v["max_attempts"])
    write_scores(res.store, out / "scores.csv")
    _emit({"users": len(res.store), "failures": [f.__dict__ for f in res.failures],
           "requests": res.requests})


def cmd_report(v: dict) -> None:
    from .pipeline import run_report
    rep = run_report(pipeline_config(v))
    _emit({"out": str(v["out"]), "files": rep["files"],
           "positive_f1": {k: m["report"]["True"]["f1-score"] for k, m in rep["models"].items()}})


HANDLERS = {
    "score": cmd_score, "label": cmd_label, "train": cmd_train, "eval": cmd_eval, "ztest": cmd_ztest,
    "summarize": cmd_summarize, "synth": cmd_synth, "harvest": cmd_harvest, "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        HANDLERS[args.command](resolve(args))
    except ConfigError as exc:
        print(f"botamp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, CheckpointError) as exc:
        print(f"botamp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"botamp: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
