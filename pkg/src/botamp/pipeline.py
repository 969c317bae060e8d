"""End-to-end orchestration shared by the CLI subcommands."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import ConfigError, ValidationError
from .evaluation import (
    auc, confusion, positive_f1_all_positive, positive_f1_majority, report, roc_points, write_roc_csv,
)
from .features import (
    FEATURE_COLUMNS, LABEL_COLUMN, FeatureMatrix, assemble_features, feature_correlation,
    fit_vocabularies, vocabulary_fingerprint, write_vocabularies,
)
from .ingest import parse_articles, parse_scores
from .learn import (
    LogisticHyper, SplitSpec, SvmHyper, feature_importance, predict, split_indices,
    train_knn, train_logistic, train_svm, upsample_indices, upsample_minority, save_model,
)
from .scoring import LabeledArticle, label_articles, read_labeled, score_summary, user_bot_score, write_labeled
from .stats import group_median_score, group_spam_ratio, health_ztest, write_groups_csv

log = logging.getLogger(__name__)

MODEL_KINDS = ("lr", "knn", "svm")


def derive_seed(seed: int, stage: str) -> int:
    """Independent 64-bit stream seed per pipeline stage."""
    digest = hashlib.sha256(f"{seed}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class PipelineConfig:
    input_dir: str | None = None
    articles: str | None = None
    scores: str | None = None
    labeled: str | None = None
    out: str = "out"
    threshold: float = 20.0
    train_fraction: float = 0.7
    stratified: bool = True
    models: tuple[str, ...] = MODEL_KINDS
    k: int = 34
    lr_rate: float = 0.5
    lr_epochs: int = 500
    lr_tol: float = 1e-8
    lr_l2: float = 0.0
    svm_step: float = 0.5
    svm_epochs: int = 500
    svm_l2: float = 1e-4
    resample_before_split: bool = False
    bootstrap_rounds: int = 11
    seed: int = 42

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.threshold <= 40.0:
            raise ConfigError(f"threshold: must be in [0, 40], got {self.threshold}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction: must be in (0, 1), got {self.train_fraction}")
        bad = [m for m in self.models if m not in MODEL_KINDS]
        if bad or not self.models:
            raise ConfigError(f"models: expected a subset of {MODEL_KINDS}, got {self.models}")
        if self.k < 1:
            raise ConfigError(f"k: must be >= 1, got {self.k}")
        if self.bootstrap_rounds < 1:
            raise ConfigError(f"bootstrap_rounds: must be >= 1, got {self.bootstrap_rounds}")
        for name in ("lr_rate", "svm_step"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be > 0")
        for name in ("lr_epochs", "svm_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        for name in ("lr_l2", "svm_l2", "lr_tol"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        return self

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, derive_seed(self.seed, "split"), self.stratified)

    @property
    def lr_hyper(self) -> LogisticHyper:
        return LogisticHyper(self.lr_rate, self.lr_epochs, self.lr_tol, self.lr_l2)

    @property
    def svm_hyper(self) -> SvmHyper:
        return SvmHyper(self.svm_step, self.svm_epochs, self.svm_l2)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["models"] = list(self.models)
        del d["out"]  # where results land does not change them
        for key in ("input_dir", "articles", "scores", "labeled"):
            if d[key] is not None:
                d[key] = Path(d[key]).name  # keep reports independent of the working directory
        return d


def _input_paths(cfg: PipelineConfig) -> tuple[Path, Path]:
    articles = Path(cfg.articles) if cfg.articles else None
    scores = Path(cfg.scores) if cfg.scores else None
    if cfg.input_dir:
        d = Path(cfg.input_dir)
        if articles is None:
            for name in ("articles.jsonl", "articles.csv"):
                if (d / name).exists():
                    articles = d / name
                    break
        if scores is None:
            for name in ("scores.csv", "scores.jsonl"):
                if (d / name).exists():
                    scores = d / name
                    break
    if articles is None or scores is None:
        raise ConfigError("need an articles file and a scores file (--in DIR or --articles/--scores)")
    for p in (articles, scores):
        if not p.exists():
            raise ConfigError(f"input file not found: {p}")
    return articles, scores


@dataclass
class LabeledData:
    articles: list[LabeledArticle]
    counts: dict = field(default_factory=dict)
    user_scores: list[float] | None = None


def load_labeled(cfg: PipelineConfig) -> LabeledData:
    """Labeled articles from ``cfg.labeled`` or by scoring articles + scores files."""
    if cfg.labeled and not (cfg.articles or cfg.input_dir):
        path = Path(cfg.labeled)
        if not path.exists():
            raise ConfigError(f"input file not found: {path}")
        arts = read_labeled(path)
        return LabeledData(arts, {"articles_in": len(arts)})
    a_path, s_path = _input_paths(cfg)
    parsed = parse_articles(a_path)
    store = parse_scores(s_path)
    result = label_articles(parsed.records, store, cfg.threshold)
    if not result.articles:
        raise ValidationError("no article has a scored tweeter")
    counts = {
        "article_rows": parsed.rows_in,
        "article_rejects": len(parsed.rejects),
        "score_rows_rejected": len(store.rejects),
        "score_duplicates": store.duplicates,
        "users_scored": len(store),
        "tweeters_without_score": result.missing_users,
        "articles_without_scored_tweeter": len(result.unscored),
    }
    users = [user_bot_score(store[u]) for u in sorted(store)]
    return LabeledData(result.articles, counts, users)


@dataclass
class PreparedData:
    train: FeatureMatrix
    test: FeatureMatrix
    train_rows_before_upsampling: int


def prepare_data(articles: list[LabeledArticle], cfg: PipelineConfig) -> PreparedData:
    """Split, encode and upsample.

    Default order: split the articles, learn encodings on the training part,
    then upsample the training rows only.  With ``resample_before_split`` the
    whole encoded set is upsampled first and then split.
    """
    up_seed = derive_seed(cfg.seed, "upsample")
    if cfg.resample_before_split:
        full = assemble_features(articles)
        full = upsample_minority(full, up_seed)
        tr, te = split_indices(full.y, cfg.split)
        return PreparedData(full.subset(tr), full.subset(te), len(tr))
    y = np.fromiter((a.is_spammed for a in articles), dtype=bool, count=len(articles))
    tr, te = split_indices(y, cfg.split)
    train_articles = [articles[i] for i in tr]
    vocabs = fit_vocabularies(train_articles)
    train = assemble_features(train_articles, vocabs)
    test = assemble_features([articles[i] for i in te], vocabs, train.fit)
    return PreparedData(train.subset(upsample_indices(train.y, up_seed)), test, len(tr))


def train_model(kind: str, train: FeatureMatrix, cfg: PipelineConfig):
    if kind == "lr":
        return train_logistic(train, cfg.lr_hyper)
    if kind == "knn":
        return train_knn(train, cfg.k)
    if kind == "svm":
        return train_svm(train, cfg.svm_hyper)
    raise ConfigError(f"unknown model {kind!r}")


def evaluate_model(model, test: FeatureMatrix) -> tuple[dict, object]:
    scores, labels = predict(model, test)
    rep = report(confusion(test.y, labels))
    out = {"report": rep.to_json()}
    curve = None
    if test.y.any() and not test.y.all():
        curve = roc_points(test.y, scores)
        out["auc"] = auc(curve)
    else:
        out["auc"] = None
    return out, curve


def model_extra(cfg: PipelineConfig, prep: PreparedData) -> dict:
    return {
        "split": {"fraction": cfg.train_fraction, "stratified": cfg.stratified,
                  "seed": cfg.split.seed},
        "resample_before_split": cfg.resample_before_split,
        "threshold": cfg.threshold,
        "upsample_seed": derive_seed(cfg.seed, "upsample"),
        "train_rows": len(prep.train),
    }


def _clean(obj):
    """JSON-safe copy: NaN becomes null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
        fh.write("\n")


def group_rows(articles) -> list:
    rows = []
    for key in ("health_partition", "discipline", "author_location"):
        rows.extend((key, s) for s in group_spam_ratio(articles, key))
    return rows


def ztest_json(articles) -> dict:
    try:
        return health_ztest(articles).to_json()
    except ValidationError as exc:
        return {"error": str(exc)}


def write_correlation_csv(corr: np.ndarray, path: Path) -> None:
    names = list(FEATURE_COLUMNS) + [LABEL_COLUMN]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("," + ",".join(names) + "\n")
        for name, row in zip(names, corr.tolist()):
            fh.write(name + "," + ",".join(repr(v) for v in row) + "\n")


def run_report(cfg: PipelineConfig) -> dict:
    """Full pipeline; writes every artifact into ``cfg.out`` and returns the report."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    data = load_labeled(cfg)
    arts = data.articles
    write_labeled(arts, out / "labeled.csv")

    partitions = {s.key: {"n": s.n_articles, "spammed": s.n_spammed, "ratio": s.ratio}
                  for s in group_spam_ratio(arts, "health_partition")}
    prep = prepare_data(arts, cfg)
    if not cfg.resample_before_split:
        write_vocabularies(prep.train.vocabs, out / "vocab.json")

    baselines = {
        "all_positive_f1": positive_f1_all_positive(prep.test.y),
        "majority_f1": positive_f1_majority(prep.test.y),
    }
    models = {}
    for kind in cfg.models:
        model = train_model(kind, prep.train, cfg)
        result, curve = evaluate_model(model, prep.test)
        if curve is not None:
            write_roc_csv(curve, out / f"roc_{kind}.csv")
            result["roc_file"] = f"roc_{kind}.csv"
        save_model(out / f"model_{kind}.json", model, seed=cfg.seed, vocabs=prep.train.vocabs,
                   fit=prep.train.fit, extra=model_extra(cfg, prep))
        models[kind] = result

    importance = feature_importance(prep.train, cfg.bootstrap_rounds,
                                    derive_seed(cfg.seed, "bootstrap"), cfg.lr_hyper)
    corr = feature_correlation(assemble_features(arts))
    write_correlation_csv(corr, out / "correlation.csv")

    ztest = ztest_json(arts)
    write_json(ztest, out / "ztest.json")
    write_groups_csv(group_rows(arts), out / "groups.csv")
    medians = {key: {s.key: s.median_overall_score for s in group_median_score(arts, key)}
               for key in ("discipline", "author_location")}

    report_obj = {
        "software": {"package": "botamp", "version": __version__, "kernel_backend": kernels.BACKEND},
        "seed": cfg.seed,
        "config": cfg.echo(),
        "counts": {
            "total": len(arts),
            "spammed": int(sum(a.is_spammed for a in arts)),
            "by_partition": partitions,
            "train_rows_before_upsampling": prep.train_rows_before_upsampling,
            "train_rows": len(prep.train),
            "test_rows": len(prep.test),
            **data.counts,
        },
        "user_score_summary": score_summary(data.user_scores).to_json() if data.user_scores else None,
        "overall_score_summary": score_summary([a.overall_score for a in arts]).to_json(),
        "baselines": baselines,
        "models": models,
        "feature_importance": dict(zip(FEATURE_COLUMNS, importance.tolist())),
        "ztest": ztest,
        "median_score_by_group": medians,
        "correlation": {"columns": list(FEATURE_COLUMNS) + [LABEL_COLUMN], "matrix": corr.tolist()},
        "files": sorted(["report.json", "labeled.csv", "correlation.csv", "ztest.json", "groups.csv"]
                        + [f"roc_{k}.csv" for k in models if "roc_file" in models[k]]
                        + [f"model_{k}.json" for k in models]
                        + ([] if cfg.resample_before_split else ["vocab.json"])),
    }
    write_json(report_obj, out / "report.json")
    return _clean(report_obj)


def vocab_fingerprints(vocabs) -> dict:
    return {k: vocabulary_fingerprint(v) for k, v in sorted(vocabs.items())}
