"""Numeric design matrix built from labeled articles.

Categorical columns are label-encoded by sorted category order and scaled
to [0, 1]; the Altmetric score is min-max normalized.  One column per
predictor, so a linear model yields one coefficient per feature.
"""
from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ingest import UNKNOWN
from .scoring import LabeledArticle

FEATURE_COLUMNS = (
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "author_location",
)
CATEGORICAL_COLUMNS = tuple(c for c in FEATURE_COLUMNS if c != "altmetric_score")
LABEL_COLUMN = "is_spammed"


@dataclass(frozen=True)
class Vocabulary:
    name: str
    codes: Mapping[str, int]

    @property
    def size(self) -> int:
        return len(self.codes)

    def code(self, value: str) -> int:
        c = self.codes.get(value)
        return self.codes[UNKNOWN] if c is None else c

    def to_json(self) -> dict:
        return dict(sorted(self.codes.items(), key=lambda kv: kv[1]))


def build_vocabulary(values: Sequence[str], name: str = "") -> Vocabulary:
    """Codes 0..n-1 in lexicographic order; ``"unknown"`` is always present."""
    if len(values) == 0:
        raise ValidationError(f"cannot build vocabulary {name!r} from no values")
    cats = sorted(set(values) | {UNKNOWN})
    return Vocabulary(name, {c: i for i, c in enumerate(cats)})


def encode_categorical(values: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """Map each value to ``code / (size - 1)``; unseen values use the unknown code."""
    codes = np.fromiter((vocab.code(v) for v in values), dtype=np.float64, count=len(values))
    if vocab.size <= 1:
        return np.zeros(len(values))
    return codes / (vocab.size - 1)


def normalize_minmax(values, fit: tuple[float, float] | None = None):
    """Affine map onto [0, 1]; returns ``(scaled, (lo, hi))``.

    With an explicit ``fit`` values outside it are clipped.  A constant
    range maps everything to 0.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValidationError("cannot normalize an empty column")
    if fit is None:
        lo, hi = float(x.min()), float(x.max())
    else:
        lo, hi = float(fit[0]), float(fit[1])
        if hi < lo:
            raise ValidationError(f"normalization fit has max {hi} < min {lo}")
    if hi == lo:
        return np.zeros_like(x), (lo, hi)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0), (lo, hi)


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...] = FEATURE_COLUMNS
    vocabs: Mapping[str, Vocabulary] = field(default_factory=dict)
    fit: tuple[float, float] | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=bool)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise ValidationError(f"expected {len(self.columns)} columns, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValidationError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.X[idx], self.y[idx], self.columns, self.vocabs, self.fit)


def fit_vocabularies(articles: Sequence[LabeledArticle]) -> dict[str, Vocabulary]:
    return {c: build_vocabulary([getattr(a, c) for a in articles], c) for c in CATEGORICAL_COLUMNS}


def assemble_features(
    articles: Sequence[LabeledArticle],
    vocabs: Mapping[str, Vocabulary] | None = None,
    fit: tuple[float, float] | None = None,
) -> FeatureMatrix:
    """Encode articles in the fixed predictor order.

    ``vocabs`` and ``fit`` are learned from ``articles`` when omitted; pass
    the training ones when encoding held-out data.
    """
    if len(articles) == 0:
        raise ValidationError("no articles to encode")
    if vocabs is None:
        vocabs = fit_vocabularies(articles)
    missing = [c for c in CATEGORICAL_COLUMNS if c not in vocabs]
    if missing:
        raise ValidationError(f"no vocabulary for column(s) {', '.join(missing)}")
    cols = []
    for c in FEATURE_COLUMNS:
        if c == "altmetric_score":
            col, fit = normalize_minmax([a.altmetric_score for a in articles], fit)
        else:
            col = encode_categorical([getattr(a, c) for a in articles], vocabs[c])
        cols.append(col)
    X = np.column_stack(cols)
    y = np.fromiter((a.is_spammed for a in articles), dtype=bool, count=len(articles))
    return FeatureMatrix(X, y, FEATURE_COLUMNS, dict(vocabs), fit)


def pearson_matrix(data: np.ndarray) -> np.ndarray:
    """Pearson correlation between the columns of ``data``.

    Constant columns correlate 0 with everything else; the diagonal is 1.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] < 2:
        raise ValidationError("correlation needs at least 2 rows")
    centered = data - data.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    cov = centered.T @ centered
    denom = np.sqrt(np.outer(ss, ss))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0, cov / denom, 0.0)
    corr = np.clip((corr + corr.T) / 2, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def feature_correlation(matrix: FeatureMatrix) -> np.ndarray:
    """7x7 correlation over the six predictors plus the 0/1 label."""
    return pearson_matrix(np.column_stack([matrix.X, matrix.y.astype(np.float64)]))


def vocabularies_json(vocabs: Mapping[str, Vocabulary]) -> dict:
    return {name: vocabs[name].to_json() for name in sorted(vocabs)}


def vocabulary_fingerprint(vocab: Vocabulary) -> str:
    blob = json.dumps(vocab.to_json(), sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_vocabularies(vocabs: Mapping[str, Vocabulary], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocabularies_json(vocabs), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_vocabularies(path: str | Path) -> dict[str, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {name: Vocabulary(name, {k: int(v) for k, v in codes.items()}) for name, codes in raw.items()}
