"""Group summaries and the two-proportion z-test."""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .scoring import LabeledArticle, iter_labeled_rows

HEALTH_DISCIPLINES = (
    "Biochemistry",
    "Genetics and Molecular Biology",
    "Medicine",
    "Life Sciences",
    "Health Sciences",
    "Psychology",
    "Dentistry",
    "Health Professions",
    "Nursing",
    "Pharmacology, Toxicology, and Pharmaceutics",
    "Immunology and Microbiology",
    "Neuroscience",
)
_HEALTH_KEYS = frozenset(d.casefold() for d in HEALTH_DISCIPLINES)

GROUP_KEYS = ("discipline", "author_location", "health_partition")
PARTITIONS = ("all", "health", "other")

# Beyond this |z| the two-tailed p is below 1.3e-15 and is reported as 0.
UNDERFLOW_Z = 8.0


def is_health_discipline(discipline: str) -> bool:
    return discipline.strip().casefold() in _HEALTH_KEYS


@dataclass(frozen=True)
class LabeledTable:
    """Columnar view of labeled articles for group statistics.

    ``discipline`` and ``author_location`` are integer codes into the
    matching ``*_categories`` tuple.
    """

    discipline: np.ndarray
    discipline_categories: tuple[str, ...]
    author_location: np.ndarray
    author_location_categories: tuple[str, ...]
    is_spammed: np.ndarray
    overall_score: np.ndarray

    def __len__(self) -> int:
        return len(self.is_spammed)

    @classmethod
    def from_columns(cls, discipline, author_location, is_spammed, overall_score) -> "LabeledTable":
        def codes(values):
            first: dict[str, int] = {}
            raw = np.fromiter((first.setdefault(v, len(first)) for v in values), dtype=np.int64,
                              count=len(values))
            cats = sorted(first)
            rank = np.empty(len(cats), dtype=np.int64)
            rank[[first[c] for c in cats]] = np.arange(len(cats))
            return rank[raw], tuple(cats)

        disc, disc_cats = codes(discipline)
        loc, loc_cats = codes(author_location)
        return cls(disc, disc_cats, loc, loc_cats, np.asarray(is_spammed, dtype=bool),
                   np.asarray(overall_score, dtype=np.float64))

    @classmethod
    def from_articles(cls, articles: Sequence[LabeledArticle]) -> "LabeledTable":
        return cls.from_columns([a.discipline for a in articles], [a.author_location for a in articles],
                                [a.is_spammed for a in articles], [a.overall_score for a in articles])

    @classmethod
    def from_csv(cls, path) -> "LabeledTable":
        """Load only the columns group statistics need from a labeled CSV."""
        disc, loc, spam, score = [], [], [], []
        for row in iter_labeled_rows(path):
            score.append(row[1])
            disc.append(row[2])
            loc.append(row[7])
            spam.append(row[8])
        return cls.from_columns(disc, loc, spam, score)


@dataclass(frozen=True)
class GroupSummary:
    key: str
    n_articles: int
    n_spammed: int
    ratio: float
    median_overall_score: float


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_two_tailed: float
    underflow: bool
    pooled: float
    p1: float
    p2: float
    x1: int
    n1: int
    x2: int
    n2: int

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _as_table(articles) -> LabeledTable:
    if isinstance(articles, LabeledTable):
        table = articles
    else:
        table = LabeledTable.from_articles(list(articles))
    if len(table) == 0:
        raise ValidationError("no articles to summarise")
    return table


def _grouped(codes: np.ndarray, labels: Sequence[str], table: LabeledTable) -> list[GroupSummary]:
    n_groups = len(labels)
    counts = np.bincount(codes, minlength=n_groups)
    spammed = np.bincount(codes, weights=table.is_spammed, minlength=n_groups)
    order = np.lexsort((table.overall_score, codes))
    sorted_scores = table.overall_score[order]
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    out = []
    for g in range(n_groups):
        n = int(counts[g])
        if n == 0:
            continue
        lo = starts[g]
        median = (sorted_scores[lo + (n - 1) // 2] + sorted_scores[lo + n // 2]) / 2
        x = int(spammed[g])
        out.append(GroupSummary(labels[g], n, x, x / n, float(median)))
    return out


def _summaries(articles, key: str) -> list[GroupSummary]:
    table = _as_table(articles)
    if key == "discipline":
        return _grouped(table.discipline, table.discipline_categories, table)
    if key == "author_location":
        return _grouped(table.author_location, table.author_location_categories, table)
    if key == "health_partition":
        health_cat = np.array([is_health_discipline(d) for d in table.discipline_categories], dtype=bool)
        is_health = health_cat[table.discipline] if len(health_cat) else np.zeros(len(table), bool)
        everything = _grouped(np.zeros(len(table), dtype=np.int64), ["all"], table)
        parts = _grouped(np.where(is_health, 0, 1), ["health", "other"], table)
        by_key = {s.key: s for s in parts}
        # an empty side still gets a row so the three-way shape is fixed
        return everything + [by_key.get(k, GroupSummary(k, 0, 0, 0.0, float("nan")))
                             for k in ("health", "other")]
    raise ValidationError(f"unknown grouping key {key!r}; expected one of {GROUP_KEYS}")


def group_spam_ratio(articles, key: str) -> list[GroupSummary]:
    """Share of spammed articles per group.

    ``key="health_partition"`` always yields three rows: all, health, other.
    """
    return _summaries(articles, key)


def group_median_score(articles, key: str) -> list[GroupSummary]:
    """Median overall bot score per group."""
    if key not in ("discipline", "author_location"):
        raise ValidationError(f"median grouping must be discipline or author_location, got {key!r}")
    return _summaries(articles, key)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_two_tailed_p(z: float) -> float:
    """``2 * (1 - Phi(|z|))``; exactly 0 once ``|z| > UNDERFLOW_Z``."""
    if not math.isfinite(z):
        raise ValidationError(f"z must be finite, got {z!r}")
    if p_underflows(z):
        return 0.0
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def p_underflows(z: float) -> bool:
    return abs(z) > UNDERFLOW_Z


def two_proportion_ztest(x1: int, n1: int, x2: int, n2: int) -> ZTestResult:
    """Pooled-variance z-test for ``x1/n1`` versus ``x2/n2``."""
    for x, n in ((x1, n1), (x2, n2)):
        if n < 1 or not 0 <= x <= n:
            raise ValidationError(f"need 0 <= x <= n and n >= 1, got x={x}, n={n}")
    p1, p2 = x1 / n1, x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        raise ValidationError(f"pooled proportion {pooled} gives zero standard error")
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (p1 - p2) / se
    return ZTestResult(z, normal_two_tailed_p(z), p_underflows(z), pooled, p1, p2, x1, n1, x2, n2)


def health_ztest(articles) -> ZTestResult:
    """Health disciplines versus all others."""
    parts = {s.key: s for s in group_spam_ratio(articles, "health_partition")}
    h, o = parts["health"], parts["other"]
    return two_proportion_ztest(h.n_spammed, h.n_articles, o.n_spammed, o.n_articles)


def write_groups_csv(rows: Iterable[tuple[str, GroupSummary]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grouping", "key", "n", "n_spammed", "ratio", "median_score"])
        for grouping, s in rows:
            w.writerow([grouping, s.key, s.n_articles, s.n_spammed, repr(s.ratio),
                        repr(s.median_overall_score)])
