"""Per-user bot scores, per-article medians and the spam label."""
from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import SchemaError, ValidationError
from .ingest import UNKNOWN, ArticleRecord, BotometerMetrics

DEFAULT_THRESHOLD = 20.0
MAX_USER_SCORE = 40.0

LABELED_COLUMNS = (
    "altmetric_id",
    "overall_score",
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "author_location",
    "is_spammed",
)


@dataclass(frozen=True)
class UserBotScore:
    user_id: str
    score: float


@dataclass(frozen=True)
class LabeledArticle:
    altmetric_id: str
    overall_score: float
    discipline: str
    journal: str
    research_type: str
    publisher: str
    altmetric_score: float
    author_location: str
    is_spammed: bool


@dataclass(frozen=True)
class ScoreSummary:
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    std: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def user_bot_score(m: BotometerMetrics) -> float:
    """Sum of the eight metrics, in [0, 40]."""
    return math.fsum(m.as_tuple())


def article_overall_score(scores: Sequence[float]) -> float:
    """Median of the tweeters' bot scores (mean of the middle pair when even)."""
    if len(scores) == 0:
        raise ValidationError("cannot take the median of zero scores")
    return statistics.median(scores)


def label_article(overall_score: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    return overall_score > threshold


def score_summary(scores: Sequence[float]) -> ScoreSummary:
    """Five-number summary plus mean and population std.

    Quartiles are medians of the lower and upper halves, the middle element
    excluded for odd lengths (Tukey hinges without the middle point).
    """
    values = sorted(scores)
    n = len(values)
    if n == 0:
        raise ValidationError("cannot summarise zero scores")
    half = n // 2
    lower, upper = values[:half], values[n - half:]
    if n == 1:
        lower = upper = values
    return ScoreSummary(
        count=n,
        min=values[0],
        q1=statistics.median(lower),
        median=statistics.median(values),
        q3=statistics.median(upper),
        max=values[-1],
        mean=statistics.fmean(values),
        std=statistics.pstdev(values) if n > 1 else 0.0,
    )


def author_location(locations: Iterable[str]) -> str:
    """Most common known location; ties go to the lexicographically smallest."""
    counts = Counter(loc for loc in locations if loc and loc != UNKNOWN)
    if not counts:
        return UNKNOWN
    best = max(counts.values())
    return min(loc for loc, c in counts.items() if c == best)


@dataclass
class LabelingResult:
    articles: list[LabeledArticle]
    unscored: list[str]
    missing_users: int


def label_articles(
    records: Iterable[ArticleRecord],
    store: Mapping[str, BotometerMetrics],
    threshold: float = DEFAULT_THRESHOLD,
) -> LabelingResult:
    """Aggregate tweeter scores per article and apply the spam label.

    Tweeters absent from ``store`` are skipped; an article none of whose
    tweeters were scored is listed in ``result.unscored`` and left out.
    """
    cache: dict[str, float] = {}
    out: list[LabeledArticle] = []
    unscored: list[str] = []
    missing = 0
    for rec in records:
        scores, locs = [], []
        for uid, loc in zip(rec.tweeter_user_ids, rec.tweeter_locations):
            m = store.get(uid)
            if m is None:
                missing += 1
                continue
            if uid not in cache:
                cache[uid] = user_bot_score(m)
            scores.append(cache[uid])
            locs.append(loc)
        if not scores:
            unscored.append(rec.altmetric_id)
            continue
        overall = article_overall_score(scores)
        out.append(LabeledArticle(
            altmetric_id=rec.altmetric_id,
            overall_score=overall,
            discipline=rec.discipline,
            journal=rec.journal,
            research_type=rec.research_type,
            publisher=rec.publisher,
            altmetric_score=rec.altmetric_score,
            author_location=author_location(locs),
            is_spammed=label_article(overall, threshold),
        ))
    return LabelingResult(out, unscored, missing)


def relabel(articles: Iterable[LabeledArticle], threshold: float) -> list[LabeledArticle]:
    """Re-apply the label at a different threshold."""
    return [replace(a, is_spammed=label_article(a.overall_score, threshold)) for a in articles]


def write_labeled(articles: Iterable[LabeledArticle], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELED_COLUMNS)
        for a in articles:
            w.writerow([
                a.altmetric_id, repr(a.overall_score), a.discipline, a.journal,
                a.research_type, a.publisher, repr(a.altmetric_score),
                a.author_location, "true" if a.is_spammed else "false",
            ])


def iter_labeled_rows(path: str | Path) -> Iterator[tuple]:
    """Validated rows of a labeled CSV as tuples in ``LABELED_COLUMNS`` order."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None) or []
        missing = [c for c in LABELED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in LABELED_COLUMNS]
        width = max(idx) + 1
        i_id, i_score, i_disc, i_jour, i_type, i_pub, i_alt, i_loc, i_flag = idx
        empty = True
        for rowno, row in enumerate(reader, 1):
            if len(row) < width:
                raise ValidationError(f"{path}: row {rowno}: expected {len(header)} fields, got {len(row)}")
            flag = row[i_flag].strip().lower()
            if flag != "true" and flag != "false":
                raise ValidationError(f"{path}: row {rowno}: is_spammed must be true/false")
            try:
                overall = float(row[i_score])
                alt = float(row[i_alt])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {rowno}: {exc}") from None
            if not 0.0 <= overall <= MAX_USER_SCORE:
                raise ValidationError(f"{path}: row {rowno}: overall_score {overall} outside [0, 40]")
            empty = False
            yield (row[i_id], overall, row[i_disc], row[i_jour], row[i_type], row[i_pub], alt,
                   row[i_loc] or UNKNOWN, flag == "true")
    if empty:
        raise ValidationError(f"{path}: no labeled articles")


def read_labeled(path: str | Path) -> list[LabeledArticle]:
    return [LabeledArticle(*row) for row in iter_labeled_rows(path)]
