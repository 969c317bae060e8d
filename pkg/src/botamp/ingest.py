"""Article and bot-score file parsing.

Two input files feed the pipeline:

* an articles file (JSONL or CSV) with one scholarly article per row and
  the IDs/locations of the accounts that tweeted it;
* a scores file (CSV or JSONL) with the eight Botometer metrics per account.

Malformed rows are collected into a rejects list rather than dropped
silently, so ``rows_in == len(records) + len(rejects)`` always holds.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import SchemaError, ValidationError

log = logging.getLogger(__name__)

UNKNOWN = "unknown"
LIST_SEP = ";"
DISCIPLINE_SEP = ";"

METRIC_NAMES = (
    "content",
    "language",
    "friend",
    "network",
    "sentiment",
    "temporal",
    "universal",
    "user",
)
METRIC_MAX = 5.0

ARTICLE_COLUMNS = (
    "altmetric_id",
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "tweeter_user_ids",
    "tweeter_locations",
)
SCORE_COLUMNS = ("user_id",) + METRIC_NAMES


@dataclass(frozen=True)
class ArticleRecord:
    altmetric_id: str
    discipline: str
    journal: str
    research_type: str
    publisher: str
    altmetric_score: float
    tweeter_user_ids: tuple[str, ...]
    tweeter_locations: tuple[str, ...]

    def __post_init__(self):
        if not self.altmetric_id:
            raise ValidationError("altmetric_id must be non-empty")
        if not self.tweeter_user_ids:
            raise ValidationError(f"article {self.altmetric_id!r} has no tweeters")
        if len(self.tweeter_locations) != len(self.tweeter_user_ids):
            raise ValidationError(
                f"article {self.altmetric_id!r}: {len(self.tweeter_locations)} locations "
                f"for {len(self.tweeter_user_ids)} tweeters"
            )
        if not (math.isfinite(self.altmetric_score) and self.altmetric_score >= 0):
            raise ValidationError(
                f"article {self.altmetric_id!r}: altmetric_score must be a finite "
                f"non-negative number, got {self.altmetric_score!r}"
            )

    def to_json(self) -> dict:
        return {
            "altmetric_id": self.altmetric_id,
            "discipline": self.discipline,
            "journal": self.journal,
            "research_type": self.research_type,
            "publisher": self.publisher,
            "altmetric_score": self.altmetric_score,
            "tweeter_user_ids": list(self.tweeter_user_ids),
            "tweeter_locations": list(self.tweeter_locations),
        }


@dataclass(frozen=True)
class BotometerMetrics:
    """The eight per-account Botometer scores, each in [0, 5]."""

    content: float
    language: float
    friend: float
    network: float
    sentiment: float
    temporal: float
    universal: float
    user: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and 0.0 <= v <= METRIC_MAX):
                raise ValidationError(f"metric {f.name}={v!r} outside [0, {METRIC_MAX:g}]")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in METRIC_NAMES)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "BotometerMetrics":
        vals = [float(v) for v in values]
        if len(vals) != len(METRIC_NAMES):
            raise ValidationError(f"expected {len(METRIC_NAMES)} metrics, got {len(vals)}")
        return cls(*vals)


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str


class ScoreStore(Mapping):
    """Read-only mapping of user ID to :class:`BotometerMetrics`."""

    def __init__(self, data: Mapping[str, BotometerMetrics] | None = None,
                 rejects: Sequence[Reject] = (), duplicates: int = 0):
        self._data = dict(data or {})
        self.rejects = tuple(rejects)
        self.duplicates = duplicates

    def __getitem__(self, key: str) -> BotometerMetrics:
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self):
        return f"ScoreStore({len(self)} users, {len(self.rejects)} rejects)"

    def canonical(self) -> list[tuple[str, tuple[float, ...]]]:
        """Entries sorted by user ID; the form used to compare two stores."""
        return [(uid, self._data[uid].as_tuple()) for uid in sorted(self._data)]


@dataclass
class ParsedArticles:
    records: list[ArticleRecord]
    rejects: list[Reject] = field(default_factory=list)
    rows_in: int = 0


def select_primary_discipline(raw: str) -> str:
    """Return the first listed discipline of a ``;``-separated field."""
    if raw is None or not raw.strip():
        raise ValidationError("discipline is empty")
    first = raw.split(DISCIPLINE_SEP, 1)[0].strip()
    if not first:
        raise ValidationError(f"no discipline before separator in {raw!r}")
    return first


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("csv", "jsonl"):
        raise ValidationError(f"unsupported format {fmt!r}")
    return fmt


def _split_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [("" if v is None else str(v)) for v in value]
    if value is None:
        return []
    text = str(value)
    return text.split(LIST_SEP) if text else []


def _record_from_row(row: Mapping) -> ArticleRecord:
    missing = [c for c in ARTICLE_COLUMNS if c not in row or row[c] is None]
    if missing:
        raise ValidationError(f"missing field(s): {', '.join(missing)}")
    for name in ("altmetric_id", "journal", "research_type", "publisher"):
        if not str(row[name]).strip():
            raise ValidationError(f"empty field: {name}")
    try:
        score = float(row["altmetric_score"])
    except (TypeError, ValueError):
        raise ValidationError(f"altmetric_score not a number: {row['altmetric_score']!r}") from None

    users = [u.strip() for u in _split_list(row["tweeter_user_ids"])]
    if not users:
        raise ValidationError("zero tweeters")
    if any(not u for u in users):
        raise ValidationError("empty tweeter user id")
    locations = [loc.strip() for loc in _split_list(row["tweeter_locations"])]
    if not locations:
        locations = [""] * len(users)
    if len(locations) != len(users):
        raise ValidationError(f"{len(locations)} locations for {len(users)} tweeters")
    locations = [loc if loc else UNKNOWN for loc in locations]

    return ArticleRecord(
        altmetric_id=str(row["altmetric_id"]).strip(),
        discipline=select_primary_discipline(str(row["discipline"])),
        journal=str(row["journal"]).strip(),
        research_type=str(row["research_type"]).strip(),
        publisher=str(row["publisher"]).strip(),
        altmetric_score=score,
        tweeter_user_ids=tuple(users),
        tweeter_locations=tuple(locations),
    )


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict | None, str | None]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "row is not a JSON object"
                continue
            yield lineno, obj, None


def _iter_csv(path: Path, required: Sequence[str]) -> Iterator[tuple[int, dict | None, str | None]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        for rowno, row in enumerate(reader, 1):
            if None in row:
                yield rowno, None, "too many fields"
                continue
            yield rowno, row, None


def parse_articles(path: str | Path, format: str | None = None) -> ParsedArticles:
    """Parse an articles file into records plus a rejects report.

    Raises :class:`ValidationError` on a duplicate ``altmetric_id`` and
    ``OSError`` if the file cannot be read.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    rows = _iter_jsonl(path) if fmt == "jsonl" else _iter_csv(path, ARTICLE_COLUMNS)

    out = ParsedArticles(records=[])
    seen: set[str] = set()
    for rowno, row, error in rows:
        out.rows_in += 1
        if error is None:
            try:
                rec = _record_from_row(row)
            except ValidationError as exc:
                error = str(exc)
        if error is not None:
            out.rejects.append(Reject(rowno, error))
            continue
        if rec.altmetric_id in seen:
            raise ValidationError(f"duplicate altmetric_id {rec.altmetric_id!r} (row {rowno})")
        seen.add(rec.altmetric_id)
        out.records.append(rec)

    if out.rejects:
        log.warning("%s: rejected %d of %d rows", path, len(out.rejects), out.rows_in)
    return out


def write_articles(records: Iterable[ArticleRecord], path: str | Path,
                   format: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for rec in records:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ARTICLE_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.altmetric_id, rec.discipline, rec.journal, rec.research_type,
                rec.publisher, repr(rec.altmetric_score),
                LIST_SEP.join(rec.tweeter_user_ids),
                LIST_SEP.join(rec.tweeter_locations),
            ])


def _metrics_from_row(row: Mapping) -> BotometerMetrics:
    values = []
    for name in METRIC_NAMES:
        raw = row[name]
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} not a number: {raw!r}") from None
        if not math.isfinite(v):
            raise ValidationError(f"{name} not finite: {raw!r}")
        values.append(v)
    return BotometerMetrics(*values)


def parse_scores(path: str | Path, format: str | None = None) -> ScoreStore:
    """Parse a Botometer scores file into a :class:`ScoreStore`.

    Later rows for an already-seen user replace earlier ones; the number of
    such replacements is kept in ``store.duplicates``.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        rows = _iter_csv(path, SCORE_COLUMNS)
    else:
        rows = _iter_jsonl(path)

    data: dict[str, BotometerMetrics] = {}
    rejects: list[Reject] = []
    duplicates = 0
    for rowno, row, error in rows:
        if error is None and fmt == "jsonl":
            missing = [c for c in SCORE_COLUMNS if c not in row]
            if missing:
                raise SchemaError(f"{path}: row {rowno} missing column(s) {', '.join(missing)}")
        if error is None:
            uid = str(row["user_id"]).strip()
            if not uid:
                error = "empty user_id"
            else:
                try:
                    metrics = _metrics_from_row(row)
                except ValidationError as exc:
                    error = str(exc)
        if error is not None:
            rejects.append(Reject(rowno, error))
            continue
        if uid in data:
            duplicates += 1
        data[uid] = metrics

    if duplicates:
        log.warning("%s: %d duplicate user rows (last entry kept)", path, duplicates)
    return ScoreStore(data, rejects, duplicates)


def write_scores(store: Mapping[str, BotometerMetrics], path: str | Path) -> None:
    """Write a scores CSV, rows sorted by user ID."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_COLUMNS)
        for uid in sorted(store):
            writer.writerow([uid, *(repr(v) for v in store[uid].as_tuple())])
