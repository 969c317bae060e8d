"""Deterministic synthetic articles and bot scores with an optional planted signal.

Each article has a latent "amplified" state drawn from a logistic model over
its encoded features (the planted signal).  Tweeters of amplified articles
are mostly bots, others mostly humans; each tweet comes from a distinct
account.  The intercept of the latent model is bisected so that the labels
the real pipeline will compute (median bot score above the threshold) hit
the requested prevalence.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import FEATURE_COLUMNS
from .ingest import METRIC_NAMES, UNKNOWN, ArticleRecord, BotometerMetrics, ScoreStore, write_articles, write_scores
from .scoring import DEFAULT_THRESHOLD, score_summary
from .stats import HEALTH_DISCIPLINES

OTHER_DISCIPLINES = (
    "Agricultural and Biological Sciences",
    "Arts and Humanities",
    "Business, Management and Accounting",
    "Chemical Engineering",
    "Chemistry",
    "Computer Science",
    "Decision Sciences",
    "Earth and Planetary Sciences",
    "Economics, Econometrics and Finance",
    "Energy",
    "Engineering",
    "Environmental Science",
    "Materials Science",
    "Mathematics",
    "Physics and Astronomy",
)
RESEARCH_TYPES = ("article", "book", "chapter", "news", "preprint")
RESEARCH_TYPE_PROBS = (0.45, 0.1, 0.1, 0.25, 0.1)
COUNTRIES = (
    "Australia", "Brazil", "Canada", "China", "Egypt", "France", "Germany", "India",
    "Iraq", "Italy", "Japan", "Malaysia", "Mexico", "Netherlands", "Nigeria", "Spain",
    "Taiwan", "Thailand", "United Kingdom", "United States", "Vietnam",
)
UNKNOWN_LOCATION_SHARE = 0.2
N_JOURNALS = 300
N_PUBLISHERS = 80

HUMAN_METRIC_RANGE = (0.0, 1.9)   # sums stay below 15.2
BOT_METRIC_RANGE = (2.6, 4.8)     # sums in [20.8, 38.4]
USER_Q3_LIMIT = 16.0
USER_MAX_LIMIT = 38.5
ALPHA_RANGE = (-40.0, 40.0)
PREVALENCE_TOLERANCE = 0.01


@dataclass(frozen=True)
class SynthConfig:
    n_articles: int = 10_000
    seed: int = 42
    spam_prevalence: float = 0.1443
    health_share: float = 1_178_085 / 1_398_007
    altmetric_mean: float = 114.61
    altmetric_sd: float = 326.36
    altmetric_min: float = 0.25
    altmetric_max: float = 8268.56
    mean_tweets: float = 7.0
    signal: float = 0.0
    planted_weights: tuple[float, ...] = (10.0, 0.0, -10.0, 0.0, 0.0, 0.0)
    health_shift: float = 0.0
    bot_share_amplified: float = 0.85
    bot_share_baseline: float = 0.03
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.n_articles < 10:
            raise ValidationError(f"n_articles must be >= 10, got {self.n_articles}")
        for name in ("spam_prevalence", "health_share", "bot_share_amplified", "bot_share_baseline"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"{name} must be in (0, 1), got {v}")
        if self.signal < 0:
            raise ValidationError(f"signal strength must be >= 0, got {self.signal}")
        if self.mean_tweets < 1:
            raise ValidationError(f"mean_tweets must be >= 1, got {self.mean_tweets}")
        if len(self.planted_weights) != len(FEATURE_COLUMNS):
            raise ValidationError(f"planted_weights needs {len(FEATURE_COLUMNS)} entries")
        if self.planted_weights[FEATURE_COLUMNS.index("author_location")] != 0:
            raise ValidationError("author_location cannot carry planted signal")
        if not (self.altmetric_mean > 0 and self.altmetric_sd > 0):
            raise ValidationError("altmetric mean and sd must be positive")


@dataclass
class SynthDataset:
    articles: list[ArticleRecord]
    store: ScoreStore
    planted_weights: np.ndarray
    stats: dict = field(default_factory=dict)


def _encode(codes: np.ndarray, categories) -> np.ndarray:
    """Feature-module encoding of generator categories (sorted, with unknown)."""
    cats = sorted(set(categories) | {UNKNOWN})
    pos = np.array([cats.index(c) for c in categories], dtype=np.float64)
    return pos[codes] / (len(cats) - 1)


def _segment_medians(scores: np.ndarray, article: np.ndarray, counts: np.ndarray) -> np.ndarray:
    order = np.lexsort((scores, article))
    s = scores[order]
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return (s[starts + (counts - 1) // 2] + s[starts + counts // 2]) / 2


def _draw_metrics(rng, n, lo, hi) -> np.ndarray:
    return np.round(rng.uniform(lo, hi, size=(n, len(METRIC_NAMES))), 2)


def _row_sums(metrics: np.ndarray) -> np.ndarray:
    # fsum matches scoring.user_bot_score bit for bit
    return np.array([math.fsum(r) for r in metrics.tolist()])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def generate_dataset(config: SynthConfig) -> SynthDataset:
    """Build articles, a score store and the planted weight vector."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_articles

    # article-level attributes
    health = rng.random(n) < cfg.health_share
    disc_names = HEALTH_DISCIPLINES + OTHER_DISCIPLINES
    disc = np.where(health,
                    rng.integers(0, len(HEALTH_DISCIPLINES), n),
                    len(HEALTH_DISCIPLINES) + rng.integers(0, len(OTHER_DISCIPLINES), n))
    journal = rng.integers(0, N_JOURNALS, n)
    rtype = rng.choice(len(RESEARCH_TYPES), size=n, p=RESEARCH_TYPE_PROBS)
    sigma2 = math.log1p((cfg.altmetric_sd / cfg.altmetric_mean) ** 2)
    mu = math.log(cfg.altmetric_mean) - sigma2 / 2
    altmetric = np.round(np.clip(rng.lognormal(mu, math.sqrt(sigma2), n),
                                 cfg.altmetric_min, cfg.altmetric_max), 2)

    journal_names = tuple(f"Journal {j:04d}" for j in range(N_JOURNALS))
    publisher_names = tuple(f"Publisher {p:03d}" for p in range(N_PUBLISHERS))
    publisher = journal % N_PUBLISHERS

    # tweet-level draws, shared by every candidate intercept
    tweets = rng.geometric(1.0 / cfg.mean_tweets, size=n)
    article_of = np.repeat(np.arange(n), tweets)
    n_tweets = int(tweets.sum())
    v = rng.random(n_tweets)
    human = _draw_metrics(rng, n_tweets, *HUMAN_METRIC_RANGE)
    bot = _draw_metrics(rng, n_tweets, *BOT_METRIC_RANGE)
    human_sum, bot_sum = _row_sums(human), _row_sums(bot)
    loc_idx = rng.integers(0, len(COUNTRIES), n_tweets)
    loc_unknown = rng.random(n_tweets) < UNKNOWN_LOCATION_SHARE
    u = rng.random(n)

    bot_if_amp = v < cfg.bot_share_amplified
    bot_if_base = v < cfg.bot_share_baseline
    med_amp = _segment_medians(np.where(bot_if_amp, bot_sum, human_sum), article_of, tweets)
    med_base = _segment_medians(np.where(bot_if_base, bot_sum, human_sum), article_of, tweets)
    spam_amp = med_amp > cfg.threshold
    spam_base = med_base > cfg.threshold

    # planted logit over generator-side encodings of the article features
    lo, hi = altmetric.min(), altmetric.max()
    encoded = np.column_stack([
        _encode(disc, disc_names),
        _encode(journal, journal_names),
        _encode(rtype, RESEARCH_TYPES),
        _encode(publisher, publisher_names),
        (altmetric - lo) / (hi - lo) if hi > lo else np.zeros(n),
        np.full(n, 0.5),
    ])
    weights = np.asarray(cfg.planted_weights, dtype=np.float64)
    signal = cfg.signal * ((encoded - 0.5) @ weights) + cfg.health_shift * health

    def labels_at(alpha):
        amplified = u < _sigmoid(alpha + signal)
        return amplified, np.where(amplified, spam_amp, spam_base)

    target = cfg.spam_prevalence
    a_lo, a_hi = ALPHA_RANGE
    if labels_at(a_hi)[1].mean() < target - PREVALENCE_TOLERANCE:
        raise ValidationError(
            f"spam_prevalence {target} unreachable: at most {labels_at(a_hi)[1].mean():.4f} "
            f"with bot_share_amplified={cfg.bot_share_amplified}")
    if labels_at(a_lo)[1].mean() > target + PREVALENCE_TOLERANCE:
        raise ValidationError(
            f"spam_prevalence {target} unreachable: at least {labels_at(a_lo)[1].mean():.4f} "
            f"with bot_share_baseline={cfg.bot_share_baseline}")
    for _ in range(80):
        mid = (a_lo + a_hi) / 2
        if labels_at(mid)[1].mean() < target:
            a_lo = mid
        else:
            a_hi = mid
    alpha = min((a_lo, a_hi), key=lambda a: abs(labels_at(a)[1].mean() - target))
    amplified, labels = labels_at(alpha)

    is_bot = np.where(amplified[article_of], bot_if_amp, bot_if_base)
    metrics = np.where(is_bot[:, None], bot, human)
    user_scores = np.where(is_bot, bot_sum, human_sum)
    summary = score_summary(user_scores.tolist())
    if summary.q3 >= USER_Q3_LIMIT:
        raise ValidationError(
            f"user-score 75th percentile < {USER_Q3_LIMIT:g} violated (got {summary.q3:.2f}); "
            f"bot share of accounts is {is_bot.mean():.3f}")
    if summary.max > USER_MAX_LIMIT:
        raise ValidationError(f"user-score maximum <= {USER_MAX_LIMIT} violated (got {summary.max})")

    width = len(str(n_tweets))
    user_ids = [f"u{i:0{width}d}" for i in range(n_tweets)]
    locations = [UNKNOWN if unk else COUNTRIES[c] for c, unk in zip(loc_idx.tolist(), loc_unknown.tolist())]
    store = ScoreStore({uid: BotometerMetrics(*row) for uid, row in zip(user_ids, metrics.tolist())})

    awidth = len(str(n))
    ends = np.cumsum(tweets).tolist()
    articles = []
    start = 0
    for i in range(n):
        end = ends[i]
        articles.append(ArticleRecord(
            altmetric_id=f"a{i:0{awidth}d}",
            discipline=disc_names[disc[i]],
            journal=journal_names[journal[i]],
            research_type=RESEARCH_TYPES[rtype[i]],
            publisher=publisher_names[publisher[i]],
            altmetric_score=float(altmetric[i]),
            tweeter_user_ids=tuple(user_ids[start:end]),
            tweeter_locations=tuple(locations[start:end]),
        ))
        start = end

    stats = {
        "alpha": alpha,
        "prevalence": float(labels.mean()),
        "amplified_share": float(amplified.mean()),
        "health_share": float(health.mean()),
        "n_users": n_tweets,
        "bot_account_share": float(is_bot.mean()),
        "user_score_q3": summary.q3,
        "user_score_max": summary.max,
    }
    return SynthDataset(articles, store, weights * cfg.signal, stats)


def write_dataset(ds: SynthDataset, out_dir: str | Path, config: SynthConfig | None = None) -> dict[str, Path]:
    """Write ``articles.jsonl``, ``scores.csv`` and ``truth.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"articles": out / "articles.jsonl", "scores": out / "scores.csv", "truth": out / "truth.json"}
    write_articles(ds.articles, paths["articles"])
    write_scores(ds.store, paths["scores"])
    truth = {
        "planted_weights": dict(zip(FEATURE_COLUMNS, ds.planted_weights.tolist())),
        "stats": ds.stats,
        "config": asdict(config) if config is not None else None,
    }
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
