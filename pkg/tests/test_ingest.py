import json

import pytest

from botamp.errors import SchemaError, ValidationError
from botamp.ingest import (
    UNKNOWN, ArticleRecord, BotometerMetrics, parse_articles, parse_scores, select_primary_discipline,
    write_articles, write_scores,
)

from conftest import write_jsonl, write_scores_csv


def test_identity_parse(tmp_path, article):
    parsed = parse_articles(write_jsonl(tmp_path / "a.jsonl", [article]))
    assert parsed.rejects == [] and parsed.rows_in == 1
    (rec,) = parsed.records
    assert rec == ArticleRecord("a1", "Medicine", "J", "article", "P", 0.25, ("u1",), ("United States",))


def test_empty_tweeters_rejected(tmp_path, article):
    parsed = parse_articles(write_jsonl(tmp_path / "a.jsonl", [{**article, "tweeter_user_ids": [],
                                                                  "tweeter_locations": []}]))
    assert parsed.records == [] and len(parsed.rejects) == 1
    assert parsed.rows_in == 1


def test_primary_discipline_on_parse(tmp_path, article):
    parsed = parse_articles(write_jsonl(tmp_path / "a.jsonl", [{**article, "discipline": "Medicine; Dentistry"}]))
    assert parsed.records[0].discipline == "Medicine"


@pytest.mark.parametrize("raw, expected", [
    ("Medicine", "Medicine"),
    ("Medicine; Dentistry", "Medicine"),
    ("  Energy ; Physics", "Energy"),
])
def test_select_primary_discipline(raw, expected):
    assert select_primary_discipline(raw) == expected


@pytest.mark.parametrize("raw", ["", "   ", " ; Physics"])
def test_select_primary_discipline_rejects_blank(raw):
    with pytest.raises(ValidationError):
        select_primary_discipline(raw)


def test_duplicate_id_is_fatal(tmp_path, article):
    with pytest.raises(ValidationError, match="a1"):
        parse_articles(write_jsonl(tmp_path / "a.jsonl", [article, article]))


def test_malformed_rows_collected(tmp_path, article):
    rows = [
        article,
        "{not json",
        {**article, "altmetric_id": "a2", "altmetric_score": "abc"},
        {**article, "altmetric_id": "a3", "tweeter_locations": ["x", "y"]},
        {k: v for k, v in article.items() if k != "journal"} | {"altmetric_id": "a4"},
        {**article, "altmetric_id": "a5", "altmetric_score": -1},
    ]
    parsed = parse_articles(write_jsonl(tmp_path / "a.jsonl", rows))
    assert [r.altmetric_id for r in parsed.records] == ["a1"]
    assert len(parsed.rejects) == 5
    assert parsed.rows_in == len(parsed.records) + len(parsed.rejects)
    assert all(r.reason for r in parsed.rejects)


def test_empty_location_becomes_unknown(tmp_path, article):
    rows = [{**article, "tweeter_user_ids": ["u1", "u2"], "tweeter_locations": ["", "France"]},
            {**article, "altmetric_id": "a2", "tweeter_user_ids": ["u1", "u2"], "tweeter_locations": []}]
    recs = parse_articles(write_jsonl(tmp_path / "a.jsonl", rows)).records
    assert recs[0].tweeter_locations == (UNKNOWN, "France")
    assert recs[1].tweeter_locations == (UNKNOWN, UNKNOWN)


def test_csv_articles(tmp_path):
    path = tmp_path / "articles.csv"
    path.write_text(
        "altmetric_id,discipline,journal,research_type,publisher,altmetric_score,tweeter_user_ids,tweeter_locations\n"
        "a1,Medicine; Dentistry,J,article,P,3.5,u1;u2,France;\n",
        encoding="utf-8",
    )
    (rec,) = parse_articles(path).records
    assert rec.discipline == "Medicine"
    assert rec.tweeter_user_ids == ("u1", "u2")
    assert rec.tweeter_locations == ("France", UNKNOWN)


def test_csv_missing_column_is_schema_error(tmp_path):
    path = tmp_path / "articles.csv"
    path.write_text("altmetric_id,discipline\na1,Medicine\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        parse_articles(path)


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        parse_articles(tmp_path / "missing.jsonl")


@pytest.mark.parametrize("fmt, suffix", [("jsonl", ".jsonl"), ("csv", ".csv")])
def test_article_round_trip(tmp_path, article, fmt, suffix):
    rows = [article, {**article, "altmetric_id": "a2", "altmetric_score": 8268.56,
                      "tweeter_user_ids": ["u1", "u7"], "tweeter_locations": ["unknown", "Brazil"]}]
    first = parse_articles(write_jsonl(tmp_path / "a.jsonl", rows)).records
    out = tmp_path / f"b{suffix}"
    write_articles(first, out, fmt)
    assert parse_articles(out).records == first


def test_scores_examples(tmp_path):
    store = parse_scores(write_scores_csv(tmp_path / "s.csv", [
        ["u1"] + [0] * 8, ["u2"] + [5] * 8, ["u3", 6] + [0] * 7,
    ]))
    assert store["u1"] == BotometerMetrics.from_values([0.0] * 8)
    assert store["u2"].as_tuple() == (5.0,) * 8
    assert "u3" not in store
    assert len(store.rejects) == 1 and "3" in str(store.rejects[0].row)


def test_scores_missing_metric_column(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("user_id,content\nu1,0\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        parse_scores(path)


def test_scores_non_numeric_and_duplicates(tmp_path):
    store = parse_scores(write_scores_csv(tmp_path / "s.csv", [
        ["u1"] + [1] * 8, ["u1"] + [2] * 8, ["u2", "x"] + [0] * 7,
    ]))
    assert store["u1"].as_tuple() == (2.0,) * 8
    assert store.duplicates == 1
    assert len(store.rejects) == 1


def test_scores_round_trip(tmp_path):
    store = parse_scores(write_scores_csv(tmp_path / "s.csv", [
        ["u2", 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 4.99], ["u1"] + [3] * 8,
    ]))
    write_scores(store, tmp_path / "t.csv")
    again = parse_scores(tmp_path / "t.csv")
    assert again.canonical() == store.canonical()
    assert (tmp_path / "t.csv").read_text().splitlines()[1].startswith("u1,")


def test_metrics_bounds():
    with pytest.raises(ValidationError):
        BotometerMetrics.from_values([5.01] + [0] * 7)
    with pytest.raises(ValidationError):
        BotometerMetrics.from_values([0] * 7)


def test_record_to_json_round_trip(article):
    rec = ArticleRecord("a1", "Medicine", "J", "article", "P", 0.25, ("u1",), ("United States",))
    assert json.loads(json.dumps(rec.to_json())) == article
