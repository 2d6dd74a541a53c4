"""Smoke test for the claimset extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""

import json
import pathlib
import sys
import tempfile

import claimset

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "core" / "fixtures"
SAMPLE = (
    "Was Bill O'Reilly found dead in his Long Island home? "
    "https://t.co/SGwagACMbW https://t.co/Ppx1FhJeMm"
)


def main():
    assert claimset.tokenize(SAMPLE) == [
        "Was", "Bill", "O", "Reilly", "found", "dead", "Long", "Island", "home",
    ]
    urls = [u["raw"] for u in claimset.extract_urls(SAMPLE, 1)]
    assert urls == ["https://t.co/SGwagACMbW", "https://t.co/Ppx1FhJeMm"], urls

    html = (FIXTURES / "site" / "pages" / "bill-oreilly-found-dead.html").read_bytes()
    page = claimset.parse_page(html, "https://www.snopes.com/fact-check/bill-oreilly-found-dead/")
    assert page["rating_label"] == "false"

    value, polarity = claimset.score(page["claim_text"])
    assert polarity == "negative" and value < 0, (value, polarity)
    lex = claimset.Lexicon.default()
    assert claimset.score(page["claim_text"], lex.negated())[0] == -value

    assert claimset.cluster_of(claimset.parse_rating("mis-captioned")) == "FalseLike"
    assert len(claimset.rating_labels()) == 12

    rows = [
        {"claim": "a, \"quoted\"\nclaim", "rating": "False", "sentiment": -0.25,
         "origin": "", "source_url": "https://x.example/1", "record_id": 1},
        {"claim": "b", "rating": "True", "sentiment": 0.5,
         "origin": "é", "source_url": "https://x.example/2", "record_id": 2},
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "rows.csv"
        claimset.write_csv(rows, str(path))
        assert claimset.read_csv(str(path)) == rows
        stats = claimset.contingency(rows)
        assert stats["total_false"] == 1 and stats["false_neg"] == 1

        report = claimset.run(str(FIXTURES / "claimset.toml"), output_dir=tmp + "/out")
        assert report["exit_code"] == 0, report
        dataset = claimset.read_csv(tmp + "/out/dataset.csv")
        assert dataset[0]["rating"] == "False"
        below, above = claimset.tail_extremes(dataset, -0.6, 0.6)
        groups = claimset.violin(dataset, by="cluster")
        print(json.dumps({
            "rows": report["rows_emitted"],
            "below": len(below),
            "above": len(above),
            "groups": [g["group"] for g in groups],
        }))
    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
