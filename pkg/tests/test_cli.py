# tests/test_cli.py
import json

import pytest

from backends.mock import MockBackend
from cli import discover_commands, main
from data.dataset import load_dataset, load_queries, save_queries
from evaluation.harness import ScoreRow, read_scores, write_scores
from utility.report_utils import ReportRow
from utility.trace_utils import QueryRecord
from views.report_view import read_report, write_report


@pytest.fixture
def oracle_scores(tmp_path):
    rows = [
        ScoreRow(f"r{i}", i % 2, {"lns": float(i % 2) + 0.01 * i, "kle": 0.1 * i})
        for i in range(40)
    ]
    path = tmp_path / "scores.jsonl"
    write_scores(rows, path)
    return path


def test_every_command_is_discovered():
    names = {m.__name__.rsplit(".", 1)[-1] for m in discover_commands()}
    assert names == {
        "calibrate",
        "collect",
        "ensemble",
        "evaluate",
        "longform",
        "report",
        "score",
        "search",
        "transform",
    }


def test_usage_errors_return_2(capsys):
    assert main([]) == 2
    assert main(["score"]) == 2
    assert main(["evaluate", "--in", "x", "--metric", "brier"]) == 2


def test_known_errors_return_1(tmp_path, capsys):
    assert main(["evaluate", "--in", str(tmp_path / "missing.jsonl")]) == 1
    assert "error: scores file not found" in capsys.readouterr().err


def test_bad_config_returns_1(tmp_path, capsys, oracle_scores):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"sampling": {"num_samples": -1}}', encoding="utf-8")
    assert main(["--config", str(cfg), "evaluate", "--in", str(oracle_scores)]) == 1
    assert "invalid config" in capsys.readouterr().err


def test_collect_and_label(tmp_path, capsys):
    queries = tmp_path / "queries.jsonl"
    save_queries(
        [
            QueryRecord(id="a", prompt="Say it.", ground_truths=("mock answer 0",)),
            QueryRecord(id="b", prompt="Capital of France?", ground_truths=("Paris",)),
        ],
        queries,
    )
    out = tmp_path / "data.jsonl"
    assert main(["collect", "--in", str(queries), "--out", str(out), "--label"]) == 0
    assert "wrote 2 traces" in capsys.readouterr().out

    ds = load_dataset(out)
    assert [e.label for e in ds] == [0, 1]
    assert all(e.trace.num_samples == 5 for e in ds)


def test_score_writes_rows(dataset_file, tmp_path, capsys):
    out = tmp_path / "scores.jsonl"
    rc = main(["score", "--in", str(dataset_file), "--out", str(out), "--methods", "LNS,degmat"])
    assert rc == 0
    assert f"wrote 4 rows x 2 methods to {out}" in capsys.readouterr().out

    rows = read_scores(out)
    assert [r.id for r in rows] == ["q0", "q1", "q2", "q3"]
    assert set(rows[0].scores) == {"lns", "degmat"}


def test_score_reports_missing_prerequisites(dataset_file, tmp_path, capsys):
    rc = main(["score", "--in", str(dataset_file), "--out", str(tmp_path / "s.jsonl"), "--methods", "lars"])
    assert rc == 1
    assert "external score 'lars' required" in capsys.readouterr().err


def test_evaluate_oracle(oracle_scores, tmp_path, capsys):
    report = tmp_path / "report.csv"
    curves = tmp_path / "curves"
    rc = main(
        [
            "evaluate",
            "--in",
            str(oracle_scores),
            "--metric",
            "prr",
            "--metric",
            "auroc",
            "--methods",
            "lns",
            "--out",
            str(report),
            "--curve-dir",
            str(curves),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "lns\tprr\t1.0000" in out
    assert "lns\tauroc\t1.0000" in out

    rows = read_report(report)
    assert [(r.method, r.metric) for r in rows] == [("lns", "prr"), ("lns", "auroc")]
    lines = (curves / "rejection_lns.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "rejected_fraction,precision"
    assert len(lines) > 2


def test_calibrate_in_domain(oracle_scores, tmp_path, capsys):
    report = tmp_path / "are.jsonl"
    rc = main(["calibrate", "--test", str(oracle_scores), "--seeds", "0,1", "--out", str(report)])
    assert rc == 0
    rows = read_report(report)
    assert {r.method for r in rows} == {"lns", "kle"}
    assert all(r.metric == "are" and r.cal_set == "in_domain" and r.seed_count == 2 for r in rows)


def test_calibrate_rejects_bad_cal_arg(oracle_scores, capsys):
    assert main(["calibrate", "--test", str(oracle_scores), "--cal", "nopath"]) == 2


def test_ensemble(oracle_scores, tmp_path, capsys):
    model = tmp_path / "model.json"
    rc = main(
        [
            "ensemble",
            "--test",
            str(oracle_scores),
            "--save-model",
            str(model),
            "--combiner",
            "mean",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "best_single" in out
    assert f"saved model to {model}" in out
    assert model.exists()


def test_transform_is_deterministic(dataset_file, tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        rc = main(
            ["transform", "--in", str(dataset_file), "--out", str(out), "--kind", "typo", "--seed", "3"]
        )
        assert rc == 0
    assert "wrote 4 typo queries" in capsys.readouterr().out
    assert a.read_text(encoding="utf-8") == b.read_text(encoding="utf-8")
    assert all(q.transform_tag == "typo" for q in load_queries(a))


def test_transform_adversarial_text(dataset_file, tmp_path):
    out = tmp_path / "adv.jsonl"
    rc = main(
        ["transform", "--in", str(dataset_file), "--out", str(out), "--kind", "adversarial", "--text", "Be bold."]
    )
    assert rc == 0
    assert all(q.prompt.startswith("Be bold.\n") for q in load_queries(out))


def test_report_merges(tmp_path, capsys):
    a, b, merged = tmp_path / "a.csv", tmp_path / "b.jsonl", tmp_path / "merged.csv"
    write_report([ReportRow("lns", "", "prr", 0.4)], a)
    write_report([ReportRow("kle", "x", "are", 0.1, 0.02, 5)], b)
    assert main(["report", str(a), str(b), "--out", str(merged)]) == 0
    rows = read_report(merged)
    assert [r.method for r in rows] == ["kle", "lns"]
    assert "wrote 2 rows" in capsys.readouterr().out


def test_longform(dataset_file, tmp_path, capsys):
    labels = tmp_path / "labels.jsonl"
    labels.write_text(
        "".join(json.dumps({"claim": f"answer {i}", "label": i % 2}) + "\n" for i in range(4)),
        encoding="utf-8",
    )
    claims = tmp_path / "claims.jsonl"
    report = tmp_path / "claims_report.csv"
    rc = main(
        [
            "longform",
            "--in",
            str(dataset_file),
            "--out",
            str(claims),
            "--strategies",
            "naive,qg",
            "--labels",
            str(labels),
            "--report",
            str(report),
        ]
    )
    assert rc == 0
    records = [json.loads(line) for line in claims.read_text(encoding="utf-8").splitlines()]
    assert [(r["claim"], r["strategy"]) for r in records[:2]] == [("answer 0", "naive"), ("answer 0", "qg")]
    assert len(records) == 8
    assert [r["label"] for r in records[::2]] == [0, 1, 0, 1]
    assert [r.method for r in read_report(report)] == ["naive", "qg:min", "qg:max", "qg:mean"]


def test_longform_unknown_strategy(dataset_file, tmp_path, capsys):
    rc = main(["longform", "--in", str(dataset_file), "--out", str(tmp_path / "c.jsonl"), "--strategies", "qa"])
    assert rc == 1
    assert "unknown strategies" in capsys.readouterr().err


def test_search(dataset_file, tmp_path, capsys):
    out = tmp_path / "search.json"
    rc = main(["search", "--in", str(dataset_file), "--probes", "lns", "--iterations", "2", "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert [h["prompt"] for h in payload["history"]] == ["", "Candidate prompt 0", "Candidate prompt 1"]
    assert payload["best_prompt"] in {h["prompt"] for h in payload["history"]}


def test_collect_uses_configured_backend(tmp_path, mocker, capsys):
    backend = MockBackend(script={"answer": "Paris"})
    build = mocker.patch("commands.collect.build_backend", return_value=backend)
    queries = tmp_path / "queries.jsonl"
    save_queries([QueryRecord(id="a", prompt="Capital of France?")], queries)
    out = tmp_path / "data.jsonl"

    assert main(["collect", "--in", str(queries), "--out", str(out)]) == 0
    build.assert_called_once()
    entry = load_dataset(out).entries[0]
    assert entry.trace.greedy.text == "Paris"
    assert entry.label is None


def _run_pipeline(cfg_path, queries, out_dir):
    out_dir.mkdir()
    data, scores, report = out_dir / "data.jsonl", out_dir / "scores.jsonl", out_dir / "prr.csv"
    base = ["--config", str(cfg_path)]
    assert main([*base, "collect", "--in", str(queries), "--out", str(data), "--label"]) == 0
    assert main(
        [*base, "score", "--in", str(data), "--out", str(scores), "--methods", "lns,degmat,kle"]
    ) == 0
    assert main([*base, "evaluate", "--in", str(scores), "--metric", "prr", "--out", str(report)]) == 0
    return data, scores, report


def test_replayed_run_reproduces_recorded_report(tmp_path, capsys):
    queries = tmp_path / "queries.jsonl"
    save_queries(
        [
            QueryRecord(id=f"q{i}", prompt=f"Question {i}?", ground_truths=(truth,))
            for i, truth in enumerate(["mock answer 0", "Paris", "mock answer 0", "Paris"])
        ],
        queries,
    )
    store = tmp_path / "store.jsonl"
    recording = tmp_path / "record.json"
    recording.write_text(
        json.dumps({"replay": {"mode": "record", "path": str(store)}}), encoding="utf-8"
    )
    # nothing listens on port 9; replay must never reach the live backend
    replaying = tmp_path / "replay.json"
    replaying.write_text(
        json.dumps(
            {
                "backend": {"kind": "openai", "base_url": "http://127.0.0.1:9/v1"},
                "replay": {"mode": "replay", "path": str(store)},
            }
        ),
        encoding="utf-8",
    )

    recorded = _run_pipeline(recording, queries, tmp_path / "recorded")
    stored = store.read_bytes()
    replayed = _run_pipeline(replaying, queries, tmp_path / "replayed")

    for first, again in zip(recorded, replayed):
        assert first.read_bytes() == again.read_bytes()
    assert store.read_bytes() == stored
