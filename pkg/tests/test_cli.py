from __future__ import annotations

import json

import pytest
import yaml
from click.testing import CliRunner

from schemqa.cli import cli

from .conftest import FIXTURES, GOLDEN

Q1 = "Which vessel condenses the overhead vapor from the distillation tower?"


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "corpus": {
                    "manifest": str(FIXTURES / "bundle" / "manifest.json"),
                    "window_words": 60,
                    "stride_words": 30,
                },
                "backend": {
                    "kind": "scripted",
                    "fixtures": str(FIXTURES / "backend_fixtures.jsonl"),
                    "strict": True,
                },
                "tools": {"fixtures_dir": str(FIXTURES / "tool_fixtures")},
            }
        )
    )
    return str(path)


def test_ask_matches_golden_stdout(runner, config_path):
    golden = (GOLDEN / "cli_ask_stdout.txt").read_text()
    for _ in range(2):
        result = runner.invoke(cli, ["ask", Q1, "--config", config_path])
        assert result.exit_code == 0, result.output
        assert result.output == golden


def test_ask_without_corpus_fails_operationally(runner, tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"backend": {"kind": "scripted"}}))
    result = runner.invoke(cli, ["ask", "anything", "--config", str(path)])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_unknown_flag_is_usage_error(runner):
    result = runner.invoke(cli, ["ask", "q", "--frobnicate"])
    assert result.exit_code == 2
    assert "no such option" in result.output.lower()


def test_missing_subcommand_argument_is_usage_error(runner):
    result = runner.invoke(cli, ["ingest"])
    assert result.exit_code == 2


def test_ingest_writes_index_and_dump(runner, config_path, tmp_path):
    index_path = tmp_path / "index.npz"
    dump_path = tmp_path / "chunks.jsonl"
    result = runner.invoke(
        cli,
        [
            "ingest",
            str(FIXTURES / "bundle" / "manifest.json"),
            "--out",
            str(index_path),
            "--config",
            config_path,
            "--dump-chunks",
            str(dump_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "indexed 2 documents" in result.output
    assert index_path.exists()
    lines = [json.loads(line) for line in dump_path.read_text().splitlines()]
    assert len(lines) == 12


def test_ingest_fill_alt_texts(runner, tmp_path):
    (tmp_path / "doc.txt").write_text("some document words about pumps")
    (tmp_path / "img.png").write_bytes(b"x")
    (tmp_path / "manifest.json").write_text(
        json.dumps(
            {
                "documents": [
                    {
                        "id": "d",
                        "kind": "PFD",
                        "title": "Doc",
                        "text_file": "doc.txt",
                        "images": [{"id": "i", "file": "img.png", "alt_text": ""}],
                    }
                ]
            }
        )
    )
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"backend": {"kind": "scripted"}}))  # lenient defaults
    result = runner.invoke(
        cli,
        [
            "ingest",
            str(tmp_path / "manifest.json"),
            "--out",
            str(tmp_path / "index.npz"),
            "--config",
            str(cfg),
            "--fill-alt-texts",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "alt-texts generated: 1" in result.output


def test_eval_writes_full_report(runner, tmp_path):
    report_path = tmp_path / "report.json"
    result = runner.invoke(
        cli, ["eval", str(FIXTURES / "eval_five.jsonl"), "--report", str(report_path)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert report["count"] == 5
    assert set(report["corpus"]) == {"CAPTION", "MC_VQA", "OCR", "DETECTION"}
    for task, means in report["corpus"].items():
        assert means, task  # every metric column populated
        assert all(isinstance(v, float) for v in means.values())
    assert "CAPTION" in result.output


def test_split_is_seeded_and_proportional(runner, tmp_path):
    dataset = tmp_path / "data.jsonl"
    with open(dataset, "w") as fh:
        for i in range(20):
            fh.write(json.dumps({"id": i, "task": "OCR", "prediction": "x", "gold": "x"}) + "\n")
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        result = runner.invoke(cli, ["split", str(dataset), "--seed", "7", "--out-dir", str(out)])
        assert result.exit_code == 0, result.output
    for name, expected in [("train.jsonl", 14), ("val.jsonl", 3), ("test.jsonl", 3)]:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        assert len((out_a / name).read_text().splitlines()) == expected


def test_repl_multi_turn(runner, config_path):
    q2 = "What removes salts from the crude before the fired heater?"
    result = runner.invoke(cli, ["repl", "--config", config_path], input=f"{Q1}\n{q2}\nexit\n")
    assert result.exit_code == 0, result.output
    assert result.output.count("verdict:") == 2
    assert "the reflux drum" in result.output
    assert "the desalter" in result.output


def test_memory_list_and_export(runner, config_path, tmp_path):
    result = runner.invoke(cli, ["memory", "list", "--config", config_path])
    assert result.exit_code == 0
    assert "long-term records: 0" in result.output
    out = tmp_path / "memory.json"
    result = runner.invoke(cli, ["memory", "export", "--config", config_path, "--out", str(out)])
    assert result.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload == {"sessions": {}, "long_term": []}
