"""CLI wiring tests; in-process invocations except for the serve subprocess."""

import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

from todkit.cli import main
from todkit.ingest import ingest_dialogs, ingest_schemas

from corpus import synthetic_catalog, synthetic_corpus
from planted import gold_predictions

FIXTURES = Path(__file__).parent / "fixtures"


def _write_native_corpus(tmp_path, n=6, seed=300):
    from todkit.ingest import write_dialogs, write_schemas

    catalog = synthetic_catalog()
    corpus = synthetic_corpus(n, seed=seed)
    write_schemas(catalog, tmp_path / "schemas.json")
    write_dialogs(corpus, tmp_path / "dialogs.jsonl")
    return catalog, corpus


def _write_predictions(corpus, path, model="gold-model"):
    with open(path, "w", encoding="utf-8") as handle:
        for (dialog_id, turn_index), output in gold_predictions(corpus).items():
            handle.write(
                json.dumps(
                    {"dialog_id": dialog_id, "turn_index": turn_index, "output": output},
                    ensure_ascii=False,
                )
            )
            handle.write("\n")
    return path


class TestIngest:
    def test_sgd_ingest_writes_native_files(self, tmp_path):
        out = tmp_path / "corpus"
        code = main(
            [
                "ingest",
                "--format", "sgd",
                "--schemas", str(FIXTURES / "sgd_schema.json"),
                "--dialogs", str(FIXTURES / "sgd_dialogs.json"),
                "--out", str(out),
            ]
        )
        assert code == 0
        assert (out / "schemas.json").exists()
        assert (out / "dialogs.jsonl").exists()
        catalog = ingest_schemas(out / "schemas.json", format="NATIVE_JSON")
        dialogs = ingest_dialogs(out / "dialogs.jsonl", catalog, format="NATIVE_JSONL")
        assert len(dialogs) == 2

    def test_missing_file_exit_2_names_path(self, tmp_path, capsys):
        code = main(
            [
                "ingest",
                "--schemas", str(tmp_path / "nowhere.json"),
                "--dialogs", str(tmp_path / "nope.json"),
                "--out", str(tmp_path / "out"),
            ]
        )
        assert code == 2
        assert "nowhere.json" in capsys.readouterr().err

    def test_rerun_is_idempotent(self, tmp_path):
        out = tmp_path / "corpus"
        argv = [
            "ingest",
            "--format", "sgd",
            "--schemas", str(FIXTURES / "sgd_schema.json"),
            "--dialogs", str(FIXTURES / "sgd_dialogs.json"),
            "--out", str(out),
        ]
        assert main(argv) == 0
        first = [(p.name, p.read_bytes()) for p in sorted(out.iterdir())]
        assert main(argv) == 0
        second = [(p.name, p.read_bytes()) for p in sorted(out.iterdir())]
        assert first == second

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["ingest", "--bogus"])
        assert excinfo.value.code == 1


class TestAugment:
    def test_augment_outputs_and_provenance(self, tmp_path):
        _write_native_corpus(tmp_path, n=10)
        out = tmp_path / "aug"
        code = main(
            [
                "augment",
                "--schemas", str(tmp_path / "schemas.json"),
                "--dialogs", str(tmp_path / "dialogs.jsonl"),
                "--lexicons", str(FIXTURES / "buses_lexicon.json"),
                "--out", str(out),
            ]
        )
        assert code == 0
        provenance = json.loads((out / "provenance.json").read_text())
        catalog = ingest_schemas(out / "schemas.json", format="NATIVE_JSON")
        dialogs = ingest_dialogs(out / "dialogs.jsonl", catalog, format="NATIVE_JSONL")
        assert len(dialogs) == len(provenance)
        source_ids = {d.dialog_id for d in synthetic_corpus(10, seed=300)}
        assert set(provenance) == {d.dialog_id for d in dialogs}
        assert set(provenance.values()) <= source_ids
        assert "Buses_11" in catalog

    def test_rewrite_text_flag_changes_utterances(self, tmp_path):
        from todkit.ingest import write_dialogs, write_schemas
        from todkit.schema import Dialog, Turn, TurnOutput
        from todkit.apicall import ApiCall

        catalog = synthetic_catalog()
        dialog = Dialog(
            "b9",
            ("Buses_1",),
            (
                Turn(
                    1,
                    "what is the from_station?",
                    TurnOutput.from_call(ApiCall("FindBus", (("from_station", "LA"),))),
                ),
            ),
        )
        write_schemas(catalog, tmp_path / "schemas.json")
        write_dialogs([dialog], tmp_path / "dialogs.jsonl")

        def run(out, extra):
            return main(
                [
                    "augment",
                    "--schemas", str(tmp_path / "schemas.json"),
                    "--dialogs", str(tmp_path / "dialogs.jsonl"),
                    "--lexicons", str(FIXTURES / "buses_lexicon.json"),
                    "--out", str(out),
                    *extra,
                ]
            )

        assert run(tmp_path / "plain", []) == 0
        assert run(tmp_path / "rewritten", ["--rewrite-text"]) == 0
        plain = (tmp_path / "plain" / "dialogs.jsonl").read_text()
        rewritten = (tmp_path / "rewritten" / "dialogs.jsonl").read_text()
        assert "what is the from_station?" in plain
        assert "what is the origin?" in rewritten


class TestRender:
    def test_render_training_pairs(self, tmp_path):
        _, corpus = _write_native_corpus(tmp_path, n=4)
        out = tmp_path / "pairs.jsonl"
        code = main(
            [
                "render",
                "--schemas", str(tmp_path / "schemas.json"),
                "--dialogs", str(tmp_path / "dialogs.jsonl"),
                "--out", str(out),
            ]
        )
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == sum(len(d.turns) for d in corpus)
        assert all("prompt" in l and "target" in l and "is_api_call" in l for l in lines)


class TestEvaluate:
    def test_gold_as_predictions_all_ones(self, tmp_path, capsys):
        _, corpus = _write_native_corpus(tmp_path, n=5)
        predictions = _write_predictions(corpus, tmp_path / "gold-model.jsonl")
        (tmp_path / "seen.json").write_text(json.dumps(["Restaurants", "Buses_1"]))
        code = main(
            [
                "evaluate",
                "--schemas", str(tmp_path / "schemas.json"),
                "--gold", str(tmp_path / "dialogs.jsonl"),
                "--predictions", str(predictions),
                "--seen", str(tmp_path / "seen.json"),
                "--out", str(tmp_path / "reports"),
            ]
        )
        assert code == 0
        table = capsys.readouterr().out
        assert "Invoke Accuracy" in table
        assert "1.0000" in table
        report = json.loads((tmp_path / "reports" / "report-gold-model.json").read_text())
        all_cat = report["categories"]["All"]
        for metric in ("invoke_acc", "method_acc", "param_name_acc", "param_value_acc", "complete_acc"):
            assert all_cat[metric]["value"] == 1.0
        assert all_cat["false_invoke_rate"]["value"] == 0.0

    def test_multiple_prediction_files(self, tmp_path, capsys):
        _, corpus = _write_native_corpus(tmp_path, n=4)
        a = _write_predictions(corpus, tmp_path / "model-a.jsonl")
        b = _write_predictions(corpus, tmp_path / "model-b.jsonl")
        (tmp_path / "seen.json").write_text(json.dumps(["Restaurants"]))
        code = main(
            [
                "evaluate",
                "--schemas", str(tmp_path / "schemas.json"),
                "--gold", str(tmp_path / "dialogs.jsonl"),
                "--predictions", str(a), str(b),
                "--seen", str(tmp_path / "seen.json"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Model: model-a" in out
        assert "Model: model-b" in out

    def test_external_scores_merged(self, tmp_path, capsys):
        _, corpus = _write_native_corpus(tmp_path, n=3)
        predictions = _write_predictions(corpus, tmp_path / "m.jsonl")
        (tmp_path / "seen.json").write_text(json.dumps(["Restaurants"]))
        scores_path = tmp_path / "scores.jsonl"
        with open(scores_path, "w") as handle:
            for dialog in corpus:
                for turn in dialog.turns:
                    handle.write(
                        json.dumps(
                            {"dialog_id": dialog.dialog_id, "turn_index": turn.index, "score": 0.75}
                        )
                        + "\n"
                    )
        code = main(
            [
                "evaluate",
                "--schemas", str(tmp_path / "schemas.json"),
                "--gold", str(tmp_path / "dialogs.jsonl"),
                "--predictions", str(predictions),
                "--seen", str(tmp_path / "seen.json"),
                "--external-scores", str(scores_path),
                "--out", str(tmp_path / "reports"),
            ]
        )
        assert code == 0
        report = json.loads((tmp_path / "reports" / "report-m.json").read_text())
        assert report["categories"]["All"]["external_semantic_score"]["value"] == 0.75
        assert "External Semantic Score" in capsys.readouterr().out

    def test_config_file_supplies_defaults_flags_win(self, tmp_path, capsys):
        _, corpus = _write_native_corpus(tmp_path, n=3)
        predictions = _write_predictions(corpus, tmp_path / "m.jsonl")
        (tmp_path / "seen.json").write_text(json.dumps(["Restaurants"]))
        config = {
            "schemas": str(tmp_path / "schemas.json"),
            "gold": str(tmp_path / "dialogs.jsonl"),
            "seen": str(tmp_path / "seen.json"),
        }
        (tmp_path / "config.json").write_text(json.dumps(config))
        code = main(
            [
                "evaluate",
                "--config", str(tmp_path / "config.json"),
                # argparse requires these, but values in config would be used if omitted were allowed;
                # pass explicit flags and check they win over config contents
                "--schemas", str(tmp_path / "schemas.json"),
                "--gold", str(tmp_path / "dialogs.jsonl"),
                "--seen", str(tmp_path / "seen.json"),
                "--predictions", str(predictions),
            ]
        )
        assert code == 0


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _wait_for(url, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            response = httpx.get(url, timeout=1.0)
            if response.status_code == 200:
                return response
        except httpx.HTTPError:
            time.sleep(0.1)
    raise RuntimeError(f"service at {url} did not come up")


class TestServe:
    def test_serve_health_study_and_restart(self, tmp_path):
        _, corpus = _write_native_corpus(tmp_path, n=8)
        predictions = _write_predictions(corpus, tmp_path / "solo.jsonl", model="solo")
        (tmp_path / "study.json").write_text(
            json.dumps({"single_domain": 1, "multi_domain": 0, "models": ["solo"], "seed": 4})
        )
        port = _free_port()
        argv = [
            sys.executable, "-m", "todkit", "serve",
            "--schemas", str(tmp_path / "schemas.json"),
            "--corpus", str(tmp_path / "dialogs.jsonl"),
            "--predictions", str(predictions),
            "--log", str(tmp_path / "events.jsonl"),
            "--study-config", str(tmp_path / "study.json"),
            "--port", str(port),
        ]
        base = f"http://127.0.0.1:{port}"

        proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        try:
            health = _wait_for(f"{base}/health").json()
            assert health["status"] == "ok" and "version" in health
            # one study was created at startup; find it via the log
            events = [
                json.loads(line)
                for line in (tmp_path / "events.jsonl").read_text().splitlines()
            ]
            study_id = next(e["study_id"] for e in events if e["event"] == "study_created")
            session = httpx.post(f"{base}/studies/{study_id}/sessions").json()["session_id"]
            item = httpx.get(f"{base}/studies/{study_id}/sessions/{session}/next").json()["item"]
            ack = httpx.post(
                f"{base}/ratings",
                json={
                    "session_id": session,
                    "item_id": item["item_id"],
                    "criterion": "FLUENCY",
                    "score": 5,
                },
            )
            assert ack.status_code == 200
            report_before = httpx.get(f"{base}/studies/{study_id}/report").json()
            assert report_before["total_ratings"] == 1
        finally:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=10)

        # restart on the same log, without re-creating the study
        argv_restart = [a for a in argv if a not in ("--study-config", str(tmp_path / "study.json"))]
        proc = subprocess.Popen(argv_restart, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        try:
            _wait_for(f"{base}/health")
            report_after = httpx.get(f"{base}/studies/{study_id}/report").json()
            assert report_after == report_before
        finally:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=10)
