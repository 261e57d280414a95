import argparse
import json
from pathlib import Path

import pytest

from vlmbench import cli
from vlmbench.fixtures import make_smoke_suite

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    return make_smoke_suite(tmp_path_factory.mktemp("smoke"))


def _run(argv):
    return cli.main(argv)


class TestHelpGolden:
    def test_main_help(self):
        parser = cli.build_parser()
        assert parser.format_help() == (GOLDEN / "help_main.txt").read_text("utf-8")

    @pytest.mark.parametrize(
        "name", ["classify", "detect", "inspect", "report", "mock-serve"]
    )
    def test_subcommand_help(self, name):
        parser = cli.build_parser()
        sub = [
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        ][0]
        golden = (GOLDEN / f"help_{name.replace('-', '_')}.txt").read_text("utf-8")
        assert sub.choices[name].format_help() == golden

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as err:
            _run(["--help"])
        assert err.value.code == 0
        capsys.readouterr()


class TestUsageErrors:
    def test_unknown_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as err:
            _run(["classify", "--bogus"])
        assert err.value.code == 1
        capsys.readouterr()

    def test_missing_subcommand_exits_one(self, capsys):
        with pytest.raises(SystemExit) as err:
            _run([])
        assert err.value.code == 1
        capsys.readouterr()

    def test_unknown_prompt_lists_valid_ids(self, smoke, tmp_path, capsys):
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A9", "--manifest", str(smoke.classification_manifest),
                "--out", str(tmp_path / "out"), "--endpoint", "http://x.invalid",
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        for pid in ("A1", "A2", "A3", "A4", "A5"):
            assert pid in err

    def test_wrong_prompt_type_for_pipeline(self, smoke, tmp_path, capsys):
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "P2-F2", "--manifest", str(smoke.classification_manifest),
                "--out", str(tmp_path / "out"), "--endpoint", "http://x.invalid",
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "A1, A2, A3, A4, A5" in err

    def test_crop_chat_requires_chat_endpoint(self, smoke, tmp_path, capsys):
        code = _run(
            [
                "detect", "--variant", "crop-chat",
                "--manifest", str(smoke.detection_manifest),
                "--out", str(tmp_path / "out"), "--endpoint", "http://x.invalid",
            ]
        )
        assert code == 1
        assert "chat-endpoint" in capsys.readouterr().err

    def test_replay_conflicts_with_endpoint(self, smoke, tmp_path, capsys):
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A5", "--manifest", str(smoke.classification_manifest),
                "--out", str(tmp_path / "out"),
                "--endpoint", "http://x.invalid", "--replay", "store.jsonl",
            ]
        )
        assert code == 1
        capsys.readouterr()

    def test_unreachable_endpoint(self, smoke, tmp_path, capsys):
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A5", "--manifest", str(smoke.classification_manifest),
                "--out", str(tmp_path / "out"),
                "--endpoint", "http://127.0.0.1:1",
            ]
        )
        assert code == 1
        assert "unreachable" in capsys.readouterr().err


OUTPUT_FILES = ["report.csv", "report.md", "report.json", "results.jsonl", "run_config.json"]


class TestClassifyRuns:
    def test_similarity_live_run(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        out = tmp_path / "run"
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A5", "--manifest", str(smoke.classification_manifest),
                "--out", str(out), "--endpoint", url,
            ]
        )
        assert code == 0
        for name in OUTPUT_FILES:
            assert (out / name).is_file()
        csv = (out / "report.csv").read_text()
        assert csv.splitlines()[0] == "model,prompt,class,precision,recall,f1,time_per_image_s,source"
        assert "similarity,A5," in csv
        assert "DCNN,,,0.87,0.94,0.90,0.05,paper-reported" in csv
        payload = json.loads((out / "report.json").read_text())
        # fixture flips one positive and one negative
        assert payload["counts"] == {"tp": 5, "fp": 1, "fn": 1, "tn": 3, "unknown": 0}
        capsys.readouterr()

    def test_cascade_and_direct_runs(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        for pipeline, prompt in (("cascade", "P2-F2"), ("direct", "gpt-congestion")):
            out = tmp_path / pipeline
            code = _run(
                [
                    "classify", "--task", "congestion", "--pipeline", pipeline,
                    "--prompt", prompt, "--manifest", str(smoke.classification_manifest),
                    "--out", str(out), "--endpoint", url,
                ]
            )
            assert code == 0
            payload = json.loads((out / "report.json").read_text())
            assert payload["counts"]["tp"] == 5
        capsys.readouterr()

    def test_sample_failures_exit_two_but_write_report(
        self, smoke, served, tmp_path, image_factory, write_manifest, capsys
    ):
        url = served(smoke.fixture)
        # one image the fixture knows nothing about -> 404 -> sample failure
        stray = image_factory("stray.png", color=(250, 1, 2))
        manifest_lines = Path(smoke.classification_manifest).read_text().splitlines()
        smoke_dir = Path(smoke.classification_manifest).parent
        rows = ["path,label", f"{smoke_dir}/images/cls_00.png,congested", f"{stray},congested"]
        manifest = write_manifest("with_stray.csv", rows)
        out = tmp_path / "out"
        code = _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A5", "--manifest", manifest,
                "--out", str(out), "--endpoint", url,
            ]
        )
        assert code == 2
        assert (out / "report.csv").is_file()
        results = (out / "results.jsonl").read_text().splitlines()
        assert json.loads(results[1])["failure"] is not None
        capsys.readouterr()


class TestDetectRuns:
    def test_all_variants(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        for variant, extra in (
            ("postprocess", []),
            ("textual", []),
            ("crop-chat", ["--chat-endpoint", url]),
        ):
            out = tmp_path / variant
            code = _run(
                [
                    "detect", "--variant", variant,
                    "--manifest", str(smoke.detection_manifest),
                    "--out", str(out), "--endpoint", url, *extra,
                ]
            )
            assert code == 0, variant
            csv = (out / "report.csv").read_text()
            assert "YoloV8,,Helmet,0.99,0.98,0.98,0.14,paper-reported" in csv
            assert "YoloV8,,NoHelmet,0.96,0.90,0.93,0.14,paper-reported" in csv
        capsys.readouterr()

    def test_postprocess_scores_match_fixture_design(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        out = tmp_path / "pp"
        code = _run(
            [
                "detect", "--variant", "postprocess",
                "--manifest", str(smoke.detection_manifest),
                "--out", str(out), "--endpoint", url,
                "--assoc-metric", "iomin", "--assoc-thresh", "0.6",
            ]
        )
        assert code == 0
        payload = json.loads((out / "report.json").read_text())
        # scene 8 loses its helmet detection: Helmet 4 TP + 1 FN, NoHelmet 5 TP + 1 FP
        assert payload["counts"]["Helmet"] == {"tp": 4, "fp": 0, "fn": 1}
        assert payload["counts"]["NoHelmet"] == {"tp": 5, "fp": 1, "fn": 0}
        capsys.readouterr()

    def test_iou_metric_rejects_riders(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        out = tmp_path / "iou"
        code = _run(
            [
                "detect", "--variant", "postprocess",
                "--manifest", str(smoke.detection_manifest),
                "--out", str(out), "--endpoint", url, "--assoc-metric", "iou",
            ]
        )
        assert code == 0
        payload = json.loads((out / "report.json").read_text())
        # person/motorbike IoU in the smoke scenes stays below 0.6
        assert payload["counts"]["Helmet"] == {"tp": 0, "fp": 0, "fn": 5}
        capsys.readouterr()


class TestRecordReplay:
    def test_record_then_replay_byte_identical(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        store = tmp_path / "store.jsonl"
        out_record = tmp_path / "record"
        base = [
            "classify", "--task", "congestion", "--pipeline", "cascade",
            "--prompt", "P2-F2", "--manifest", str(smoke.classification_manifest),
        ]
        assert _run(base + ["--out", str(out_record), "--endpoint", url,
                            "--record", str(store)]) == 0
        for inflight in ("1", "4", "16"):
            out_replay = tmp_path / f"replay{inflight}"
            assert _run(base + ["--out", str(out_replay), "--replay", str(store),
                                "--max-inflight", inflight]) == 0
            for name in ("report.csv", "report.md", "results.jsonl"):
                assert (out_replay / name).read_bytes() == (out_record / name).read_bytes()
        capsys.readouterr()

    def test_two_replays_identical_dirs(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        store = tmp_path / "store.jsonl"
        base = [
            "detect", "--variant", "postprocess",
            "--manifest", str(smoke.detection_manifest),
        ]
        assert _run(base + ["--out", str(tmp_path / "rec"), "--endpoint", url,
                            "--record", str(store)]) == 0
        args_a = base + ["--out", str(tmp_path / "a"), "--replay", str(store)]
        args_b = base + ["--out", str(tmp_path / "b"), "--replay", str(store)]
        assert _run(args_a) == 0
        assert _run(args_b) == 0
        files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files_a == sorted(p.name for p in (tmp_path / "b").iterdir())
        for name in files_a:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        capsys.readouterr()


class TestInspect:
    def test_classification_summary(self, smoke, capsys):
        assert _run(["inspect", str(smoke.classification_manifest)]) == 0
        out = capsys.readouterr().out
        assert "10 samples, 6 positive, 4 negative" in out

    def test_detection_summary(self, smoke, capsys):
        assert _run(["inspect", str(smoke.detection_manifest)]) == 0
        out = capsys.readouterr().out
        assert "10 samples, 20 boxes" in out
        assert "motorbike 10" in out

    def test_empty_manifest_warns(self, write_manifest, capsys):
        manifest = write_manifest("empty.csv", ["path,label"])
        assert _run(["inspect", manifest]) == 0
        captured = capsys.readouterr()
        assert "0 samples" in captured.out
        assert "warning" in captured.err

    def test_missing_manifest_exits_one(self, tmp_path, capsys):
        assert _run(["inspect", str(tmp_path / "nope.csv")]) == 1
        capsys.readouterr()


class TestReportCommand:
    def test_regenerates_identical_reports(self, smoke, served, tmp_path, capsys):
        url = served(smoke.fixture)
        out = tmp_path / "run"
        assert _run(
            [
                "classify", "--task", "congestion", "--pipeline", "similarity",
                "--prompt", "A5", "--manifest", str(smoke.classification_manifest),
                "--out", str(out), "--endpoint", url,
            ]
        ) == 0
        before = {name: (out / name).read_bytes() for name in OUTPUT_FILES}
        assert _run(["report", str(out)]) == 0
        after = {name: (out / name).read_bytes() for name in OUTPUT_FILES}
        assert before == after
        capsys.readouterr()

    def test_not_a_run_dir(self, tmp_path, capsys):
        assert _run(["report", str(tmp_path)]) == 1
        capsys.readouterr()


def test_mock_serve_port_in_use(smoke, served, capsys):
    url = served(smoke.fixture)
    port = url.rsplit(":", 1)[1]
    code = _run(["mock-serve", "--fixture", str(smoke.fixture), "--port", port])
    assert code == 1
    assert "cannot bind" in capsys.readouterr().err
