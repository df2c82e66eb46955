from __future__ import annotations

import json

import pytest

from choir.cli import main
from choir.persona import (
    DemographicAttribute,
    PersonaTemplate,
    dump_persona_file,
    expand_template,
)
from qa_fixture import QuestionScript, build_qa_fixture

TEMPLATE = PersonaTemplate(
    id="gender_worker",
    attribute=DemographicAttribute(name="gender", terms=("he", "she", "they")),
    variants={
        "he": "a worker planning his day",
        "she": "a worker planning her day",
        "they": "a worker planning their day",
    },
)
GROUP = expand_template(TEMPLATE)
QUESTIONS = [
    QuestionScript(id="q1", question="How many apples?", gold="42", zscot_answer="42"),
    QuestionScript(id="q2", question="How many pears?", gold="7", zscot_answer="8"),
]


@pytest.fixture()
def workspace(tmp_path):
    fixture_path = tmp_path / "fixture.json"
    fixture_path.write_text(json.dumps(build_qa_fixture(QUESTIONS, GROUP)), encoding="utf-8")
    dataset_path = tmp_path / "dataset.jsonl"
    with dataset_path.open("w") as fh:
        for q in QUESTIONS:
            fh.write(
                json.dumps(
                    {"id": q.id, "question": q.question, "gold": q.gold, "format": "arabic_number"}
                )
                + "\n"
            )
    personas_path = tmp_path / "personas.jsonl"
    dump_persona_file([TEMPLATE], personas_path)
    return tmp_path, fixture_path, dataset_path, personas_path


def _run_args(ws, out_name, extra=()):
    tmp_path, fixture, dataset, personas = ws
    return [
        "run",
        "--backend",
        f"scripted:{fixture}",
        "--dataset",
        str(dataset),
        "--personas",
        str(personas),
        "--method",
        "choir",
        "--seed",
        "7",
        "--max-tokens",
        "16",
        "--out",
        str(tmp_path / out_name),
        *extra,
    ]


def test_cmd_run_writes_expected_artifacts(workspace, capsys):
    tmp_path = workspace[0]
    assert main(_run_args(workspace, "out", ["--trace"])) == 0
    out = tmp_path / "out"
    assert (out / "manifest.json").exists()
    assert (out / "records.jsonl").exists()
    assert (out / "summary.json").exists()
    assert (out / "summary.csv").exists()
    traces = sorted(p.name for p in (out / "traces").iterdir())
    assert traces == ["choir.gender_worker.q1.jsonl", "choir.gender_worker.q2.jsonl"]
    step = json.loads((out / "traces" / traces[0]).read_text().splitlines()[0])
    assert set(step) == {
        "step",
        "confidences",
        "consensus",
        "divergences",
        "weights",
        "chosen_token",
        "fused_max_prob",
    }
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["method"] == "choir"
    assert manifest["config"]["timing"] == "simulated"
    assert "accuracy" in capsys.readouterr().out


def test_cmd_run_byte_identical_reruns(workspace):
    tmp_path = workspace[0]
    names = ("manifest.json", "records.jsonl", "summary.json", "summary.csv")
    args = _run_args(workspace, "twice", ["--repetitions", "2"])
    assert main(args) == 0
    first = {name: (tmp_path / "twice" / name).read_bytes() for name in names}
    assert main(args) == 0
    for name in names:
        assert (tmp_path / "twice" / name).read_bytes() == first[name], name


def test_cmd_run_unknown_method_lists_valid_ones(workspace, capsys):
    args = _run_args(workspace, "out")
    args[args.index("choir")] = "mystery"
    assert main(args) == 2
    err = capsys.readouterr().err
    assert "mystery" in err
    assert "zscot" in err and "choir_sc" in err


def test_cmd_run_reports_all_config_errors_at_once(workspace, capsys):
    tmp_path = workspace[0]
    code = main(
        [
            "run",
            "--backend",
            "scripted:/does/not/exist.json",
            "--dataset",
            "/missing/data.jsonl",
            "--method",
            "mystery",
            "--out",
            str(tmp_path / "x"),
        ]
    )
    assert code == 2
    err = capsys.readouterr().err
    assert err.count("error:") >= 3


def test_cmd_run_repetitions_summary(workspace):
    tmp_path = workspace[0]
    assert main(_run_args(workspace, "reps", ["--repetitions", "3"])) == 0
    summary = json.loads((tmp_path / "reps" / "summary.json").read_text())
    assert len(summary["repetitions"]["accuracies"]) == 3
    assert "mean" in summary["repetitions"] and "std" in summary["repetitions"]


def test_config_file_with_flag_override(workspace, tmp_path_factory):
    tmp_path, fixture, dataset, personas = workspace
    config = {
        "backend": f"scripted:{fixture}",
        "dataset": str(dataset),
        "personas": str(personas),
        "method": "zscot",
        "max_tokens": 16,
        "out": str(tmp_path / "cfg_out"),
    }
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(config))
    assert main(["run", "--config", str(cfg), "--method", "choir"]) == 0
    manifest = json.loads((tmp_path / "cfg_out" / "manifest.json").read_text())
    assert manifest["config"]["method"] == "choir"  # flag overrides file


def test_cmd_sweep_writes_curve(workspace, capsys):
    tmp_path, fixture, dataset, personas = workspace
    args = [
        "sweep",
        "--backend",
        f"scripted:{fixture}",
        "--dataset",
        str(dataset),
        "--personas",
        str(personas),
        "--max-tokens",
        "16",
        "--lambda0",
        "0,1,2,3,4",
        "--out",
        str(tmp_path / "sweep"),
    ]
    assert main(args) == 0
    points = json.loads((tmp_path / "sweep" / "sweep.json").read_text())
    assert [p["lambda0"] for p in points] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert (tmp_path / "sweep" / "sweep.csv").read_text().startswith("lambda0,accuracy\n")


def test_cmd_sweep_empty_values_is_usage_error(workspace, capsys):
    tmp_path, fixture, dataset, personas = workspace
    args = [
        "sweep",
        "--backend",
        f"scripted:{fixture}",
        "--dataset",
        str(dataset),
        "--personas",
        str(personas),
        "--lambda0",
        "",
        "--out",
        str(tmp_path / "sweep2"),
    ]
    assert main(args) == 2
    assert "lambda0" in capsys.readouterr().err


def test_cmd_overlap_of_file_against_itself(workspace, capsys, tmp_path):
    assert main(_run_args(workspace, "ovl")) == 0
    records = workspace[0] / "ovl" / "records.jsonl"
    out = tmp_path / "overlap.json"
    assert main(["overlap", str(records), str(records), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["only_a"] == 0 and report["only_b"] == 0
    assert report["both"] + report["neither"] == report["total"]


def test_cmd_overlap_mismatched_inputs_fail(workspace, capsys, tmp_path):
    assert main(_run_args(workspace, "ovl2")) == 0
    records = workspace[0] / "ovl2" / "records.jsonl"
    truncated = tmp_path / "short.jsonl"
    truncated.write_text(records.read_text().splitlines()[0] + "\n")
    assert main(["overlap", str(records), str(truncated)]) == 1
    assert "q2" in capsys.readouterr().err


def test_cmd_check_healthy_backend(workspace, capsys):
    _, fixture, _, _ = workspace
    assert main(["check", "--backend", f"scripted:{fixture}"]) == 0
    out = capsys.readouterr().out
    assert "vocab_size: 12" in out
    assert "eos_token_id: 11" in out


def test_cmd_check_unreachable_remote(capsys):
    assert main(["check", "--backend", "remote:http://127.0.0.1:1"]) == 1
    assert "check failed" in capsys.readouterr().err


def test_cmd_check_rejects_missing_backend(capsys):
    assert main(["check"]) == 2
