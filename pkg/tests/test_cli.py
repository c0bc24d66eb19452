import csv
import json
import os

import pytest

from labelbridge import cli
from labelbridge.cli import build_parser, run

from conftest import FIXTURES

IDENTITY = os.path.join(FIXTURES, "identity_pairs.tsv")
TINY = ["--epochs", "2", "--batch-size", "8"]


def _files(d):
    return {name: (d / name).read_bytes() for name in sorted(os.listdir(d)) if (d / name).is_file()}


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run(["train", "--preset", "fixture", "--seed", "1", "--out", str(out)] + TINY) == 0
    return out


def test_grad_check_seed_7(capsys):
    assert run(["grad-check", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("worst relative error ")
    assert float(out.split()[3]) < 1e-4


def test_direct_map_identity(tmp_path, capsys):
    out = tmp_path / "map.tsv"
    assert run(["direct-map", "--pairs", IDENTITY, "--direction", "z2y", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert sorted(lines) == ["DET\tDET", "NOUN\tNOUN", "VERB\tVERB"]
    assert "1.000000" in capsys.readouterr().out


def test_missing_file_exit_3(tmp_path, capsys):
    missing = str(tmp_path / "nope.tsv")
    assert run(["direct-map", "--pairs", missing, "--out", str(tmp_path / "m.tsv")]) == 3
    assert missing in capsys.readouterr().err
    assert run(["train", "--y-train", missing, "--z-train", IDENTITY, "--val", IDENTITY,
                "--out", str(tmp_path / "r")]) == 3
    assert missing in capsys.readouterr().err
    assert run(["stats", "--y-corpus", missing, "--out", str(tmp_path / "s")]) == 3


def test_bad_flags_exit_2(capsys):
    assert run(["direct-map", "--pairs", IDENTITY]) == 2
    assert run(["grad-check", "--bogus"]) == 2
    assert run(["frobnicate"]) == 2
    assert run(["eval", "--checkpoint", "x", "--pairs", "y", "--variant", "best"]) == 2
    assert run([]) == 2


def test_parse_error_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tN\nb\n", encoding="utf-8")
    assert run(["direct-map", "--pairs", str(bad), "--out", str(tmp_path / "m.tsv")]) == 3
    assert f"{bad}:1" in capsys.readouterr().err


def _subparsers():
    parser = build_parser()
    action = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    return action.choices


def test_commands_present():
    assert set(_subparsers()) == {"gen-synth", "train", "train-supervised", "eval", "direct-map",
                                  "stats", "grad-check"}


@pytest.mark.parametrize("name", sorted(_subparsers()))
def test_help_documents_every_flag(name, capsys):
    sub = _subparsers()[name]
    text = sub.format_help()
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.option_strings and action.dest != "help":
            assert action.help, f"{name} {action.option_strings} lacks help"
    assert run([name, "--help"]) == 0


def test_report_outputs(fixture_run):
    summary = json.loads((fixture_run / "summary.json").read_text())
    assert set(summary) == {"Y", "Z"}
    for d in ("Y", "Z"):
        assert set(summary[d]) == {"ours", "supervisor_only", "no_label", "direct_map"}
        assert all(0.0 <= v <= 1.0 for v in summary[d].values())
    curves = _read_csv(fixture_run / "curves.csv")
    assert curves[0] == ["epoch", "series", "acc_Y", "acc_Z"]
    assert len(curves) - 1 == 2 * 3
    for side in ("Y", "Z"):
        rows = _read_csv(fixture_run / f"histogram_{side}.csv")[1:]
        assert abs(sum(float(r[2]) for r in rows) - 1.0) < 1e-9
    assert "optimistic" in (fixture_run / "summary_notes.txt").read_text()
    assert (fixture_run / "run.ini").exists()


def test_report_rejects_incomplete_run(tmp_path):
    from labelbridge.report import IncompleteRunError, emit_report

    with pytest.raises(IncompleteRunError):
        emit_report(tmp_path)
    (tmp_path / "metrics.csv").write_text("epoch,phase,dataset,variant,loss,accuracy\n"
                                          "1,val,Y,ours,,0.5\n")
    with pytest.raises(IncompleteRunError):
        emit_report(tmp_path)


def test_train_is_idempotent(fixture_run, tmp_path):
    assert run(["train", "--preset", "fixture", "--seed", "1", "--out", str(tmp_path)] + TINY) == 0
    assert _files(tmp_path) == _files(fixture_run)
    assert run(["train", "--preset", "fixture", "--seed", "1", "--out", str(tmp_path)] + TINY) == 0
    assert _files(tmp_path) == _files(fixture_run)


def test_gen_synth_idempotent_and_complete(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["gen-synth", "--preset", "fixture", "--seed", "3", "--out", str(a)]) == 0
    assert run(["gen-synth", "--preset", "fixture", "--seed", "3", "--out", str(b)]) == 0
    assert _files(a) == _files(b)
    assert set(_files(a)) >= {"d_y.tsv", "d_z.tsv", "val.tsv", "y_tags.txt", "z_tags.txt", "truth.ini", "oracle.json"}
    # the manifest regenerates the same corpus
    c = tmp_path / "c"
    assert run(["gen-synth", "--config", str(a / "truth.ini"), "--out", str(c)]) == 0
    for name in ("d_y.tsv", "d_z.tsv", "val.tsv"):
        assert (a / name).read_bytes() == (c / name).read_bytes()


def test_train_on_generated_files_and_eval(tmp_path, capsys):
    data = tmp_path / "data"
    assert run(["gen-synth", "--preset", "fixture", "--out", str(data)]) == 0
    out = tmp_path / "run"
    args = ["train", "--y-train", str(data / "d_y.tsv"), "--z-train", str(data / "d_z.tsv"),
            "--val", str(data / "val.tsv"), "--y-tagset", str(data / "y_tags.txt"),
            "--z-tagset", str(data / "z_tags.txt"), "--out", str(out)] + TINY
    assert run(args) == 0
    summary = json.loads((out / "summary.json").read_text())
    capsys.readouterr()
    preds = tmp_path / "pred.tsv"
    assert run(["eval", "--checkpoint", str(out / "checkpoint.bin"), "--pairs", str(data / "val.tsv"),
                "--variant", "translate", "--side", "y", "--out", str(preds)]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.split()[:2] == ["Y", "ours"]
    assert float(line.split()[2]) == pytest.approx(summary["Y"]["ours"], abs=1e-6)
    assert preds.exists()
    for variant in ("supervisor", "no-label"):
        assert run(["eval", "--checkpoint", str(out / "checkpoint.bin"), "--pairs", str(data / "val.tsv"),
                    "--variant", variant, "--side", "z"]) == 0


def test_train_supervised_and_stats(tmp_path, capsys):
    out = tmp_path / "sup"
    assert run(["train-supervised", "--preset", "fixture", "--side", "z", "--out", str(out)] + TINY) == 0
    assert "Z supervised" in capsys.readouterr().out
    assert (out / "metrics_supervised_z.csv").exists()
    s = tmp_path / "stats"
    assert run(["stats", "--y-corpus", os.path.join(FIXTURES, "tweebank_example.conllu"),
                "--z-corpus", os.path.join(FIXTURES, "ark_example.tsv"), "--pairs", IDENTITY,
                "--overlap", "--out", str(s)]) == 0
    assert "pairs=0" in capsys.readouterr().out
    rows = _read_csv(s / "histogram_z_corpus.csv")
    assert rows[1][:2] == ["Proper noun", "4"]


def test_config_unknown_key_exit_3(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[train]\nepochs = 1\nwarmup = 3\n", encoding="utf-8")
    assert run(["train", "--config", str(ini), "--preset", "fixture", "--out", str(tmp_path / "r")]) == 3
    assert "warmup" in capsys.readouterr().err
    ini.write_text("[schedule]\nepochs = 1\n", encoding="utf-8")
    assert run(["train", "--config", str(ini), "--preset", "fixture", "--out", str(tmp_path / "r")]) == 3


def test_config_missing_keys_print_notice(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[train]\nepochs = 1\nbatch_size = 8\n[data]\nsynth_preset = fixture\n", encoding="utf-8")
    assert run(["train", "--config", str(ini), "--out", str(tmp_path / "r")]) == 0
    err = capsys.readouterr().err
    assert "notice: [model] dim not set" in err
    assert "epochs not set" not in err


def test_cheat_flag_runs(tmp_path):
    out = tmp_path / "cheat"
    assert run(["train", "--preset", "fixture", "--cheat", "--out", str(out)] + TINY) == 0
    assert json.loads((out / "run_config.json").read_text())["cheat"] is True


def test_resume_missing_checkpoint(tmp_path, capsys):
    assert run(["train", "--preset", "fixture", "--resume", str(tmp_path / "none.bin"),
                "--out", str(tmp_path / "r")] + TINY) == 3


def test_numeric_failure_exit_4(tmp_path, monkeypatch, capsys):
    import labelbridge.checks

    monkeypatch.setattr(labelbridge.checks, "run_all", lambda seed: {"op/x": 3e-3})
    assert run(["grad-check"]) == 4
    from labelbridge.substrate.tensor import NonFiniteError

    def boom(*a, **k):
        raise NonFiniteError("epoch 1 batch 0: non-finite loss")

    monkeypatch.setattr("labelbridge.trainer.train", boom)
    assert run(["train", "--preset", "fixture", "--out", str(tmp_path / "r")] + TINY) == 4
    assert "batch 0" in capsys.readouterr().err


def test_module_entry_point():
    assert callable(cli.main)
