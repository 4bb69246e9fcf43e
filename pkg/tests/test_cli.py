import numpy as np
import pytest

from mixtgformer import tensor as tc
from mixtgformer.checkpoint import load_checkpoint, save_checkpoint
from mixtgformer.cli import main
from mixtgformer.config import parse_kv
from mixtgformer.model import init_params
from mixtgformer.skeleton import load_sequence
from mixtgformer.training import evaluate_params, train_loop

from helpers import TOY, symmetric_params, trace_rows


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(out), "--count", "2", "--frames", "4", "--noise", "1.5"]) == 0
    return out


@pytest.fixture
def toy_config(tmp_path):
    path = tmp_path / "toy.cfg"
    path.write_text(TOY.to_text(), encoding="utf-8")
    return path


def pairs_of(data):
    names = sorted(p.name[:-len("_input2d.mtgf")] for p in data.glob("*_input2d.mtgf"))
    return [(load_sequence(data / f"{n}_input2d.mtgf"), load_sequence(data / f"{n}_gt3d.mtgf"))
            for n in names]


def report_values(text):
    return {k: float(v) for k, v in parse_kv("\n".join(
        line for line in text.splitlines() if " = " in line)).items()}


# synth

def test_synth_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / name), "--seed", "4", "--count", "3"]) == 0
    files = sorted(p.name for p in (tmp_path / "a").glob("*.mtgf"))
    assert len(files) == 6
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_zero_count_writes_manifest_only(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--count", "0"]) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.txt"]
    manifest = parse_kv((tmp_path / "manifest.txt").read_text())
    assert manifest["command"] == "synth" and "build_id" in manifest and "duration_s" in manifest


def test_synth_long_sequence_file_size(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--count", "1", "--frames", "243"]) == 0
    for kind in ("input2d", "gt3d"):
        assert (tmp_path / f"seq_0000_{kind}.mtgf").stat().st_size == 20 + 243 * 17 * 3 * 8


def test_synth_unwritable_path(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["synth", "--out", str(blocker / "sub")]) == 2
    assert "cannot" in capsys.readouterr().err


def test_bad_flags_exit_2():
    assert main(["synth"]) == 2
    assert main(["nonsense"]) == 2


# gradcheck

def test_gradcheck_default_passes(capsys):
    assert main(["gradcheck", "--max-coords", "3"]) == 0
    out = capsys.readouterr().out
    assert "full_model" in out and "mixformer_layer" in out


def test_gradcheck_zero_tolerance_fails():
    assert main(["gradcheck", "--tolerance", "0", "--max-coords", "2"]) == 1


def test_gradcheck_names_corrupted_rule(monkeypatch, capsys):
    real = tc._softmax_grad
    monkeypatch.setattr(tc, "_softmax_grad", lambda y, g: real(y, g) * 1.1)
    assert main(["gradcheck", "--max-coords", "3"]) == 1
    failing = capsys.readouterr().out.splitlines()[-1]
    assert "softmax_lastdim" in failing and "masked_softmax" in failing
    assert "layer_norm" not in failing


# train

def test_train_writes_outputs_and_is_deterministic(tmp_path, data, toy_config):
    for name in ("a", "b"):
        args = ["train", "--config", str(toy_config), "--data", str(data), "--steps", "5",
                "--out", str(tmp_path / f"{name}.mtgc")]
        assert main(args) == 0
    a = (tmp_path / "a.mtgc.loss.txt").read_text()
    assert a == (tmp_path / "b.mtgc.loss.txt").read_text()
    rows = trace_rows(a)
    assert [r[0] for r in rows] == [0, 1, 2, 3, 4] and all(len(r) == 4 for r in rows)
    assert all(abs(r[3] - (r[1] + TOY.delta_weight * r[2])) < 1e-9 * r[3] for r in rows)
    manifest = parse_kv((tmp_path / "a.mtgc.manifest.txt").read_text())
    assert manifest["config.dim"] == str(TOY.dim) and manifest["command"] == "train"
    assert (tmp_path / "a.mtgc").read_bytes() == (tmp_path / "b.mtgc").read_bytes()


def test_train_trace_matches_library(tmp_path, data, toy_config):
    assert main(["train", "--config", str(toy_config), "--data", str(data), "--steps", "3",
                 "--out", str(tmp_path / "m.mtgc")]) == 0
    lib = train_loop(pairs_of(data), TOY, 3).trace
    rows = trace_rows((tmp_path / "m.mtgc.loss.txt").read_text())
    assert rows == [(r.step, r.position, r.delta, r.total) for r in lib]


def test_train_zero_steps_is_initialization(tmp_path, data, toy_config):
    assert main(["train", "--config", str(toy_config), "--data", str(data), "--steps", "0",
                 "--out", str(tmp_path / "m.mtgc")]) == 0
    _, params = load_checkpoint(tmp_path / "m.mtgc")
    for (_, a), (_, b) in zip(params.named_tensors(), init_params(TOY).named_tensors()):
        assert np.array_equal(a.data, b.data)


def test_train_missing_data(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "m")]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["train", "--data", str(empty), "--out", str(tmp_path / "m")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_nan_exits_3(tmp_path, data, capsys):
    cfg = tmp_path / "hot.cfg"
    cfg.write_text(TOY.replace(lr=1e300).to_text())
    assert main(["train", "--config", str(cfg), "--data", str(data), "--steps", "4",
                 "--out", str(tmp_path / "m.mtgc")]) == 3
    assert "last finite step" in capsys.readouterr().err
    assert not (tmp_path / "m.mtgc").exists()


# eval

def test_eval_oracle_mode(data, capsys):
    assert main(["eval", "--oracle", "--data", str(data)]) == 0
    values = report_values(capsys.readouterr().out)
    assert values["mpjpe"] == 0.0 and values["pck150"] == 100.0 and values["auc"] == 100.0
    assert values["p_mpjpe"] < 1e-9


def test_eval_matches_metric_module(tmp_path, data, capsys):
    params = init_params(TOY, seed=9)
    save_checkpoint(tmp_path / "m.mtgc", TOY, params)
    assert main(["eval", "--checkpoint", str(tmp_path / "m.mtgc"), "--data", str(data),
                 "--out", str(tmp_path / "report.txt")]) == 0
    values = report_values(capsys.readouterr().out)
    ref = evaluate_params(pairs_of(data), params, TOY).as_dict()
    assert values == ref
    assert (tmp_path / "report.txt.manifest.txt").exists()
    assert report_values((tmp_path / "report.txt").read_text()) == ref


def test_eval_flip_on_symmetric_model(tmp_path, data, capsys):
    save_checkpoint(tmp_path / "sym.mtgc", TOY, symmetric_params(TOY))
    base = ["eval", "--checkpoint", str(tmp_path / "sym.mtgc"), "--data", str(data)]
    assert main(base) == 0
    plain = report_values(capsys.readouterr().out)
    assert main(base + ["--flip"]) == 0
    flipped = report_values(capsys.readouterr().out)
    assert all(abs(plain[k] - flipped[k]) < 1e-9 for k in plain)


def test_eval_rigid_flag(tmp_path, data, capsys):
    save_checkpoint(tmp_path / "m.mtgc", TOY, init_params(TOY))
    assert main(["eval", "--checkpoint", str(tmp_path / "m.mtgc"), "--data", str(data),
                 "--rigid"]) == 0
    rigid = report_values(capsys.readouterr().out)
    assert rigid == evaluate_params(pairs_of(data), init_params(TOY), TOY, scale=False).as_dict()


def test_eval_mismatch_names_field(tmp_path, data, capsys):
    config = TOY.replace(frames=3)
    save_checkpoint(tmp_path / "m.mtgc", config, init_params(config))
    assert main(["eval", "--checkpoint", str(tmp_path / "m.mtgc"), "--data", str(data)]) == 2
    assert "frames" in capsys.readouterr().err


def test_eval_bad_checkpoint(tmp_path, data, capsys):
    (tmp_path / "bad.mtgc").write_bytes(b"MTGC\x01\x00")
    assert main(["eval", "--checkpoint", str(tmp_path / "bad.mtgc"), "--data", str(data)]) == 2
    assert "offset" in capsys.readouterr().err


# ablate

def test_ablate_single_row_equals_train_plus_eval(tmp_path, data, toy_config, capsys):
    assert main(["ablate", "--grid", "se_position=none", "--data", str(data), "--steps", "3",
                 "--config", str(toy_config), "--out", str(tmp_path / "abl")]) == 0
    row = capsys.readouterr().out.splitlines()[1].split()
    assert row[0] == "se_position=none"
    # the train config carries the toggle the grid row applied
    cfg = tmp_path / "none.cfg"
    cfg.write_text(TOY.replace(se_position="none").to_text())
    assert main(["train", "--config", str(cfg), "--data", str(data), "--steps", "3",
                 "--out", str(tmp_path / "n.mtgc")]) == 0
    last = trace_rows((tmp_path / "n.mtgc.loss.txt").read_text())[-1]
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(tmp_path / "n.mtgc"), "--data", str(data)]) == 0
    ev = report_values(capsys.readouterr().out)
    expected = [f"{last[1]:.3f}", f"{last[2]:.3f}", f"{last[3]:.3f}", f"{ev['mpjpe']:.3f}",
                f"{ev['p_mpjpe']:.3f}", f"{ev['pck150']:.2f}", f"{ev['auc']:.2f}"]
    assert row[1:] == expected
    assert (tmp_path / "abl" / "manifest.txt").exists()
    assert len((tmp_path / "abl" / "ablation.txt").read_text().splitlines()) == 2


def test_ablate_invalid_toggle(data, capsys):
    assert main(["ablate", "--grid", "stream_order=zigzag", "--data", str(data)]) == 2
    assert "valid values: st_ts" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_ablate_names_failing_variant(tmp_path, data, capsys):
    cfg = tmp_path / "hot.cfg"
    cfg.write_text(TOY.replace(lr=1e300).to_text())
    assert main(["ablate", "--grid", "table6", "--data", str(data), "--steps", "3",
                 "--config", str(cfg)]) == 3
    assert "table6/embedding_mode=temporal" in capsys.readouterr().err
