import argparse
import subprocess
import sys

import numpy as np
import pytest

from wavediff.audio import SyntheticSpec, read_wav, synth_pair, write_wav
from wavediff.cli import build_parser, main
from wavediff.formats import read_packet_header
from wavediff.pipeline import RunConfig, save_config
from wavediff.wavelets import Waveform


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def wav16k(tmp_path, rng):
    x = rng.uniform(-0.9, 0.9, 16000).astype(np.float32).astype(np.float64)
    path = tmp_path / "in.wav"
    write_wav(Waveform(x, 16000), path)
    return path


@pytest.mark.parametrize("basis", ["haar", "db2", "cdf53"])
def test_dwt_idwt_roundtrip_is_byte_identical(basis, wav16k, tmp_path):
    pk, out = tmp_path / "x.pkt", tmp_path / "out.wav"
    assert run(["dwt", str(wav16k), str(pk), "--basis", basis, "--levels", "2"]) == 0
    assert run(["idwt", str(pk), str(out)]) == 0
    assert out.read_bytes() == wav16k.read_bytes()


def test_dwt_header_shape(wav16k, tmp_path):
    pk = tmp_path / "x.pkt"
    assert run(["dwt", str(wav16k), str(pk), "--basis", "cdf53", "--levels", "2"]) == 0
    h = read_packet_header(pk)
    assert (h["channels"], h["frames"], h["basis"]) == (4, 4000, "cdf53")


def test_idwt_pcm16(wav16k, tmp_path):
    pk, out = tmp_path / "x.pkt", tmp_path / "o.wav"
    run(["dwt", str(wav16k), str(pk)])
    assert run(["idwt", str(pk), str(out), "--format", "pcm16"]) == 0
    assert np.max(np.abs(read_wav(out).samples - read_wav(wav16k).samples)) <= 1 / 32768


def test_unknown_basis_exit_2(wav16k, tmp_path, capsys):
    assert run(["dwt", str(wav16k), str(tmp_path / "x.pkt"), "--basis", "db9"]) == 2
    err = capsys.readouterr().err
    assert "db9" in err and "haar" in err and "cdf53" in err


def test_io_errors_exit_1(tmp_path, capsys):
    assert run(["dwt", str(tmp_path / "missing.wav"), str(tmp_path / "x.pkt")]) == 1
    bad = tmp_path / "bad.pkt"
    bad.write_bytes(b"nope")
    assert run(["idwt", str(bad), str(tmp_path / "o.wav")]) == 1
    assert "error" in capsys.readouterr().err


def test_signal_too_short_exit_1(tmp_path):
    path = tmp_path / "short.wav"
    write_wav(Waveform(np.zeros(3)), path)
    assert run(["dwt", str(path), str(tmp_path / "x.pkt"), "--levels", "2"]) == 1


def test_train_missing_config_exit_1(tmp_path, capsys):
    assert run(["train", "--config", str(tmp_path / "c.cfg")]) == 1
    assert "c.cfg" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("not_a_key = 3\n")
    assert run(["train", "--config", str(cfg)]) == 1


def test_schedule_dump(capsys):
    assert run(["schedule-dump", "--T", "50"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    rows = lines[1:]
    assert len(rows) == 50
    t, beta = rows[0].split()[:2]
    assert t == "1" and float(beta) == pytest.approx(1e-4, rel=1e-7)
    assert rows[-1].split()[3] == "1"


def test_schedule_dump_invalid_schedule_exit_2():
    assert run(["schedule-dump", "--T", "5"]) == 2


def test_bench_compare_records(capsys):
    assert run(["bench", "--compare", "raw,wavelet,multilevel"]) == 0
    out = capsys.readouterr().out
    summary = {}
    for line in out.splitlines():
        if line.startswith("kind=mac_summary"):
            d = dict(tok.split("=", 1) for tok in line.split())
            summary[d["config"]] = int(d["first_per_channel"])
    assert 2 * summary["wavelet"] == summary["raw"]
    assert 4 * summary["multilevel"] == summary["raw"]


def test_bench_timing_to_file(tmp_path, capsys):
    rec = tmp_path / "r.txt"
    assert run(["bench", "--compare", "wavelet", "--samples", "512", "--timing", "--reps", "1",
                "--warmup", "0", "--T", "2", "--records", str(rec)]) == 0
    lines = rec.read_text().splitlines()
    assert any(l.startswith("kind=train_step") for l in lines)
    assert any(l.startswith("kind=sampling") for l in lines)
    assert "RTF" in capsys.readouterr().out


def test_bench_unknown_config_exit_2():
    assert run(["bench", "--compare", "raw,quantum"]) == 2


def test_train_generate_enhance(tmp_path, capsys):
    cfg = tmp_path / "syn.cfg"
    save_config(RunConfig(segment=256, n_clips=2, steps=3, batch_size=2, T=4, residual=8,
                          checkpoint=str(tmp_path / "m.ckpt"), loss_trace=str(tmp_path / "l.txt")), cfg)
    assert run(["train", "--config", str(cfg), "--steps", "2"]) == 0
    assert "steps=2" in capsys.readouterr().out
    assert len((tmp_path / "l.txt").read_text().splitlines()) == 2
    outs = []
    for name in ("a.wav", "b.wav"):
        assert run(["generate", "--config", str(cfg), "--checkpoint", str(tmp_path / "m.ckpt"),
                    "--output", str(tmp_path / name), "--length", "1000", "--seed", "5"]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    assert read_wav(tmp_path / "a.wav").samples.size == 1000

    ecfg = tmp_path / "enh.cfg"
    save_config(RunConfig(mode="enhancement", segment=256, n_clips=2, steps=2, batch_size=2, T=4,
                          beta_end=0.6, residual=8, checkpoint=str(tmp_path / "e.ckpt"),
                          loss_trace=""), ecfg)
    assert run(["train", "--config", str(ecfg)]) == 0
    noisy = tmp_path / "noisy.wav"
    write_wav(synth_pair(SyntheticSpec(duration=0.03))[1], noisy)
    assert run(["enhance", "--config", str(ecfg), "--checkpoint", str(tmp_path / "e.ckpt"),
                "--input", str(noisy), "--output", str(tmp_path / "clean.wav")]) == 0
    assert read_wav(tmp_path / "clean.wav").samples.size == read_wav(noisy).samples.size
    # synthesis checkpoint under the enhancement config
    assert run(["enhance", "--config", str(ecfg), "--checkpoint", str(tmp_path / "m.ckpt"),
                "--input", str(noisy), "--output", str(tmp_path / "x.wav")]) == 1


def test_every_flag_has_help():
    parser = build_parser()
    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)][0]
    for name, sp in subs.choices.items():
        for action in sp._actions:
            if isinstance(action, argparse._HelpAction):
                continue
            assert action.help, f"{name}: {action.dest} has no help"
        text = sp.format_help()
        for action in sp._actions:
            for opt in action.option_strings:
                assert opt in text


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "wavediff.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("dwt", "idwt", "train", "generate", "enhance", "bench", "schedule-dump"):
        assert cmd in r.stdout
