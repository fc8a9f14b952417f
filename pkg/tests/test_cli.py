import csv
import json
from pathlib import Path

import pytest

from omnichain.cli import main
from omnichain.core import Trace

TINY = Path(__file__).resolve().parent.parent / "fixtures" / "tiny"
CONFIG = str(TINY / "config.yaml")
RULES = str(TINY / "mock_rules.json")
MANIFEST = str(TINY / "manifest.jsonl")

# Hand count over the fixture rules: t00 interleaved ends on video (No), t01 is
# analytical so decide hits the default (Yes), t02 falls back to audio->video
# (No), everything else plans video->audio and ends on audio (Yes).
EXPECTED = {"t00": "No", "t01": "Yes", "t02": "No", **{f"t{i:02d}": "Yes" for i in range(3, 12)}}
GOLD = {f"t{i:02d}": ("Yes" if i % 3 else "No") for i in range(12)}


def read_csv(path):
    return list(csv.DictReader(open(path)))


@pytest.fixture
def media(tmp_path):
    a, v = tmp_path / "clip.wav", tmp_path / "clip.mp4"
    a.touch()
    v.touch()
    return a, v


def test_infer_fallback_override(media, capsys):
    a, v = media
    argv = ["infer", "--backend", RULES, "--query", "Is it loud?", "--option", "Yes", "--option", "No",
            "--audio", str(a), "--audio-duration", "8", "--video", str(v), "--video-duration", "8",
            "--timestamps", "1,3,5,7", "--plan-override", "fallback"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    out = json.loads(first)
    assert out["plan"]["provenance"] == "fallback"
    assert out["answer"]["choice"] == "No"  # audio -> video ends on video


def test_infer_missing_media_names_path(tmp_path, capsys):
    gone = tmp_path / "nowhere.wav"
    code = main(["infer", "--backend", RULES, "--query", "q?", "--audio", str(gone), "--audio-duration", "1"])
    assert code == 2
    assert str(gone) in capsys.readouterr().err


def test_infer_emit_trace(media, tmp_path, capsys):
    a, _ = media
    trace = tmp_path / "t.jsonl"
    assert main(["infer", "--backend", RULES, "--query", "q?", "--audio", str(a), "--audio-duration", "2",
                 "--emit-trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert len(lines) == 1
    assert Trace.from_dict(json.loads(lines[0])).ok


def test_infer_query_file(tmp_path, capsys):
    rec = json.loads(Path(MANIFEST).read_text().splitlines()[3])
    p = TINY / "manifest.jsonl"
    qf = tmp_path / "q.json"
    rec["audio"]["path"] = str(TINY / rec["audio"]["path"])
    rec["video"]["path"] = str(TINY / rec["video"]["path"])
    qf.write_text(json.dumps(rec))
    assert p.exists()
    assert main(["infer", "--config", CONFIG, "--query-file", str(qf)]) == 0
    assert json.loads(capsys.readouterr().out)["answer"]["choice"] == "Yes"


def test_infer_bad_override_is_data_error(media, capsys):
    a, _ = media
    bad = '{"task":"temporal","pathway":"intuitive","modalities":["audio"],"format":"interleaved"}'
    assert main(["infer", "--backend", RULES, "--query", "q?", "--audio", str(a), "--audio-duration", "2",
                 "--plan-override", bad]) == 2
    assert "Interleaved requires Audio and Video" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["infer", "--backend", RULES]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["infer", "--policy", "chaotic"])
    assert exc.value.code == 1


def test_backend_failure_exit_code(media, tmp_path, capsys):
    a, _ = media
    cfg = tmp_path / "http.json"
    cfg.write_text(json.dumps({"kind": "http", "endpoint": "http://127.0.0.1:9/v1", "model": "m",
                               "retries": 0, "timeout": 1, "warmup_calls": 0}))
    code = main(["infer", "--backend", str(cfg), "--query", "q?", "--audio", str(a), "--audio-duration", "2"])
    assert code == 3


def test_eval_hand_count(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["eval", MANIFEST, "--config", CONFIG, "--out", str(out)]) == 0
    (row,) = read_csv(out / "accuracy.csv")
    want = sum(EXPECTED[k] == GOLD[k] for k in GOLD)
    assert want == 8
    assert row["mode"] == "CoM" and int(row["correct"]) == want
    assert float(row["accuracy"]) == pytest.approx(want / 12)
    traces = [Trace.from_dict(json.loads(x)) for x in (out / "traces.jsonl").read_text().splitlines()]
    assert {t.query_id: t.answer.choice for t in traces} == EXPECTED
    for name in ("accuracy.md", "latency.csv", "latency.md", "latency.png"):
        assert (out / name).exists()


def test_eval_ablate_and_permute(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["eval", MANIFEST, "--config", CONFIG, "--out", str(out), "--ablate",
                 "--permute", "A,V", "V,A"]) == 0
    modes = [r["mode"] for r in read_csv(out / "accuracy.csv")]
    assert modes == ["CoM", "AudioOnly", "VisualOnly"]
    (conf,) = read_csv(out / "conflict.csv")
    # audio-only ends on audio (Yes), visual-only on video (No): every record conflicts.
    assert int(conf["n_conflict"]) == 12
    yes = sum(v == "Yes" for v in EXPECTED.values())
    assert float(conf["align_a"]) == pytest.approx(yes / 12)
    assert float(conf["align_v"]) == pytest.approx(1 - yes / 12)
    perm = read_csv(out / "permutation.csv")
    assert [r["order"] for r in perm] == ["audio -> video", "video -> audio"]
    assert (out / "permutation.png").exists()
    printed = capsys.readouterr().out.split()
    assert str(out / "conflict.csv") in printed


def test_eval_fixed_mode(tmp_path):
    out = tmp_path / "r"
    assert main(["eval", MANIFEST, "--config", CONFIG, "--out", str(out), "--mode", "fixed",
                 "--order", "video,audio", "--format", "sequential"]) == 0
    (row,) = read_csv(out / "accuracy.csv")
    assert float(row["accuracy"]) == pytest.approx(8 / 12)


def test_eval_missing_manifest(tmp_path, capsys):
    assert main(["eval", str(tmp_path / "none.jsonl"), "--config", CONFIG]) == 2


def test_eval_missing_media(tmp_path, capsys):
    m = tmp_path / "m.jsonl"
    m.write_text(json.dumps({"id": "x", "query": "q", "options": ["Yes", "No"], "gold": "Yes",
                             "audio": {"path": "gone.wav", "duration": 1}}) + "\n")
    assert main(["eval", str(m), "--backend", RULES]) == 2
    assert "gone.wav" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", MANIFEST, "--config", CONFIG, "--out", str(out), "--densities", "1,2,4"]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [r["series"] for r in rows] == ["sequential", "interleaved", "interleaved", "interleaved"]
    assert (out / "sweep.png").read_bytes()[:4] == b"\x89PNG"
    assert main(["sweep", MANIFEST, "--config", CONFIG, "--densities", "0"]) == 1


def test_export(tmp_path, capsys):
    out = tmp_path / "r"
    main(["eval", MANIFEST, "--config", CONFIG, "--out", str(out)])
    dst = tmp_path / "traj.jsonl"
    assert main(["export", str(out / "traces.jsonl"), "--manifest", MANIFEST, "--out", str(dst)]) == 0
    recs = [json.loads(x) for x in dst.read_text().splitlines()]
    assert len(recs) == 12
    by_id = {r["id"]: r for r in recs}
    assert "reason" in by_id["t01"] and "reason" not in by_id["t00"]
    assert by_id["t05"]["query"]["gold"] == "Yes"


def test_config_env_interpolation(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"backend": "${RULES_PATH}"}))
    assert main(["eval", MANIFEST, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    monkeypatch.setenv("RULES_PATH", RULES)
    assert main(["eval", MANIFEST, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
