import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from xxzdroplet.correlators import CorrelatorRecord
from xxzdroplet.exceptions import SchemaError
from xxzdroplet.harness import (
    RunManifest,
    load_config,
    main,
    parse_range,
    read_records,
    validate_config,
    write_records,
)
from xxzdroplet.spectral import droplet_band


def _records(n, seed=0):
    rng = np.random.default_rng(seed)
    return [CorrelatorRecord(int(rng.integers(0, 2**31)), int(rng.integers(0, 5)),
                             int(rng.integers(-20, 21)), int(rng.integers(-20, 21)),
                             float(rng.uniform(0, 100)), float(rng.exponential() * 10.0 ** -rng.integers(0, 30)))
            for _ in range(n)]


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_correlator_round_trip(tmp_path, fmt):
    recs = _records(10_000)
    path = write_records(recs, tmp_path / f"c.{fmt}", "correlator")
    back = read_records(path, "correlator")
    assert back == recs


@given(st.lists(st.tuples(st.integers(0, 100), st.floats(allow_nan=False, allow_infinity=False),
                          st.floats(0, 1e3), st.integers(1, 10**6)), max_size=20))
def test_decay_round_trip_exact(rows):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        path = write_records(rows, Path(d) / "decay.csv", "decay")
        assert read_records(path, "decay") == [tuple(r) for r in rows]


def test_spectrum_booleans_round_trip(tmp_path):
    rows = [(0, 0.5, True), (1, 0.75, False)]
    for fmt in ("csv", "json"):
        p = write_records(rows, tmp_path / f"s.{fmt}", "spectrum")
        assert read_records(p, "spectrum") == rows


def test_corrupted_files_raise(tmp_path):
    recs = _records(5)
    path = write_records(recs, tmp_path / "c.csv", "correlator")
    lines = path.read_text().splitlines()
    bad_value = lines[:3] + [lines[3].replace(lines[3].split(",")[-1], "oops")] + lines[4:]
    (tmp_path / "v.csv").write_text("\n".join(bad_value) + "\n")
    with pytest.raises(SchemaError):
        read_records(tmp_path / "v.csv", "correlator")
    (tmp_path / "h.csv").write_text("seed,N,i,j,value\n1,2,3,4,0.5\n")
    with pytest.raises(SchemaError):
        read_records(tmp_path / "h.csv", "correlator")
    (tmp_path / "short.csv").write_text("\n".join(lines[:2] + ["1,2,3"]) + "\n")
    with pytest.raises(SchemaError):
        read_records(tmp_path / "short.csv", "correlator")
    (tmp_path / "f.csv").write_text("seed,N,i,j,t,value\n1.5,2,3,4,0.0,0.5\n")
    with pytest.raises(SchemaError):
        read_records(tmp_path / "f.csv", "correlator")
    (tmp_path / "j.json").write_text(json.dumps({"schema": "decay", "columns": [], "rows": []}))
    with pytest.raises(SchemaError):
        read_records(tmp_path / "j.json", "correlator")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(SchemaError):
        read_records(tmp_path / "broken.json", "correlator")
    with pytest.raises(SchemaError):
        write_records([(1, 2)], tmp_path / "x.csv", "decay")
    with pytest.raises(SchemaError):
        write_records([], tmp_path / "x.csv", "nope")


def test_manifest_round_trip(tmp_path):
    m = RunManifest("demo", {"params": {"Delta": 2.0}}, 7, "0.1.0", ["ensemble"], "a", "b", ["x"])
    back = RunManifest.load(m.save(tmp_path / "m.json"))
    assert back == m
    (tmp_path / "bad.json").write_text('{"experiment": 1}')
    with pytest.raises(SchemaError):
        RunManifest.load(tmp_path / "bad.json")


def test_config_validation(tmp_path):
    good = {"params": {"Delta": 3.0}, "seed": 4, "ensemble": {"realizations": 5}}
    p = tmp_path / "good.json"
    p.write_text(json.dumps(good))
    assert load_config(p) == good
    for bad in ({"params": {"Delta": 3.0, "colour": 1}}, {"extra": 1}, {"seed": "x"},
                {"params": [1]}, [1, 2]):
        with pytest.raises(SchemaError):
            validate_config(bad)
    with pytest.raises(SchemaError):
        load_config(tmp_path / "missing.json")


def test_parse_range():
    assert parse_range("1..5") == [1, 2, 3, 4, 5]
    assert parse_range("2..16:2") == [2, 4, 6, 8, 10, 12, 14, 16]
    assert parse_range("1,3, 7") == [1, 3, 7]


# ---------------------------------------------------------------------------
# command line


def test_band_command_prints_table(capsys):
    assert main(["band", "--delta", "2", "--n", "1..5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "N,lower,upper"
    for N, line in zip(range(1, 6), lines[1:]):
        n, a, b = line.split(",")
        assert int(n) == N and (float(a), float(b)) == droplet_band(N, 2.0)


def test_band_command_writes_file(tmp_path):
    assert main(["band", "--Delta", "3", "--n", "1,2", "--format", "json",
                 "--out-dir", str(tmp_path)]) == 0
    rows = read_records(tmp_path / "band.json", "band")
    assert rows[1] == (2, *droplet_band(2, 3.0))


def test_spectrum_and_build(tmp_path):
    out = str(tmp_path)
    assert main(["spectrum", "--n", "1", "-L", "1", "--Delta", "2", "--lam", "0",
                 "--out-dir", out]) == 0
    rows = read_records(tmp_path / "spectrum_spectrum.csv", "spectrum")
    assert [r[1] for r in rows] == pytest.approx([0.5, 0.75, 1.25], abs=1e-14)
    assert main(["build", "--n", "1..2", "-L", "3", "--out-dir", out]) == 0
    man = RunManifest.load(tmp_path / "build_manifest.json")
    assert man.experiment == "build" and man.outputs


def test_ensemble_replay_is_bit_identical(tmp_path):
    args = ["ensemble", "--estimator", "fractional-moments", "-L", "8", "--Delta", "5",
            "--lam", "4", "--n", "2", "--distances", "1..4", "--realizations", "6",
            "--seed", "7"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out-dir", str(a), "--threads", "1"]) == 0
    assert main(args + ["--out-dir", str(b), "--threads", "2"]) == 0
    for name in ("ensemble_decay.csv", "ensemble_samples.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    man = RunManifest.load(a / "ensemble_manifest.json")
    assert man.master_seed == 7 and man.config["realizations"] == 6
    assert main(["fit", str(a / "ensemble_decay.csv"), "--out-dir", str(a)]) == 0
    fit = json.loads((a / "fit.json").read_text())
    assert fit["m"] > 0


def test_config_file_and_environment(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"Delta": 5.0, "lam": 4.0, "L": 6}, "seed": 3,
                               "ensemble": {"estimator": "eigencorrelator", "N_max": 2,
                                            "distances": [1, 2, 3], "realizations": 2}}))
    monkeypatch.setenv("XXZDROPLET_OUT_DIR", str(tmp_path / "env"))
    assert main(["ensemble", "--config", str(cfg)]) == 0
    man = RunManifest.load(tmp_path / "env" / "ensemble_manifest.json")
    assert man.config["estimator"] == "eigencorrelator" and man.master_seed == 3
    with open(tmp_path / "env" / "ensemble_samples.csv") as fh:
        assert sum(1 for _ in csv.reader(fh)) == 1 + 2 * 3


def test_correlate_command(tmp_path):
    for kind in ("sector", "spin"):
        assert main(["correlate", "--kind", kind, "-L", "2", "--n", "1..2", "--i", "-1",
                     "--distances", "1,2", "--out-dir", str(tmp_path / kind)]) == 0
        recs = read_records(tmp_path / kind / "correlate_correlator.csv", "correlator")
        assert recs and all(r.value >= 0 for r in recs)


def test_verify_exit_codes(tmp_path):
    out = str(tmp_path)
    assert main(["verify", "schur", "-L", "6", "--realizations", "2", "--out-dir", out]) == 0
    assert main(["verify", "identity", "-L", "2", "--realizations", "2", "--out-dir", out]) == 0
    assert main(["verify", "ct", "-L", "5", "--realizations", "1", "--out-dir", out]) == 0
    # a tiny ensemble cannot push the Wilson bound below the Wegner bound
    assert main(["verify", "wegner", "-L", "6", "--lam", "2", "--realizations", "5",
                 "--out-dir", out]) == 1
    assert main(["spectrum", "--Delta", "0.5", "--out-dir", out]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown": 1}')
    assert main(["band", "--delta", "2"]) == 0
    assert main(["ensemble", "--config", str(bad), "--out-dir", out]) == 2
    assert main(["fit", str(tmp_path / "missing.csv")]) == 2
