import csv
import io
import json
import subprocess
import sys

import pytest

from renewtrie.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_predict_table(capsys):
    code, out, _ = run(["predict", "--p", "0.3", "--n", "1024"], capsys)
    assert code == 0
    for name in ("depth", "patricia_depth", "trie_size_per_string", "insert_mean"):
        assert name in out
    assert "12.9939" in out


def test_predict_csv_and_json_agree(capsys):
    argv = ["predict", "--arith", "1:2", "--n", "1000,5000", "--b", "2", "--M", "300"]
    _, csv_out, _ = run(argv + ["--output", "csv"], capsys)
    _, json_out, _ = run(argv + ["--output", "json"], capsys)
    rows = list(csv.DictReader(io.StringIO(csv_out)))
    recs = json.loads(json_out)
    assert len(rows) == len(recs)
    for r, j in zip(rows, recs):
        for key in ("value", "smooth", "oscillation"):
            if j[key] is None:
                assert r[key] == ""
            else:
                assert float(r[key]) == j[key]


def test_codes_build_dump(capsys):
    code, out, _ = run(["codes", "build", "--p", "0.6", "--tunstall", "5", "--dump"], capsys)
    assert code == 0
    lines = out.splitlines()
    table = lines[lines.index(next(l for l in lines if l.startswith("index"))) + 1 :]
    phrases = [l.split()[2] for l in table]
    probs = [float(l.split()[3]) for l in table]
    assert phrases == ["00", "01", "10", "110", "111"]
    assert probs == pytest.approx([0.16, 0.24, 0.24, 0.144, 0.216], abs=1e-12)
    assert "2.36" in out


def test_codes_stats(capsys):
    code, out, _ = run(["codes", "stats", "--p", "0.5", "--khodak", "8", "--output", "json"], capsys)
    assert code == 0
    rec = {r["field"]: r["value"] for r in json.loads(out)}
    assert rec["M"] == 16 and rec["mean_len"] == 4.0 and rec["predicted_M"] == pytest.approx(16)


def test_simulate_depth_half(capsys):
    code, out, _ = run(["simulate", "depth", "--p", "0.5", "--n", "2", "--reps", "100000", "--seed", "7",
                        "--method", "counts", "--output", "json", "--threads", "1"], capsys)
    assert code == 0
    rec = json.loads(out)[0]
    assert abs(rec["mean"] - 2) <= 3 * rec["stderr"]
    assert rec["pass"] is True


def test_simulate_is_byte_identical_and_thread_independent(capsys):
    argv = ["simulate", "trie-size", "--p", "0.3", "--n", "200", "--reps", "60", "--output", "csv"]
    _, a, _ = run(argv + ["--threads", "1"], capsys)
    _, b, _ = run(argv + ["--threads", "1"], capsys)
    _, c, _ = run(argv + ["--threads", "2"], capsys)
    assert a == b == c
    argv = ["walk", "--p", "0.7", "--K", "30", "--V", "20", "--reps", "50", "--threads", "1"]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_simulate_json_matches_csv(capsys):
    argv = ["simulate", "insert", "--p", "0.3", "--n", "300", "--reps", "100", "--threads", "1"]
    _, c, _ = run(argv + ["--output", "csv"], capsys)
    _, j, _ = run(argv + ["--output", "json"], capsys)
    row = next(csv.DictReader(io.StringIO(c)))
    rec = json.loads(j)[0]
    for key in ("mean", "stderr", "variance", "predicted", "z"):
        assert float(row[key]) == rec[key]


def test_comparison_failure_exit_code(capsys):
    # at n = 6 the depth mean is far from its large-n expansion
    code, out, _ = run(["simulate", "depth", "--p", "0.3", "--n", "6", "--reps", "20000", "--method", "counts",
                        "--threads", "1"], capsys)
    assert code == 1
    assert "FAIL" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["predict", "--p", "1.5", "--n", "10"],
        ["predict", "--p", "0.3", "--arith", "1:2", "--n", "10"],
        ["predict", "--arith", "2:4", "--n", "10"],
        ["predict", "--p", "0.3"],
        ["simulate", "depth", "--p", "0.3"],
        ["simulate", "walk-of-shame", "--p", "0.3"],
        ["simulate", "depth", "--p", "0.3", "--n", "-4"],
        ["codes", "build", "--p", "0.3"],
        ["codes", "build", "--p", "0.3", "--tunstall", "1"],
        ["walk", "--p", "0.5", "--K", "3", "--V", "3"],
        ["selftest", "--only", "99"],
        ["predict", "--p", "0.3", "--n", "10", "--bogus"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    _, err = capsys.readouterr()
    assert code == 2
    assert "usage" in err


def test_arith_cross_check_accepts_consistent_p(capsys):
    from renewtrie.source import solve_arithmetic_p

    p = repr(solve_arithmetic_p(1, 2))
    code, out, _ = run(["predict", "--p", p, "--arith", "1:2", "--n", "100"], capsys)
    assert code == 0 and "depth/arithmetic" in out


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('p = 0.3\nn = [1024]\noutput = "csv"\n')
    _, from_file, _ = run(["predict", "--config", str(cfg)], capsys)
    _, direct, _ = run(["predict", "--p", "0.3", "--n", "1024", "--output", "csv"], capsys)
    assert from_file == direct
    _, override, _ = run(["predict", "--config", str(cfg), "--p", "0.4"], capsys)
    assert override != direct and override.startswith("quantity")
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 3\n")
    assert main(["predict", "--config", str(bad)]) == 2


def test_encode_decode_file_roundtrip(tmp_path, capsys):
    src_file = tmp_path / "in.bin"
    src_file.write_bytes(bytes(range(256)) * 3)
    enc = tmp_path / "out.vfc"
    dec = tmp_path / "back.bin"
    assert main(["codes", "encode", "--p", "0.5", "--tunstall", "300", "--in", str(src_file), "--out", str(enc)]) == 0
    assert enc.read_bytes()[:4] == b"VFC1"
    assert main(["codes", "decode", "--in", str(enc), "--out", str(dec)]) == 0
    assert dec.read_bytes() == src_file.read_bytes()
    capsys.readouterr()


def test_encode_random_source_text_decode(tmp_path, capsys):
    enc = tmp_path / "r.vfc"
    assert main(["codes", "encode", "--p", "0.3", "--khodak", "50", "--n", "500", "--seed", "4", "--out", str(enc)]) == 0
    capsys.readouterr()
    code, out, _ = run(["codes", "decode", "--in", str(enc)], capsys)
    assert code == 0
    bits = out.strip()
    assert len(bits) == 500 and not bits.strip("01")
    from renewtrie.source import StringHandle, new_source

    assert bits == "".join(map(str, StringHandle(new_source(0.3), 4, 0).prefix(500)))


def test_decode_rejects_garbage(tmp_path, capsys):
    f = tmp_path / "junk.vfc"
    f.write_bytes(b"not a stream at all")
    assert main(["codes", "decode", "--in", str(f)]) == 2


def test_selftest_subset(capsys):
    code, out, _ = run(["selftest", "--only", "3,9"], capsys)
    assert code == 0
    assert out.count("[PASS]") == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "renewtrie.cli", "predict", "--p", "0.5", "--n", "1024"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "depth/arithmetic" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "renewtrie.cli", "predict"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
