import io

import numpy as np
import pytest

from cmlprng import LocalMap, local_le
from cmlprng.cli import EXIT_IO, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, RunManifest, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def manifest(path):
    return RunManifest.from_text(open(str(path) + ".manifest").read())


def test_gen_ascii_size_contract(tmp_path):
    out = tmp_path / "bits.txt"
    code, _, err = call("gen", "--map", "logistic", "--mu", 4, "--rows", 8, "--cols", 8, "--epsilon", 0.1,
                        "--z", 64, "--bits", 8000000, "--format", "ascii", "--out", out, "--seed-a", 1)
    assert code == EXIT_OK, err
    text = out.read_text()
    assert len(text) == 8_000_000 and set(text) == {"0", "1"}
    m = manifest(out)
    assert m.command == "gen" and m.params["a.seed"] == "1" and m.params["n_bits"] == "8000000"
    assert "seed_expansion" in m.params


def test_gen_deterministic_and_replayable(tmp_path):
    a, b, c = tmp_path / "a.bin", tmp_path / "b.bin", tmp_path / "c.bin"
    for p in (a, b):
        assert call("gen", "--map", "plm", "--bits", 5000, "--seed-a", 42, "--out", p)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert call("replay", str(a) + ".manifest", "--out", c)[0] == EXIT_OK
    assert c.read_bytes() == a.read_bytes()


def test_replay_without_seed_flag(tmp_path):
    a, c = tmp_path / "a.txt", tmp_path / "c.txt"
    assert call("gen", "--bits", 300, "--format", "ascii", "--out", a)[0] == EXIT_OK
    seed = manifest(a).params["a.seed"]
    assert seed.isdigit()
    assert call("replay", str(a) + ".manifest", "--out", c)[0] == EXIT_OK
    assert c.read_text() == a.read_text()


def test_ascii_and_raw_encode_same_bits(tmp_path):
    t, r = tmp_path / "x.txt", tmp_path / "x.bin"
    common = ["gen", "--map", "tent", "--bits", 1003, "--seed-a", 3, "--seed-b", 8]
    assert call(*common, "--format", "ascii", "--out", t)[0] == EXIT_OK
    assert call(*common, "--format", "raw", "--out", r)[0] == EXIT_OK
    bits = np.unpackbits(np.frombuffer(r.read_bytes(), np.uint8))[:1003]
    assert "".join(map(str, bits)) == t.read_text()


def test_gen_float_arithmetic(tmp_path):
    out = tmp_path / "f.txt"
    code, _, err = call("gen", "--arith", "float", "--bits", 520, "--format", "ascii", "--out", out, "--seed-a", 2)
    assert code == EXIT_OK, err
    assert manifest(out).params["z"] == "52"


@pytest.mark.parametrize("argv", [
    ["gen", "--epsilon", 1.5], ["gen", "--map", "henon"], ["gen", "--z", 70], ["gen", "--mu", 5],
    ["gen", "--bits", -1], ["gen", "--tap", "x"], ["le", "--rows", 0], ["hist", "--bins", 1],
    ["bench", "--repeats", 0], [],
])
def test_validation_exit_code(argv, tmp_path):
    code, _, err = call(*argv, "--out", tmp_path / "o") if argv else call()
    assert code == EXIT_USAGE
    assert err


def test_runtime_exit_code(tmp_path):
    code, _, err = call("gen", "--seed-a", 5, "--seed-b", 5, "--max-windows", 3, "--bits", 10,
                        "--out", tmp_path / "o")
    assert code == EXIT_RUNTIME
    assert "independence" in err


def test_io_exit_code(tmp_path):
    assert call("gen", "--bits", 8, "--out", tmp_path / "missing" / "o")[0] == EXIT_IO
    assert call("replay", tmp_path / "nope.manifest")[0] == EXIT_IO


def test_le_defaults(tmp_path):
    out = tmp_path / "le.csv"
    assert call("le", "--local-iter", 10**5, "--out", out)[0] == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "r,l,lambda,le" and len(lines) == 65
    le_max = float(lines[1].split(",")[3])
    assert le_max == local_le(LocalMap.logistic(4.0), n_iter=10**5)
    assert manifest(out).params["max_le"] == repr(le_max)


def test_le_single_node(tmp_path):
    code, out, _ = call("le", "--rows", 1, "--cols", 1, "--le-f", 0.5, "--out", "-")
    assert code == EXIT_OK
    assert out.splitlines() == ["r,l,lambda,le", "0,0,1.0,0.5"]


def test_le_numeric(tmp_path):
    out = tmp_path / "le.csv"
    code, _, err = call("le", "--map", "tent", "--rows", 4, "--cols", 4, "--numeric", "--n-iter", 20000,
                        "--local-iter", 10**5, "--out", out)
    assert code == EXIT_OK
    text = out.read_text()
    assert "rank,le_numeric" in text
    dev = float(text.strip().splitlines()[-1].split(",")[1])
    assert dev <= 0.05
    assert float(manifest(out).params["max_abs_deviation"]) == dev


def test_bifurcation_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert call("bifurcation", "--mu-steps", 300, "--points", 4, "--discard", 100, "--out", out)[0] == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "mu,value" and len(lines) == 1 + 1200
    assert float(lines[1].split(",")[0]) == 2.5 and float(lines[-1].split(",")[0]) == 4.0


def test_hist_constant_input(tmp_path):
    src = tmp_path / "v.txt"
    src.write_text("0.42\n" * 30)
    out = tmp_path / "h.csv"
    assert call("hist", "--input", src, "--bins", 10, "--out", out)[0] == EXIT_OK
    rows = [line.split(",") for line in out.read_text().splitlines()]
    assert rows[0] == ["bin_lo", "bin_hi", "count"]
    counts = [int(r[2]) for r in rows[1:]]
    assert counts == [0, 0, 0, 0, 30, 0, 0, 0, 0, 0]


def test_hist_lattice_orbit(tmp_path):
    code, out, err = call("hist", "--points", 10**4, "--bins", 10, "--out", "-")
    assert code == EXIT_OK
    counts = [int(line.split(",")[2]) for line in out.splitlines()[1:]]
    assert sum(counts) == 10**4 and counts[-1] == max(counts)
    assert "command=hist" in err  # manifest goes to stderr when output is stdout


def test_test_command_generated(tmp_path):
    out = tmp_path / "t.csv"
    code, _, err = call("test", "--sequences", 100, "--length", 2000, "--seed-a", 10, "--out", out)
    assert code == EXIT_OK, err
    lines = out.read_text().splitlines()
    assert lines[0].startswith("sub_test,p_value,pass_rate")
    assert [line.split(",")[0] for line in lines[1:]] == ["Frequency", "BlockFrequency", "Runs", "Serial"]
    per = (tmp_path / "t.csv.sequences.csv").read_text().splitlines()
    assert len(per) == 1 + 400


def test_test_command_input_file(tmp_path):
    bits = tmp_path / "in.txt"
    assert call("gen", "--bits", 100 * 500, "--format", "ascii", "--seed-a", 4, "--out", bits)[0] == EXIT_OK
    out = tmp_path / "t.csv"
    code, _, err = call("test", "--input", bits, "--sequences", 100, "--length", 500, "--out", out)
    assert code == EXIT_OK, err
    assert len(out.read_text().splitlines()) == 5


def test_test_command_skips_short_subtests(tmp_path):
    bits = tmp_path / "in.txt"
    bits.write_text("01" * 100 * 60)
    out = tmp_path / "t.csv"
    code, _, err = call("test", "--input", bits, "--sequences", 100, "--length", 120, "--out", out)
    assert code == EXIT_OK
    assert "BlockFrequency" in err and "skipped" in err
    assert "BlockFrequency" not in out.read_text()


def test_bench_single_repeat(tmp_path):
    out = tmp_path / "bench.txt"
    code, _, _ = call("bench", "--bytes", 4096, "--repeats", 1, "--seed-a", 1, "--out", out)
    assert code == EXIT_OK
    rep = dict(line.split("=", 1) for line in out.read_text().splitlines())
    assert rep["min_ms"] == rep["max_ms"] == rep["mean_ms"]
    assert float(rep["bits_per_second"]) > 0


def test_manifest_roundtrip():
    m = RunManifest("gen", ["gen", "--out", "a b.txt"], {"k": "v=1"}, "0.1.0", 1.5)
    back = RunManifest.from_text(m.to_text())
    assert back.argv == m.argv and back.params == {"k": "v=1"} and back.duration_s == 1.5
