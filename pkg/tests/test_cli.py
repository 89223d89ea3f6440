import io
import pathlib
import subprocess
import sys

import pytest

from sscas.cli import main, parse_seeds

BASIC = """n=5 f=1 e=1 k=1 p=257 maxint=64 delta=2 seed=42 sched=fair
client 2 write 17
client 4 read at 400
"""


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def basic(tmp_path):
    path = tmp_path / "basic.scn"
    path.write_text(BASIC)
    return path


def test_run_happy_path(basic, tmp_path):
    trace = tmp_path / "t.tsv"
    code, out = run_cli("run", str(basic), "--check", "atomicity,liveness", "--trace", str(trace))
    assert code == 0
    assert "CHECK atomicity PASS" in out and "CHECK liveness PASS" in out
    assert trace.read_text().count("\n") > 10


def test_malformed_header_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.scn"
    path.write_text("n=5 f=one\n")
    code, _ = run_cli("run", str(path))
    assert code == 2
    assert "line 1" in capsys.readouterr().err


def test_unknown_check_exits_2(basic):
    assert run_cli("run", str(basic), "--check", "magic")[0] == 2


def test_batch_seeds(basic, tmp_path):
    code, out = run_cli("run", str(basic), "--seeds", "1..3", "--trace", str(tmp_path / "t{seed}.tsv"))
    assert code == 0
    assert out.count("RUN ") == 3
    assert "SUMMARY 3/3 seeds passed" in out
    assert (tmp_path / "t2.tsv").exists()


def test_failing_check_exits_1(tmp_path):
    # a budget too small to finish the operations
    path = tmp_path / "slow.scn"
    path.write_text(BASIC)
    code, out = run_cli("run", str(path), "--check", "liveness", "--budget", "5")
    assert code == 1
    assert "CHECK liveness FAIL" in out and "witness" in out


def test_parse_seeds():
    assert parse_seeds("7") == [7]
    assert parse_seeds("1..4") == [1, 2, 3, 4]
    assert parse_seeds("1,3..4") == [1, 3, 4]


def test_codec_encode():
    assert run_cli("codec", "encode", "-p", "11", "-k", "2", "-n", "5", "--secret", "3", "--coeffs", "4") == (0, "7 0 4 8 1\n")


def test_codec_encode_random_is_decodable():
    code, out = run_cli("codec", "encode", "-p", "257", "-k", "3", "-n", "7", "--secret", "200", "--seed", "5")
    assert code == 0
    assert run_cli("codec", "decode", "-p", "257", "-k", "3", *out.split()) == (0, "200\n")


def test_codec_decode_with_corruption_and_erasure():
    args = ["codec", "decode", "-p", "11", "-k", "2", "7", "0", "4", "8", "1", "--corrupt", "3=9", "--erase", "5"]
    assert run_cli(*args) == (0, "3\n")


def test_codec_decode_too_few_shares():
    assert run_cli("codec", "decode", "-p", "11", "-k", "2", "7", "-", "-", "-", "-")[0] == 1


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sscas", "codec", "encode", "-p", "11", "-k", "1",
                           "-n", "3", "--secret", "5"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.split() == ["5", "5", "5"]


SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


@pytest.mark.parametrize("name, checks", [
    ("basic.scn", "atomicity,liveness,comm,gossip"),
    ("overflow.scn", "atomicity,liveness,storage"),
    ("corrupt.scn", "recovery,atomicity"),
])
def test_shipped_scenarios(name, checks):
    code, out = run_cli("run", str(SCENARIOS / name), "--check", checks)
    assert code == 0, out
