import io
import subprocess
import sys

import numpy as np
import pytest

from carleman.cli import EXIT_INPUT, EXIT_IO, EXIT_PRECONDITION, main

VDP_SPEC = """\
dimension: 2
terms:
  - {alpha: [1, 0], coeff: [0, -1]}
  - {alpha: [0, 1], coeff: [1, 0.5]}
  - {alpha: [2, 1], coeff: [0, -0.5]}
"""


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), buf)
    return code, buf.getvalue()


def parse_kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


@pytest.fixture
def vdp_spec(tmp_path):
    p = tmp_path / "vdp.yaml"
    p.write_text(VDP_SPEC)
    return p


def test_bounds_stable_example():
    code, text = run("bounds", "--bench", "1d-stable", "--x0", "0.4")
    kv = parse_kv(text)
    assert code == 0
    assert kv["global.base"] == "0.8" and kv["global.valid"] == "true"
    assert kv["local.valid"] == "false"
    assert kv["decay.valid"] == "true"


def test_bounds_no_valid_estimate_exits_precondition():
    code, _ = run("bounds", "--bench", "1d-unstable", "--x0", "0.9")
    assert code == EXIT_PRECONDITION


def test_lift_vdp_structure(vdp_spec, tmp_path):
    out = tmp_path / "A.csv"
    code, _ = run("lift", "--spec", str(vdp_spec), "--order", "5", "--out", str(out))
    assert code == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[0].startswith("k=1")
    A = np.loadtxt(out, delimiter=",", skiprows=1)
    assert A.shape == (20, 20)
    offs = [0, 2, 5, 9, 14, 20]
    for k in range(1, 6):
        for l in range(1, 6):
            blk = A[offs[k - 1] : offs[k], offs[l - 1] : offs[l]]
            if l not in (k, k + 2):
                assert not blk.any()
            else:
                assert blk.any()


def test_lift_stdout_unstable():
    code, text = run("lift", "--bench", "1d-unstable", "--order", "3")
    rows = text.strip().splitlines()
    assert code == 0 and len(rows) == 4
    np.testing.assert_array_equal(np.loadtxt(rows[1:], delimiter=","), [[1, 0, -1], [0, 2, 0], [0, 0, 3]])


def test_verify_vdp(vdp_spec):
    code, text = run("verify", "--spec", str(vdp_spec), "--radius", "1")
    kv = parse_kv(text)
    assert code == 0
    assert float(kv["decay.coef_bound"]) == 2.5
    assert kv["ok"] == "true"


def test_simulate_writes_files(tmp_path):
    code, text = run(
        "simulate", "--bench", "vdp", "--x0", "1", "0.5", "--order", "4",
        "--t-final", "0.2", "--out-dir", str(tmp_path),
    )
    kv = parse_kv(text)
    assert code == 0 and kv["steps"] == "200"
    for name in ("lifted.csv", "reference.csv", "error.csv"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "lifted.csv").read_text().startswith("t,y1,")
    assert 0 < float(kv["sup_error"]) < 1e-2


def test_sweep_writes_csv_and_svg(tmp_path):
    csv, svg = tmp_path / "g.csv", tmp_path / "g.svg"
    args = ("sweep", "--bench", "1d-unstable", "--x0-count", "4", "--N-max", "6", "--N-count", "3",
            "--horizon", "0.1", "--out-csv", str(csv), "--out-svg", str(svg))
    code, _ = run(*args)
    assert code == 0 and csv.exists() and svg.read_text().startswith("<svg")
    first = csv.read_bytes()
    code, _ = run(*args)
    assert csv.read_bytes() == first


def test_identical_invocations_identical_output():
    args = ("bounds", "--bench", "1d-unstable", "--x0", "0.1", "--order", "5")
    assert run(*args) == run(*args)


@pytest.mark.parametrize(
    "argv",
    [
        ("lift", "--bench", "vdp", "--order", "0"),
        ("lift", "--bench", "vdp"),
        ("bounds", "--bench", "1d-stable", "--x0", "nan"),
        ("simulate", "--bench", "vdp", "--x0", "1", "--order", "3", "--t-final", "1", "--out-dir", "."),
        ("nonsense",),
    ],
)
def test_input_errors(argv):
    assert run(*argv)[0] == EXIT_INPUT


def test_malformed_spec(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("dimension: 2\nterms:\n  - {alpha: [1, 0], coeff: [1]}\n")
    assert run("lift", "--spec", str(p), "--order", "2")[0] == EXIT_INPUT


def test_io_errors(tmp_path):
    assert run("lift", "--spec", str(tmp_path / "missing.yaml"), "--order", "2")[0] == EXIT_IO
    out = tmp_path / "no" / "such" / "A.csv"
    assert run("lift", "--bench", "vdp", "--order", "2", "--out", str(out))[0] == EXIT_IO


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "carleman", "lift", "--bench", "1d-stable", "--order", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.splitlines()[1] == "-1,0"
