import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from thermoshift.cache import cache_key, cached_normalized_potential
from thermoshift.cli import main
from thermoshift.config import canonicalize, parse_system_text
from thermoshift.errors import ConfigError

FULL2_CFG = Path(__file__).resolve().parent.parent / "systems" / "full2.cfg"
GOLDEN_CFG = Path(__file__).resolve().parent.parent / "systems" / "golden.cfg"

MINI = """\
version 1
alphabet 2
matrix 1 1
matrix 1 1
branch 0 0 affine 0.5 0
branch 0 1 affine 0.5 0
branch 1 0 affine 0.5 0.5
branch 1 1 affine 0.5 0.5
roof unit expr 1.0 tau_min 1.0
"""


def test_parse_stock_configs():
    spec = parse_system_text(FULL2_CFG.read_text())
    assert spec.system.k == 2
    assert "quad" in spec.roofs and "obsA" in spec.observables
    specg = parse_system_text(GOLDEN_CFG.read_text())
    assert specg.system.M0 == 2


def test_parse_errors_carry_line_numbers():
    bad = MINI.replace("matrix 1 1\nmatrix 1 1", "matrix 1 1\nmatrrix 1 1")
    with pytest.raises(ConfigError) as err:
        parse_system_text(bad)
    assert "line 4" in str(err.value)


def test_missing_version_rejected():
    with pytest.raises(ConfigError) as err:
        parse_system_text(MINI.replace("version 1\n", ""))
    assert "version" in str(err.value)


def test_missing_tau_min_rejected():
    with pytest.raises(ConfigError) as err:
        parse_system_text(MINI.replace(" tau_min 1.0", ""))
    assert "tau_min" in str(err.value)


def test_overdeclared_tau_min_rejected():
    with pytest.raises(ConfigError):
        parse_system_text(MINI.replace("tau_min 1.0", "tau_min 1.5"))


def test_canonicalization_and_cache_keys():
    # whitespace and comments canonicalize away; any value change misses
    noisy = MINI.replace("matrix 1 1", "matrix   1  1  # comment", 1)
    assert canonicalize(noisy) == canonicalize(MINI)
    assert cache_key(canonicalize(noisy), 10) == cache_key(canonicalize(MINI), 10)
    assert cache_key(canonicalize(MINI), 10) != cache_key(canonicalize(MINI), 11)
    changed = MINI.replace("affine 0.5 0.5", "affine 0.5 0.25", 1)
    assert cache_key(canonicalize(changed), 10) != cache_key(canonicalize(MINI), 10)


def test_cached_state_roundtrip(tmp_path):
    spec = parse_system_text(MINI)
    s1 = cached_normalized_potential(spec, "zero", "unit", 0.0, 6, directory=tmp_path)
    files = list(tmp_path.glob("*.txt"))
    assert len(files) == 1
    s2 = cached_normalized_potential(spec, "zero", "unit", 0.0, 6, directory=tmp_path)
    assert np.array_equal(s1.h_a.values, s2.h_a.values)
    assert s1.P == s2.P
    cached_normalized_potential(spec, "zero", "unit", 0.0, 7, directory=tmp_path)
    assert len(list(tmp_path.glob("*.txt"))) == 2


def test_cli_pressure(capsys):
    code = main(["pressure", "--system", str(FULL2_CFG), "--potential", "zero", "--depth", "10"])
    out = capsys.readouterr().out.strip()
    assert code == 0
    assert float(out) == pytest.approx(math.log(2), abs=1e-12)


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("version 1\nalphabet 2\nmatrix 1 1\nmatrix 1 1\nbranch 0 0 affine 2.0 0\n")
    code = main(["pressure", "--system", str(bad), "--potential", "zero"])
    assert code == 2
    assert "CONFIG ERROR" in capsys.readouterr().err


def test_cli_missing_file(capsys):
    assert main(["pressure", "--system", "/nonexistent.cfg"]) == 2


def test_cli_degenerate_roof_is_computational_failure(capsys):
    code = main(
        ["dolgopyat", "--system", str(FULL2_CFG), "--roof", "affine", "--trials-cone", "1", "--trials-l2", "1"]
    )
    assert code == 1
    assert "DegenerateRoof" in capsys.readouterr().err


def test_cli_zeta_csv(tmp_path):
    out = tmp_path / "z.csv"
    code = main(
        ["zeta", "--system", str(FULL2_CFG), "--roof", "const1", "--re", "1.0", "--im", "0.0", "--nmax", "40", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("s_re,s_im,zeta_re")
    val = float(lines[1].split(",")[2])
    assert val == pytest.approx(1 / (1 - 2 * math.exp(-1)), rel=1e-8)


def test_cli_count_runs(tmp_path):
    out = tmp_path / "c.csv"
    code = main(
        ["count", "--system", str(FULL2_CFG), "--roof", "quad", "--nmax", "10", "--out", str(out)]
    )
    assert code == 0
    assert out.read_text().startswith("lambda,pi,li,ratio,biased_flag")


def test_cli_corr_deterministic(tmp_path):
    args = [
        "corr", "--system", str(FULL2_CFG), "--roof", "quad", "--A", "obsA", "--B", "obsB",
        "--L", "50000", "--seed", "11", "--depth", "8", "--tmax", "3.0",
    ]
    out1, out2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_sweep_deterministic_and_threaded(tmp_path):
    base = [
        "sweep", "--system", str(FULL2_CFG), "--roof", "quad", "--a", "0",
        "--b", "10,20", "--N", "6", "--m", "4", "--depth", "8",
    ]
    o1, o2, o3 = (tmp_path / f"s{i}.csv" for i in range(3))
    assert main(base + ["--out", str(o1)]) == 0
    assert main(base + ["--out", str(o2)]) == 0
    assert main(base + ["--threads", "2", "--out", str(o3)]) == 0
    assert o1.read_bytes() == o2.read_bytes() == o3.read_bytes()
    header = o1.read_text().splitlines()[0]
    assert header == "a,b,m,l2_norm,rho_hat,lip_b_norm,monotone_flag"


def test_cli_dolgopyat_json(tmp_path):
    out = tmp_path / "d.json"
    code = main(
        [
            "dolgopyat", "--system", str(FULL2_CFG), "--roof", "quad", "--b", "4.0",
            "--mu", "1e-6", "--trials-cone", "3", "--trials-l2", "3", "--out", str(out),
        ]
    )
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["dense_J"]["dense"]
    assert rep["l2_contraction"]["all_below_one"]
    assert rep["pointwise_domination"]["passed"]
    assert "NOT CERTIFIED" in rep["params"]["banner"]


def test_cli_selftest():
    assert main(["selftest"]) == 0


def test_console_script_entrypoint():
    proc = subprocess.run(
        [sys.executable, "-m", "thermoshift.cli", "distortion", "--system", str(FULL2_CFG), "--nmax", "6"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "rho_est=0.5" in proc.stdout
