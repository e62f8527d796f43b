import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from projgeom.cli import main
from projgeom.connections import levi_civita, pi_symbols

from conftest import POLAR

SCEN = Path(__file__).resolve().parent.parent / "scenarios"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


BASE = {"name": "t", "dim": 2, "chart": {"box": [[0.5, 1.5], [-1, 1]]}, "samples": {"count": 3, "seed": 1}}


def test_pi_polar_matches_direct_oracle(capsys):
    code, out, _ = run(capsys, "pi", SCEN / "polar.json", "--json")
    assert code == 0
    data = json.loads(out)
    sample = next(s for s in data["samples"] if s["point"] == [2.0, 0.3])
    oracle = pi_symbols(levi_civita(POLAR)).at([2.0, 0.3])
    assert np.allclose(sample["values"], oracle, atol=1e-14)
    assert sample["values"][0][0][0] == pytest.approx(-1 / 3)


def test_flat_lift(capsys):
    code, out, _ = run(capsys, "lift", SCEN / "flat.json", "--json")
    assert code == 0
    v = np.array(json.loads(out)["samples"][0]["values"])
    assert v[1, 1, 0] == pytest.approx(-1 / 3) and v[0, 0, 0] == pytest.approx(-1 / 3)
    code, out, _ = run(capsys, "lift", SCEN / "flat.json", "--json", "--flavor", "hat", "--fibre", "2")
    v = np.array(json.loads(out)["samples"][0]["values"])
    assert v[0, 0, 0] == pytest.approx(-4 / 6)


def test_json_output_is_deterministic(capsys):
    a = run(capsys, "laplacian", SCEN / "sphere.json", "--json")[1]
    b = run(capsys, "laplacian", SCEN / "sphere.json", "--json")[1]
    assert a == b
    assert list(json.loads(a)) == sorted(json.loads(a))


def test_geodesic_csv_has_full_precision(capsys, tmp_path):
    target = tmp_path / "g.csv"
    code, out, _ = run(capsys, "geodesic", SCEN / "flat.json", "-o", target)
    assert code == 0 and out == ""
    rows = list(csv.reader(io.StringIO(target.read_text())))
    assert rows[0] == ["t", "x0", "x1", "v0", "v1"]
    assert len(rows) == 1002
    assert float(rows[-1][1]) == pytest.approx(1.0, abs=1e-14)
    # 17 significant digits round-trip every double exactly
    assert float(rows[1 + 333][0]) == np.linspace(0.0, 1.0, 1001)[333]
    assert rows[1 + 333][0] == "0.33300000000000002"


def test_projective_geodesic_with_normal_omega(capsys):
    code, out, _ = run(capsys, "geodesic", SCEN / "sphere.json", "--projective", "--normal", "--json")
    assert code == 0
    assert len(json.loads(out)["rows"]) > 2


def test_transport_fit(capsys):
    code, out, _ = run(capsys, "transport", SCEN / "transport.json", "--fit", "--json")
    assert code == 0
    assert json.loads(out)["fit"]["holdout_residual"] <= 1e-6


def test_check_exit_codes(capsys):
    code, out, _ = run(capsys, "check", SCEN / "flat.json", "--suite", "shift-invariance")
    assert code == 0 and "all checks passed" in out
    code, out, _ = run(capsys, "check", SCEN / "polar.json", "--suite", "remark-equality", "--json")
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_numerical_failure_is_exit_one(capsys, tmp_path):
    data = dict(BASE, connection=[[["0", "0"], ["0", "log(x0)"]], [["0", "0"], ["0", "0"]]],
                geodesic={"x0": [0.5, 0.0], "v0": [-1.0, 0.0], "T": 1.0, "h": 0.001})
    code, _, err = run(capsys, "geodesic", write(tmp_path, data))
    assert code == 1 and "numerical" in err


@pytest.mark.parametrize(
    "patch, pointer",
    [
        ({"metric": [["1", "x0+"], ["x0+", "1"]]}, "/metric/0/1"),
        ({"chart": {"box": [[0, 1]]}}, "/chart/box"),
        ({"function": "sin(x0"}, "/function"),
        ({"dim": "two"}, "/dim"),
    ],
)
def test_scenario_errors_carry_a_pointer(capsys, tmp_path, patch, pointer):
    code, out, _ = run(capsys, "pi", write(tmp_path, {**BASE, **patch}), "--json")
    assert code == 2
    assert json.loads(out)["path"] == pointer


def test_missing_file_and_bad_usage(capsys, tmp_path):
    assert run(capsys, "pi", tmp_path / "absent.json")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "check", SCEN / "flat.json")[0] == 2


def test_missing_section_is_a_scenario_error(capsys):
    code, out, _ = run(capsys, "transport", SCEN / "flat.json", "--json")
    assert code == 2 and json.loads(out)["path"] == "/transport"


def test_schema_prints(capsys):
    code, out, _ = run(capsys, "schema")
    assert code == 0 and "properties" in json.loads(out)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "projgeom", "check", str(SCEN / "flat.json"), "--suite", "all"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.strip().endswith("all checks passed")
