import json
import math

import pytest

from ntnlink import cli
from ntnlink import e2e_metrics as em
from ntnlink.fso_link import fso_params
from ntnlink.scenario import ScenarioConfig, table2


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_grid():
    assert cli.parse_grid("20:60:2")[-1] == 60.0
    assert len(cli.parse_grid("20:60:2")) == 21
    assert cli.parse_grid("40, 50") == (40.0, 50.0)
    for bad in ("60:20:2", "", "1:2:0", "1:2"):
        with pytest.raises(cli.RequestError):
            cli.parse_grid(bad)


def test_request_validation():
    with pytest.raises(cli.RequestError):
        cli.SweepRequest("ber", "R", None, (40.0,))
    with pytest.raises(cli.RequestError):
        cli.SweepRequest("op", "R", None, (40.0,), evaluators=())
    with pytest.raises(cli.RequestError):
        cli.SweepRequest("op", "R", None, (40.0,), evaluators=("magic",))


def test_op_sweep_reads_calibrated_anchor(capsys):
    code, out, _ = run(capsys, "op-sweep", "--user", "R", "--detection", "heterodyne", "--grid", "50:50:2",
                       "--evaluators", "exact,asymptotic")
    assert code == 0
    rows = cli.read_csv(out)
    assert list(rows[0]) == list(cli.COLUMNS)
    assert rows[0]["exact"] == pytest.approx(0.010, rel=1e-3)
    assert rows[0]["asymptotic"] > 0
    assert rows[0]["status"] == "ok"


def test_empty_grid_is_an_error(capsys):
    code, _, err = run(capsys, "op-sweep", "--grid", "60:20:2")
    assert code == 1
    assert json.loads(err)["status"] == "request-error"


def test_csv_round_trip_is_exact(capsys, tmp_path):
    path = tmp_path / "cap.csv"
    code, _, _ = run(capsys, "capacity-sweep", "--user", "T", "--grid", "30,40", "-o", str(path))
    assert code == 0
    rows = cli.read_csv(path.read_text())
    p = em.e2e_params(table2(), "T", 40.0)
    assert rows[1]["exact"] == em.ergodic_capacity(p)
    req = cli.SweepRequest("capacity", "T", None, (30.0, 40.0))
    again = cli.render([{**r} for r in rows], req)
    assert again == path.read_text()


def test_json_output_is_versioned(capsys):
    code, out, _ = run(capsys, "moments", "--user", "T", "--grid", "40", "--order", "2", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["version"] == cli.OUTPUT_VERSION
    assert doc["columns"] == list(cli.COLUMNS)
    assert doc["rows"][0]["exact"] == em.snr_moments(2, em.e2e_params(table2(), "T", 40.0))


def test_ber_sweep_with_modulation(capsys):
    code, out, _ = run(capsys, "ber-sweep", "--detection", "imdd", "--modulation", "OOK", "--grid", "60")
    assert code == 0
    assert 0 < cli.read_csv(out)[0]["exact"] < 0.5


def test_ber_scheme_mismatch_is_a_row_failure(capsys):
    code, out, _ = run(capsys, "ber-sweep", "--detection", "imdd", "--modulation", "BPSK", "--grid", "60,70")
    assert code == 2
    rows = cli.read_csv(out)
    assert len(rows) == 2 and all(r["status"].startswith("error") for r in rows)


def test_diversity_prints_scalar(capsys):
    code, out, _ = run(capsys, "diversity")
    assert code == 0
    assert float(out) == em.diversity_order(fso_params(table2()))
    code, out, _ = run(capsys, "diversity", "--detection", "imdd")
    assert float(out) == pytest.approx(em.diversity_order(fso_params(table2())) / 2)


def test_validate_table2(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0
    rep = json.loads(out)
    assert rep["alpha"] == pytest.approx(12.99565, rel=1e-6)
    assert set(rep["users"]) == {"T", "R"} and "k" in rep["users"]["T"]


def _write(tmp_path, data):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(data))
    return str(f)


def test_validate_power_split_error(capsys, tmp_path):
    data = {"$schema_version": 1, **ScenarioConfig().to_dict(), "rho_r": 0.7}
    code, _, err = run(capsys, "validate", _write(tmp_path, data))
    assert code == 1
    assert "rho_t" in json.loads(err)["problems"]


def test_validate_missing_field(capsys, tmp_path):
    data = {"$schema_version": 1, **ScenarioConfig().to_dict()}
    del data["n_r"]
    code, _, err = run(capsys, "validate", _write(tmp_path, data))
    assert code == 1
    assert json.loads(err)["problems"]["n_r"] == "missing field"


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.json"))
    assert code == 1


def test_strict_fit_failure_is_reported(capsys, tmp_path):
    data = {"$schema_version": 1, **ScenarioConfig().to_dict(), "kg_fit": "strict"}
    code, out, _ = run(capsys, "validate", _write(tmp_path, data))
    assert code == 1
    assert "error" in json.loads(out)["users"]["R"]


def test_mc_columns_and_determinism(capsys):
    argv = ("capacity-sweep", "--user", "T", "--grid", "40", "--evaluators", "exact,mc",
            "--samples", "20000", "--seed", "4", "--streams", "2")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv, "--workers", "2")
    assert a == b
    row = cli.read_csv(a)[0]
    assert abs(row["mc_estimate"] - row["exact"]) <= 4 * row["mc_stderr"]


def test_mc_validate_reports_z_scores(capsys):
    code, out, err = run(capsys, "mc-validate", "--metric", "capacity", "--user", "T", "--grid", "40",
                         "--samples", "20000", "--streams", "2")
    assert code == 0
    z = cli.read_csv(out)[0]["evaluator_metadata"]["z"]
    assert math.isfinite(z)
    assert "stderr" in err
