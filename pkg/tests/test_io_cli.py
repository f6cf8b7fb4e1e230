import io

import numpy as np
import pytest

from tdlpt.cli import TABLE1_COLUMNS, cmd_ho_verify, main
from tdlpt.hierarchy import ShiftSeries
from tdlpt.io import (TABLE1_REFERENCE, ConfigError, ResultRecord, RunConfig, emit_record,
                      parse_record, read_csv, write_csv)

# short, coarse hydrogen run used by the CLI tests
FAST = ["--set", "dt=0.01", "--set", "omega=0.3", "--set", "n_cycles=1", "--set", "r_max=20"]


def test_defaults():
    c = RunConfig()
    assert (c.system, c.omega, c.lam, c.n_cycles) == ("hydrogen", 0.056, 0.03, 5)
    assert (c.r_min, c.r_max, c.dr, c.dt) == (1e-6, 40.0, 0.1, 1e-3)
    assert c.window == "one_cycle_at_peak" and c.cycles == (5, 10, 15, 20, 30, 50)
    assert not c.oracle_tdse and not c.oracle_dyson


def test_config_round_trip():
    c = RunConfig(omega=0.3, cycles=(2, 3), oracle_tdse=True, window="custom",
                  window_t0=10.0, window_T=5.0)
    assert RunConfig.from_text(c.to_text()) == c


@pytest.mark.parametrize("text", [
    "omgea = 0.1\n",
    "omega = 0.1\nomega = 0.2\n",
    "omega 0.1\n",
    "dt = fast\n",
    "oracle_tdse = maybe\n",
    "window = custom\n",
    "dr = -0.1\n",
    "system = helium\n",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_intensity_overrides_lam():
    c = RunConfig.from_text("lam = 0.5\nintensity = 0.0009\n")
    assert c.amplitude == pytest.approx(0.03)


def test_csv_round_trip():
    buf = io.StringIO()
    text = write_csv(buf, {"kind": "x"}, ["a", "b"], [[1.0, 2.5], [np.pi, -1e-20]])
    assert buf.getvalue() == text
    header, cols, data = read_csv(text)
    assert header["schema"] == "1" and header["kind"] == "x" and cols == ["a", "b"]
    np.testing.assert_allclose(data, [[1.0, 2.5], [np.pi, -1e-20]], rtol=1e-11)


def test_record_round_trip_is_exact():
    t = np.linspace(0, 3, 7)
    rec = ResultRecord(RunConfig(), ShiftSeries(t, np.exp(1j * t) / 3), t, np.sin(t) / 7,
                       {"E2_cycle": -1.0665 + 1e-5j, "alpha": 4.26})
    back = parse_record(emit_record(rec))
    assert back == rec
    assert emit_record(back) == emit_record(rec)


def test_record_without_series():
    rec = ResultRecord(RunConfig(), summary={"alpha": 1.0})
    assert parse_record(emit_record(rec)) == rec
    with pytest.raises(ValueError):
        ResultRecord(RunConfig(), dipole=np.zeros(3))


def test_cli_unknown_key_exits_1(capsys):
    assert main(["--set", "omgea=1", "ho-shift", "--omega", "0.5"]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_cli_bad_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("omega = 0.1\nomega = 0.2\n")
    assert main(["--config", str(p), "ho-shift", "--omega", "0.5"]) == 1
    assert main(["--config", str(tmp_path / "missing.cfg"), "ho-shift", "--omega", "0.5"]) == 1


def test_cli_ho_shift(capsys):
    assert main(["ho-shift", "--omega", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "E2_bar = -0.333333333333" in out


def test_cli_ho_verify_pass_and_breach(capsys):
    assert main(["ho-verify"]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    # a very coarse quadrature step breaches the state tolerance
    assert main(["--set", "dt=0.4", "ho-verify"]) == 3


def test_cli_hydrogen_is_deterministic(tmp_path):
    path = tmp_path / "hydrogen_N1.csv"
    assert main(FAST + ["--output-dir", str(tmp_path), "hydrogen-first-order"]) == 0
    ta = path.read_bytes()
    assert main(FAST + ["--output-dir", str(tmp_path), "hydrogen-first-order"]) == 0
    assert path.read_bytes() == ta
    rec = parse_record(ta.decode())
    assert rec.config.n_cycles == 1 and rec.config.omega == 0.3
    assert rec.shift.values[0] == 0 and rec.dipole[0] == 0
    assert set(rec.summary) == {"E2_cycle", "E2_pulse", "alpha"}


def test_cli_zero_amplitude(tmp_path):
    # E_2 is the coefficient of lam^2 and does not depend on lam; the dipole does
    recs = []
    for lam in ("0", "0.03"):
        d = tmp_path / lam
        assert main(FAST + ["--set", f"lam={lam}", "--output-dir", str(d),
                            "hydrogen-first-order"]) == 0
        recs.append(parse_record((d / "hydrogen_N1.csv").read_text()))
    assert np.all(recs[0].dipole == 0) and np.abs(recs[1].dipole).max() > 0
    np.testing.assert_array_equal(recs[0].shift.values, recs[1].shift.values)


def test_cli_table1_rows_in_order(tmp_path, capsys):
    assert main(FAST + ["--output-dir", str(tmp_path), "table1", "--cycles", "2,1,5"]) == 0
    header, cols, data = read_csv(tmp_path / "table1.csv")
    assert cols == TABLE1_COLUMNS
    assert list(data[:, 0]) == [1, 2, 5]
    assert header["kind"] == "table1" and "Table 1" in header["reference"]
    # reference columns are filled only for tabulated N
    assert data[2, 6] == TABLE1_REFERENCE[5][0]
    assert np.isnan(data[0, 6]) and np.isnan(data[0, -1])    # blank and "ok" cells


def test_cli_custom_window(tmp_path):
    assert main(FAST + ["--set", "window=custom", "--set", "window_t0=10",
                        "--set", "window_T=5", "--output-dir", str(tmp_path),
                        "hydrogen-first-order"]) == 0
    rec = parse_record((tmp_path / "hydrogen_N1.csv").read_text())
    assert "E2_custom" in rec.summary and "alpha_custom" in rec.summary


def test_cli_fig2_needs_toggle(tmp_path):
    assert main(["--output-dir", str(tmp_path), "figure-data", "--which", "fig2"]) == 1


def test_cli_fig1_files(tmp_path):
    assert main(FAST + ["--set", "cycles=1,2", "--output-dir", str(tmp_path),
                        "figure-data", "--which", "fig1"]) == 0
    for n in (1, 2):
        header, cols, data = read_csv((tmp_path / f"fig1_N{n}.csv").read_text())
        assert cols == ["t", "g", "Re_E2", "Im_E2"] and header["N"] == str(n)
        assert data[0, 2] == 0 and np.all(np.diff(data[:, 0]) > 0)


def test_ho_verify_zero_coupling():
    report, ok = cmd_ho_verify(RunConfig(lam=0.0))
    assert ok and report["max_state_deviation"] < 1e-14 and report["max_abs_Q3"] == 0


def test_cli_fig1_extremum_near_peak(tmp_path):
    assert main(["--set", "cycles=5", "--output-dir", str(tmp_path),
                 "figure-data", "--which", "fig1"]) == 0
    _, _, data = read_csv(tmp_path / "fig1_N5.csv")
    t_ext = data[np.argmax(np.abs(data[:, 2])), 0]
    period = 2 * np.pi / 0.056
    assert abs(t_ext - 5 * np.pi / 0.056) <= period


def test_cli_dyson_toggle(tmp_path):
    assert main(FAST + ["--set", "oracle_dyson=true", "--output-dir", str(tmp_path),
                        "hydrogen-first-order"]) == 0
    rec = parse_record((tmp_path / "hydrogen_N1.csv").read_text())
    assert rec.summary["dyson_rel_l2"] < 1e-4
