import json

import pytest

from aquaplan.cli import main
from aquaplan.exogenous import SYNTHETIC_COEFFICIENTS
from conftest import DEFAULT_CFG, MIX_CSV


@pytest.fixture()
def short_cfg(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text("[simulation]\nhours = 2.0\n")
    return str(path)


def test_run_reactive_happy_path(short_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", short_cfg, "--controller", "reactive",
                 "--out", str(out)])
    assert code == 0
    assert (out / "trace_reactive.csv").exists()
    payload = json.loads(
        (out / "metrics_reactive.json").read_text())
    assert payload["hours"] == 2.0
    assert "wrote" in capsys.readouterr().out


def test_run_missing_config_names_path(tmp_path, capsys):
    code = main(["run", str(tmp_path / "nope.cfg")])
    assert code == 2
    err = capsys.readouterr().err
    assert "nope.cfg" in err and "AQUAPLAN_CONFIG" in err


def test_run_unknown_key_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[plant]\nwarp_factor = 9\n")
    assert main(["run", str(cfg)]) == 2


def test_run_seed_repeatable(short_cfg, tmp_path):
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert main(["run", short_cfg, "--controller", "mpc",
                     "--seed", "7", "--out", str(out)]) == 0
        outs.append((out / "trace_mpc.csv").read_bytes())
    assert outs[0] == outs[1]


def test_dump_effective_config(short_cfg, capsys):
    assert main(["run", short_cfg, "--dump-effective-config"]) == 0
    text = capsys.readouterr().out
    assert "[plant]" in text and "hours = 2.0" in text


def test_compare_writes_report(short_cfg, tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", short_cfg, "--out", str(out)]) == 0
    for name in ("trace_reactive.csv", "trace_mpc.csv",
                 "metrics_reactive.json", "metrics_mpc.json"):
        assert (out / name).exists()
    report = json.loads((out / "comparison.json").read_text())
    assert "emissions_savings_pct" in report
    chlorine = report["chlorine_min_mg_per_gal"]
    assert set(chlorine) == {"reactive", "mpc"}
    assert "emissions savings" in capsys.readouterr().out


def test_fit_matches_generator(capsys):
    assert main(["fit", str(MIX_CSV)]) == 0
    out = capsys.readouterr().out
    for source, coeff in SYNTHETIC_COEFFICIENTS.items():
        line = next(l for l in out.splitlines() if l.startswith(source))
        assert float(line.split()[1]) == pytest.approx(coeff, abs=1e-4)


def test_fit_emit_phi(tmp_path, capsys):
    phi_csv = tmp_path / "phi.csv"
    assert main(["fit", str(MIX_CSV), "--emit-phi", str(phi_csv)]) == 0
    lines = phi_csv.read_text().splitlines()
    assert lines[0] == "hour,phi_kg_per_kwh"
    assert len(lines) == 1 + 120


def test_fit_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("hour,wind_mwh,solar_mwh,hydro_mwh,gas_mwh,coal_mwh,"
                   "nuclear_mwh,ghg_kg\n0,1,2,3,4,5,6,seven\n")
    assert main(["fit", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "AQUAPLAN_PARSE" in err and ":2" in err


@pytest.fixture(scope="module")
def reactive_trace(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli-trace")
    cfg = tmp / "short.cfg"
    cfg.write_text("[simulation]\nhours = 2.0\n")
    out = tmp / "out"
    assert main(["run", str(cfg), "--controller", "reactive",
                 "--out", str(out)]) == 0
    return out / "trace_reactive.csv"


def test_plotdata_chlorine_row_count(reactive_trace, tmp_path, capsys):
    out = tmp_path / "chlorine.csv"
    assert main(["plotdata", str(reactive_trace), "--series", "chlorine",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t_min,value"
    assert len(lines) == 1 + 48  # 2 h at 2.5 min


def test_plotdata_yd_mostly_in_band(reactive_trace, capsys):
    assert main(["plotdata", str(reactive_trace), "--series", "yD"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    values = [float(r.split(",")[1]) for r in rows]
    # the PI controller needs ~30 min to ramp from the lower pump bound
    settled = values[len(values) // 2:]
    assert all(77.0 <= v <= 95.0 for v in settled)
    in_band = sum(1 for v in values if 77.0 <= v <= 95.0)
    assert in_band / len(values) > 0.6


def test_plotdata_wide_series(reactive_trace, tmp_path):
    out = tmp_path / "tanks.csv"
    assert main(["plotdata", str(reactive_trace), "--series", "tanks",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t_min,value,series"
    assert len(lines) == 1 + 2 * 48  # two tanks


def test_plotdata_unknown_series(reactive_trace, capsys):
    assert main(["plotdata", str(reactive_trace),
                 "--series", "entropy"]) == 1
    err = capsys.readouterr().err
    assert "yD" in err and "chlorine" in err


def test_plotdata_empty_trace(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plotdata", str(empty), "--series", "yD"]) == 1
