import copy
import math

import pytest
import yaml

from twotone.cli import main
from twotone.spectrum import Spectrum


@pytest.fixture(scope="module")
def raw_default():
    import importlib.resources
    ref = importlib.resources.files("twotone.data") / "paper_default.yaml"
    return yaml.safe_load(ref.read_text())


def write_cfg(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_spectrum_default_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["spectrum", "--out", str(out)])
    assert rc == 0
    captured = capsys.readouterr().out
    assert "spectrum_s_x1.csv" in captured
    for name in ("s_x1", "s_x2"):
        spec = Spectrum.from_csv(str(out / f"spectrum_{name}.csv"))
        assert spec.freq.size == 2001
    text = (out / "spectrum_s_x1.csv").read_text()
    assert "# config_digest=" in text
    assert "# seed=1234" in text
    assert "offset_hz,psd_value,units" in text


def test_spectrum_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", "--out", str(a), "--seed", "7"]) == 0
    assert main(["spectrum", "--out", str(b), "--seed", "7"]) == 0
    for name in ("s_x1", "s_x2"):
        fa = (a / f"spectrum_{name}.csv").read_bytes()
        fb = (b / f"spectrum_{name}.csv").read_bytes()
        assert fa == fb


def test_spectrum_dtt_closed_form(tmp_path, raw_default):
    raw = copy.deepcopy(raw_default)
    raw["drive"] = {"scheme": "dtt", "Delta": 5e3, "n_p_per_tone": 1e6}
    cfg = write_cfg(tmp_path, raw)
    out = tmp_path / "dtt"
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "spectrum_sideband_red.csv").exists()
    assert (out / "spectrum_sideband_blue.csv").exists()


def test_spectrum_floquet_backend(tmp_path):
    out = tmp_path / "fl"
    rc = main(["spectrum", "--backend", "floquet", "--truncation", "4",
               "--out", str(out)])
    assert rc == 0
    assert (out / "spectrum_output.csv").exists()


def test_config_error_exit_code(tmp_path, raw_default, capsys):
    raw = copy.deepcopy(raw_default)
    raw["system"]["bogus"] = 1.0
    cfg = write_cfg(tmp_path, raw)
    rc = main(["spectrum", "--config", cfg, "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_drive_section_is_config_error(tmp_path, raw_default):
    raw = copy.deepcopy(raw_default)
    del raw["drive"]
    cfg = write_cfg(tmp_path, raw)
    rc = main(["spectrum", "--config", cfg, "--out", str(tmp_path / "x")])
    assert rc == 2


def test_unknown_backend_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--backend", "quantum_leap",
              "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_reproduce_unknown_figure(tmp_path, capsys):
    rc = main(["reproduce", "9z", "--out", str(tmp_path)])
    assert rc == 2
    assert "unknown figure" in capsys.readouterr().err


def test_reproduce_thermal_figure(tmp_path, capsys):
    out = tmp_path / "fig"
    rc = main(["reproduce", "1c", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "[PASS]" in printed
    assert (out / "fig1c.csv").exists()
    manifest = (out / "manifest_fig1c.txt").read_text()
    assert "config_digest=" in manifest
    assert "seed=1234" in manifest


def test_reproduce_tomography_figure(tmp_path, capsys):
    out = tmp_path / "fig3"
    rc = main(["reproduce", "3b", "--out", str(out)])
    assert rc == 0
    assert "[PASS]" in capsys.readouterr().out
    header = (out / "fig3b.csv").read_text().splitlines()[0]
    assert header.startswith("# config_digest=")


def test_calibrate(tmp_path, capsys):
    out = tmp_path / "cal"
    rc = main(["calibrate", "--out", str(out)])
    assert rc == 0
    lines = (out / "calibrations.csv").read_text().splitlines()
    assert lines[0].startswith("# config_digest=")
    assert lines[1] == "kind,value,uncertainty,inputs_digest"
    kinds = {ln.split(",")[0] for ln in lines[2:]}
    assert kinds == {"ThermalSlope", "PhotonNumberBeta",
                     "CavityPortOccupancy"}


def test_validate_passes(tmp_path, capsys):
    rc = main(["validate", "--truncation", "6", "--out", str(tmp_path)])
    printed = capsys.readouterr().out
    assert rc == 0, printed
    assert printed.count("[PASS]") == 4


def test_validate_truncation_too_small(tmp_path, capsys):
    rc = main(["validate", "--truncation", "0", "--out", str(tmp_path)])
    printed = capsys.readouterr().out
    assert rc == 1
    assert "[FAIL]" in printed
