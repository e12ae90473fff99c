import csv
import subprocess
import sys

import pytest

from moranmf.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, fmt, main
from moranmf.config import ConfigError, parse_config

MODEL = """
[model]
A = 16.0
B = 2.2
p = 0.4
q = 0.45

[model.schedule]
kind = "two_pow_i_squared"
"""


def write_cfg(tmp_path, run_body, model=MODEL, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(model + "\n[run]\n" + run_body)
    return path


def read_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_validate_ok(tmp_path, capsys):
    cfg = write_cfg(tmp_path, 'command = "validate"\n')
    assert main([str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    text = (tmp_path / "o" / "validate.txt").read_text()
    assert "0.3304820 < 0.7582363" in text
    assert "[PASS]" in capsys.readouterr().out


def test_validate_infeasible(tmp_path):
    model = MODEL.replace("A = 16.0", "A = 2.0")
    cfg = write_cfg(tmp_path, 'command = "validate"\n', model=model)
    assert main([str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_infeasible_for_other_commands(tmp_path, capsys):
    model = MODEL.replace("p = 0.4", "p = 0.7")
    cfg = write_cfg(tmp_path, 'command = "spectra"\n', model=model)
    assert main([str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert "error" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, 'command = "spectra"\ngamma = 3\n')
    assert main([str(cfg)]) == EXIT_CONFIG
    assert "gamma" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="model.gamma"):
        parse_config(MODEL.replace("q = 0.45", "q = 0.45\ngamma = 1") + '\n[run]\ncommand = "lq"\n')


@pytest.mark.parametrize("body", [
    'command = "explode"\n',
    'command = "lq"\nseed = -1\n',
    'command = "lq"\ngrid = "many"\n',
    'command = "lq"\naddress = "sideways"\n',
])
def test_bad_values(tmp_path, body):
    assert main([str(write_cfg(tmp_path, body))]) == EXIT_CONFIG


def test_missing_file_and_bad_toml(tmp_path):
    assert main([str(tmp_path / "nope.toml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\nA=1")
    assert main([str(bad)]) == EXIT_CONFIG


def test_explicit_schedule_parsing():
    cfg = parse_config(MODEL.replace('kind = "two_pow_i_squared"', 'kind = "explicit"\nexplicit = "1, 3, 10"')
                       + '\n[run]\ncommand = "validate"\n')
    assert cfg.params.schedule.explicit == (1, 3, 10)


def test_spectra_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, 'command = "spectra"\ngrid = 500\ngrid_joint = 20\n')
    assert main([str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main([str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    names = ["lower_level_sets.csv", "upper_level_sets.csv", "joint_hausdorff.csv", "joint_packing.csv",
             "summary.csv", "manifest.txt"]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_rows(tmp_path / "a" / "upper_level_sets.csv")
    assert len(rows) == 500
    assert list(rows[0]) == ["alpha", "dim_hausdorff", "dim_packing", "region"]
    header = (tmp_path / "a" / "summary.csv").read_text().splitlines()[0]
    assert header.startswith("# config_hash: ")
    summary = {r["quantity"]: float(r["value"]) for r in read_rows(tmp_path / "a" / "summary.csv")}
    assert summary["dim_hausdorff_support"] == pytest.approx(0.25)
    assert len(read_rows(tmp_path / "a" / "joint_packing.csv")) == 400


@pytest.mark.parametrize("body,files", [
    ('command = "localdim"\nn_levels = 600\naddress = "zeros"\n', ["trajectory.csv"]),
    ('command = "localdim"\nn_levels = 600\n', ["trajectory.csv"]),
    ('command = "lq"\ndepth_index = 6\n', ["tau_estimates.csv", "tau_summary.csv"]),
    ('command = "ld"\ndepth_index = 5\n', ["ld_counts.csv", "ld_summary.csv"]),
    ('command = "aux"\ntarget = "lower_H_linear"\nalpha = 0.25\n',
     ["aux_segments.csv", "aux_strong_law.csv", "aux_provenance.txt"]),
    ('command = "sample"\ndepth_index = 4\nn_samples = 50\n', ["sample_summary.csv"]),
])
def test_commands_write_files(tmp_path, body, files):
    cfg = write_cfg(tmp_path, body)
    assert main([str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    manifest = (tmp_path / "o" / "manifest.txt").read_text()
    for name in files:
        assert (tmp_path / "o" / name).exists()
        assert name in manifest


def test_sample_is_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, 'command = "sample"\ndepth_index = 4\nn_samples = 30\nseed = 5\n')
    main([str(cfg), "--out", str(tmp_path / "a")])
    main([str(cfg), "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "sample_summary.csv").read_bytes()
    assert a == (tmp_path / "b" / "sample_summary.csv").read_bytes()


def test_lq_summary_values(tmp_path):
    cfg = write_cfg(tmp_path, 'command = "lq"\ns_values = [2.0]\n')
    main([str(cfg), "--out", str(tmp_path / "o")])
    row = read_rows(tmp_path / "o" / "tau_summary.csv")[0]
    assert float(row["tau_lower_estimate"]) == pytest.approx(float(row["tau_lower_closed"]), abs=1e-3)
    assert float(row["tau_upper_estimate"]) == pytest.approx(float(row["tau_upper_closed"]), abs=1e-3)


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(float("-inf")) == "-inf"
    assert fmt(None) == ""
    assert fmt(3) == "3"


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, 'command = "validate"\n')
    res = subprocess.run([sys.executable, "-m", "moranmf", str(cfg), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0
