import subprocess
import sys

from qmonitor.cli import main


def _write(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def test_validate_and_config_error(tmp_path, capsys):
    good = _write(tmp_path, "[measurement]\ntau = pi\ndelta_a_range = 1e-2, 1e2\npoints_per_decade = 3\n")
    assert main(["validate", good]) == 0
    assert "9 delta_a rows" in capsys.readouterr().out
    bad = _write(tmp_path, "[system]\nmass = -1\n[measurement]\ntau = 1\ndelta_a = 1\n")
    assert main(["validate", bad]) == 1
    assert "mass" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 1


def test_analytic_to_stdout_and_files(tmp_path, capsys):
    cfg = _write(tmp_path, "[measurement]\ntau = pi\ndelta_a = 0.1, 1, 10\n")
    assert main(["analytic", cfg]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "delta_a,analytic_linear,classical_limit,quantum_limit" and len(out) == 4
    assert main(["analytic", cfg, "--out", str(tmp_path / "a"), "--plots"]) == 0
    assert (tmp_path / "a" / "analytic.svg").exists()


def test_run_exit_codes(tmp_path):
    ok = _write(tmp_path, "[measurement]\ntau = pi\ndelta_a = 2\n")
    assert main(["run", ok, "--out", str(tmp_path / "o")]) == 0
    partial = _write(tmp_path, "[measurement]\ntau = pi\ndelta_a = 2\n[numerics]\nhalf_width = 2\nmax_retries = 0\n")
    assert main(["run", partial, "--out", str(tmp_path / "p")]) == 2


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, "[measurement]\ntau = pi\ndelta_a = 1\n")
    proc = subprocess.run([sys.executable, "-m", "qmonitor", "validate", cfg], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ok:")
