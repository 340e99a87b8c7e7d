import json

from ghecheck import cli


def test_verify_single_check(capsys):
    assert cli.main(["verify", "lax1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS lax1") and "lam^0" in out


def test_unknown_check_is_usage_error(capsys):
    assert cli.main(["verify", "no-such-check"]) == 2


def test_bad_flag_is_usage_error(capsys):
    assert cli.main(["verify", "--b", "x/y", "lax1"]) == 2


def test_failure_exit_code(capsys):
    assert cli.main(["verify", "flow:J1H2"]) == 1
    assert capsys.readouterr().out.startswith("FAIL")


def test_json_trace(capsys):
    assert cli.main(["verify", "olver:j0", "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["name"] == "olver:j0"
    assert {"cell", "terms", "residual_terms", "residual"} <= set(payload["details"]["cells"][0])


def test_specialized_pencil_parameter(capsys):
    assert cli.main(["verify", "olver:jacobi", "--a", "2", "--json"]) == 0
    cells = json.loads(capsys.readouterr().out)["details"]["cells"]
    assert not any("a" in c["cell"].split("[")[1] for c in cells)


def test_registry_contents():
    reg = cli.registry()
    for name in ("lax1", "lax2", "lax3", "lagrangian", "symplectic", "j0", "noether:X5",
                 "conservation:Hcd:X3", "recursion:inversion", "j1:entries", "bihamiltonian", "h2",
                 "olver:jacobi"):
        assert name in reg


def test_prefix_selection_and_out_dir(tmp_path, capsys):
    assert cli.main(["verify", "noether:*", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "verdicts.json").read_text())
    assert len(data) == 9


def test_deterministic_json(capsys):
    cli.main(["verify", "symmetry:*", "--json"])
    a = capsys.readouterr().out
    cli.main(["verify", "symmetry:*", "--json"])
    assert a == capsys.readouterr().out


def test_simulate(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N_x = 8\nN_y = 8\nN_z = 8\nT = 0.02\ndt = 0.01\n")
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3", "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["config"]["seed"] == 3
    assert (tmp_path / "o" / "monitor.csv").exists()


def test_simulate_zero_amplitude(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N_x = 8\nN_y = 8\nN_z = 8\nT = 0.02\ndt = 0.01\neps = 0\n")
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path), "--json"]) == 0
    assert all(v == 0 for v in json.loads(capsys.readouterr().out)["max_drift"].values())


def test_simulate_invalid_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N_x = 4\n")
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path)]) == 2


def test_specialized_flow_parameter(capsys):
    assert cli.main(["verify", "bihamiltonian", "--b", "1/3"]) == 0
    # H0 carries 1/(b^2 - 1), so b = 1 is a degenerate point
    assert cli.main(["verify", "bihamiltonian", "--b", "1"]) == 1
    assert "error" in capsys.readouterr().out
