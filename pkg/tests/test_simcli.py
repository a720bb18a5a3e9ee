import json

import numpy as np
import pytest

from nhtrack import logio, svgplot
from nhtrack.netgraph import build_topology
from nhtrack.sim import Scenario, run_scenario
from nhtrack.simcli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    ConfigError,
    certify_scenario,
    main,
    run_experiment_grid,
    scenario_from_dict,
)

BASE = {"network": {"topology": {"kind": "cyclic", "m": 4}}, "T": 0.1, "dt": 0.001}


def doc(**kw):
    out = json.loads(json.dumps(BASE))
    out.update(kw)
    return out


def test_parse_defaults():
    sc = scenario_from_dict(doc())
    assert sc.m == 4 and sc.n_steps == 100
    assert sc.controller.gains == (8.0, 12.0, 6.0)
    assert sc.attack is None and sc.resilience is None


@pytest.mark.parametrize("bad", [
    {"T": 0.1, "dt": 0.001},
    doc(extra=1),
    doc(network={"topology": {"kind": "cyclic", "m": 4, "weights": 1}}),
    doc(network={"topology": {"kind": "cyclic", "m": 2}}),
    doc(controller={"pole": 2, "gains": [8, 12, 6]}),
    doc(controller={"gains": [1, 1, 1]}),
    doc(attack={"preset": True, "abar": 1.0}),  # attacked set exceeds m=4
    doc(attack={"edges": [[1, 3]], "kind": "constant_offset", "abar": 1.0}),
    doc(attack={"preset": True, "kind": "laser", "params": {"attacked": [2]}}),
    doc(resilience={"theta": 1, "trusted": {"1": [3]}}),
    doc(T=0.1, dt=0.03),
    doc(navigator={"kind": "spiral"}),
    doc(network={"edges": [[1, 2, 1.0], [2, 1, 1.0]]}),
])
def test_parse_rejects(bad):
    with pytest.raises(ConfigError):
        scenario_from_dict(bad)


def test_parse_edges_gains_attack_resilience():
    d = doc(
        network={"edges": [[1, 0, 0.5], [1, 2, 0.5], [2, 0, 1.0]]},
        controller={"gains": [1, 3, 3], "v_min": 0.1, "update": "zoh"},
        attack={"edges": [[1, 2]], "kind": "constant_offset", "abar": 0.3, "params": {"offset": [0.3, 0.0]}},
        resilience={"theta": 0},
        navigator={"kind": "lemniscate", "a_x": 4, "a_y": 3, "omega": 0.3},
        initial={"ring_radius": 1.5},
        name="custom",
    )
    sc = scenario_from_dict(d)
    assert sc.m == 2 and sc.update == "zoh" and sc.name == "custom"
    assert sc.attack.edges == [(1, 2)]
    assert sc.attack.signals[(1, 2)].offset == (0.3, 0.0)
    assert sc.navigator.kind == "lemniscate"


def test_seed_override_changes_random_attack():
    d = doc(network={"topology": {"kind": "cyclic", "m": 12}},
            attack={"preset": True, "kind": "bounded_random", "abar": 1.0})
    a, b = scenario_from_dict(d, seed=1), scenario_from_dict(d, seed=2)
    assert a.attack != b.attack
    assert scenario_from_dict(d, seed=1).attack == a.attack


def test_csv_roundtrip(tmp_path):
    net = build_topology("cyclic", 12)
    from nhtrack.adversary import preset_attack
    from nhtrack.resilience import ResilienceConfig

    run = run_scenario(Scenario(net, attack=preset_attack("cyclic", 12), resilience=ResilienceConfig.for_network(net, 1), T=0.05))
    path = logio.write_csv(run, tmp_path / "a.csv")
    assert logio.read_csv(path) == run
    cols = path.read_text().splitlines()[0].split(",")
    assert cols[:3] == ["t", "px_1", "py_1"] and cols[-2:] == ["e_tilde", "eps_tilde"]
    assert len(path.read_text().splitlines()) == 1 + 51


def test_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        logio.read_csv(p)


def test_svg_deterministic(tmp_path):
    run = run_scenario(Scenario(build_topology("star", 3), T=0.05))
    a = svgplot.plot_run(run, tmp_path, "a")
    b = svgplot.plot_run(run, tmp_path, "b")
    for pa, pb in zip(a, b):
        text = pa.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
        assert text == pb.read_text().replace("b: ", "a: ")


def test_cli_run_and_plot(tmp_path, capsys):
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(doc(name="tiny")))
    assert main(["run", "--scenario", str(f), "--out", str(tmp_path / "out"), "--seed", "3"]) == EXIT_OK
    csv = tmp_path / "out" / "tiny.csv"
    assert csv.exists() and (tmp_path / "out" / "tiny_trajectory.svg").exists()
    assert main(["plot", "--log", str(csv), "--out", str(tmp_path / "plots")]) == EXIT_OK
    assert (tmp_path / "plots" / "tiny_errors.svg").exists()


def test_cli_config_error(tmp_path):
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(doc(typo=1)))
    assert main(["run", "--scenario", str(f), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["certify", "--scenario", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    f.write_text("{not json")
    assert main(["certify", "--scenario", str(f)]) == EXIT_CONFIG


def test_cli_runtime_error(tmp_path):
    x = [[5.0 + k, 0.0, 1.5707963267948966, 0.051, 0.0, -1.0] for k in range(4)]
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(doc(initial={"states": x}, controller={"pole": 0.1}, T=1.0, name="stall")))
    assert main(["run", "--scenario", str(f), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    # the partial log is flushed before aborting
    assert (tmp_path / "o" / "stall.csv").exists()


def test_certify_small_worst_case(capsys, tmp_path):
    d = doc(network={"topology": {"kind": "path", "m": 4}}, T=8.0,
            attack={"preset": True, "kind": "constant_offset", "abar": 0.1, "params": {"attacked": [2]}},
            resilience={"theta": 1})
    res = certify_scenario(scenario_from_dict(d))
    assert res.holds
    assert res.certificate.rho_d == pytest.approx(8.0, rel=1e-3)
    f = tmp_path / "c.json"
    f.write_text(json.dumps(d))
    assert main(["certify", "--scenario", str(f)]) == EXIT_OK
    assert "eta bound" in capsys.readouterr().out


def test_certify_refuses_trimming_scenario():
    d = doc(network={"topology": {"kind": "cyclic", "m": 12}},
            attack={"preset": True, "abar": 0.1}, resilience={"theta": 1})
    with pytest.raises(ConfigError):
        certify_scenario(scenario_from_dict(d))


def test_grid_outputs(tmp_path):
    rep = run_experiment_grid(tmp_path, T=0.05)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert sum(n.endswith(".csv") for n in names) == 6
    assert sum(n.endswith("_trajectory.svg") for n in names) == 6
    assert {"e_tilde_clean.svg", "eps_tilde_attacked.svg", "summary.txt"} <= set(names)
    assert len(rep.summary) == 6
    assert "artifact defaults" in (tmp_path / "summary.txt").read_text()
    assert np.isfinite(rep.steady("cyclic_attacked"))
