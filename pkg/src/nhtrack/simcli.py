"""Scenario files, the three-topology experiment grid, certificates and the CLI.

A scenario file is a strict JSON document; unknown keys are rejected so a
typo in a weight or a section name fails loudly instead of silently falling
back to a default::

    {
      "name": "cyclic_attacked",
      "network": {"topology": {"kind": "cyclic", "m": 12}},
      "navigator": {"kind": "circle", "radius": 5.0, "omega": 0.2},
      "controller": {"pole": 2.0, "v_min": 0.05},
      "attack": {"preset": true, "kind": "sinusoid", "abar": 1.0},
      "resilience": {"theta": 1, "trusted": {"1": [0]}},
      "T": 20.0, "dt": 0.001, "seed": 0
    }
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, logio, svgplot
from .adversary import PRESET_ATTACKED, AttackConfigError, AttackModel, make_signal, preset_attack
from .fblin import ControllerConfig
from .netgraph import CommNetwork, GraphError, build_topology, check_navigator_reachability
from .resilience import ResilienceConfig, ResilienceError
from .sim import RunLog, Scenario, SimulationError, clean_eta, run_scenario, write_outputs
from .vehicle import NavigatorTrajectory

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
TOPOLOGIES = ("star", "cyclic", "path")
GRID_M = 12

# values the experiment description leaves open; reported as artifact choices
ARTIFACT_DEFAULTS = {
    "T": 20.0,
    "dt": 1e-3,
    "abar": 1.0,
    "attack kind": "sinusoid (0.1 rad/s rotating offset)",
    "navigator": "circle, radius 5, omega 0.2",
    "pole": 2.0,
    "theta": 1,
    "ring radius": 2.0,
}

__all__ = [
    "ConfigError", "GridReport", "Scenario", "RunLog", "run_scenario", "compute_metrics",
    "load_scenario", "scenario_from_dict", "grid_scenarios", "run_experiment_grid",
    "certify_scenario", "main",
]

compute_metrics = analysis.compute_metrics


class ConfigError(ValueError):
    pass


# --- config parsing --------------------------------------------------------

_TOP_KEYS = {"name", "network", "navigator", "controller", "attack", "resilience", "T", "dt", "seed", "initial"}


def _strict(section: dict, allowed, where: str) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return section


def _network(cfg: dict) -> CommNetwork:
    _strict(cfg, {"topology", "edges", "m"}, "network")
    if ("topology" in cfg) == ("edges" in cfg):
        raise ConfigError("network: give exactly one of 'topology' or 'edges'")
    if "topology" in cfg:
        top = _strict(cfg["topology"], {"kind", "m"}, "network.topology")
        return build_topology(top["kind"], int(top.get("m", GRID_M)))
    edges = [(int(i), int(j), float(w)) for i, j, w in cfg["edges"]]
    m = int(cfg.get("m", max(max(i, j) for i, j, _ in edges)))
    net = CommNetwork(m, tuple(edges))
    if not check_navigator_reachability(net):
        raise ConfigError("network: some vehicle cannot be reached from the navigator")
    return net


def _navigator(cfg: dict) -> NavigatorTrajectory:
    _strict(cfg, {"kind", "radius", "a_x", "a_y", "omega", "center", "start", "velocity"}, "navigator")
    kw = dict(cfg)
    for key in ("center", "start", "velocity"):
        if key in kw:
            kw[key] = tuple(float(v) for v in kw[key])
    return NavigatorTrajectory(**kw)


def _controller(cfg: dict) -> tuple[ControllerConfig, str]:
    _strict(cfg, {"pole", "gains", "v_min", "update"}, "controller")
    if "pole" in cfg and "gains" in cfg:
        raise ConfigError("controller: give either 'pole' or 'gains'")
    v_min = float(cfg.get("v_min", 0.05))
    if "gains" in cfg:
        ctrl = ControllerConfig(tuple(float(g) for g in cfg["gains"]), v_min, None)
    else:
        ctrl = ControllerConfig.from_pole(float(cfg.get("pole", 2.0)), v_min)
    return ctrl, cfg.get("update", "stage")


def _attack(cfg: dict | None, net: CommNetwork, topology: str | None, seed: int) -> AttackModel | None:
    if cfg is None:
        return None
    _strict(cfg, {"preset", "edges", "kind", "abar", "seed", "params"}, "attack")
    kind = cfg.get("kind", "sinusoid")
    abar = float(cfg.get("abar", 1.0))
    seed = int(cfg.get("seed", seed))
    params = _strict(cfg.get("params", {}), {"frequency", "direction", "offset", "attacked"}, "attack.params")
    freq = float(params.get("frequency", 0.1))
    direction = tuple(params.get("direction", (0.0, 1.0)))
    if ("preset" in cfg) == ("edges" in cfg):
        raise ConfigError("attack: give exactly one of 'preset' or 'edges'")
    if "preset" in cfg:
        preset = cfg["preset"]
        kind_of_net = topology if preset is True else preset
        if kind_of_net not in TOPOLOGIES:
            raise ConfigError("attack.preset needs a named topology")
        attacked = tuple(params.get("attacked", PRESET_ATTACKED))
        model = preset_attack(kind_of_net, net.m, abar, kind, attacked, seed, freq, direction)
    else:
        offset = params.get("offset")
        sigs = {}
        for e in cfg["edges"]:
            i, j = int(e[0]), int(e[1])
            sigs[(i, j)] = make_signal(kind, abar, (i, j), seed, freq, direction, offset)
        model = AttackModel(sigs, abar)
    model.validate(net)
    return model


def _resilience(cfg: dict | None, net: CommNetwork) -> ResilienceConfig | None:
    if cfg is None:
        return None
    _strict(cfg, {"theta", "trusted"}, "resilience")
    return ResilienceConfig.for_network(net, int(cfg.get("theta", 0)), cfg.get("trusted"))


def scenario_from_dict(doc: dict, seed: int | None = None) -> Scenario:
    """Build a validated :class:`Scenario`; any invalid field raises :class:`ConfigError`."""
    try:
        _strict(doc, _TOP_KEYS, "scenario")
        if "network" not in doc:
            raise ConfigError("scenario: 'network' section is required")
        seed = int(doc.get("seed", 0)) if seed is None else int(seed)
        net = _network(doc["network"])
        topology = doc["network"].get("topology", {}).get("kind")
        nav = _navigator(doc.get("navigator", {}))
        ctrl, update = _controller(doc.get("controller", {}))
        attack = _attack(doc.get("attack"), net, topology, seed)
        res = _resilience(doc.get("resilience"), net)
        init = _strict(doc.get("initial", {}), {"ring_radius", "states"}, "initial")
        states = init.get("states")
        return Scenario(
            network=net, navigator=nav, controller=ctrl, attack=attack, resilience=res,
            T=float(doc.get("T", 20.0)), dt=float(doc.get("dt", 1e-3)), seed=seed,
            ring_radius=float(init.get("ring_radius", 2.0)),
            initial_states=None if states is None else np.array(states, dtype=float),
            update=update, name=str(doc.get("name", "scenario")),
        )
    except ConfigError:
        raise
    except (GraphError, AttackConfigError, ResilienceError, KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid scenario: {err}") from err


def load_scenario(path, seed: int | None = None) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read scenario {path}: {err}") from err
    return scenario_from_dict(doc, seed)


# --- experiment grid -------------------------------------------------------

def grid_scenarios(T: float = 20.0, dt: float = 1e-3, seed: int = 0, m: int = GRID_M,
                   abar: float = 1.0, kind: str = "sinusoid", theta: int = 1) -> list[Scenario]:
    """Clean and attacked run for each topology; attacked runs trim with ``theta``."""
    out = []
    for top in TOPOLOGIES:
        net = build_topology(top, m)
        out.append(Scenario(net, T=T, dt=dt, seed=seed, name=f"{top}_clean"))
        out.append(Scenario(
            net, attack=preset_attack(top, m, abar, kind, seed=seed),
            resilience=ResilienceConfig.for_network(net, theta), T=T, dt=dt, seed=seed,
            name=f"{top}_attacked",
        ))
    return out


@dataclass
class GridReport:
    runs: dict = field(default_factory=dict)  # name -> RunLog
    summary: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def steady(self, name: str, metric: str = "e_tilde") -> float:
        return analysis.steady_state(getattr(self.runs[name], metric))


def _run_one(sc: Scenario) -> RunLog:
    return run_scenario(sc)


def run_experiment_grid(out_dir, T: float = 20.0, dt: float = 1e-3, seed: int = 0,
                        workers: int = 1, plots: bool = True, **grid_kw) -> GridReport:
    """Run the six-scenario grid and write CSV logs, plots and a summary table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = grid_scenarios(T, dt, seed, **grid_kw)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            logs = list(pool.map(_run_one, scenarios))
    else:
        logs = [_run_one(sc) for sc in scenarios]
    rep = GridReport()
    for sc, run in zip(scenarios, logs):
        rep.runs[sc.name] = run
        rep.files.append(logio.write_csv(run, out_dir / f"{sc.name}.csv"))
        if plots:
            rep.files.append(svgplot.trajectory_chart(run, out_dir / f"{sc.name}_trajectory.svg", sc.name))
        rep.summary.append({
            "scenario": sc.name,
            "steady_e_tilde": analysis.steady_state(run.e_tilde),
            "steady_eps_tilde": analysis.steady_state(run.eps_tilde),
            "final_e_tilde": float(run.e_tilde[-1]),
            "switches": int(run.switches[-1].sum()),
            "worst_case_vehicles": sorted(sc.resilience.worst_case) if sc.resilience else [],
        })
    if plots:
        for case in ("clean", "attacked"):
            group = {top: rep.runs[f"{top}_{case}"] for top in TOPOLOGIES}
            for metric in ("e_tilde", "eps_tilde"):
                rep.files.append(svgplot.error_chart(group, out_dir / f"{metric}_{case}.svg", metric, f"{metric} ({case})"))
    rep.files.append(_write_summary(rep.summary, out_dir / "summary.txt", T, dt, seed))
    return rep


def _write_summary(rows, path: Path, T, dt, seed) -> Path:
    lines = [f"{'scenario':<18}{'steady e~':>14}{'steady eps~':>14}{'final e~':>14}{'switches':>10}"]
    for r in rows:
        lines.append(
            f"{r['scenario']:<18}{r['steady_e_tilde']:>14.6e}{r['steady_eps_tilde']:>14.6e}"
            f"{r['final_e_tilde']:>14.6e}{r['switches']:>10d}"
        )
    lines += ["", f"T={T} dt={dt} seed={seed}", "artifact defaults (not fixed by the experiment description):"]
    lines += [f"  {k}: {v}" for k, v in ARTIFACT_DEFAULTS.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


# --- certificate -----------------------------------------------------------

@dataclass
class CertifyResult:
    certificate: analysis.RobustnessCertificate
    run: RunLog
    limsup_eta: float
    limsup_e: float

    @property
    def holds(self) -> bool:
        return self.limsup_eta <= self.certificate.eta_bound and self.limsup_e <= self.certificate.delta

    def report(self) -> str:
        return self.certificate.report(self.limsup_eta, self.limsup_e)


def certify_scenario(sc: Scenario, run: RunLog | None = None, Q=None, c_eps: float = 1.0) -> CertifyResult:
    """Run ``sc`` (worst-case regime) and bound its clean-reference error.

    ``rho_d`` is estimated from the residual of the logged error against the
    nominal closed loop, so the certificate is empirical.
    """
    if sc.resilience is not None and any(sc.resilience.trims(i) for i in range(1, sc.m + 1)):
        raise ConfigError("certify applies to the worst-case regime; the scenario trims some vehicles")
    run = run_scenario(sc) if run is None else run
    A_c = sc.controller.closed_loop(sc.m)
    eta = clean_eta(sc, run).reshape(len(run.t), -1)
    abar = sc.attack.abar if sc.attack is not None else 0.0
    rho_d = analysis.estimate_rho_d(run.t, eta, A_c, abar) if abar > 0 else 0.0
    cert = analysis.ultimate_bound(A_c, rho_d, abar, Q=Q, c_eps=c_eps)
    limsup_eta = analysis.steady_state(np.linalg.norm(eta, axis=1))
    dev = np.linalg.norm(run.y - run.nav[:, None, 0], axis=2).max(axis=1)
    return CertifyResult(cert, run, limsup_eta, analysis.steady_state(dev))


# --- CLI -------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhtrack", description="Networked vehicle tracking simulator")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="simulate one scenario file")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--no-plots", action="store_true")
    g = sub.add_parser("grid", help="three topologies, clean and attacked")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--T", type=float, default=20.0)
    g.add_argument("--dt", type=float, default=1e-3)
    g.add_argument("--workers", type=int, default=1)
    c = sub.add_parser("certify", help="ultimate-bound certificate for a worst-case scenario")
    c.add_argument("--scenario", required=True)
    c.add_argument("--seed", type=int)
    pl = sub.add_parser("plot", help="plots from a CSV log")
    pl.add_argument("--log", required=True)
    pl.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.cmd == "run":
            sc = load_scenario(args.scenario, args.seed)
            try:
                run = run_scenario(sc)
            except SimulationError as err:
                write_outputs(sc, err.log, args.out, plots=False)
                raise
            path = write_outputs(sc, run, args.out, plots=not args.no_plots)
            print(f"{path}  steady e~ {analysis.steady_state(run.e_tilde):.6e}")
        elif args.cmd == "grid":
            rep = run_experiment_grid(args.out, args.T, args.dt, args.seed, args.workers)
            print(Path(args.out, "summary.txt").read_text(), end="")
            log.info("wrote %d files", len(rep.files))
        elif args.cmd == "certify":
            res = certify_scenario(load_scenario(args.scenario, args.seed))
            print(res.report(), end="")
        elif args.cmd == "plot":
            run = logio.read_csv(args.log)
            Path(args.out).mkdir(parents=True, exist_ok=True)
            for path in svgplot.plot_run(run, args.out, Path(args.log).stem):
                print(path)
    except (ConfigError, analysis.CertificateError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
