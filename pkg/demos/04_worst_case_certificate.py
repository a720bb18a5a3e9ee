# On the path graph nobody has enough neighbours to trim, so the attack acts as a
# bounded disturbance. The Lyapunov certificate bounds the resulting error.
from nhtrack.adversary import preset_attack
from nhtrack.analysis import steady_state
from nhtrack.netgraph import build_topology
from nhtrack.resilience import ResilienceConfig
from nhtrack.sim import Scenario
from nhtrack.simcli import certify_scenario

net = build_topology("path", 12)
res = ResilienceConfig.for_network(net, 1)
print("vehicles without redundancy:", sorted(res.worst_case))

for abar in (0.1, 0.2, 0.4):
    sc = Scenario(net, attack=preset_attack("path", 12, abar, kind="constant_offset"), resilience=res)
    out = certify_scenario(sc)
    print(f"abar={abar}: steady e~ {steady_state(out.run.e_tilde):.4f}")
    print(out.report())
