"""Compare the baseline controllers as the battery capacity grows.

Runs the random, offload-to-edge (OED) and local-only (OMD) controllers on
a small network and prints the mean episode cost per capacity.

    python3 demos/baselines_vs_battery.py
"""
from mecoffload import Config
from mecoffload.experiments import episode_seeds, run_episodes, summarize
from mecoffload.policies import make_policy

base = Config().replace(sim={"num_mds": 3, "num_eds": 2, "episode_slots": 50})
seeds = episode_seeds(7, 10)

print(f"{'B_max (J)':>10} {'random':>10} {'oed':>10} {'omd':>10}")
for capacity in (600.0, 800.0, 1000.0, 1200.0):
    cfg = base.replace(sim={"battery_capacity": capacity})
    row = []
    for name in ("random", "oed", "omd"):
        policy = make_policy(name, cfg.sim.num_mds, cfg.sim.num_eds, seed=0)
        row.append(summarize(run_episodes(cfg, policy, seeds))["cost"])
    print(f"{capacity:>10.0f} " + " ".join(f"{c:>10.2f}" for c in row))
