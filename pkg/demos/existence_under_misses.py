"""Existence probabilities of the two scenario-3 tracks under forced misses.

Target 1 is not detected at steps 20, 40 and 41.  The LMB filter updates
well separated tracks independently, so the existence probability of the
other target stays put while the missed one dips.
"""
import numpy as np

from rfs_extent.config import scenario_config
from rfs_extent.runner import run_filter
from rfs_extent.simulation import builtin_scenario, generate


def main(seed=0):
    spec = builtin_scenario(3).with_seed(seed)
    log = generate(spec)
    run = run_filter("lmb", log, scenario_config(spec, "lmb"))
    # name the tracks after the truth they follow at step 10
    names = {}
    for i, t in enumerate(log[10].truth):
        est = min(run.estimates[10], key=lambda e: np.linalg.norm(e.x[:2] - t.x[:2]))
        names[est.label] = f"target {i}"
    print("step  " + "  ".join(f"{names[l]:>9}" for l in names))
    for k in (18, 19, 20, 21, 22, 38, 39, 40, 41, 42, 43):
        rs = run.r_series[k]
        print(f"{k:4d}  " + "  ".join(f"{rs.get(l, 0.0):9.5f}" for l in names))


if __name__ == "__main__":
    main()
