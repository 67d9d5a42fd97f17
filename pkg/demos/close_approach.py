"""LMB against LMB with adaptive birth on the close-approach scenario.

Prints the mean OSPA (c=100, p=1) over the final 20 steps and the mean
cardinality error over all steps for a handful of seeds.
"""
import sys

import numpy as np

from rfs_extent.config import scenario_config
from rfs_extent.runner import run_filter, score
from rfs_extent.simulation import builtin_scenario, generate


def main(n_runs=10):
    res = {"lmb": ([], []), "lmb-ab": ([], [])}
    for seed in range(n_runs):
        spec = builtin_scenario(2).with_seed(seed)
        log = generate(spec)
        for name, (final, card) in res.items():
            run = run_filter(name, log, scenario_config(spec, name))
            c, d, _ = score(log, run.estimates)
            final.append(np.mean(d[-20:]))
            card.append(np.mean(c))
    for name, (final, card) in res.items():
        print(f"{name:7s} final-20 OSPA {np.mean(final):7.3f}   mean card error {np.mean(card):.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
