"""
User weights and self-validation
================================

A user's weight grows with the number of distinct species they have
correctly identified. Once the weight reaches the confidence threshold a
single vote from that user validates an observation on its own.
"""

import numpy as np

from crowdconsensus import StrategyConfig, is_self_validating, weight_fn

cfg = StrategyConfig()
n = np.arange(0, 31)
w = np.array([weight_fn(int(k)) for k in n])

for k in (0, 1, 2, 7, 8, 9, 30):
    print(f"n = {k:3d}   w = {w[k]:.4f}   self-validating: {is_self_validating(w[k])}")

###############################################################################
# The first count that clears ``theta_conf``:

print("smallest self-validating n:", int(n[w >= cfg.theta_conf][0]))

###############################################################################
# Beyond a few species the weight grows roughly like the square root of n.

big = np.array([10, 100, 1000, 10_000])
print(dict(zip(big.tolist(), np.round([weight_fn(int(k)) for k in big], 2).tolist())))

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.step(n, w, where="post")
    ax.axhline(cfg.theta_conf, ls="--", c="k", lw=0.8)
    ax.set_xlabel("identified species n")
    ax.set_ylabel("weight")
    fig.tight_layout()
    fig.savefig("weight_function.png", dpi=120)
