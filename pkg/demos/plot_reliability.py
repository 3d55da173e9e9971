"""
Reliability diagram
===================

Bin predictions by their score and compare the mean score of each bin with
the fraction that was right. A calibrated model sits on the diagonal.
"""

import numpy as np

from crowdconsensus import reliability_bins, simulate_ai_predictions

truth = np.random.default_rng(0).integers(0, 300, 100_000)

calibrated = simulate_ai_predictions(truth, 300, seed=1)
flat = simulate_ai_predictions(truth, 300, seed=1, calibrated=False)

for name, ai in (("calibrated", calibrated), ("flat", flat)):
    correct = ai.species == truth[ai.obs]
    print(name)
    for b in reliability_bins(ai.prob, correct, 10):
        if b.count:
            print(f"  [{b.low:.1f}, {b.high:.1f})  mean {b.mean_prob:.3f}  acc {b.accuracy:.3f}  n={b.count}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    for name, ai in (("calibrated", calibrated), ("flat", flat)):
        bins = [b for b in reliability_bins(ai.prob, ai.species == truth[ai.obs], 10) if b.count]
        ax.plot([b.mean_prob for b in bins], [b.accuracy for b in bins], "o-", label=name)
    ax.set_xlabel("mean score")
    ax.set_ylabel("accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig("reliability.png", dpi=120)
