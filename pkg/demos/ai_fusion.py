"""
Adding AI votes
===============

A classifier's top-1 prediction can join the vote in several ways. Here we
simulate calibrated predictions and compare the modes on the hardest
observations, those where human voters disagree.
"""

from crowdconsensus import (
    AiMode,
    SynthConfig,
    ai_weight_bounds,
    build_subsets,
    evaluate,
    generate_synthetic,
    run_with_ai,
    simulate_ai_predictions,
)

data = generate_synthetic(SynthConfig(n_obs=40_000, n_users=8_000, n_species=600, seed=3))
ai = simulate_ai_predictions(data.truth, 600, seed=3, coverage=0.9)
truth, expert, multiple, disagreement = build_subsets(data.table, data.experts)

lo, hi = ai_weight_bounds()
print(f"admissible AI weights: ({lo:.3f}, {hi:.3f})")

###############################################################################
# ``invalidating`` leaves labels alone and only lowers agreement when the AI
# disagrees; ``confident`` votes only on high-scoring predictions.

modes = [AiMode.none(), AiMode.as_user(), AiMode.fixed(), AiMode.invalidating(), AiMode.confident(0.8)]
for mode in modes:
    r = run_with_ai(data.table, ai, mode)
    rep = evaluate(r, truth, disagreement)
    print(f"{mode.kind:13s} accuracy {rep.accuracy:.3f}  valid {rep.valid_fraction_full:.3f}  "
          f"coverage {rep.species_coverage:.3f}")

###############################################################################
# As an ordinary user the AI has to earn its weight like everybody else.

r = run_with_ai(data.table, ai, AiMode.as_user())
u = r.meta["ai_user"]
print("AI user weight:", round(float(r.user_weights[u]), 3),
      "identified species:", int(r.user_stats.n_identified[u]))
