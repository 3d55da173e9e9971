"""
Comparing aggregation strategies on synthetic votes
===================================================

Synthetic users come in three tiers: a few accurate experts, many average
users and a large crowd of single-time users. We aggregate with majority
vote, WAWA, the two-thirds rule and the trust-weighted vote, then score
every strategy against the expert votes.
"""

from crowdconsensus import (
    SynthConfig,
    aggregate_mv,
    aggregate_twothird,
    aggregate_wawa,
    build_subsets,
    evaluate,
    generate_synthetic,
    run_plantnet,
)

data = generate_synthetic(SynthConfig(n_obs=50_000, n_users=10_000, n_species=800, seed=1))
table = data.table
print("observations, users, species:", table.dims, "votes:", table.n_votes)

truth, expert, multiple, disagreement = build_subsets(table, data.experts)
print("subset sizes:", len(expert), len(multiple), len(disagreement))

###############################################################################
# Run each strategy once. Only the two-thirds rule and the trust-weighted
# vote ever mark observations invalid.

results = {
    "mv": aggregate_mv(table, seed=0),
    "wawa": aggregate_wawa(table, seed=0),
    "twothird": aggregate_twothird(table, seed=0),
    "plantnet": run_plantnet(table),
}
print("trust-weighted vote converged after", results["plantnet"].iterations_run, "iterations")

###############################################################################
# Accuracy counts an invalid observation as wrong, so filtering has a cost.

header = f"{'strategy':10s} {'subset':13s} {'acc':>6s} {'prec':>6s} {'rec':>6s} {'valid':>6s} {'cover':>6s}"
print(header)
for sub in (expert, multiple, disagreement):
    for name, r in results.items():
        rep = evaluate(r, truth, sub)
        print(f"{name:10s} {sub.kind:13s} {rep.accuracy:6.3f} {rep.macro_precision:6.3f} "
              f"{rep.macro_recall:6.3f} {rep.valid_fraction_full:6.3f} {rep.species_coverage:6.3f}")
