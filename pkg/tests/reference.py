"""Naive pure-Python reference aggregators used as test oracles.

Deliberately independent of the package: plain dicts, per-observation loops,
exact rational rounding. Inputs are dense integer ids.
"""

from fractions import Fraction
from math import floor, log

MASK = (1 << 64) - 1


def splitmix(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def priority(seed, obs, species):
    return splitmix(splitmix(splitmix(seed) ^ obs) ^ species)


def pick(tally, seed, obs):
    best = max(tally.values())
    tied = [k for k, v in tally.items() if v == best]
    return min(tied, key=lambda k: priority(seed, obs, k))


def group(votes, n_obs):
    """obs -> {user: species}, last row wins; iterate users in ascending order."""
    by_obs = [dict() for _ in range(n_obs)]
    for o, u, s in votes:
        by_obs[o][u] = s
    return [dict(sorted(d.items())) for d in by_obs]


def weighted_tally(voters, w):
    tally = {}
    total = 0.0
    for u, s in voters.items():
        tally[s] = tally.get(s, 0.0) + w[u]
        total += w[u]
    return tally, total


def ref_mv(votes, n_obs, n_user, seed):
    by_obs = group(votes, n_obs)
    ones = [1.0] * n_user
    out = {"labels": [], "confidence": [], "accuracy_ratio": [], "valid": []}
    for i, voters in enumerate(by_obs):
        tally, total = weighted_tally(voters, ones)
        lab = pick(tally, seed, i)
        out["labels"].append(lab)
        out["confidence"].append(tally[lab])
        out["accuracy_ratio"].append(tally[lab] / total)
        out["valid"].append(True)
    out["user_weights"] = ones
    out["iterations_run"] = 1
    return out


def ref_wawa(votes, n_obs, n_user, seed):
    by_obs = group(votes, n_obs)
    mv = ref_mv(votes, n_obs, n_user, seed)["labels"]
    seen = [0] * n_user
    agree = [0] * n_user
    for i, voters in enumerate(by_obs):
        for u, s in voters.items():
            seen[u] += 1
            agree[u] += s == mv[i]
    w = [agree[u] / seen[u] if seen[u] else 0.0 for u in range(n_user)]
    out = {"labels": [], "confidence": [], "accuracy_ratio": [], "valid": []}
    for i, voters in enumerate(by_obs):
        tally, total = weighted_tally(voters, w)
        lab = pick(tally, seed, i)
        out["labels"].append(lab)
        out["confidence"].append(tally[lab])
        out["accuracy_ratio"].append(tally[lab] / total if total > 0 else 0.0)
        out["valid"].append(True)
    out["user_weights"] = w
    out["iterations_run"] = 2
    return out


def ref_twothird(votes, n_obs, n_user, seed):
    out = ref_mv(votes, n_obs, n_user, seed)
    by_obs = group(votes, n_obs)
    valid = []
    for i, voters in enumerate(by_obs):
        counts = {}
        for s in voters.values():
            counts[s] = counts.get(s, 0) + 1
        n = len(voters)
        valid.append(n >= 2 and Fraction(max(counts.values()), n) >= Fraction(2, 3))
    out["valid"] = valid
    return out


def f_weight(n, alpha=0.5, beta=0.2, gamma=log(2.1)):
    n = float(n)
    return n ** alpha - n ** beta + gamma


def round_half_up(x: Fraction) -> int:
    return floor(x + Fraction(1, 2))


def ref_plantnet(votes, author, n_user, theta_acc=0.7, theta_conf=2.0, alpha=0.5, beta=0.2,
                 gamma=log(2.1), discount=Fraction(1, 10), max_iterations=50, seed=0,
                 ai=None, ai_kind=None, ai_weight=1.7, theta_score=0.7):
    """Iterative trust-weighted vote; ``ai`` maps obs -> (species, prob)."""
    n_obs = len(author)
    if ai_kind == "as-user":
        votes = list(votes) + [(i, n_user, s) for i, (s, _) in sorted(ai.items())]
        n_user += 1
        ai, ai_kind = None, None
    by_obs = group(votes, n_obs)
    ai = ai or {}

    def ai_votes(i):
        if i not in ai or ai_kind is None:
            return None
        s, p = ai[i]
        if ai_kind == "confident" and (theta_score >= 1 or p < theta_score):
            return None
        return s

    w = [gamma] * n_user
    prev = None
    it = 0
    converged = False
    while it < max_iterations:
        it += 1
        labels, conf, ratio, valid, trusted = [], [], [], [], []
        for i, voters in enumerate(by_obs):
            tally, total = weighted_tally(voters, w)
            s_ai = ai_votes(i)
            label_tally = dict(tally)
            if s_ai is not None and ai_kind != "invalidating":
                label_tally[s_ai] = label_tally.get(s_ai, 0.0) + ai_weight
            lab = pick(label_tally, seed, i)
            c = tally.get(lab, 0.0)
            # the invalidating AI never feeds back into user weights
            trusted.append(c / total >= theta_acc and c >= theta_conf)
            if s_ai is not None:
                if s_ai == lab:
                    c += ai_weight
                total += ai_weight
            r = c / total if total > 0 else 0.0
            labels.append(lab)
            conf.append(c)
            ratio.append(r)
            valid.append(r >= theta_acc and c >= theta_conf)

        author_species = [set() for _ in range(n_user)]
        vote_species = [set() for _ in range(n_user)]
        for i, voters in enumerate(by_obs):
            for u, s in voters.items():
                if s != labels[i]:
                    continue
                if u == author[i]:
                    ok = trusted[i] if ai_kind == "invalidating" else valid[i]
                    if ok:
                        author_species[u].add(s)
                else:
                    vote_species[u].add(s)
        n_a = [len(a) for a in author_species]
        n_v = [len(v - a) for a, v in zip(author_species, vote_species)]
        n_u = [round_half_up(a + discount * v) for a, v in zip(n_a, n_v)]
        state = (labels, valid, n_u)
        if prev is not None and state == prev:
            converged = True
            break
        prev = state
        w = [f_weight(n, alpha, beta, gamma) for n in n_u]
    return {"labels": labels, "confidence": conf, "accuracy_ratio": ratio, "valid": valid,
            "user_weights": w, "iterations_run": it, "converged": converged,
            "n_author": n_a, "n_vote": n_v, "n_identified": n_u}
