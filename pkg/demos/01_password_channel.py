"""
Leakage of a toy password checker
=================================

A 4-digit PIN has 10,000 equally likely values, so a one-shot guess
succeeds with probability 1/10,000. We model a checker that reveals only
whether the first digit is right and measure how much it leaks.
"""

import numpy as np

from qifcausal import Channel, Distribution, LeakageMode, MeasureKind, bayes_capacity, leakage, prior_measure
from qifcausal.measures import posterior_measure

# Secrets are the first digit only; the remaining three digits are uniform and
# independent of what the checker reveals.
prior = Distribution.uniform(10)
print("prior Bayes vulnerability of the first digit:", prior_measure(MeasureKind.BAYES_VULNERABILITY, prior))
print("prior Bayes vulnerability of the whole PIN:", prior_measure(MeasureKind.BAYES_VULNERABILITY, Distribution.uniform(10_000)))

# The checker compares the first digit against the true one, here fixed to 7.
rows = np.zeros((10, 2))
rows[:, 0] = 1.0
rows[7] = [0.0, 1.0]
checker = Channel(rows)

for kind in MeasureKind:
    print(f"{kind.value:>20s}: prior {prior_measure(kind, prior):.4f}, posterior {posterior_measure(kind, prior, checker):.4f}")

print("multiplicative Bayes leakage:", leakage(MeasureKind.BAYES_VULNERABILITY, LeakageMode.MULTIPLICATIVE, prior, checker))
print("additive Shannon leakage (bits):", round(leakage(MeasureKind.SHANNON, LeakageMode.ADDITIVE, prior, checker), 4))
print("Bayes capacity (bits):", bayes_capacity(checker))

# The capacity bounds the multiplicative leakage for every prior.
rng = np.random.default_rng(0)
worst = max(leakage(MeasureKind.BAYES_VULNERABILITY, LeakageMode.MULTIPLICATIVE, Distribution(rng.dirichlet(np.ones(10))), checker)
            for _ in range(1000))
print(f"largest leakage over 1000 random priors: {worst:.4f} <= {2 ** bayes_capacity(checker):.4f}")
