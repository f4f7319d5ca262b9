"""
Leakage of a noisy feature map
==============================

A binary input X with noisy labels Y, observed through a binary symmetric
channel. We compute how much the representation Z reveals beyond the label,
build the attribute that realizes that worst case, and check the theorems.
"""

import numpy as np

from leastpriv.certify import CertBudget, accuracy_bound, certify_lpp, theorem_report
from leastpriv.dist import Alphabet, Channel, push_forward
from leastpriv.instances import deterministic_label_joint, label_copy_channel, noisy_posterior_joint
from leastpriv.measures import cond_max_leakage, i_inf
from leastpriv.shattering import attribute_gain, shattering_attribute

# %%
# Labels are noisy: every x can carry either label.
jxy = noisy_posterior_joint([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]])
bsc = Channel.bsc(0.25, Alphabet.range("X", 2))

rep = theorem_report(jxy, bsc)
print("conditional leakage  ", round(rep.gamma_lpp, 6))
print("unconditional leakage", round(rep.gamma_ulpp, 6))
print("LDP epsilon          ", round(rep.epsilon_ldp.epsilon, 6))
print("task utility I_inf   ", round(rep.utility_iinf, 6))

# %%
# The two leakages coincide because the posterior is strictly positive, and
# the task utility sits below them. Every theorem flag should read True.
for name, flag in rep.theorem_flags.items():
    print(f"{name:24s} {flag.passed}")

# %%
# The worst-case attribute splits each x into equal-mass pieces. Its gain
# matches the closed form exactly.
px = jxy.marginal("X")
spec, attr = shattering_attribute(px)
print("attribute alphabet", spec.s_alphabet.symbols)
print("gain", attribute_gain(px, attr, bsc), "closed form", float(cond_max_leakage(jxy, bsc)))

# %%
# A budget below the leakage fails certification.
print(certify_lpp(jxy, bsc, CertBudget(0.5)))

# %%
# With deterministic labels the picture changes: copying the label is free.
parity = deterministic_label_joint(4, [0, 1, 0, 1])
copy_y = label_copy_channel(parity, [0, 1, 0, 1])
prep = theorem_report(parity, copy_y)
print("parity: leakage", prep.gamma_lpp, "utility", prep.utility_iinf)

# %%
# If no uniform binary attribute can be guessed with accuracy above beta,
# task accuracy is capped too. Near beta = 1/2 the cap is about 0.81.
for beta in (0.5 + 1e-12, 0.6, 0.75, 0.9):
    print(f"beta {beta:.3f} -> task accuracy <= {accuracy_bound(beta):.4f}")

# %%
# Check against an explicit joint: the label-only gain equals I_inf(Y;Z).
jyz = push_forward(jxy, bsc).marginal("Y", "Z")
print("I_inf(Y;Z)", float(i_inf(jyz)), "bayes accuracy", float(np.max(jyz.probs, axis=0).sum()))
