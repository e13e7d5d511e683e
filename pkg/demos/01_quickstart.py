# %% [markdown]
"""
# Quick start

We have K arms with unknown means and a threshold `mu0`.  The goal is to
name one arm whose mean clears `mu0`, or to report that no such arm
exists, while keeping the error probability below `delta`.

This script builds a small instance, looks at its complexity terms and
runs the bracketed algorithm next to the naive round-robin baseline.
"""

# %%
import numpy as np

from oneid import BanditInstance, RngStream, classify, complexity_terms, pseeb_run, uniform_lil_baseline

inst = BanditInstance(means=(0.2, 0.9, 0.6, 0.3), mu0=0.5)
print(classify(inst))

# %% [markdown]
"""
Two arms sit above the threshold.  The profile ranks them by mean and
reports the per-rank quantity `H(j)` that drives the delta-independent
part of the cost.  Arm indices are 0-based and stay in user order.
"""

# %%
prof = complexity_terms(inst)
print("ranked arms:", prof.order, " m =", prof.m)
for j, h in prof.h_of_j.items():
    print(f"rank {j} (arm {prof.ranked_arm(j)}): H(j) = {h:.2f}")

# %% [markdown]
"""
## One run

`pseeb_run` shuffles the arms once, builds nested brackets of sizes
1, 2, 4, ... and runs one copy of the phased explore/exploit routine per
bracket in round-robin order.  The first copy to stop decides.
"""

# %%
out = pseeb_run(inst, delta=0.05, rng=RngStream(42))
print("answer:", out.answer, " winner bracket:", out.winner, " total draws:", out.tau)
print("draws per copy:", out.copy_draws)
print("draws per arm: ", out.arm_draws)

# %% [markdown]
"""
The baseline pulls every arm in turn and stops as soon as one arm's
lower bound clears `mu0`.  It splits `delta` evenly over arms.
"""

# %%
rec = uniform_lil_baseline(inst, 0.05, RngStream(42))
print("baseline answer:", rec.answer, " draws:", rec.tau)

# %% [markdown]
"""
## A negative instance

When every mean is below `mu0` the only valid output is `None`, and only
the bracket holding all K arms is allowed to give it.
"""

# %%
neg = BanditInstance((0.1, 0.25, 0.3), 0.5)
taus = []
for seed in range(20):
    o = pseeb_run(neg, 0.05, RngStream(seed))
    assert o.answer is None and o.winner == len(o.copy_draws)
    taus.append(o.tau)
print("None every time; median draws", np.median(taus))
