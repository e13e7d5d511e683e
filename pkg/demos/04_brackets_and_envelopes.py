# %% [markdown]
"""
# Why brackets work, and why the bounds hold

Brackets are prefixes of one random permutation.  If `j` arms are good,
the chance that none of them lands in the first `2^(b-2)` positions
shrinks like `exp(-j 2^(b-2) / K)`.  Small brackets therefore tend to
contain a good arm when many arms are good.
"""

# %%
from oneid import RngStream
from oneid.harness import bracket_stats, concentration_check, envelope_curve

for j in (1, 4, 12):
    rows = bracket_stats(16, j, 50_000, RngStream(j))
    print(f"j={j:2d}", "  ".join(f"b>={r.b_tilde}: {r.empirical:.3f} (<= {r.bound:.3f})" for r in rows))

# %% [markdown]
"""
## The anytime envelope

Every confidence bound in the library comes from one envelope on partial
sums.  It holds at all times at once with probability at least
`1 - pi^2 delta / 6`.  In practice it is much looser than that.
"""

# %%
env = envelope_curve(4096, 0.05)
print("envelope at t = 1, 64, 4096:", env[0].round(2), env[63].round(2), env[-1].round(2))
for d in (0.05, 0.2, 0.9):
    rep = concentration_check(d, 2000, 4096, RngStream(3))
    print(f"delta={d}: walks crossing {rep.fraction:.4f}, allowed {rep.bound:.4f}")
