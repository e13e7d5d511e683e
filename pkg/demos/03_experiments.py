# %% [markdown]
"""
# Monte Carlo experiments

`run_experiment` runs many seeded trials per delta and summarizes error
rates with Wilson intervals.  Trial `i` always uses the seed
`mix_seed(base_seed, i)`, so a rerun reproduces the CSV byte for byte.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from oneid import BanditInstance, ExperimentConfig, run_experiment
from oneid.harness import run_trial

inst = BanditInstance((0.95, 0.05), 0.5)
cfg = ExperimentConfig(instance=inst, deltas=[0.1, 0.01], algorithms=["pseeb", "uniform-lil"], trials=300)
res = run_experiment(cfg)
print(res.csv_text)

# %% [markdown]
"""
## Heavy tails at the default C

The exploitation cap scales like `(C+3)^2 / (C-1)^2`, which is about
1.6e5 at `C = 1.01`.  A bad arm that looks good by chance early on can
send a copy into a long confirmation run.  This is rare, yet it can
dominate the mean.  A larger `C` tames the tail at the price of a larger typical cost.
"""

# %%
for C in (1.01, 2.0):
    taus = np.array([run_trial(inst, "pseeb", 0.1, i, 1, C=C).tau for i in range(2000)])
    q = np.percentile(taus, [50, 99, 99.9])
    print(f"C={C:<5} mean {taus.mean():9.0f}  median {q[0]:6.0f}  p99 {q[1]:8.0f}  p99.9 {q[2]:10.0f}")

# %% [markdown]
"""
## Writing files

With an output path the runner writes the CSV, a JSON summary and, on
request, one JSON line per trial.
"""

# %%
with tempfile.TemporaryDirectory() as tmp:
    cfg.output = str(Path(tmp) / "k2.csv")
    cfg.emit_traces = True
    cfg.trials = 20
    run_experiment(cfg)
    print(sorted(p.name for p in Path(tmp).iterdir()))
    print((Path(tmp) / "k2.trials.ndjson").read_text().splitlines()[0])
