# %% [markdown]
"""
# How many samples must any method take?

For a positive instance the library evaluates three lower-bound views:

* a closed-form expression,
* the optimum of a small convex program over weights `p_j`,
* a certificate from an explicit dual point, which never exceeds the optimum.

All of them omit universal constants, so compare shapes rather than levels.
"""

# %%
import numpy as np

from oneid import BanditInstance, solve_lb_program, upper_bound_formula
from oneid.bounds import grid_search_lb_program, lb_objective, program_data

inst = BanditInstance((0.9, 0.5), 0.7)
rep = solve_lb_program(inst, delta=0.01)
print(f"closed form   {rep.closed_form:9.3f}")
print(f"program value {rep.program_value:9.3f}   at p = {rep.argmin}")
print(f"dual value    {rep.dual_value:9.3f}")

# %% [markdown]
"""
With a single arm above the threshold the constraint `sum p >= 1/2` pins
`p = 1/2`, and the first constraint is the binding one.
"""

# %%
data = program_data(inst, 0.01)
print("objective at p = 1/2:", float(lb_objective(data, np.array([0.5]))))

# %% [markdown]
"""
## Three arms above the threshold

Here the optimal weights spread over several arms.  The dense grid search
checks the subgradient solver.
"""

# %%
inst3 = BanditInstance((0.9, 0.8, 0.62, 0.4, 0.2), 0.5)
rep3 = solve_lb_program(inst3, 1e-3)
grid, p_grid = grid_search_lb_program(program_data(inst3, 1e-3))
print(f"solver {rep3.program_value:.4f} at {np.round(rep3.argmin, 3)}")
print(f"grid   {grid:.4f} at {np.round(p_grid, 3)}")
print(f"dual certificate {rep3.dual_value:.4f}, exact dual function at that point {rep3.lagrangian_value:.4f}")

# %% [markdown]
"""
## Upper-bound shapes

The positive branch takes a minimum over ranks; the negative branch
depends on the gaps of all arms to the threshold.
"""

# %%
for d in (0.1, 0.01, 0.001):
    ub = upper_bound_formula(inst3, d)
    print(f"delta={d:<6} upper {ub.value:10.1f}  per rank {[round(v, 1) for v in ub.per_j.values()]}")
print(upper_bound_formula(BanditInstance((0.5, 0.3), 0.7), 0.1))
