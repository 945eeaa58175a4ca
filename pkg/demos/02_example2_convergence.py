# %% [markdown]
# # Example 2: convergence without a reference density
#
# Branch i is the Mobius map 1/((2i+1)/(i(i+1)) - x) - i on [1/(i+1), 1/i).
# Nobody knows its invariant density, so we watch successive approximations
# settle instead.

# %%
from pathlib import Path

from ulamconvex import catalog
from ulamconvex.analysis import l1_between, sweep
from ulamconvex.io import write_sweep_csv
from ulamconvex.map_model import ly_constants, validate
from ulamconvex.solver import stationary_density
from ulamconvex.truncation import truncate
from ulamconvex.ulam import ulam_matrix

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
tau = catalog.example2()

# %% [markdown]
# The slopes at the partition points are tau'(a_i) = i^2, so the tail sum
# D1 = sum_{i>=2} 1/i^2 = pi^2/6 - 1 < 1 and the class conditions hold.

# %%
rep = validate(tau)
print("admissible:", rep.admissible, " D1 =", rep.d1)

for n in (10, 11, 12):
    ly = ly_constants(truncate(tau, n).spec, n)
    print(f"n={n}: a_n + D1 = {ly.contraction:.4f}, sup bound on f_n,k = {ly.sup_bound:.3f}")

# %% [markdown]
# ## k-effect and n-effect

# %%
def density(n, k):
    return stationary_density(ulam_matrix(truncate(tau, n).spec, k)).density

f10_1000, f10_500 = density(10, 1000), density(10, 500)
print("||f_10,1000 - f_10,500||_1 =", l1_between(f10_1000, f10_500))

rows = sweep(tau, None, [10, 11, 12], [1000])
for a, b in zip(rows, rows[1:]):
    print(f"||f_{a.n},1000 - f_{b.n},1000||_1 = {b.error_l1:.6f}")
write_sweep_csv(rows, out / "example2_sweep.csv")
