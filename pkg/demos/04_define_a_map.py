# %% [markdown]
# # Writing a map down instead of coding it
#
# A `.map` file holds the partition and branch formulas as expressions in i
# and x.  Here we write a countable family by hand, check it, and solve.

# %%
import numpy as np

from ulamconvex import dsl
from ulamconvex.map_model import eval_map, validate
from ulamconvex.solver import stationary_density
from ulamconvex.truncation import truncate
from ulamconvex.ulam import ulam_matrix

# %% [markdown]
# Branch i maps [1/(i+1), 1/i) onto [0, 1) along a parabola
# x -> i(i+1)(x - a_i) * (c + (1-c) * i(i+1)(x - a_i)), convex for 0 < c <= 1.
# We take c = 0.6.

# %%
text = """
[map]
name = parabolas
class = countable
partition = 1/(i+1)
branch = i*(i+1)*(x - 1/(i+1)) * (0.6 + 0.4*i*(i+1)*(x - 1/(i+1)))
branches = 60
"""
defn = dsl.parse_definition(text)
tau = dsl.compile_map(defn)
print("rule:", dsl.to_source(defn.branch_rule))

# %% [markdown]
# No derivative rule was given, so derivatives come from finite differences.
# The slope at a_i is c i(i+1), so D1 = sum_{i>=2} 1/(c i(i+1)) = 1/(2c) = 5/6.

# %%
rep = validate(tau)
print("admissible:", rep.admissible, " N =", rep.tail_cutoff, " D1 =", round(rep.d1, 6))

# %% [markdown]
# The conditions only need *some* tail of the series to drop below 1, so a
# flatter family (c = 0.4, total 1.25) is still admissible with N = 2.  They
# fail when the series diverges, e.g. when the slope at a_i grows only like i:
# take (1 - 1/i) u^2 + u/i with u = i(i+1)(x - a_i).

# %%
flat = dsl.compile_map(dsl.parse_definition(text.replace("0.6 + 0.4", "0.4 + 0.6")))
rep = validate(flat)
print("c = 0.4 admissible:", rep.admissible, " N =", rep.tail_cutoff, " D1 =", round(rep.d1, 6))

harmonic = text.replace(
    "branch = i*(i+1)*(x - 1/(i+1)) * (0.6 + 0.4*i*(i+1)*(x - 1/(i+1)))",
    "branch = (1 - 1/i)*(i*(i+1)*(x - 1/(i+1)))^2 + i*(i+1)*(x - 1/(i+1))/i")
rep = validate(dsl.compile_map(dsl.parse_definition(harmonic)))
print("harmonic admissible:", rep.admissible)
for p in rep.problems:
    print("  ", p)

# %% [markdown]
# Back to c = 0.6: the densities settle as the truncation level grows.

# %%
for n in (5, 20, 50):
    f = stationary_density(ulam_matrix(truncate(tau, n).spec, 400)).density
    print(f"n={n:2d}: f near 0 = {f.values[0]:.3f}, f near 1 = {f.values[-1]:.3f}")

# %% [markdown]
# Expressions report domain problems instead of returning NaN.

# %%
try:
    dsl.eval_expr(dsl.parse_expr("sqrt(x - 1)"), x=np.array([0.5]))
except ArithmeticError as exc:
    print(type(exc).__name__ + ":", exc)
