# %% [markdown]
# # An independent check: long orbits
#
# Birkhoff's theorem says time averages along a typical orbit recover the
# invariant density.  The histogram knows nothing about Ulam matrices, so
# agreement is a meaningful cross-check.

# %%
from pathlib import Path

from ulamconvex import catalog
from ulamconvex.analysis import l1_between, l1_vs_exact
from ulamconvex.io import write_histogram_csv
from ulamconvex.orbit import orbit_histogram
from ulamconvex.solver import stationary_density
from ulamconvex.truncation import truncate
from ulamconvex.ulam import ulam_matrix

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# %% [markdown]
# Floating-point orbits of expanding maps lose bits every step.  Each iterate
# gets a 1e-12 dither, and 1024 walkers run in lockstep.

# %%
for name in ("example1", "example2"):
    spec = truncate(catalog.get(name).build(), 12).spec
    h = orbit_histogram(spec, 100, 2_000_000, burn_in=50_000, seed=1)
    ulam = stationary_density(ulam_matrix(spec, 100)).density
    print(f"{name}: ||orbit - ulam||_1 = {l1_between(h.density(), ulam):.4f}, anomalies = {h.anomalies}")
    write_histogram_csv(h, out / f"{name}_orbit_histogram.csv")

# %% [markdown]
# Against the true density of Example 1 the distance is dominated by the
# truncation error at n = 12 (about 0.1155), not by sampling.

# %%
spec = truncate(catalog.example1(), 12).spec
d = orbit_histogram(spec, 100, 2_000_000, burn_in=50_000, seed=1).density()
print("||orbit - 2(1-x)||_1 =", l1_vs_exact(d, catalog.EXAMPLE1_DENSITY))
