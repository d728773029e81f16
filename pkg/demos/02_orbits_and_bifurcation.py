# Orbit statistics of single lattice nodes: bifurcation sweep and histograms.
import numpy as np

from cmlprng import LatticeConfig, LocalMap, new_lattice, orbit
from cmlprng.stats import bifurcation_scan, orbit_histogram


def bar_chart(counts, width=50):
    top = counts.max()
    for i, c in enumerate(counts):
        print(f"{i / len(counts):4.2f} {'#' * int(width * c / top)}")


# %% Period doubling into chaos for the logistic lattice
rows = bifurcation_scan("logistic", (2.8, 4.0), 13, points_per_mu=200, discard=2000)
for mu in np.unique(rows[:, 0]):
    vals = rows[rows[:, 0] == mu, 1]
    print(f"mu={mu:.2f}  distinct values ~ {len(np.unique(np.round(vals, 4))):3d}  "
          f"range [{vals.min():.3f}, {vals.max():.3f}]")

# %% Where the first node spends its time (float lattice, eps=0.1, 8x8)
for m in (LocalMap.logistic(4.0), LocalMap.tent(2.0), LocalMap.plm(4.0, 64)):
    cfg = LatticeConfig(8, 8, 0.1, m)
    vals = orbit(new_lattice(cfg, 0), cfg, (1, 1), 10**6, 10**3)
    print(f"\n{m.describe()}")
    bar_chart(orbit_histogram(vals, 20))

# None of the three is uniform, so the raw orbit bits are biased; the
# extractor demo shows how the pairing removes that.
