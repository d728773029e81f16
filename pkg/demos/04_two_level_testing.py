# Two-level evaluation of the internal test battery at desk scale.
import numpy as np

from cmlprng import LatticeConfig, LocalMap, correlated_pair, extract_stream
from cmlprng.stats import pass_rate_threshold, run_battery, two_level_evaluate, two_level_to_csv

n_seq, length, alpha = 100, 100_000, 0.01
print(f"threshold for n={n_seq}: {pass_rate_threshold(alpha, n_seq):.5f}; "
      f"for n=1000: {pass_rate_threshold(alpha, 1000):.5f}")

for m in (LocalMap.logistic(4.0), LocalMap.tent(2.0), LocalMap.plm(4.0, 64)):
    cfg = LatticeConfig(8, 8, 0.1, m)
    per_seq = [run_battery(extract_stream(correlated_pair(cfg, s), length).bits, alpha) for s in range(n_seq)]
    summary = [two_level_evaluate([r[i] for r in per_seq], alpha) for i in range(4)]
    print(f"\n{m.describe()}")
    print(two_level_to_csv(summary), end="")
    p = np.array([r.p_value for reps in per_seq for r in reps])
    print(f"all P-values in [0, 1]: {bool(np.all((p >= 0) & (p <= 1)))}")
