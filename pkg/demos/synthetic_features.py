"""Two-group features reduced to folded t statistics, graded under both weight schemes.

Five of twenty features carry a 1.5 sd shift.  With ten replicates per
group the strong effects stand out; with two per group nothing gets past
"Weak", and the two schemes still grade features alike.
"""

import numpy as np

from nmwl import ComparisonSet, Mode, analyze, reduce_two_sample
from nmwl.complexity import ComplexityCache


def features(m, seed=20111231):
    rng = np.random.default_rng(seed)
    return ComparisonSet(tuple(
        reduce_two_sample(rng.normal(1.5 if f < 5 else 0.0, 1.0, m), rng.normal(0.0, 1.0, m),
                          f"f{f:02d}") for f in range(20)))


for m in (10, 2):
    obs = features(m)
    cache = ComplexityCache()
    sites = analyze(obs, "sites", (Mode.EXACT,), cache=cache)[Mode.EXACT]
    null = analyze(obs, "null", (Mode.EXACT,), cache=cache)[Mode.EXACT]
    print(f"m = n = {m}")
    for o, a, b in zip(obs.observations, sites, null):
        flag = "" if (a.grade, a.favors) == (b.grade, b.favors) else "  <- differs"
        print(f"  {o.id} |t|={o.statistic:6.2f} sites {a.di_bits:7.3f} {a.grade.value:<12}"
              f" null {b.di_bits:7.3f} {b.grade.value}{flag}")
    print()
