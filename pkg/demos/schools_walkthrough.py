"""Eight coaching sites: discrimination information for "no effect" at each site.

Each site's estimated effect is compared against zero twice: once borrowing
a single observation's worth of weight from the other seven sites, and once
using only a pseudo-observation at the null.  Run with ``python demos/schools_walkthrough.py``.
"""

from importlib import resources

from nmwl import Mode, analyze
from nmwl.cli import load_statistics

with resources.as_file(resources.files("nmwl").joinpath("data", "schools.csv")) as path:
    obs = load_statistics(path, "normal")

sites = analyze(obs, "sites")
null = analyze(obs, "null", modes=(Mode.EXACT,))

print(f"{'site':>4} {'t':>6} {'sigma':>6} {'sites':>8} {'approx':>8} {'null':>8}  grade")
for o, a, b, n in zip(obs.observations, sites[Mode.EXACT], sites[Mode.APPROXIMATE],
                      null[Mode.EXACT]):
    print(f"{o.id:>4} {o.statistic:6.1f} {o.family.scale:6.1f} {a.di_bits:8.3f} {b.di_bits:8.3f} "
          f"{n.di_bits:8.3f}  {a.grade.value} ({a.favors.value})")

worst = max(abs(a.di_bits - n.di_bits) for a, n in zip(sites[Mode.EXACT], null[Mode.EXACT]))
print(f"\nlargest sites-vs-null difference: {worst:.3f} bits")
