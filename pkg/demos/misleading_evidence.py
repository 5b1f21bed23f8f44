"""How often does a true null produce evidence of k-to-1 against itself?

The likelihood-ratio bound caps the rate at 1/k; the simulated rates sit
well below it.
"""

from nmwl import FamilyInstance, ParameterSpace
from nmwl.mcverify import SimulationConfig, misleading_evidence_rate

cfg = SimulationConfig(FamilyInstance.normal(1.0), theta_true=0.0, N=8, replicates=2000,
                       seed=1, weight_scheme="sites", thresholds=(2, 4, 10, 100))
rep = misleading_evidence_rate(cfg, 0.0, ParameterSpace.punctured(0.0))
for row in rep.thresholds:
    print(f"k = {row['k']:>5g}: rate {row['rate']:.4f} +- {row['se']:.4f}   bound {1 / row['k']:.4f}")
