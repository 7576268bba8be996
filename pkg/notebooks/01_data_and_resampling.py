"""Synthetic crash records, their descriptive profile, and SMOTE + Tomek rebalancing.

Run with ``python3 notebooks/01_data_and_resampling.py``; it writes nothing.
"""
import numpy as np

from pedcrash.dataset import profile, synthesize_table1
from pedcrash.resample import smote_tomek
from pedcrash.schema import SEVERITY_NAMES

# %% Draw the full-size synthetic dataset. Category counts and per-level
# counts follow the published marginals up to rounding.
data = synthesize_table1(8319, seed=7, interactions=True)
print(data.n_rows, "rows,", len(data.feature_names), "features")
for name, count in zip(SEVERITY_NAMES, data.counts()):
    print(f"  {name:15s} {count:5d}  ({count / data.n_rows:.1%})")

# %% The descriptive profile is the same table the generator was built from.
text = profile(data).to_markdown()
print("\n".join(text.splitlines()[:14]))

# %% With interactions on, dark unlit mid-block crashes are over-represented
# among fatal rows relative to the independent product of the marginals.
light = data.X[:, data.feature_names.index("Light")]
inter = data.X[:, data.feature_names.index("Intersection")]
fatal = data.y == 2
joint = np.mean((light[fatal] == 1) & (inter[fatal] == 0))
indep = np.mean(light[fatal] == 1) * np.mean(inter[fatal] == 0)
print(f"\nP(dark unlit, mid-block | fatal) = {joint:.3f} vs {indep:.3f} if independent")

# %% Rebalance: SMOTE lifts every category to the majority count, then both
# members of each Tomek link are dropped.
X, y, report = smote_tomek(data.X, data.y, rng=0, discrete=data.schema.discrete_codes())
print("\nbefore  ", report.counts_before)
print("SMOTE   ", [b + a for b, a in zip(report.counts_before, report.synthetic_added)])
print("after   ", report.counts_after, f"({len(report.tomek_pairs)} Tomek links removed)")
