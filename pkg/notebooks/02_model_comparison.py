"""Cross-validated leaderboard, then a final fit scored once on the holdout.

A reduced configuration (3 folds, a 3000-row sample) keeps this to a minute or
two on one core; the CLI ``compare`` command runs the full defaults.
"""
import numpy as np

from pedcrash.automl import PipelineConfig, compare_models, finalize
from pedcrash.dataset import synthesize_table1

data = synthesize_table1(3000, seed=7, interactions=True)
config = PipelineConfig(seed=7, cv_folds=3,
                        models=["dummy", "gnb", "logreg", "knn", "dtree", "rforest", "xtrees"])

# %% Every fold resamples only its own training rows; the audit proves it.
result = compare_models(config, data, log=print)
assert all(a.clean for a in result.audits)

print("\nkind       accuracy   auc    f1")
for e in result.leaderboard:
    print(f"{e.kind:9s}  {e.accuracy:.4f}   {e.auc:.4f} {e.f1:.4f}")

# %% Refit the winner on the whole training partition; the holdout is scored once.
winner = result.leaderboard[0].kind
final = finalize(winner, {}, data, config)
cm = final.holdout_dict()
print(f"\n{winner}: holdout accuracy {final.report.accuracy:.4f}")
print("row-normalized diagonal:", np.round(cm["diagonal_share"], 3).tolist())
