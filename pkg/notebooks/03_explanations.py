"""Shapley attributions for a random forest: global ranking, one force breakdown, SVG plots.

Writes its plots into ./demo_plots (created if needed).
"""
import os

from pedcrash.automl import PipelineConfig, explain_final, explain_rows, finalize
from pedcrash.dataset import synthesize_table1
from pedcrash.explain import force_breakdown, shap_summary
from pedcrash.report import PlotSpec, render_svg, write_run_bundle
from pedcrash.schema import SEVERITY_NAMES

data = synthesize_table1(8319, seed=7, interactions=True)
config = PipelineConfig(seed=7)
final = finalize("rforest", {"n_trees": 50}, data, config)
print(f"rforest holdout accuracy {final.report.accuracy:.4f}")

# %% Tree models get exact path-dependent attributions; the other kinds fall
# back to permutation sampling against a background sample.
rows = explain_rows(final.holdout, 100)
shap = explain_final(final.pipeline, data, config, rows, final.train)
print(f"{shap.method} attribution, additivity error {shap.additivity_error():.1e}")

# %% Mean |phi| per category. Light and Intersection carry the coupled signal.
summary = shap_summary(shap)
for c, name in enumerate(SEVERITY_NAMES):
    print(f"{name:15s}", summary.top(c, 5))

# %% One crash, broken down for the category the model finds most likely.
a = 0
cat = int(shap.outputs[a].argmax())
fb = force_breakdown(shap, a, cat)
print(f"\nrow {fb.instance}: base {fb.base:.3f} -> f(x) {fb.output:.3f} for {SEVERITY_NAMES[cat]}")
for feature, value, phi in fb.contributions[:5]:
    print(f"  {feature:18s} = {value:<6g} {phi:+.4f}")

# %% Plots. Everything goes through the same deterministic SVG writer the CLI uses.
order = summary.overall_ranking
bar = PlotSpec("shap_bar", {"features": [shap.feature_names[j] for j in order],
                            "values": summary.importance.T[order].tolist()},
               "Feature importance (mean |SHAP|)", 720, 90 + 22 * len(order))
force = PlotSpec("force", fb.to_dict(), f"Row {fb.instance}: {SEVERITY_NAMES[cat]}", 720, 420)
out = os.path.abspath("demo_plots")
write_run_bundle({"shap_bar.svg": render_svg(bar), "force.svg": render_svg(force)}, out)
print("plots written to", out)
