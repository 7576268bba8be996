"""Crash-severity AutoML: encoding, SMOTE+Tomek resampling, a from-scratch model zoo,
cross-validated leaderboards and Shapley explanations."""

__version__ = "0.1.0"

from .automl import PipelineConfig, compare_models, drop_multicollinear, finalize, tune_model
from .dataset import (Dataset, encode_record, load_csv, profile, stratified_kfold,
                      synthesize_table1)
from .explain import exact_shap, force_breakdown, permutation_shap, shap_summary, tree_shap
from .metrics import classification_report, confusion, pr_average_precision, roc_auc_ovr
from .models import ModelSpec, fit, predict_proba
from .resample import smote, smote_tomek, tomek_links
from .schema import CRASH_SCHEMA

__all__ = [
    "CRASH_SCHEMA", "Dataset", "ModelSpec", "PipelineConfig", "classification_report",
    "compare_models", "confusion", "drop_multicollinear", "encode_record", "exact_shap", "finalize",
    "fit", "force_breakdown", "load_csv", "permutation_shap", "pr_average_precision",
    "predict_proba", "profile", "roc_auc_ovr", "shap_summary", "smote", "smote_tomek",
    "stratified_kfold", "synthesize_table1", "tomek_links", "tree_shap", "tune_model",
]
