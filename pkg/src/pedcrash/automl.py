"""Model comparison by stratified cross-validation, random-search tuning and finalization.

Every fold fits its preprocessing on the fold's training rows only:
collinearity pruning and SMOTE+Tomek resampling on the raw encoded columns,
then standardization statistics from the resampled matrix. Validation rows
and the holdout partition are never resampled, and every fold records an
index audit proving it.
"""
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataset import stratified_holdout, stratified_kfold
from .errors import ConfigError
from .explain import explain_model
from .metrics import classification_report, confusion, evaluate, pr_average_precision, roc_auc_ovr
from .models import DEFAULTS, KINDS, ModelSpec, fit
from .neighbors import zscore_stats
from .pipeline import Pipeline
from .resample import smote_tomek
from .rng import substream

SORT_METRICS = ("accuracy", "auc", "recall", "precision", "f1")

TUNE_GRIDS = {
    "dtree": {"max_depth": [None, 3, 4, 5, 6, 8, 10, 12, 16],
              "min_samples_leaf": [1, 2, 4, 8, 16], "min_samples_split": [2, 5, 10, 20]},
    "rforest": {"n_trees": [50, 100, 200], "max_depth": [None, 8, 12, 16, 24],
                "min_samples_leaf": [1, 2, 4], "mtry": ["sqrt", "log2", 0.5]},
    "xtrees": {"n_trees": [50, 100, 200], "max_depth": [None, 8, 12, 16, 24],
               "min_samples_leaf": [1, 2, 4], "mtry": ["sqrt", "log2", 0.5]},
    "gboost": {"rounds": [50, 100, 200], "learning_rate": [0.05, 0.1, 0.2],
               "max_depth": [2, 3, 4, 5], "min_samples_leaf": [1, 5, 20]},
    "adaboost": {"rounds": [25, 50, 100, 200]},
    "knn": {"k": [1, 3, 5, 7, 9, 15, 25]},
    "gnb": {"var_floor": [1e-9, 1e-6, 1e-3]},
    "logreg": {"l2": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]},
    "dummy": {},
}


@dataclass
class PipelineConfig:
    seed: int = 0
    holdout_fraction: float = 0.30
    cv_folds: int = 10
    resample: bool = True
    normalize: bool = True
    multicollinearity_threshold: float = 0.9
    sort_metric: str = "accuracy"
    models: list = field(default_factory=lambda: list(KINDS))
    tune_budget: int = 50
    smote_k: int = 5
    explain_instances: int = 200
    n_permutations: int = 500
    background_size: int = 100

    def __post_init__(self):
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)

        for name in ("seed", "cv_folds", "tune_budget", "smote_k", "explain_instances",
                     "n_permutations", "background_size"):
            value = getattr(self, name)
            need(isinstance(value, (int, np.integer)) and not isinstance(value, bool),
                 f"{name} must be an integer, got {value!r}")
        for name in ("resample", "normalize"):
            need(isinstance(getattr(self, name), bool), f"{name} must be true or false")
        need(0 < float(self.holdout_fraction) <= 0.5, "holdout_fraction must lie in (0, 0.5]")
        need(self.cv_folds >= 2, "cv_folds must be at least 2")
        need(0 < float(self.multicollinearity_threshold) <= 1,
             "multicollinearity_threshold must lie in (0, 1]")
        need(self.sort_metric in SORT_METRICS,
             f"sort_metric must be one of {', '.join(SORT_METRICS)}, got {self.sort_metric!r}")
        need(isinstance(self.models, (list, tuple)) and len(self.models) > 0, "model list is empty")
        unknown = [m for m in self.models if m not in KINDS]
        need(not unknown, f"unknown model kind(s): {', '.join(map(str, unknown))}")
        need(len(set(self.models)) == len(self.models), "model list has duplicates")
        need(self.tune_budget >= 1 and self.smote_k >= 1 and self.explain_instances >= 1
             and self.n_permutations >= 1 and self.background_size >= 1,
             "budgets and counts must be positive")
        self.models = list(self.models)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc, **overrides):
        """Build from a JSON-like mapping; ``overrides`` (non-None) win over ``doc``."""
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        doc = {k: v for k, v in doc.items() if k != "data"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        merged = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**merged)


# -- preprocessing -------------------------------------------------------------

def drop_multicollinear(X, names, threshold=0.9):
    """Columns to keep after removing zero-variance and highly correlated ones.

    Zero-variance columns go first (r recorded as None). Then pairs i < j
    are scanned in order and j is dropped, with partner i, when
    ``|pearson(i, j)| > threshold`` and j is not dropped yet.
    Returns ``(kept indices, [{"dropped", "partner", "r"}, ...])``.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if d < 2:
        raise ConfigError("collinearity pruning needs at least 2 columns")
    if not 0 < threshold <= 1:
        raise ConfigError("threshold must lie in (0, 1]")
    names = list(names)
    report = []
    dropped = np.zeros(d, dtype=bool)
    std = X.std(axis=0)
    for j in np.flatnonzero(std == 0):
        dropped[j] = True
        report.append({"dropped": names[j], "partner": None, "r": None})
    live = np.flatnonzero(~dropped)
    if live.size:
        R = np.corrcoef(X[:, live], rowvar=False).reshape(live.size, live.size)
        for a in range(live.size):
            for b in range(a + 1, live.size):
                j = live[b]
                if not dropped[j] and abs(R[a, b]) > threshold:
                    dropped[j] = True
                    report.append({"dropped": names[j], "partner": names[live[a]], "r": float(R[a, b])})
    kept = np.flatnonzero(~dropped)
    if kept.size == 0:
        raise ConfigError("collinearity pruning dropped every column")
    return kept, report


@dataclass
class TrainingSet:
    X: np.ndarray  # preprocessed (pruned, resampled, standardized) training matrix
    y: np.ndarray
    kept: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    dropped: list
    source: np.ndarray  # dataset row index of each training row, -1 if synthetic
    parents: np.ndarray  # dataset row indices of the parents of each synthetic row
    resample_report: object = None

    def transform(self, X):
        return (np.asarray(X, dtype=float)[:, self.kept] - self.mean) / self.std

    def preprocessing_dict(self, names):
        return {
            "kept": [names[j] for j in self.kept],
            "dropped": self.dropped,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "resample": None if self.resample_report is None else self.resample_report.to_dict(),
        }


def prepare_training(data, rows, config, rng):
    """Fit all preprocessing on dataset rows ``rows`` and return the training matrix."""
    rows = np.asarray(rows, dtype=np.int64)
    X = np.asarray(data.X)[rows]
    y = np.asarray(data.y)[rows]
    kept, dropped = drop_multicollinear(X, data.feature_names, config.multicollinearity_threshold)
    X = X[:, kept]
    report = None
    if config.resample:
        discrete = data.schema.discrete_codes()
        X, y, report = smote_tomek(X, y, k=config.smote_k, rng=rng,
                                   discrete=[discrete[j] for j in kept])
        source = np.where(report.source >= 0, rows[np.maximum(report.source, 0)], -1)
        parents = rows[report.parents]
    else:
        source = rows.copy()
        parents = np.zeros((0, 2), dtype=np.int64)
    if config.normalize:
        mean, std = zscore_stats(X)
    else:
        mean, std = np.zeros(X.shape[1]), np.ones(X.shape[1])
    return TrainingSet((X - mean) / std, y, kept, mean, std, dropped, source, parents, report)


@dataclass
class FoldAudit:
    fold: object  # fold number, or "final"
    training_rows: int
    synthetic_rows: int
    distinct_sources: int
    leaked: list  # validation/holdout row indices found in the training matrix (must be empty)
    foreign: list  # source rows outside the declared training partition (must be empty)

    @property
    def clean(self):
        return not self.leaked and not self.foreign


def audit_training_set(ts, fold, train_rows, forbidden_rows):
    used = np.unique(np.concatenate([ts.source[ts.source >= 0], ts.parents.ravel()]))
    return FoldAudit(
        fold=fold,
        training_rows=int(ts.y.size),
        synthetic_rows=int(np.sum(ts.source < 0)),
        distinct_sources=int(used.size),
        leaked=np.intersect1d(used, forbidden_rows).tolist(),
        foreign=np.setdiff1d(used, train_rows).tolist(),
    )


# -- cross-validation ----------------------------------------------------------

def fold_scores(y_true, proba):
    """Leaderboard metrics for one validation fold (support-weighted precision/recall/F1)."""
    report = classification_report(confusion(y_true, np.argmax(proba, axis=1)))
    _, auc = roc_auc_ovr(y_true, proba)
    return {
        "accuracy": report.accuracy,
        "auc": auc,
        "recall": report.weighted_recall,
        "precision": report.weighted_precision,
        "f1": report.weighted_f1,
    }


@dataclass
class LeaderboardEntry:
    kind: str
    accuracy: float
    auc: float
    recall: float
    precision: float
    f1: float
    folds: dict  # metric -> per-fold values
    params: dict = field(default_factory=dict)
    wall_time: float = 0.0  # seconds; kept out of serialized output so runs compare byte-for-byte

    def to_dict(self):
        return {
            "kind": self.kind,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "params": self.params,
            "folds": self.folds,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["accuracy"], d["auc"], d["recall"], d["precision"], d["f1"],
                   d["folds"], d.get("params", {}))


def sort_leaderboard(entries, metric="accuracy"):
    """Descending by ``metric``, then F1, then AUC; ties broken by kind name."""
    return sorted(entries, key=lambda e: (-getattr(e, metric), -e.f1, -e.auc, e.kind))


@dataclass
class CVSetup:
    train: np.ndarray
    holdout: np.ndarray
    folds: list  # validation rows of each fold (dataset indices)
    training_sets: list
    audits: list


def _map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def cv_setup(config, data, threads=1):
    """Holdout split, stratified folds of the training partition, per-fold preprocessing."""
    y = np.asarray(data.y)
    train, hold = stratified_holdout(y, config.holdout_fraction, config.seed)
    folds = [train[f] for f in stratified_kfold(y[train], config.cv_folds, config.seed)]

    def one(i):
        val = folds[i]
        rows = np.setdiff1d(train, val)
        ts = prepare_training(data, rows, config, substream(config.seed, "resample", i))
        return ts, audit_training_set(ts, i, rows, np.union1d(val, hold))

    out = _map(one, [(i,) for i in range(len(folds))], threads)
    return CVSetup(train, hold, folds, [o[0] for o in out], [o[1] for o in out])


def _score_candidate(kind, params, candidate, setup, data, seed, threads):
    X = np.asarray(data.X)
    y = np.asarray(data.y)

    def one(i):
        ts = setup.training_sets[i]
        t0 = time.perf_counter()
        model = fit(ModelSpec(kind, params, seed), ts.X, ts.y,
                    rng=substream(seed, "fit", kind, i, candidate))
        proba = model.predict_proba(ts.transform(X[setup.folds[i]]))
        return fold_scores(y[setup.folds[i]], proba), time.perf_counter() - t0

    results = _map(one, [(i,) for i in range(len(setup.folds))], threads)
    per_fold = {m: [r[0][m] for r in results] for m in SORT_METRICS}
    return per_fold, sum(r[1] for r in results)


def _entry(kind, params, per_fold, elapsed):
    means = {m: float(np.mean(v)) for m, v in per_fold.items()}
    return LeaderboardEntry(kind, folds=per_fold, params=params, wall_time=elapsed, **means)


@dataclass
class CompareResult:
    leaderboard: list
    setup: CVSetup
    config: PipelineConfig

    @property
    def audits(self):
        return self.setup.audits

    def preprocessing(self, names):
        return {
            "holdout_rows": int(self.setup.holdout.size),
            "training_rows": int(self.setup.train.size),
            "folds": [dict(fold=i, validation_rows=int(f.size), **ts.preprocessing_dict(names))
                      for i, (f, ts) in enumerate(zip(self.setup.folds, self.setup.training_sets))],
        }


def compare_models(config, data, threads=1, log=None):
    """Cross-validate every configured model kind and return the sorted leaderboard."""
    if not config.models:
        raise ConfigError("model list is empty")
    setup = cv_setup(config, data, threads)
    entries = []
    for kind in config.models:
        per_fold, elapsed = _score_candidate(kind, {}, 0, setup, data, config.seed, threads)
        entry = _entry(kind, dict(DEFAULTS[kind]), per_fold, elapsed)
        if log is not None:
            log(f"{kind}: accuracy {entry.accuracy:.4f}, auc {entry.auc:.4f} ({elapsed:.1f}s)")
        entries.append(entry)
    return CompareResult(sort_leaderboard(entries, config.sort_metric), setup, config)


# -- tuning --------------------------------------------------------------------

def tune_candidates(kind, budget, seed):
    """Candidate 0 is the default setting; the rest are distinct random grid points."""
    if kind not in TUNE_GRIDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if int(budget) < 1:
        raise ConfigError("tuning budget must be at least 1")
    grid = TUNE_GRIDS[kind]
    names = sorted(grid)
    default = {n: DEFAULTS[kind][n] for n in names}
    points = [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]
    points = [p for p in points if p != default]
    order = substream(seed, "tune", kind).permutation(len(points))
    return [default] + [points[i] for i in order[:int(budget) - 1]]


@dataclass
class TuneResult:
    kind: str
    best_params: dict
    best_score: float
    default_score: float
    metric: str
    candidates: list  # [{"params", "score"}] in draw order

    def to_dict(self):
        return asdict(self)


def tune_model(kind, data, budget=None, seed=None, config=None, threads=1, setup=None, log=None):
    """Random search over the kind's grid, scored by mean CV ``config.sort_metric``.

    The first candidate is the default setting, so the tuned score is never
    below the default one. Ties go to the earlier draw.
    """
    config = config or PipelineConfig()
    if seed is not None and seed != config.seed:
        config = PipelineConfig.from_dict(config.to_dict(), seed=int(seed))
    budget = config.tune_budget if budget is None else int(budget)
    candidates = tune_candidates(kind, budget, config.seed)
    setup = setup or cv_setup(config, data, threads)
    scored = []
    for c, params in enumerate(candidates):
        per_fold, elapsed = _score_candidate(kind, params, c, setup, data, config.seed, threads)
        score = float(np.mean(per_fold[config.sort_metric]))
        scored.append({"params": params, "score": score})
        if log is not None:
            log(f"{kind} candidate {c}: {config.sort_metric} {score:.4f} ({elapsed:.1f}s)")
    best = max(range(len(scored)), key=lambda i: (scored[i]["score"], -i))
    return TuneResult(kind, {**DEFAULTS[kind], **scored[best]["params"]}, scored[best]["score"],
                      scored[0]["score"], config.sort_metric, scored)


# -- finalization --------------------------------------------------------------

@dataclass
class FinalModel:
    pipeline: Pipeline
    report: object  # MetricReport on the holdout partition
    confusion: object
    roc: list
    pr: list
    training: TrainingSet
    train: np.ndarray
    holdout: np.ndarray
    audit: FoldAudit

    def holdout_dict(self):
        rn = self.confusion.row_normalized()
        return {
            "kind": self.pipeline.kind,
            "params": self.pipeline.model.params,
            "holdout_rows": int(self.holdout.size),
            "metrics": self.report.to_dict(),
            "confusion": self.confusion.to_dict(),
            "diagonal_share": [float(rn[c, c]) for c in range(rn.shape[0])],
            "roc": [None if c is None else c.to_dict() for c in self.roc],
            "pr": [None if c is None else c.to_dict() for c in self.pr],
        }


def finalize(kind, params, data, config):
    """Refit preprocessing and the model on the whole training partition; score the holdout once."""
    params = dict(params or {})
    train, hold = stratified_holdout(np.asarray(data.y), config.holdout_fraction, config.seed)
    ts = prepare_training(data, train, config, substream(config.seed, "resample", "final"))
    audit = audit_training_set(ts, "final", train, hold)
    model = fit(ModelSpec(kind, params, config.seed), ts.X, ts.y,
                rng=substream(config.seed, "fit", kind, "final"))
    pipeline = Pipeline(model, ts.kept, ts.mean, ts.std, data.feature_names)
    y_hold = np.asarray(data.y)[hold]
    proba = pipeline.predict_proba(np.asarray(data.X)[hold])
    report, cm = evaluate(y_hold, proba)
    roc, _ = roc_auc_ovr(y_hold, proba)
    pr, _ = pr_average_precision(y_hold, proba)
    return FinalModel(pipeline, report, cm, roc, pr, ts, train, hold, audit)


def background_rows(train, size, seed):
    """Sorted random subset of training rows used as the explainer background."""
    train = np.asarray(train)
    if train.size <= size:
        return train.copy()
    return np.sort(substream(seed, "background").choice(train, size=size, replace=False))


def explain_rows(holdout, max_instances, extra=(), all_rows=False):
    """Holdout rows to explain: all of them, or the first ``max_instances``; plus ``extra``."""
    rows = np.asarray(holdout) if all_rows else np.asarray(holdout)[:max_instances]
    return np.union1d(rows, np.asarray(list(extra), dtype=np.int64)).astype(np.int64)


def explain_final(pipeline, data, config, rows, train):
    """ShapMatrix for dataset rows ``rows`` using the default explainer for the model kind."""
    X = np.asarray(data.X)
    background = X[background_rows(train, config.background_size, config.seed)]
    return explain_model(pipeline, X[rows], background=background, method="auto",
                         n_permutations=config.n_permutations, seed=config.seed,
                         feature_names=data.feature_names, instances=rows)
