"""Crash datasets: CSV ingestion, encoding, stratified splits, synthesis, profiling."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, StratificationError, ValidationError
from .rng import substream
from .schema import (
    AGE_BANDS,
    CATEGORY_TOTALS,
    CONTINUOUS,
    CRASH_SCHEMA,
    N_CATEGORIES,
    SEVERITY_COLUMN,
    SEVERITY_NAMES,
    LEVEL_COUNTS,
    age_band,
)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: object = CRASH_SCHEMA

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=np.int64, copy=True)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise ValidationError(f"feature matrix must have {len(self.schema)} columns, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValidationError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ValidationError("feature matrix contains missing or non-finite values")
        if y.size and (y.min() < 0 or y.max() >= N_CATEGORIES):
            raise ValidationError("severity labels must lie in {0, 1, 2}")
        for j, spec in enumerate(self.schema):
            if spec.discrete:
                bad = ~np.isin(X[:, j], spec.codes)
                if bad.any():
                    row = int(np.flatnonzero(bad)[0])
                    raise ValidationError(f"row {row}: invalid code {X[row, j]} for {spec.name}", row=row)
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def feature_names(self):
        return self.schema.names

    def counts(self):
        return np.bincount(self.y, minlength=N_CATEGORIES)

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.schema)


def encode_record(raw, schema=CRASH_SCHEMA):
    """Encode one raw record (feature name -> text) into a numeric vector."""
    out = np.empty(len(schema))
    for j, spec in enumerate(schema):
        if spec.name not in raw:
            raise SchemaError(f"missing feature {spec.name!r}", column=spec.name)
        text = raw[spec.name]
        if text is None or str(text).strip() == "":
            raise ValidationError(f"missing value for {spec.name}")
        text = str(text)
        if spec.kind == CONTINUOUS:
            try:
                value = float(text)
            except ValueError:
                raise ValidationError(f"cannot parse {spec.name} value {text!r} as a number") from None
            if not math.isfinite(value):
                raise ValidationError(f"non-finite {spec.name} value {text!r}")
            out[j] = value
        else:
            code = spec.code_of(text)
            if code is None:
                raise ValidationError(f"unknown level {text!r} for {spec.name}")
            out[j] = code
    return out


def decode_record(vector, schema=CRASH_SCHEMA):
    """Inverse of encode_record: numeric vector -> feature name -> text."""
    raw = {}
    for spec, value in zip(schema, vector):
        if spec.kind == CONTINUOUS:
            raw[spec.name] = repr(float(value))
        else:
            raw[spec.name] = spec.name_of(int(value))
    return raw


def parse_severity(text):
    key = str(text).strip()
    if not key:
        raise ValidationError("missing value for Severity")
    for code, name in enumerate(SEVERITY_NAMES):
        if key.lower() == name.lower() or key == str(code):
            return code
    raise ValidationError(f"unknown severity {text!r}")


def load_csv(path, schema=CRASH_SCHEMA):
    """Read and encode a crash CSV. Row order is preserved; missing cells are rejected."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = set(schema.names) | {SEVERITY_COLUMN}
        for name in schema.names + [SEVERITY_COLUMN]:
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}", column=name)
        for name in header:
            if name not in expected:
                raise SchemaError(f"{path}: unknown column {name!r}", column=name)
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicated column in header")
        rows, labels = [], []
        for i, cells in enumerate(reader):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ValidationError(f"row {i}: expected {len(header)} cells, got {len(cells)}", row=i)
            raw = dict(zip(header, cells))
            try:
                rows.append(encode_record(raw, schema))
                labels.append(parse_severity(raw[SEVERITY_COLUMN]))
            except ValidationError as exc:
                raise ValidationError(f"row {i}: {exc}", row=i) from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(np.vstack(rows), np.array(labels), schema)


def write_csv(data, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.schema.names + [SEVERITY_COLUMN])
        for row, label in zip(data.X, data.y):
            raw = decode_record(row, data.schema)
            for spec in data.schema:
                if spec.kind == CONTINUOUS:
                    raw[spec.name] = f"{float(row[data.schema.index(spec.name)]):.4f}"
            writer.writerow([raw[n] for n in data.schema.names] + [SEVERITY_NAMES[int(label)]])


# -- splitting ---------------------------------------------------------------

def _category_indices(y, rng):
    return [rng.permutation(np.flatnonzero(y == c)) for c in range(N_CATEGORIES)]


def stratified_kfold(data, k, seed):
    """Partition row indices into k folds with per-category counts within 1 of each other.

    Rows of each category are shuffled and dealt round-robin; the dealing
    position carries over between categories so fold sizes stay balanced too.
    """
    y = data.y if isinstance(data, Dataset) else np.asarray(data)
    k = int(k)
    if k < 2:
        raise StratificationError("k must be at least 2")
    counts = np.bincount(y, minlength=N_CATEGORIES)
    for c in range(N_CATEGORIES):
        if counts[c] < k:
            raise StratificationError(
                f"category {c} ({SEVERITY_NAMES[c]}) has {counts[c]} rows, fewer than k={k}", category=c)
    rng = substream(seed, "kfold")
    folds = [[] for _ in range(k)]
    pos = 0
    for idx in _category_indices(y, rng):
        for i in idx:
            folds[pos % k].append(int(i))
            pos += 1
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def stratified_holdout(data, fraction, seed):
    """Split into (train, holdout) indices, holding out round(fraction * n_c) rows per category."""
    y = data.y if isinstance(data, Dataset) else np.asarray(data)
    rng = substream(seed, "holdout")
    train, hold = [], []
    for idx in _category_indices(y, rng):
        n_hold = int(math.floor(fraction * idx.size + 0.5))
        hold.append(idx[:n_hold])
        train.append(idx[n_hold:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(hold))


# -- synthesis ---------------------------------------------------------------

def largest_remainder(weights, n):
    """Apportion n units proportionally to weights (ties in remainder go to the lower index)."""
    w = np.asarray(weights, dtype=float)
    quota = n * w / w.sum()
    base = np.floor(quota).astype(np.int64)
    short = int(n - base.sum())
    if short:
        frac = quota - base
        order = sorted(range(len(w)), key=lambda i: (-frac[i], i))
        for i in order[:short]:
            base[i] += 1
    return base


def _quota_draw(levels, weights, n, rng):
    counts = largest_remainder(weights, n)
    return rng.permutation(np.repeat(np.asarray(levels, dtype=float), counts))


DARK_UNLIT = 1
INTERACTION_ODDS = 2.0


def _coupled_light_intersection(n, rng):
    """Joint (Light, Intersection) draw for fatal rows with the dark, mid-block cell boosted."""
    light = np.array([v[2] for v in LEVEL_COUNTS["Light"].values()], dtype=float)
    counts = LEVEL_COUNTS["Intersection"]
    inter = np.array([counts["No"][2], counts["Yes"][2]], dtype=float)
    joint = np.outer(light / light.sum(), inter / inter.sum())
    p = joint[DARK_UNLIT - 1, 0]
    boosted = INTERACTION_ODDS * p / (1.0 + (INTERACTION_ODDS - 1.0) * p)
    joint *= (1.0 - boosted) / (1.0 - p)
    joint[DARK_UNLIT - 1, 0] = boosted
    cells = largest_remainder(joint.ravel(), n)
    codes = np.repeat(np.arange(joint.size), cells)
    codes = rng.permutation(codes)
    light_code = codes // 2 + 1
    inter_code = codes % 2
    return light_code.astype(float), inter_code.astype(float)


def synthesize_table1(n, seed, interactions=False, schema=CRASH_SCHEMA):
    """Synthetic crash data following the marginals in ``LEVEL_COUNTS``.

    Category counts are the largest-remainder apportionment of
    ``CATEGORY_TOTALS``. Within a category, each feature's level counts are
    apportioned from the per-level counts and assigned by an independent random
    permutation, so features are independent given the category and the
    marginals are reproduced up to rounding. Ages are uniform within the
    drawn age band.

    With ``interactions`` on, fatal rows draw Light and Intersection jointly:
    the (Dark-Not lighted, non-intersection) cell's odds are doubled relative
    to the independent product and the other cells rescaled.
    """
    n = int(n)
    if n < 100:
        raise ValidationError("n must be at least 100")
    if schema is not CRASH_SCHEMA:
        raise ValidationError("synthesis is defined for the crash schema only")
    rng = substream(seed, "synth")
    cat_counts = largest_remainder(CATEGORY_TOTALS, n)
    blocks_X, blocks_y = [], []
    for c in range(N_CATEGORIES):
        n_c = int(cat_counts[c])
        X = np.empty((n_c, len(schema)))
        for j, spec in enumerate(schema):
            table = LEVEL_COUNTS[spec.name]
            weights = [v[c] for v in table.values()]
            if spec.kind == CONTINUOUS:
                bands = _quota_draw(range(len(AGE_BANDS)), weights, n_c, rng).astype(int)
                lo = np.array([b[1] for b in AGE_BANDS])[bands]
                hi = np.array([b[2] for b in AGE_BANDS])[bands]
                X[:, j] = lo + (hi - lo) * rng.random(n_c)
            else:
                codes = [spec.code_of(level) for level in table]
                X[:, j] = _quota_draw(codes, weights, n_c, rng)
        if interactions and c == 2:
            light, inter = _coupled_light_intersection(n_c, rng)
            X[:, schema.index("Light")] = light
            X[:, schema.index("Intersection")] = inter
        blocks_X.append(X)
        blocks_y.append(np.full(n_c, c))
    X = np.vstack(blocks_X)
    y = np.concatenate(blocks_y)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], schema)


# -- profiling ---------------------------------------------------------------

def _pct(count, total):
    if total == 0:
        return 0
    return int(math.floor(100.0 * count / total + 0.5))


@dataclass(frozen=True)
class ProfileRow:
    feature: str
    level: str
    total: int
    by_category: tuple  # (minor, serious, fatal)


@dataclass(frozen=True)
class Profile:
    n_rows: int
    category_counts: tuple
    rows: tuple

    def percent(self, row, category=None):
        if category is None:
            return _pct(row.total, self.n_rows)
        return _pct(row.by_category[category], self.category_counts[category])

    def lookup(self, feature, level):
        for row in self.rows:
            if row.feature == feature and row.level == level:
                return row
        raise KeyError((feature, level))

    def to_markdown(self):
        def cell(count, total):
            return f"{count} ({_pct(count, total)}%)"

        n = self.n_rows
        cc = self.category_counts
        lines = [
            "| Characteristics | Class | Total | Fatal | Serious injury | Minor injury |",
            "|---|---|---|---|---|---|",
            f"| Pedestrian crashes |  | {n} | {cell(cc[2], n)} | {cell(cc[1], n)} | {cell(cc[0], n)} |",
        ]
        last = None
        for row in self.rows:
            name = row.feature if row.feature != last else ""
            last = row.feature
            b = row.by_category
            lines.append(
                f"| {name} | {row.level} | {cell(row.total, n)} | {cell(b[2], cc[2])} "
                f"| {cell(b[1], cc[1])} | {cell(b[0], cc[0])} |"
            )
        return "\n".join(lines) + "\n"


def profile(data):
    """Per feature and level: total and per-category counts (ages grouped into bands)."""
    if data.n_rows == 0:
        raise ValidationError("cannot profile an empty dataset")
    y = data.y
    cat_counts = tuple(int(v) for v in np.bincount(y, minlength=N_CATEGORIES))
    rows = []
    for j, spec in enumerate(data.schema):
        col = data.X[:, j]
        if spec.kind == CONTINUOUS:
            keys = np.array([age_band(v) for v in col])
            levels = [(b[0], i) for i, b in enumerate(AGE_BANDS)]
        else:
            keys = col.astype(int)
            levels = list(spec.levels)
        for level, code in levels:
            mask = keys == code
            by_cat = tuple(int(np.sum(mask & (y == c))) for c in range(N_CATEGORIES))
            rows.append(ProfileRow(spec.name, level, int(mask.sum()), by_cat))
    return Profile(data.n_rows, cat_counts, tuple(rows))
