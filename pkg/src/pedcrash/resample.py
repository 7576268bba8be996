"""Class rebalancing: SMOTE oversampling followed by one pass of Tomek-link cleaning."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ResampleError
from .neighbors import kneighbors, zscore_stats
from .rng import as_generator
from .schema import N_CATEGORIES, SEVERITY_NAMES


class SmoteOutput(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray  # rows added per category
    parents: np.ndarray  # (n_synthetic, 2) input-row indices (seed p, neighbour q)
    lam: np.ndarray  # interpolation weight of each synthetic row, in (0, 1)


@dataclass
class ResampleReport:
    counts_before: list
    counts_after: list
    synthetic_added: list
    tomek_pairs: list
    removed: list = field(default_factory=list)  # Tomek removals per category
    # origin of every output row: input-row index, or -1 for synthetic rows
    source: np.ndarray = field(default=None, repr=False)
    # input-row parents of every synthetic row that survived cleaning
    parents: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "counts_before": list(map(int, self.counts_before)),
            "counts_after": list(map(int, self.counts_after)),
            "synthetic_added": list(map(int, self.synthetic_added)),
            "removed": list(map(int, self.removed)),
            "tomek_pairs": [[int(a), int(b)] for a, b in self.tomek_pairs],
        }


def _snap(values, codes):
    codes = np.asarray(codes, dtype=float)
    return codes[np.argmin(np.abs(values[:, None] - codes[None, :]), axis=1)]


def _open_unit(rng, n):
    return rng.integers(1, 2**53, size=n) / float(2**53)


def smote(X, y, k=5, rng=None, discrete=None, n_classes=N_CATEGORIES):
    """Oversample every minority category up to the majority count.

    Each synthetic row is ``p + lam * (q - p)`` for a uniformly chosen seed
    row ``p`` of the category, one of its k nearest same-category neighbours
    ``q`` (Euclidean on z-scored columns) and ``lam`` uniform in (0, 1).
    Coordinates of columns listed in ``discrete`` (per column: valid codes or
    None) are snapped to the nearest valid code. Original rows come first.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if int(k) < 1:
        raise ResampleError("k must be at least 1")
    rng = as_generator(rng)
    counts = np.bincount(y, minlength=n_classes)
    target = counts.max()
    mean, std = zscore_stats(X)
    Z = (X - mean) / std
    new_X, new_y, parents, lams = [], [], [], []
    synthetic = np.zeros(n_classes, dtype=np.int64)
    for c in range(n_classes):
        need = int(target - counts[c])
        if need == 0:
            continue
        members = np.flatnonzero(y == c)
        if members.size < 2:
            raise ResampleError(
                f"category {c} ({SEVERITY_NAMES[c] if c < len(SEVERITY_NAMES) else c}) has "
                f"{members.size} row(s); SMOTE needs at least 2", category=c)
        kc = min(int(k), members.size - 1)
        nn, _ = kneighbors(Z[members], Z[members], kc, exclude_self=True)
        seed_pos = rng.integers(0, members.size, size=need)
        nb_pos = nn[seed_pos, rng.integers(0, kc, size=need)]
        lam = _open_unit(rng, need)
        p = members[seed_pos]
        q = members[nb_pos]
        rows = X[p] + lam[:, None] * (X[q] - X[p])
        if discrete is not None:
            for j, codes in enumerate(discrete):
                if codes is not None:
                    rows[:, j] = _snap(rows[:, j], codes)
        new_X.append(rows)
        new_y.append(np.full(need, c, dtype=np.int64))
        parents.append(np.column_stack([p, q]))
        lams.append(lam)
        synthetic[c] = need
    if not new_X:
        return SmoteOutput(X.copy(), y.copy(), synthetic, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    return SmoteOutput(
        np.vstack([X] + new_X),
        np.concatenate([y] + new_y),
        synthetic,
        np.vstack(parents).astype(np.int64),
        np.concatenate(lams),
    )


def tomek_links(X, y):
    """Pairs (a, b), a < b, of opposite-category mutual nearest neighbours.

    Nearest neighbours use Euclidean distance on z-scored columns with ties
    going to the lower row index. Output is sorted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] < 2:
        return []
    mean, std = zscore_stats(X)
    nn, _ = kneighbors((X - mean) / std, (X - mean) / std, 1, exclude_self=True)
    nn = nn[:, 0]
    i = np.arange(X.shape[0])
    mutual = (nn[nn] == i) & (i < nn) & (y != y[nn])
    return [(int(a), int(nn[a])) for a in np.flatnonzero(mutual)]


def smote_tomek(X, y, k=5, rng=None, discrete=None, n_classes=N_CATEGORIES):
    """SMOTE, then remove both members of every Tomek link found in one pass."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    counts_before = np.bincount(y, minlength=n_classes)
    out = smote(X, y, k=k, rng=rng, discrete=discrete, n_classes=n_classes)
    pairs = tomek_links(out.X, out.y)
    drop = np.zeros(out.X.shape[0], dtype=bool)
    for a, b in pairs:
        drop[a] = drop[b] = True
    keep = np.flatnonzero(~drop)
    n_orig = X.shape[0]
    source = np.where(keep < n_orig, keep, -1)
    syn_keep = keep[keep >= n_orig] - n_orig
    report = ResampleReport(
        counts_before=counts_before.tolist(),
        counts_after=np.bincount(out.y[keep], minlength=n_classes).tolist(),
        synthetic_added=out.synthetic.tolist(),
        tomek_pairs=pairs,
        removed=np.bincount(out.y[drop], minlength=n_classes).tolist(),
        source=source,
        parents=out.parents[syn_keep],
    )
    return out.X[keep], out.y[keep], report
