"""Complete directed dyadic samples and node-level fold machinery.

A dyadic sample holds one observation per ordered pair of distinct nodes
(i, j).  Cross-fitting splits *nodes* into folds: the score for fold k is
averaged over dyads with both endpoints inside the fold, while nuisances
are trained on dyads with both endpoints outside it, so the two dyad sets
never share a node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "DyadicSample",
    "FoldPartition",
    "build_sample",
    "partition_nodes",
    "eval_dyads",
    "train_dyads",
    "dyadic_mean",
]


class DataError(ValueError):
    """Invalid or incomplete dyadic data."""


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DyadicSample:
    """Complete directed dyadic dataset over ``n_nodes`` nodes.

    Arrays are row-addressed by the fixed bijection
    ``row(i, j) = i * (n_nodes - 1) + (j if j < i else j - 1)``,
    i.e. rows enumerate ordered pairs (i, j), i != j, in row-major order
    skipping the diagonal.  Instances are immutable and safe to share
    across workers.
    """

    n_nodes: int
    p: int
    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    outcome_kind: str = "continuous"
    symmetric: bool = False
    node_labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.n_nodes < 3:
            raise DataError(f"need at least 3 nodes, got {self.n_nodes}")
        if self.outcome_kind not in ("binary", "continuous"):
            raise DataError(f"unknown outcome_kind {self.outcome_kind!r}")
        n_d = self.n_nodes * (self.n_nodes - 1)
        y = np.asarray(self.y, dtype=np.float64).reshape(n_d)
        d = np.asarray(self.d, dtype=np.float64).reshape(n_d)
        x = np.asarray(self.x, dtype=np.float64).reshape(n_d, self.p)
        if not (np.isfinite(y).all() and np.isfinite(d).all() and np.isfinite(x).all()):
            raise DataError("non-finite values in sample")
        if self.outcome_kind == "binary" and not np.isin(y, (0.0, 1.0)).all():
            raise DataError("binary outcome must lie in {0, 1}")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "d", _readonly(d))
        object.__setattr__(self, "x", _readonly(x))

    @property
    def n_dyads(self) -> int:
        return self.n_nodes * (self.n_nodes - 1)

    def rows_of(self, dyads) -> np.ndarray:
        """Storage rows for an (m, 2) array of ordered (src, dst) pairs."""
        dyads = np.asarray(dyads, dtype=np.int64).reshape(-1, 2)
        src, dst = dyads[:, 0], dyads[:, 1]
        return src * (self.n_nodes - 1) + dst - (dst > src)

    def all_dyads(self) -> np.ndarray:
        """All ordered pairs (i, j), i != j, in storage-row order."""
        return _ordered_pairs(np.arange(self.n_nodes))


def _ordered_pairs(nodes: np.ndarray) -> np.ndarray:
    """All ordered pairs of distinct entries of ``nodes``, row-major."""
    m = len(nodes)
    src = np.repeat(nodes, m)
    dst = np.tile(nodes, m)
    keep = src != dst
    return np.column_stack([src[keep], dst[keep]])


def build_sample(records, outcome_kind, symmetrize=False) -> DyadicSample:
    """Assemble a complete :class:`DyadicSample` from per-dyad records.

    Parameters
    ----------
    records : iterable of (src, dst, y, d, x)
        One record per ordered dyad; ``x`` is a covariate sequence of
        common length.  Node labels may be arbitrary hashables and are
        relabeled to ``0..N-1`` in order of first appearance (the map is
        kept in ``node_labels``).
    outcome_kind : {"binary", "continuous"}
    symmetrize : bool
        If set, records may cover each unordered pair once; the missing
        direction is filled by mirroring.  Pairs supplied in both
        directions must agree exactly.

    Raises
    ------
    DataError
        On self links, duplicates, missing dyads, inconsistent covariate
        length, or a binary outcome outside {0, 1}.
    """
    records = list(records)
    if not records:
        raise DataError("no records")

    label_ids: dict = {}
    parsed = []
    p = None
    for rec in records:
        src, dst, y, d, xv = rec
        if src == dst:
            raise DataError(f"self-link record for node {src!r}")
        xv = np.asarray(xv, dtype=np.float64).reshape(-1)
        if p is None:
            p = xv.size
        elif xv.size != p:
            raise DataError(
                f"inconsistent covariate length: expected {p}, got {xv.size}"
            )
        for lab in (src, dst):
            if lab not in label_ids:
                label_ids[lab] = len(label_ids)
        parsed.append((label_ids[src], label_ids[dst], float(y), float(d), xv))

    n = len(label_ids)
    if n < 3:
        raise DataError(f"need at least 3 nodes, got {n}")
    n_d = n * (n - 1)
    y_arr = np.full(n_d, np.nan)
    d_arr = np.full(n_d, np.nan)
    x_arr = np.full((n_d, p), np.nan)

    def row(i, j):
        return i * (n - 1) + j - (j > i)

    for i, j, yv, dv, xv in parsed:
        r = row(i, j)
        if not np.isnan(y_arr[r]):
            if symmetrize and (
                y_arr[r] == yv and d_arr[r] == dv and (x_arr[r] == xv).all()
            ):
                continue
            raise DataError(f"duplicate dyad record ({i}, {j})")
        y_arr[r], d_arr[r], x_arr[r] = yv, dv, xv

    if symmetrize:
        for i, j, yv, dv, xv in parsed:
            r = row(j, i)
            if np.isnan(y_arr[r]):
                y_arr[r], d_arr[r], x_arr[r] = yv, dv, xv
            elif not (y_arr[r] == yv and d_arr[r] == dv and (x_arr[r] == xv).all()):
                raise DataError(f"conflicting records for unordered pair ({i}, {j})")

    missing = np.flatnonzero(np.isnan(y_arr))
    if missing.size:
        r = int(missing[0])
        i, rem = divmod(r, n - 1)
        j = rem + (rem >= i)
        raise DataError(f"missing dyad ({i}, {j})")

    # n_d rows per direction: symmetric iff every mirrored pair agrees.
    pairs = _ordered_pairs(np.arange(n))
    fwd = pairs[:, 0] * (n - 1) + pairs[:, 1] - (pairs[:, 1] > pairs[:, 0])
    rev = pairs[:, 1] * (n - 1) + pairs[:, 0] - (pairs[:, 0] > pairs[:, 1])
    symmetric = bool(
        (y_arr[fwd] == y_arr[rev]).all()
        and (d_arr[fwd] == d_arr[rev]).all()
        and (x_arr[fwd] == x_arr[rev]).all()
    )

    return DyadicSample(
        n_nodes=n,
        p=p,
        y=y_arr,
        d=d_arr,
        x=x_arr,
        outcome_kind=outcome_kind,
        symmetric=symmetric,
        node_labels=tuple(label_ids),
    )


@dataclass(frozen=True)
class FoldPartition:
    """Assignment of nodes to K folds; sizes differ by at most one."""

    K: int
    assignment: np.ndarray
    fold_sizes: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "assignment", _readonly(np.asarray(self.assignment, dtype=np.int64))
        )
        object.__setattr__(
            self, "fold_sizes", _readonly(np.asarray(self.fold_sizes, dtype=np.int64))
        )

    @property
    def n_nodes(self) -> int:
        return self.assignment.size

    def fold_nodes(self, k) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def complement_nodes(self, k) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)


def partition_nodes(n_nodes, K, rng) -> FoldPartition:
    """Uniformly random partition of ``[n_nodes]`` into K folds.

    A random permutation is cut into K contiguous blocks; the first
    ``n_nodes % K`` folds get one extra node.  Requires ``n_nodes >= 2K``
    so that every fold contains at least one dyad.
    """
    if K < 2:
        raise DataError(f"need K >= 2, got {K}")
    if n_nodes < 2 * K:
        raise DataError(f"need n_nodes >= 2K, got n_nodes={n_nodes}, K={K}")
    perm = rng.permutation(n_nodes)
    base, extra = divmod(n_nodes, K)
    sizes = np.full(K, base, dtype=np.int64)
    sizes[:extra] += 1
    assignment = np.empty(n_nodes, dtype=np.int64)
    start = 0
    for k, sz in enumerate(sizes):
        assignment[perm[start : start + sz]] = k
        start += sz
    return FoldPartition(K=K, assignment=assignment, fold_sizes=sizes)


def eval_dyads(partition, k) -> np.ndarray:
    """Ordered dyads with both endpoints in fold k, as an (m, 2) array."""
    if not 0 <= k < partition.K:
        raise DataError(f"fold index {k} out of range")
    return _ordered_pairs(partition.fold_nodes(k))


def train_dyads(partition, k) -> np.ndarray:
    """Ordered dyads with both endpoints outside fold k."""
    if not 0 <= k < partition.K:
        raise DataError(f"fold index {k} out of range")
    return _ordered_pairs(partition.complement_nodes(k))


def dyadic_mean(sample, dyads, f):
    """Arithmetic mean of ``f`` over the listed dyads.

    ``f(y, d, x)`` receives the per-dyad arrays for the selected rows and
    must return an array whose leading axis runs over dyads.  Over a full
    fold set this matches the 1/(|I|(|I|-1)) subsample expectation.
    """
    dyads = np.asarray(dyads)
    if dyads.size == 0:
        raise DataError("empty dyad list")
    rows = sample.rows_of(dyads)
    vals = np.asarray(f(sample.y[rows], sample.d[rows], sample.x[rows]))
    return vals.mean(axis=0)
