"""Synthetic datasets, seed/evaluation partitions, and the CSV formats.

Features CSV: one node per row of comma-separated decimal floats, with an
optional first header row starting with '#'.  Label/truth CSV: header
``node,class`` followed by 0-based integer pairs.  Writers emit 17
significant digits so a write/read round trip is exact to 1e-15.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    FractionTooSmallError,
    GenerationFailedError,
    NonFiniteValueError,
    ParseError,
    ShapeMismatchError,
)
from .graph import FeatureMatrix, Graph
from .solver import LabelConstraints

_SBM_MAX_ATTEMPTS = 100


@dataclass
class LabeledDataset:
    """Features (optional for graph-native data) plus ground-truth classes."""

    truth: np.ndarray
    n_classes: int
    features: FeatureMatrix | None = None
    graph: Graph | None = None

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=np.int64)
        if self.truth.ndim != 1:
            raise ShapeMismatchError("truth must be a 1-d class array")
        if self.truth.min() < 0 or self.truth.max() >= self.n_classes:
            raise ValueError("truth contains a class id out of range")
        for other, what in ((self.features, "features"), (self.graph, "graph")):
            if other is not None and other.n != self.truth.shape[0]:
                raise ShapeMismatchError(f"{what} row count differs from truth")

    @property
    def n(self):
        return self.truth.shape[0]


@dataclass
class Partition:
    """A labeled/heldout split: which nodes are seeds, which are evaluated."""

    labeled_fraction: float
    seed: int
    labeled: list
    eval_indices: np.ndarray
    degenerate: bool = False


def synth_two_moons(n, noise, seed):
    """Two interleaved half-circles of radius 1 with Gaussian coordinate noise.

    Returns ``(FeatureMatrix, truth)`` with exactly n/2 points per moon
    (moon 0 first).  ``n`` must be even and >= 4.
    """
    if n < 4 or n % 2:
        raise ValueError("n must be an even integer >= 4")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    xy = np.empty((n, 2))
    xy[:half, 0] = np.cos(t)
    xy[:half, 1] = np.sin(t)
    xy[half:, 0] = 1.0 - np.cos(t)
    xy[half:, 1] = 0.5 - np.sin(t)
    if noise > 0:
        rng = np.random.default_rng(seed)
        xy += rng.normal(0.0, noise, size=xy.shape)
    truth = np.repeat(np.arange(2, dtype=np.int64), half)
    return FeatureMatrix(xy), truth


def synth_sbm(sizes, p_in, p_out, seed):
    """Stochastic block model with unit edge weights.

    Within-block pairs connect with probability ``p_in``, cross-block pairs
    with ``p_out``.  Draws are resampled (same generator stream) until no
    node is isolated, up to 100 attempts, then
    :class:`~graphtv.errors.GenerationFailedError` is raised.  Returns
    ``(Graph, truth)`` with block ids as truth.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 2:
        raise ValueError("need at least two blocks of at least two nodes")
    for p, name in ((p_in, "p_in"), (p_out, "p_out")):
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")
    n = sum(sizes)
    truth = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
    prob = np.where(truth[:, None] == truth[None, :], p_in, p_out)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(_SBM_MAX_ATTEMPTS):
        keep = rng.random(iu.size) < prob[iu, ju]
        adj = np.zeros((n, n))
        adj[iu[keep], ju[keep]] = 1.0
        adj += adj.T
        if adj.sum(axis=1).min() > 0:
            return Graph.from_dense(adj), truth
    raise GenerationFailedError(
        f"no isolate-free draw in {_SBM_MAX_ATTEMPTS} attempts "
        f"(sizes={sizes}, p_in={p_in}, p_out={p_out})"
    )


def count_components(graph):
    """Number of connected components (diagnostic helper for tests)."""
    return int(connected_components(graph.csr, directed=False)[0])


def make_partition(truth, n_classes, labeled_fraction, seed, epsilon=0.1):
    """Stratified seed/evaluation split of a labeled dataset.

    Per class, ``round(fraction * class_size)`` seeds (at least 1) are drawn
    without replacement; the remaining nodes form the evaluation set.
    ``fraction == 1.0`` labels everything and returns a partition flagged
    ``degenerate`` with an empty evaluation set.

    Returns ``(LabelConstraints, Partition)``.
    """
    truth = np.asarray(truth, dtype=np.int64)
    n = truth.shape[0]
    if not (0.0 < labeled_fraction <= 1.0):
        raise ValueError("labeled_fraction must lie in (0, 1]")
    if labeled_fraction * n < n_classes:
        raise FractionTooSmallError(
            f"fraction {labeled_fraction} of {n} nodes cannot cover "
            f"{n_classes} classes"
        )
    rng = np.random.default_rng(seed)
    labeled = []
    for k in range(n_classes):
        members = np.flatnonzero(truth == k)
        if members.size == 0:
            raise FractionTooSmallError(f"class {k} has no members to seed")
        count = int(round(labeled_fraction * members.size))
        count = min(max(count, 1), members.size)
        picked = rng.choice(members, size=count, replace=False)
        labeled.append(np.sort(picked))
    constraints = LabelConstraints(
        n=n, n_classes=n_classes, labeled=labeled, epsilon=epsilon
    )
    eval_indices = constraints.unlabeled_nodes
    partition = Partition(
        labeled_fraction=labeled_fraction,
        seed=seed,
        labeled=labeled,
        eval_indices=eval_indices,
        degenerate=eval_indices.size == 0,
    )
    return constraints, partition


def _fmt(x):
    return format(float(x), ".17g")


def write_features_csv(path, features):
    values = features.values if isinstance(features, FeatureMatrix) else features
    lines = ["#" + ",".join(f"x{j}" for j in range(values.shape[1]))]
    lines += [",".join(_fmt(x) for x in row) for row in values]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_features_csv(path):
    """Read a features CSV into a FeatureMatrix.

    Raises :class:`ParseError` (with 1-based line number) on malformed rows,
    :class:`NonFiniteValueError` on NaN/Inf entries, and
    :class:`ShapeMismatchError` on ragged rows.
    """
    rows = []
    width = None
    with open(path, "r", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1 and line.startswith("#"):
                continue
            cells = line.split(",")
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if any(math.isnan(v) or math.isinf(v) for v in vals):
                raise NonFiniteValueError("feature is not finite", line=lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ShapeMismatchError(
                    f"line {lineno}: expected {width} columns, got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ParseError("no data rows", line=1)
    return FeatureMatrix(np.asarray(rows, dtype=np.float64))


def write_labels_csv(path, nodes, classes):
    lines = ["node,class"]
    lines += [f"{int(i)},{int(c)}" for i, c in zip(nodes, classes)]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_labels_csv(path):
    """Read a ``node,class`` CSV into parallel int arrays."""
    nodes, classes = [], []
    with open(path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "node,class":
        raise ParseError("expected header 'node,class'", line=1)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise ParseError("expected two fields", line=lineno)
        try:
            nodes.append(int(cells[0]))
            classes.append(int(cells[1]))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if nodes[-1] < 0 or classes[-1] < 0:
            raise ParseError("indices must be non-negative", line=lineno)
    if not nodes:
        raise ParseError("no data rows", line=1)
    return np.asarray(nodes, dtype=np.int64), np.asarray(classes, dtype=np.int64)


def truth_from_pairs(nodes, classes, n):
    """Dense truth array from (node, class) pairs covering every node once."""
    nodes = np.asarray(nodes, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    if nodes.size != n or np.unique(nodes).size != n:
        raise ShapeMismatchError(
            f"truth must cover each of the {n} nodes exactly once"
        )
    if nodes.min() < 0 or nodes.max() >= n:
        raise ShapeMismatchError("truth node index out of range")
    truth = np.empty(n, dtype=np.int64)
    truth[nodes] = classes
    return truth
