"""One-vs-rest ranking evaluation, a diffusion baseline, and sweep experiments.

Evaluation always excludes the seeded nodes: accuracy and per-class AUC are
computed over the heldout complement only.
"""

import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.stats import rankdata

from .errors import (
    DegenerateClassError,
    DegenerateClassWarning,
    GraphTVError,
    InvalidExperimentError,
    NoConvergenceError,
    ShapeMismatchError,
)
from .graph import build_knn_graph
from .datasets import make_partition
from .solver import SolverConfig, prediction_from_scores, solve

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """Heldout metrics; degenerate classes carry ``None`` instead of an AUC."""

    per_class_auc: list
    average_auc: float
    accuracy: float
    n_eval: int
    partition: dict

    def to_dict(self):
        return {
            "per_class_auc": self.per_class_auc,
            "average_auc": self.average_auc,
            "accuracy": self.accuracy,
            "n_eval": self.n_eval,
            "partition": self.partition,
        }


def roc_auc(scores, positives):
    """Probability that a random positive outranks a random negative.

    Computed from midranks, so tied scores contribute half credit; the
    result is invariant under strictly increasing transforms of ``scores``.

    Raises
    ------
    DegenerateClassError
        If ``positives`` is all true or all false.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise ShapeMismatchError("scores and positives must be equal-length vectors")
    if not np.isfinite(scores).all():
        raise ValueError("scores contain NaN or Inf")
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError(
            f"need both positives and negatives (got {n_pos} positives "
            f"out of {positives.size})"
        )
    ranks = rankdata(scores, method="average")
    return float((ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(prediction, truth, constraints):
    """Heldout accuracy and one-vs-rest AUC per class.

    Classes without both positives and negatives among the heldout nodes are
    reported as ``None`` and excluded from the average (with a
    :class:`DegenerateClassWarning`).
    """
    truth = np.asarray(truth, dtype=np.int64)
    if truth.shape[0] != constraints.n:
        raise ShapeMismatchError("truth length does not match constraints")
    if prediction.scores.shape != (constraints.n, constraints.n_classes):
        raise ShapeMismatchError("prediction shape does not match constraints")
    held = constraints.unlabeled_nodes
    n_eval = int(held.size)
    descriptor = {
        "n": constraints.n,
        "n_labeled": constraints.n_labeled,
        "n_eval": n_eval,
    }
    if n_eval == 0:
        warnings.warn(
            "empty heldout set: every node is seeded", DegenerateClassWarning
        )
        return EvalReport(
            per_class_auc=[None] * constraints.n_classes,
            average_auc=float("nan"),
            accuracy=float("nan"),
            n_eval=0,
            partition=descriptor,
        )
    held_truth = truth[held]
    accuracy = float(np.mean(prediction.labels[held] == held_truth))
    per_class = []
    for k in range(constraints.n_classes):
        try:
            per_class.append(roc_auc(prediction.scores[held, k], held_truth == k))
        except DegenerateClassError:
            warnings.warn(
                f"class {k} has no positives or no negatives in the heldout "
                "set; excluded from the AUC average",
                DegenerateClassWarning,
            )
            per_class.append(None)
    valid = [a for a in per_class if a is not None]
    average = float(np.mean(valid)) if valid else float("nan")
    return EvalReport(
        per_class_auc=per_class,
        average_auc=average,
        accuracy=accuracy,
        n_eval=n_eval,
        partition=descriptor,
    )


def baseline_label_spreading(graph, constraints, alpha=0.99, iters=1000, tol=1e-9):
    """Classic quadratic diffusion baseline.

    Iterates ``F <- alpha * S F + (1 - alpha) * Y`` with the symmetrically
    normalized adjacency ``S = D^-1/2 W D^-1/2`` and one-hot seeds ``Y``
    until the sup-norm update falls below ``tol``.  Returns a
    :class:`~graphtv.solver.Prediction`; raises
    :class:`~graphtv.errors.NoConvergenceError` (carrying the last iterate)
    if ``iters`` is exhausted.
    """
    if constraints.n != graph.n:
        raise ShapeMismatchError("constraints do not match the graph")
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0, 1)")
    d_isqrt = sparse.diags(1.0 / np.sqrt(graph.degrees))
    smoother = d_isqrt @ graph.csr @ d_isqrt
    y = np.zeros((graph.n, constraints.n_classes))
    lab = constraints.labeled_nodes
    y[lab, constraints.own_class[lab]] = 1.0
    f = y.copy()
    for _ in range(iters):
        f_next = alpha * (smoother @ f) + (1.0 - alpha) * y
        delta = float(np.abs(f_next - f).max())
        f = f_next
        if delta < tol:
            return prediction_from_scores(f)
    raise NoConvergenceError(
        f"label spreading did not reach {tol:g} in {iters} iterations",
        last_iterate=f,
    )


def _run_cell(graph, truth, n_classes, fraction, part_seed, config, epsilon):
    constraints, _ = make_partition(truth, n_classes, fraction, part_seed, epsilon)
    prediction, _ = solve(graph, constraints, config)
    report = evaluate(prediction, truth, constraints)
    return {
        "fraction": fraction,
        "seed": part_seed,
        "accuracy": report.accuracy,
        "auc_per_class": report.per_class_auc,
        "auc_mean": report.average_auc,
    }


def _cell_guarded(args):
    graph, truth, n_classes, fraction, part_seed, config, epsilon = args
    try:
        return _run_cell(graph, truth, n_classes, fraction, part_seed, config, epsilon)
    except GraphTVError as exc:
        log.warning("cell fraction=%s seed=%s failed: %s", fraction, part_seed, exc)
        return {"fraction": fraction, "seed": part_seed, "error": str(exc)}


def stability_experiment(
    dataset,
    fractions,
    seeds,
    config=None,
    kernel=None,
    epsilon=0.1,
    jobs=1,
):
    """Full (fraction x partition-seed) grid of solve-and-evaluate cells.

    The graph is built once (from ``dataset.features`` with ``kernel``) or
    taken from ``dataset.graph``.  Per-cell solver errors are recorded in
    the cell and do not abort the grid.  Returns the report as a dict::

        {"cells": [{fraction, seed, accuracy, auc_per_class, auc_mean}...],
         "summary": {str(fraction): {accuracy_mean, accuracy_std,
                                     auc_mean, auc_std, n_cells}}}

    A non-monotone mean-accuracy trend across increasing fractions is
    logged as a warning but never raised.
    """
    fractions = list(fractions)
    seeds = list(seeds)
    if not fractions or not seeds:
        raise InvalidExperimentError("need at least one fraction and one seed")
    if len(set(fractions)) != len(fractions) or len(set(seeds)) != len(seeds):
        raise InvalidExperimentError("fractions and seeds must be unique")
    if config is None:
        config = SolverConfig()
    if dataset.graph is not None:
        graph = dataset.graph
    else:
        if dataset.features is None or kernel is None:
            raise InvalidExperimentError(
                "dataset has no graph; features and a kernel spec are required"
            )
        graph = build_knn_graph(dataset.features, kernel)
    grid = [
        (graph, dataset.truth, dataset.n_classes, f, s, config, epsilon)
        for f in fractions
        for s in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_cell_guarded, grid))
    else:
        cells = [_cell_guarded(args) for args in grid]
    summary = {}
    means = []
    for f in fractions:
        ok = [c for c in cells if c["fraction"] == f and "error" not in c]
        if ok:
            acc = np.array([c["accuracy"] for c in ok])
            auc = np.array([c["auc_mean"] for c in ok])
            summary[str(f)] = {
                "accuracy_mean": float(acc.mean()),
                "accuracy_std": float(acc.std()),
                "auc_mean": float(auc.mean()),
                "auc_std": float(auc.std()),
                "n_cells": len(ok),
            }
            means.append(acc.mean())
        else:
            summary[str(f)] = {"n_cells": 0}
            means.append(float("nan"))
    order = np.argsort(fractions)
    seq = [means[i] for i in order if not np.isnan(means[i])]
    if any(b < a - 1e-12 for a, b in zip(seq, seq[1:])):
        log.warning(
            "mean accuracy is not monotone over fractions: %s",
            {str(fractions[i]): means[i] for i in order},
        )
    return {"cells": cells, "summary": summary}


def write_report_json(path, report):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(path, report):
    """Flat mirror of the cells: fraction,seed,accuracy,auc_mean,auc_0,..."""
    width = 0
    for cell in report["cells"]:
        if "auc_per_class" in cell:
            width = max(width, len(cell["auc_per_class"]))

    def fmt(x):
        return "" if x is None else format(float(x), ".17g")

    lines = [
        ",".join(
            ["fraction", "seed", "accuracy", "auc_mean"]
            + [f"auc_{k}" for k in range(width)]
        )
    ]
    for cell in report["cells"]:
        row = [format(float(cell["fraction"]), ".17g"), str(cell["seed"])]
        if "error" in cell:
            row += [""] * (2 + width)
        else:
            row += [fmt(cell["accuracy"]), fmt(cell["auc_mean"])]
            row += [fmt(a) for a in cell["auc_per_class"]]
            row += [""] * (width - len(cell["auc_per_class"]))
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
