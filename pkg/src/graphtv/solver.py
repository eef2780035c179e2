"""Multi-class transductive labeling by normalized total-variation ratio descent.

One score vector per class lives on the graph.  Seeded nodes are pinned to
a margin (own class >= eps, every other class <= -eps) and unlabeled nodes
keep a zero class-sum, so classes compete for them.  The outer loop
repeatedly linearizes the non-smooth ratio

    r(u) = TV(u) / ||u||_1,      TV(u) = sum(|K u|),

around the current state v and solves the resulting convex surrogate

    min_u  ||u - v||^2 / (2 dt)
           + sum_k [ TV(u^k) - c^k <sign(v^k), u^k> ]        over C,

with c^k the pre-step ratio of class k, by an accelerated primal-dual
(gradient-ascent on a box-constrained dual edge variable, proximal descent
on the nodes, extrapolation with a decreasing step ratio).  Each outer step
then re-centers every class by its median and renormalizes the state to
unit Frobenius norm, which keeps the iteration away from the trivial zero
and degree-vector states.  Because u = v is feasible with surrogate value
zero, the exact minimizer keeps the surrogate nonpositive, i.e.

    TV(u_new^k) <= c^k <sign(v^k), u_new^k>  <=  c^k * ||u_new^k||_1

summed over classes; the per-class slack of the right-hand inequality is
measured on the raw inner-loop output and recorded in the trace together
with the re-centered ratios.
"""

import dataclasses
import json
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import (
    DegenerateStateError,
    EmptyClassError,
    NoConvergenceError,
    NoProgressWarning,
    NonFiniteError,
    NonFiniteValueError,
    ParseError,
    ShapeMismatchError,
)
from .operators import NormalizedGradient, operator_norm

log = logging.getLogger(__name__)

#: two class scores closer than this are reported as a tie
TIE_THRESHOLD = 1e-12

_STEP_RULES = ("heuristic", "safeguarded")
_GAMMA_RULES = ("plain", "strong")


@dataclass
class LabelConstraints:
    """Seed sets and the margin they are pinned to.

    Parameters
    ----------
    n : int
        Number of nodes.
    n_classes : int
        Number of classes L >= 2.
    labeled : list of int arrays
        ``labeled[k]`` holds the seed node indices of class k.  Classes must
        be disjoint and non-empty; unlabeled nodes are the complement.
    epsilon : float
        Margin in (0, 1]; compatible with the unit-norm solver state.
    """

    n: int
    n_classes: int
    labeled: list
    epsilon: float = 0.1

    def __post_init__(self):
        if self.n < 2:
            raise ShapeMismatchError("need at least 2 nodes")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        if len(self.labeled) != self.n_classes:
            raise ShapeMismatchError(
                f"got {len(self.labeled)} seed sets for {self.n_classes} classes"
            )
        own = np.full(self.n, -1, dtype=np.int64)
        sets = []
        for k, idx in enumerate(self.labeled):
            idx = np.unique(np.asarray(idx, dtype=np.int64))
            if idx.size == 0:
                raise EmptyClassError(k)
            if idx.min() < 0 or idx.max() >= self.n:
                raise ShapeMismatchError(f"class {k} has a seed index out of range")
            if (own[idx] != -1).any():
                raise ValueError(f"class {k} shares a seed node with another class")
            own[idx] = k
            sets.append(idx)
        self.labeled = sets
        self.own_class = own
        self.labeled_nodes = np.flatnonzero(own >= 0)
        self.unlabeled_nodes = np.flatnonzero(own < 0)

    @classmethod
    def from_pairs(cls, nodes, classes, n, n_classes, epsilon=0.1):
        """Build from parallel (node, class) arrays, e.g. a parsed seed CSV."""
        nodes = np.asarray(nodes, dtype=np.int64)
        classes = np.asarray(classes, dtype=np.int64)
        if nodes.shape != classes.shape:
            raise ShapeMismatchError("node and class arrays differ in length")
        if classes.size and (classes.min() < 0 or classes.max() >= n_classes):
            raise ValueError("class id out of range")
        labeled = [nodes[classes == k] for k in range(n_classes)]
        return cls(n=n, n_classes=n_classes, labeled=labeled, epsilon=epsilon)

    @property
    def n_labeled(self):
        return int(self.labeled_nodes.size)


@dataclass(frozen=True)
class SolverConfig:
    """Tunable knobs of the solver; defaults are the calibrated ones.

    ``step_rule='heuristic'`` (default) only checks the loose product
    bound sigma0*tau0 < 4; ``'safeguarded'`` additionally shrinks
    ``sigma0``/``tau0`` proportionally whenever sigma0*tau0*dt*||K||^2
    >= 1, the certified primal-dual product bound, which buys exact inner
    minimizers at the price of more inner iterations — use it when the
    per-step decrease certificates matter more than speed.
    ``gamma_rule`` picks the extrapolation decay 1/sqrt(1 + tau/dt)
    ('plain', default) or 1/sqrt(1 + 2*tau/dt) ('strong').
    """

    dt: float = 1.0
    sigma0: float = 1.9
    tau0: float = 1.9
    inner_max: int = 2000
    inner_tol: float = 1e-8
    outer_max: int = 100
    outer_tol: float = 1e-6
    seed: int = 0
    step_rule: str = "heuristic"
    gamma_rule: str = "plain"
    zero_guard: float = 1e-12

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be a positive finite real")
        if self.sigma0 <= 0 or self.tau0 <= 0:
            raise ValueError("sigma0 and tau0 must be positive")
        if self.inner_max < 1 or self.outer_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.inner_tol <= 0 or self.outer_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.zero_guard <= 0:
            raise ValueError("zero_guard must be positive")
        if self.step_rule not in _STEP_RULES:
            raise ValueError(f"step_rule must be one of {_STEP_RULES}")
        if self.gamma_rule not in _GAMMA_RULES:
            raise ValueError(f"gamma_rule must be one of {_GAMMA_RULES}")


@dataclass
class MultiClassState:
    """Primal/dual iterates: u, dual edge variable z, extrapolation, snapshot v."""

    u: np.ndarray
    z: np.ndarray
    u_extrapolated: np.ndarray
    v: np.ndarray


@dataclass
class OuterRecord:
    """Diagnostics of one outer step.

    ``ratios`` are the per-class ratios of the stored (re-centered,
    normalized) state; ``ratios_pre`` those of the raw inner-loop output;
    ``decrease_slack`` is c^k*||u||_1 - TV(u) on the raw output, which the
    surrogate keeps non-negative up to solver tolerance.
    """

    ratios: list
    ratios_pre: list
    decrease_slack: list
    sum_ratios: float
    inner_iters: int
    residual: float
    max_violation: float
    wall_ms: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    initial_ratios: list = field(default_factory=list)
    stop_reason: str = "budget"  # "tol" | "no_decrease" | "budget"


@dataclass
class Prediction:
    """Final scores, argmax labels, and near-tie flags."""

    labels: np.ndarray
    scores: np.ndarray
    tie_flag: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.scores).all():
            raise NonFiniteError("prediction scores contain NaN or Inf")


def prediction_from_scores(scores):
    """Argmax labels from a score matrix; near-ties flagged, broken low."""
    scores = np.asarray(scores, dtype=np.float64)
    top_two = np.sort(scores, axis=1)[:, -2:]
    return Prediction(
        labels=np.argmax(scores, axis=1),
        scores=scores,
        tie_flag=(top_two[:, 1] - top_two[:, 0]) < TIE_THRESHOLD,
    )


def project_constraints(u, constraints):
    """Project a state row-wise onto the seed margins and zero class-sums.

    Seeded node i of class k: u[i, k] -> max(u[i, k], eps) and
    u[i, k'] -> min(u[i, k'], -eps) for k' != k.  Unlabeled rows lose their
    mean across classes.  The map is idempotent.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (constraints.n, constraints.n_classes):
        raise ShapeMismatchError(
            f"state shape {u.shape} does not match "
            f"({constraints.n}, {constraints.n_classes})"
        )
    out = u.copy()
    unl = constraints.unlabeled_nodes
    if unl.size:
        out[unl] -= out[unl].mean(axis=1, keepdims=True)
    lab = constraints.labeled_nodes
    if lab.size:
        eps = constraints.epsilon
        own = constraints.own_class[lab]
        block = np.minimum(u[lab], -eps)
        block[np.arange(lab.size), own] = np.maximum(u[lab, own], eps)
        out[lab] = block
    return out


def constraint_violation(u, constraints):
    """Largest violation of the seed margins / zero class-sums (0 if feasible)."""
    worst = 0.0
    lab = constraints.labeled_nodes
    if lab.size:
        eps = constraints.epsilon
        own = constraints.own_class[lab]
        own_vals = u[lab, own]
        worst = max(worst, float(np.max(eps - own_vals, initial=0.0)))
        others = np.minimum(u[lab], -eps)  # entries already <= -eps unchanged
        gap = u[lab] - others
        gap[np.arange(lab.size), own] = 0.0
        worst = max(worst, float(gap.max(initial=0.0)))
    unl = constraints.unlabeled_nodes
    if unl.size:
        worst = max(worst, float(np.abs(u[unl].sum(axis=1)).max(initial=0.0)))
    return worst


def _ratio_terms(operator, u, zero_guard):
    tv = np.abs(operator.matrix @ u).sum(axis=0)
    l1 = np.abs(u).sum(axis=0)
    return tv, l1, tv / np.maximum(l1, zero_guard)


def ratio(operator, u, zero_guard=1e-12):
    """TV(u) / max(||u||_1, zero_guard), columnwise for matrix input."""
    u = np.asarray(u, dtype=np.float64)
    _, _, r = _ratio_terms(operator, u, zero_guard)
    return float(r) if u.ndim == 1 else r


def surrogate_objective(operator, u, anchor, dt=1.0, zero_guard=1e-12):
    """Value at ``u`` of the convex model minimized by one outer step.

    The model tethers ``u`` to the linearization point ``anchor`` and
    replaces each class ratio by its linearization there::

        ||u - anchor||^2 / (2 dt)
            + sum_k [ TV(u^k) - ratio(anchor^k) * <sign(anchor^k), u^k> ]

    By construction the value at ``u = anchor`` is zero, so any feasible
    minimizer has a nonpositive value.
    """
    u = np.asarray(u, dtype=np.float64)
    anchor = np.asarray(anchor, dtype=np.float64)
    tv = np.abs(operator.matrix @ u).sum(axis=0)
    _, _, coeff = _ratio_terms(operator, anchor, zero_guard)
    linear = (np.sign(anchor) * u).sum(axis=0) * coeff
    tether = float(((u - anchor) ** 2).sum()) / (2.0 * dt)
    return tether + float((tv - linear).sum())


def initialize_state(graph, constraints, config, operator=None):
    """Deterministic initial state for a given ``config.seed``.

    Seeds are set to their margin values, unlabeled rows are uniform(-1, 1)
    draws projected to zero class-sum; the state is then median-centered
    per class, normalized to unit Frobenius norm, and the dual variable is
    started at the clamped gradient of u.
    """
    if constraints.n != graph.n:
        raise ShapeMismatchError(
            f"constraints built for n={constraints.n}, graph has n={graph.n}"
        )
    if operator is None:
        operator = NormalizedGradient(graph)
    rng = np.random.default_rng(config.seed)
    n, L = constraints.n, constraints.n_classes
    u = np.zeros((n, L))
    lab = constraints.labeled_nodes
    if lab.size:
        u[lab] = -constraints.epsilon
        u[lab, constraints.own_class[lab]] = constraints.epsilon
    unl = constraints.unlabeled_nodes
    if unl.size:
        draw = rng.uniform(-1.0, 1.0, size=(unl.size, L))
        draw -= draw.mean(axis=1, keepdims=True)
        u[unl] = draw
    u -= np.median(u, axis=0)
    nrm = np.linalg.norm(u)
    if nrm < 1e-14:
        raise DegenerateStateError("initial state is numerically zero")
    u /= nrm
    z = np.clip(operator.matrix @ u, -1.0, 1.0)
    return MultiClassState(u=u, z=z, u_extrapolated=u.copy(), v=u.copy())


def _inner_loop(state, operator, constraints, config, coeff):
    fwd = operator.matrix
    adj = operator.adjoint_matrix
    dt = config.dt
    accel = 2.0 if config.gamma_rule == "strong" else 1.0
    drive = np.sign(state.v) * coeff  # c^k * sign(v^k), zero where v is zero
    anchor = state.v
    u = state.u
    z = state.z
    u_tilde = state.u_extrapolated
    sigma = config.sigma0
    tau = config.tau0
    iters = 0
    residual = np.inf
    for it in range(1, config.inner_max + 1):
        # dual ascent on the edges, then projection onto the unit box
        z += sigma * (fwd @ u_tilde)
        np.clip(z, -1.0, 1.0, out=z)
        # proximal descent on the nodes: resolvent of the quadratic tether
        # ||u - anchor||^2 / (2 dt) plus the linearized-l1 drive, followed
        # by projection onto the seed set
        u_prev = u
        step = tau * dt
        u = (u + step * (drive - adj @ z) + tau * anchor) / (1.0 + tau)
        u = project_constraints(u, constraints)
        if not np.isfinite(u).all():
            raise NonFiniteError("inner iterate is not finite", iteration=it)
        gamma = 1.0 / np.sqrt(1.0 + accel * tau / dt)
        tau *= gamma
        sigma /= gamma
        u_tilde = u + gamma * (u - u_prev)
        diff = np.linalg.norm(u - u_prev)
        residual = diff / max(np.linalg.norm(u_prev), 1e-30)
        iters = it
        if residual < config.inner_tol:
            break
    state.u = u
    state.z = z
    state.u_extrapolated = u_tilde
    return state, iters, residual


def inner_primal_dual(state, operator, constraints, config):
    """Run the accelerated primal-dual loop from ``state``.

    ``state.v`` holds the linearization point; ``state.u``/``state.z``/
    ``state.u_extrapolated`` are the warm-start iterates.  Returns the
    mutated state, the iterations used, and the final relative change.
    """
    _, _, coeff = _ratio_terms(operator, state.v, config.zero_guard)
    return _inner_loop(state, operator, constraints, config, coeff)


def outer_step(state, operator, constraints, config):
    """One ratio-descent step: inner solve, median re-center, renormalize.

    ``state.u`` is expected to satisfy the constraints on entry (every
    state this module hands out does), which is what makes the recorded
    ``decrease_slack`` a certificate: the anchor is then feasible for the
    inner problem with surrogate value exactly zero.  The median shift can
    push seeds off their margins; that transient is recorded as
    ``max_violation`` and repaired by a final projection, so the state
    carried into the next step is feasible again.
    """
    t0 = time.perf_counter()
    state.v = state.u.copy()
    state.u_extrapolated = state.u.copy()
    state.z = np.clip(operator.matrix @ state.v, -1.0, 1.0)
    _, _, coeff = _ratio_terms(operator, state.v, config.zero_guard)
    state, iters, residual = _inner_loop(state, operator, constraints, config, coeff)
    tv_pre, l1_pre, ratios_pre = _ratio_terms(operator, state.u, config.zero_guard)
    slack = coeff * l1_pre - tv_pre
    shifted = state.u - np.median(state.u, axis=0)
    nrm = np.linalg.norm(shifted)
    if nrm < 1e-14:
        raise DegenerateStateError("state collapsed to zero after median shift")
    shifted /= nrm
    violation = constraint_violation(shifted, constraints)
    state.u = project_constraints(shifted, constraints)
    _, _, ratios_carried = _ratio_terms(operator, state.u, config.zero_guard)
    record = OuterRecord(
        ratios=[float(r) for r in ratios_carried],
        ratios_pre=[float(r) for r in ratios_pre],
        decrease_slack=[float(s) for s in slack],
        sum_ratios=float(ratios_carried.sum()),
        inner_iters=iters,
        residual=float(residual),
        max_violation=float(violation),
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    return state, record


def _effective_config(config, operator):
    if config.step_rule == "heuristic":
        if not config.sigma0 * config.tau0 < 4.0:
            raise ValueError(
                "heuristic step rule needs sigma0*tau0 < 4 "
                f"(got {config.sigma0 * config.tau0:g})"
            )
        return config
    try:
        norm = operator_norm(operator, iters=2000, tol=1e-9)
    except NoConvergenceError as exc:
        # A loose eigenvalue estimate is fine for a step bound; pad the
        # last Rayleigh quotient, which approaches ||K|| from below.
        norm = float(exc.last_estimate) * 1.05
        log.info("operator norm estimate did not settle; padding to %.4g", norm)
    product = config.sigma0 * config.tau0 * config.dt * norm**2
    if product < 1.0:
        return config
    scale = np.sqrt(0.999 / product)
    log.info(
        "safeguarded step rule: rescaling sigma0/tau0 by %.4g (||K||=%.4g)",
        scale,
        norm,
    )
    return dataclasses.replace(
        config, sigma0=config.sigma0 * scale, tau0=config.tau0 * scale
    )


def diffusion_warm_start(state, graph, constraints, operator, passes=500, tol=1e-10):
    """Replace the random part of ``state`` by diffused seed information.

    Ratio descent only moves downhill from wherever it starts, and a
    uniform random start frequently sits in the basin of a partition that
    disagrees with the seeds (piecewise-constant states whose boundaries
    the non-smooth ratio cannot cross).  The standard cure, inherited from
    inverse-power-method treatments of the 1-Laplacian, is to start from
    the p=2 smooth solution instead: iterate the lazy symmetric-normalized
    adjacency (I + D^-1/2 W D^-1/2)/2 on the unlabeled rows, re-pinning
    seed rows after every pass, until the field settles.  The result is
    deterministic, respects the zero class-sum coupling, and concentrates
    each class around its seeds before the non-smooth descent sharpens the
    boundaries.
    """
    unl = constraints.unlabeled_nodes
    if unl.size == 0:
        return state
    inv_sqrt_deg = 1.0 / np.sqrt(graph.degrees)
    smooth = sparse.diags(inv_sqrt_deg) @ graph.csr @ sparse.diags(inv_sqrt_deg)
    lab = constraints.labeled_nodes
    u = state.u.copy()
    for _ in range(passes):
        nxt = 0.5 * (u + smooth @ u)
        if lab.size:
            nxt[lab] = -constraints.epsilon
            nxt[lab, constraints.own_class[lab]] = constraints.epsilon
        nxt[unl] -= nxt[unl].mean(axis=1, keepdims=True)
        delta = np.linalg.norm(nxt - u) / max(np.linalg.norm(u), 1e-30)
        u = nxt
        if delta < tol:
            break
    # No median re-centering here: on clusters whose diffused values tie
    # exactly, subtracting a median that coincides with the tied value
    # would zero the whole block and sign-blind the descent to it.
    nrm = np.linalg.norm(u)
    if nrm < 1e-14:
        raise DegenerateStateError("warm start collapsed to the zero state")
    u /= nrm
    state.u = u
    state.v = u.copy()
    state.u_extrapolated = u.copy()
    state.z = np.clip(operator.matrix @ u, -1.0, 1.0)
    return state


def solve(graph, constraints, config=None):
    """Label every node of ``graph`` from the seeds in ``constraints``.

    Initializes per the seeded RNG, diffuses the seed information over the
    graph (see :func:`diffusion_warm_start`), then runs outer ratio-descent
    steps.  The loop keeps a step only if it does not raise the monitored
    sum of per-class ratios: the re-centering inside each step is not a
    descent operation, so the first step that comes back worse marks
    convergence and is rolled back.  It otherwise stops once the sum moves
    by less than ``outer_tol``, or at ``outer_max``.  Returns
    ``(Prediction, SolveTrace)``; ``trace.stop_reason`` says which
    happened.  Labels are the row argmax of the final scores, ties broken
    toward the smallest class index and flagged.
    """
    if config is None:
        config = SolverConfig()
    if constraints.n != graph.n:
        raise ShapeMismatchError(
            f"constraints built for n={constraints.n}, graph has n={graph.n}"
        )
    operator = NormalizedGradient(graph)
    config = _effective_config(config, operator)
    state = initialize_state(graph, constraints, config, operator=operator)
    state = diffusion_warm_start(state, graph, constraints, operator)
    state.u = project_constraints(state.u, constraints)
    _, _, r0 = _ratio_terms(operator, state.u, config.zero_guard)
    trace = SolveTrace(initial_ratios=[float(r) for r in r0])
    prev_sum = float(r0.sum())
    for t in range(config.outer_max):
        kept = state.u.copy()
        try:
            state, record = outer_step(state, operator, constraints, config)
        except NonFiniteError as exc:
            exc.trace = trace  # expose the partial trace to callers
            raise
        log.debug(
            "outer %d: sum_ratios=%.6g inner=%d residual=%.3g",
            t,
            record.sum_ratios,
            record.inner_iters,
            record.residual,
        )
        if record.sum_ratios > prev_sum:
            state.u = kept
            trace.converged = True
            trace.stop_reason = "no_decrease"
            if t == 0:
                warnings.warn(
                    "ratio descent stagnated on its first outer step",
                    NoProgressWarning,
                    stacklevel=2,
                )
            break
        trace.records.append(record)
        if prev_sum - record.sum_ratios < config.outer_tol:
            trace.converged = True
            trace.stop_reason = "tol"
            break
        prev_sum = record.sum_ratios
    return prediction_from_scores(state.u.copy()), trace


def _fmt(x):
    return format(float(x), ".17g")


def write_scores_csv(path, prediction):
    """Scores table: node,score_0,...,score_{L-1},label,tie (17 sig. digits)."""
    n, n_classes = prediction.scores.shape
    header = ",".join(
        ["node"] + [f"score_{k}" for k in range(n_classes)] + ["label", "tie"]
    )
    lines = [header]
    for i in range(n):
        cells = [str(i)]
        cells += [_fmt(x) for x in prediction.scores[i]]
        cells.append(str(int(prediction.labels[i])))
        cells.append(str(int(prediction.tie_flag[i])))
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scores_csv(path):
    """Parse a scores table back into a Prediction."""
    with open(path, "r", newline="") as fh:
        rows = fh.read().splitlines()
    if not rows:
        raise ParseError("empty scores file", line=1)
    head = rows[0].split(",")
    if len(head) < 4 or head[0] != "node" or head[-2:] != ["label", "tie"]:
        raise ParseError("malformed scores header", line=1)
    n_classes = len(head) - 3
    if head[1:-2] != [f"score_{k}" for k in range(n_classes)]:
        raise ParseError("malformed scores header", line=1)
    scores, labels, ties = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        cells = row.split(",")
        if len(cells) != len(head):
            raise ParseError(f"expected {len(head)} fields", line=lineno)
        try:
            node = int(cells[0])
            vals = [float(c) for c in cells[1:-2]]
            label = int(cells[-2])
            tie = int(cells[-1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if node != len(scores):
            raise ParseError(f"expected node {len(scores)}, got {node}", line=lineno)
        if not all(np.isfinite(vals)):
            raise NonFiniteValueError("score is not finite", line=lineno)
        if not 0 <= label < n_classes:
            raise ParseError(f"label {label} out of range", line=lineno)
        scores.append(vals)
        labels.append(label)
        ties.append(bool(tie))
    if not scores:
        raise ParseError("scores file has no data rows", line=2)
    return Prediction(
        labels=np.asarray(labels, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
        tie_flag=np.asarray(ties, dtype=bool),
    )


def write_trace_json(path, trace):
    """Trace file: a JSON array with one record per outer iteration."""
    payload = [record.to_dict() for record in trace.records]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
