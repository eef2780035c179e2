"""Degree-normalized first-difference operator of a graph and its friends.

For each canonical edge e = (i, j) with i < j the gradient is

    (K u)_e = w_ij * (u_i / d_i - u_j / d_j),

so the total variation sum(|K u|) penalizes differences of the
degree-rescaled node function.  The degree vector itself lies in the
nullspace of K.  The adjoint scatters an edge function back to the nodes,

    (K^T z)_i = sum_{e=(i,j)} +- w_ij * z_e / d_i,

with a plus sign where i is the first endpoint.  Both maps are realized
once as sparse matrices so they are exactly transposes of each other.
"""

import numpy as np
from scipy import sparse

from .errors import DimensionMismatchError, NoConvergenceError


class NormalizedGradient:
    """Sparse realization of the edge-difference operator of a graph.

    Attributes
    ----------
    graph : Graph
    matrix : csr_matrix, shape (num_edges, n)
        The forward (node -> edge) map.
    adjoint_matrix : csr_matrix, shape (n, num_edges)
        Its exact transpose (edge -> node).
    """

    def __init__(self, graph):
        self.graph = graph
        m = graph.num_edges
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate([graph.edges_i, graph.edges_j])
        inv_deg = 1.0 / graph.degrees
        vals = np.concatenate(
            [
                graph.edge_weights * inv_deg[graph.edges_i],
                -graph.edge_weights * inv_deg[graph.edges_j],
            ]
        )
        self.matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(m, graph.n))
        self.adjoint_matrix = self.matrix.T.tocsr()
        self._norm_estimate = None

    @property
    def shape(self):
        return self.matrix.shape


def _check_node_input(operator, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] != operator.graph.n:
        raise DimensionMismatchError(
            f"expected length {operator.graph.n} along axis 0, got {u.shape[0]}"
        )
    if not np.isfinite(u).all():
        raise DimensionMismatchError("input contains NaN or Inf")
    return u


def _check_edge_input(operator, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != operator.graph.num_edges:
        raise DimensionMismatchError(
            f"expected length {operator.graph.num_edges} along axis 0, got {z.shape[0]}"
        )
    if not np.isfinite(z).all():
        raise DimensionMismatchError("input contains NaN or Inf")
    return z


def apply_gradient(operator, u):
    """Edge differences K u of a node function (vector or (n, L) matrix)."""
    return operator.matrix @ _check_node_input(operator, u)


def apply_divergence(operator, z):
    """Adjoint map K^T z of an edge function, satisfying <Ku, z> = <u, K^T z>."""
    return operator.adjoint_matrix @ _check_edge_input(operator, z)


def total_variation(operator, u):
    """sum(|K u|); zero exactly on multiples of the degree vector."""
    grad = apply_gradient(operator, u)
    return np.abs(grad).sum(axis=0)


def operator_norm(operator, iters=500, tol=1e-12, seed=0):
    """Largest singular value of K by power iteration on K^T K.

    Deterministic for a given ``seed``.  The first successful estimate is
    cached on the operator.  Raises
    :class:`~graphtv.errors.NoConvergenceError` (carrying the last estimate)
    if successive eigenvalue estimates have not settled to relative ``tol``
    within ``iters`` iterations.
    """
    if operator._norm_estimate is not None:
        return operator._norm_estimate
    fwd = operator.matrix
    adj = operator.adjoint_matrix
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(operator.graph.n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        w = adj @ (fwd @ v)
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:  # v fell exactly in the nullspace; restart
            v = rng.standard_normal(operator.graph.n)
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        new_estimate = np.sqrt(max(lam, 0.0))
        if abs(new_estimate - estimate) <= tol * max(new_estimate, 1e-30):
            operator._norm_estimate = new_estimate
            return new_estimate
        estimate = new_estimate
    raise NoConvergenceError(
        f"power iteration did not settle in {iters} iterations",
        last_estimate=estimate,
    )
