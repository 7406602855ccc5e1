"""
One-dimensional polynomial helpers shared by the temporal and spatial elements.
"""
import numpy as np


def legendre_table(n: int, x) -> np.ndarray:
    """
    Legendre polynomials P_0..P_n at the points x via the three-term recurrence.

    Returns an array of shape (len(x), n + 1).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = np.zeros((x.size, n + 1))
    P[:, 0] = 1.0
    if n >= 1:
        P[:, 1] = x
    for k in range(2, n + 1):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    return P


def barycentric_weights(nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_values(nodes, weights, t) -> np.ndarray:
    """
    All Lagrange basis polynomials through `nodes` at the points t, evaluated in
    the barycentric form. Shape (len(t), len(nodes)).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    diff = t[:, None] - np.asarray(nodes)[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = weights[None, :] / diff
        values = terms / terms.sum(axis=1, keepdims=True)
    hits = exact.any(axis=1)
    values[hits] = exact[hits].astype(float)
    return values


def lagrange_derivatives(nodes, weights, t) -> np.ndarray:
    """
    First derivatives of all Lagrange basis polynomials at the points t.

    Uses l_i'(t) = w_i * sum_{m != i} prod_{j != i, m} (t - x_j), which has no
    singularity at the nodes. Shape (len(t), len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = nodes.size
    diff = t[:, None] - nodes[None, :]
    out = np.zeros((t.size, n))
    indices = np.arange(n)
    for i in range(n):
        others = indices[indices != i]
        total = np.zeros(t.size)
        for m in others:
            keep = others[others != m]
            total += np.prod(diff[:, keep], axis=1)
        out[:, i] = weights[i] * total
    return out
