"""One-dimensional Legendre-Gauss-Lobatto operators.

Everything the tensor-product spectral element discretization needs in 1D:
the Lobatto nodes, quadrature weights and the Lagrange derivative matrix.
With M = diag(weights) the pair (M, deriv) satisfies the summation-by-parts
relation M @ deriv + (M @ deriv).T = diag(-1, 0, ..., 0, +1), which is what
the energy estimates of the solver rest on.
"""

import numpy as np

MAX_ORDER = 12


class ElementOps:
    """Nodal operators for one polynomial order.

    Attributes
    ----------
    order : int
        Polynomial order N (>= 1).
    nodes : (N+1,) ndarray
        Lobatto nodes in [-1, 1], strictly increasing, endpoints included.
    weights : (N+1,) ndarray
        Quadrature weights, sum equals 2.
    deriv : (N+1, N+1) ndarray
        deriv[i, m] = l_m'(nodes[i]) for the Lagrange basis {l_m}.

    Instances are immutable after construction (arrays are write-locked),
    so they can be shared freely across threads.
    """

    def __init__(self, order, nodes, weights, deriv):
        self.order = order
        self.nodes = nodes
        self.weights = weights
        self.deriv = deriv
        for a in (nodes, weights, deriv):
            a.setflags(write=False)

    def __repr__(self):
        return f"ElementOps(order={self.order})"


def _legendre_pair(n, x):
    """Evaluate (P_n, P_{n-1}) at x via the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = np.asarray(x, dtype=float).copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def lobatto_nodes_weights(n):
    """Nodes and weights of the (n+1)-point Legendre-Gauss-Lobatto rule.

    Interior nodes are the roots of P_n', found by Newton iteration from
    Chebyshev-Lobatto initial guesses.  Using the Legendre ODE the Newton
    update for q(x) = (1-x^2) P_n'(x) collapses to
    x <- x + (1-x^2) P_n'(x) / (n (n+1) P_n(x)).
    The node set is symmetrized about 0 to remove asymmetric round-off.
    """
    if n < 1:
        raise ValueError("Lobatto rule needs order n >= 1")
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    if n > 1:
        xi = x[1:-1].copy()
        for _ in range(100):
            p, p_prev = _legendre_pair(n, xi)
            # Legendre ODE: (1-x^2) P_n'(x) = n (P_{n-1} - x P_n)
            dx = (p_prev - xi * p) / ((n + 1) * p)
            xi += dx
            if np.max(np.abs(dx)) < 1e-15:
                break
        x[1:-1] = xi
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    p, _ = _legendre_pair(n, x)
    w = 2.0 / (n * (n + 1) * p * p)
    return x, w


def lagrange_derivative_matrix(nodes):
    """D[i, m] = l_m'(nodes[i]), built from barycentric weights.

    Diagonal entries are set to the negative row sum so every row sums to
    zero exactly (constants differentiate to zero by construction).
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    d = np.zeros((n, n))
    for i in range(n):
        for m in range(n):
            if i != m:
                d[i, m] = (bary[m] / bary[i]) / (x[i] - x[m])
        d[i, i] = -np.sum(d[i, :])
    return d


def build_ops(order):
    """Construct the ElementOps for a given polynomial order.

    Raises ValueError for order < 1 (the surface coupling needs at least
    linear elements) and for order > MAX_ORDER.
    """
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"polynomial order must be an integer >= 1, got {order!r}")
    if order > MAX_ORDER:
        raise ValueError(f"polynomial order capped at {MAX_ORDER}, got {order}")
    nodes, weights = lobatto_nodes_weights(order)
    deriv = lagrange_derivative_matrix(nodes)
    return ElementOps(order, nodes, weights, deriv)


def quadrature_1d(ops, samples):
    """Quadrature of nodal samples: sum_m weights[m] * samples[m]."""
    return float(np.dot(ops.weights, samples))


def lagrange_basis_at(nodes, x):
    """Values of all Lagrange basis polynomials at points x.

    Returns an array of shape (len(x), len(nodes)); row p holds l_m(x[p]).
    Used for interpolating nodal data to off-node points (refined
    quadrature cross-checks, snapshot sampling).
    """
    xn = np.asarray(nodes, dtype=float)
    xp = np.atleast_1d(np.asarray(x, dtype=float))
    diff = xn[:, None] - xn[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    out = np.empty((xp.size, xn.size))
    for p, xv in enumerate(xp):
        d = xv - xn
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            row = np.zeros(xn.size)
            row[hit[0]] = 1.0
        else:
            row = bary / d
            row /= row.sum()
        out[p] = row
    return out
