"""State algebra for the variable-density artificial-compressibility system.

The conserved vector is q = (rho, rho*u, rho*v, rho*w, p).  A pressure
evolution equation p_t + (1/M0^2) div(u) = 0 replaces the divergence-free
constraint, which makes the system hyperbolic; density is transported.

The mathematical entropy is E = 1/2 rho |u|^2 + 1/2 M0^2 p^2 with entropy
variables w = dE/dq = (-1/2 |u|^2, u, v, w, M0^2 p) and entropy flux
(1/2 rho |u|^2 + p) u.  All functions here are pure and operate on arrays
with a trailing state axis of length 5 (fluxes get a direction axis of
length 3 in front of it).
"""

from dataclasses import dataclass, field

import numpy as np

NVAR = 5


@dataclass(frozen=True)
class PhysParams:
    """Physical and model parameters.

    re : Reynolds number; math.inf selects the purely inviscid path.
    fr : Froude number; math.inf disables the gravity source.
    m0sq : artificial compressibility Mach number squared (> 0).
    gravity_dir : unit vector of the gravity direction.
    rho_floor : density floor used in velocity recovery when the limiter
        is enabled.  Stored states are never modified.
    limiter : enables the floor; off by default (only the density-jump
        case needs it).
    momentum_average : 1 or 2; selects how the momentum entry of the
        two-point flux is averaged (average of the product vs product of
        the averages).
    """

    re: float = np.inf
    fr: float = np.inf
    m0sq: float = 1.0e-3
    gravity_dir: tuple = (0.0, -1.0, 0.0)
    rho_floor: float = 0.9
    limiter: bool = False
    momentum_average: int = 1

    def __post_init__(self):
        if not self.m0sq > 0.0:
            raise ValueError("m0sq must be positive")
        if not (self.re > 0.0):
            raise ValueError("re must be positive (or inf for inviscid)")
        if self.momentum_average not in (1, 2):
            raise ValueError("momentum_average must be 1 or 2")
        g = np.asarray(self.gravity_dir, dtype=float)
        if np.isfinite(self.fr) and abs(np.linalg.norm(g) - 1.0) > 1e-12:
            raise ValueError("gravity_dir must be a unit vector")

    @property
    def viscous(self):
        return np.isfinite(self.re)


def limited_density(rho, params):
    """Density used in velocity recovery: max(rho, rho_floor) if enabled.

    Only flux evaluations divide by this; the stored state keeps the raw
    density so mass and momentum are untouched.
    """
    if not params.limiter:
        return rho
    return np.maximum(rho, params.rho_floor)


def velocity(q, params):
    """Velocity vector recovered from momentum, with the limited density."""
    q = np.asarray(q, dtype=float)
    rho = limited_density(q[..., 0], params)
    return q[..., 1:4] / rho[..., None]


def inviscid_flux(q, params):
    """Advective flux block, shape (..., 3, 5).

    Column d holds (rho u_d, rho u u_d + p delta_1d, rho v u_d + p delta_2d,
    rho w u_d + p delta_3d, u_d / M0^2).  Momentum products are formed as
    (conserved momentum) * (recovered velocity) so the limited-density
    variant stays mass and momentum conserving.
    """
    q = np.asarray(q, dtype=float)
    u = velocity(q, params)
    p = q[..., 4]
    f = np.empty(q.shape[:-1] + (3, NVAR))
    for d in range(3):
        f[..., d, 0] = q[..., 1 + d]
        for comp in range(3):
            f[..., d, 1 + comp] = q[..., 1 + comp] * u[..., d]
        f[..., d, 1 + d] += p
        f[..., d, 4] = u[..., d] / params.m0sq
    return f


def viscous_flux(g, params):
    """Viscous flux block from the entropy-variable gradient g.

    g has shape (..., 3, 5) with g[..., d, v] = dw_v/dx_d; the velocity
    block g[..., :, 1:4] is the velocity gradient.  Rows 1 and 5 vanish,
    the middle rows carry tau_ij = (2/Re) S_ij with S the symmetric part
    of the velocity gradient.
    """
    g = np.asarray(g, dtype=float)
    if not params.viscous:
        return np.zeros(g.shape[:-2] + (3, NVAR))
    gradu = np.swapaxes(g[..., :, 1:4], -1, -2)  # gradu[..., i, d] = du_i/dx_d
    tau = (gradu + np.swapaxes(gradu, -1, -2)) / params.re
    f = np.zeros(g.shape[:-2] + (3, NVAR))
    for d in range(3):
        for i in range(3):
            f[..., d, 1 + i] = tau[..., i, d]
    return f


def strain_tensor(g):
    """Symmetric strain tensor S_ij from the entropy-variable gradient."""
    g = np.asarray(g, dtype=float)
    gradu = np.swapaxes(g[..., :, 1:4], -1, -2)
    return 0.5 * (gradu + np.swapaxes(gradu, -1, -2))


def entropy(q, params):
    """Mathematical entropy 1/2 rho |u|^2 + 1/2 M0^2 p^2 per node."""
    q = np.asarray(q, dtype=float)
    u = velocity(q, params)
    return 0.5 * q[..., 0] * np.sum(u * u, axis=-1) + 0.5 * params.m0sq * q[..., 4] ** 2


def entropy_vars(q, params):
    """Entropy variables w = (-1/2 |u|^2, u, v, w, M0^2 p)."""
    q = np.asarray(q, dtype=float)
    u = velocity(q, params)
    w = np.empty_like(q)
    w[..., 0] = -0.5 * np.sum(u * u, axis=-1)
    w[..., 1:4] = u
    w[..., 4] = params.m0sq * q[..., 4]
    return w


def recover_state(w, rho, params):
    """Invert entropy variables given the density (w alone does not fix rho)."""
    w = np.asarray(w, dtype=float)
    rho = np.asarray(rho, dtype=float)
    q = np.empty(w.shape)
    q[..., 0] = rho
    q[..., 1:4] = rho[..., None] * w[..., 1:4]
    q[..., 4] = w[..., 4] / params.m0sq
    return q


def entropy_flux(q, params):
    """Entropy flux (1/2 rho |u|^2 + p) u, shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    u = velocity(q, params)
    scale = 0.5 * q[..., 0] * np.sum(u * u, axis=-1) + q[..., 4]
    return scale[..., None] * u


def entropy_hessian(q, params):
    """Symmetric Hessian d2E/dq2 = dw/dq, shape (..., 5, 5).

    Its eigenvalues are {1/rho, 1/rho, (1 + |u|^2)/rho, M0^2, 0}, so the
    entropy is convex while the density stays positive.
    """
    q = np.asarray(q, dtype=float)
    rho = limited_density(q[..., 0], params)
    u = q[..., 1:4] / rho[..., None]
    h = np.zeros(q.shape[:-1] + (NVAR, NVAR))
    h[..., 0, 0] = np.sum(u * u, axis=-1) / rho
    for i in range(3):
        h[..., 0, 1 + i] = -u[..., i] / rho
        h[..., 1 + i, 0] = -u[..., i] / rho
        h[..., 1 + i, 1 + i] = 1.0 / rho
    h[..., 4, 4] = params.m0sq
    return h


def two_point_flux(q_left, q_right, params):
    """Entropy-conserving two-point flux block, shape (..., 3, 5).

    Symmetric and consistent: equal arguments reproduce inviscid_flux.
    The momentum entry is avg(rho u_i) for momentum_average=1 and
    avg(rho) avg(u_i) for momentum_average=2; all velocities are averages
    of the (limited-density) recovered velocities.
    """
    ql = np.asarray(q_left, dtype=float)
    qr = np.asarray(q_right, dtype=float)
    ul = velocity(ql, params)
    ur = velocity(qr, params)
    ubar = 0.5 * (ul + ur)
    pbar = 0.5 * (ql[..., 4] + qr[..., 4])
    if params.momentum_average == 1:
        mt = 0.5 * (ql[..., 1:4] + qr[..., 1:4])
    else:
        rbar = 0.5 * (ql[..., 0] + qr[..., 0])
        mt = rbar[..., None] * ubar
    f = np.empty(np.broadcast(ql, qr).shape[:-1] + (3, NVAR))
    for d in range(3):
        f[..., d, 0] = mt[..., d]
        for comp in range(3):
            f[..., d, 1 + comp] = mt[..., d] * ubar[..., comp]
        f[..., d, 1 + d] += pbar
        f[..., d, 4] = ubar[..., d] / params.m0sq
    return f


def source_term(q, params, x=None, t=0.0, manufactured=None):
    """Gravity source plus an optional manufactured source.

    The gravity contribution is (0, rho e_g / Fr^2, 0); the manufactured
    source, when given, is a callable s(x, t) -> (..., 5) evaluated at the
    physical coordinates x.
    """
    q = np.asarray(q, dtype=float)
    s = np.zeros_like(q)
    if np.isfinite(params.fr):
        g = np.asarray(params.gravity_dir, dtype=float)
        coef = q[..., 0] / params.fr**2
        s[..., 1:4] = coef[..., None] * g
    if manufactured is not None:
        s = s + manufactured(x, t)
    return s


def viscous_matrices(params):
    """The nine constant 5x5 blocks B[i][j] with f_v^i = sum_j B_ij dw/dx_j.

    Symmetric in the sense B_ij = B_ji^T, and the associated quadratic
    form equals (2/Re) S:S >= 0.
    """
    b = np.zeros((3, 3, NVAR, NVAR))
    for i in range(3):
        for j in range(3):
            if i == j:
                for k in range(3):
                    b[i, j, 1 + k, 1 + k] = 1.0
                b[i, j, 1 + i, 1 + i] = 2.0
            else:
                b[i, j, 1 + j, 1 + i] = 1.0
    if params.viscous:
        b /= params.re
    else:
        b[:] = 0.0
    return b


def viscous_quadratic_form(g, params):
    """sum_ij (dw/dx_i)^T B_ij (dw/dx_j), pointwise; equals (2/Re) S:S."""
    g = np.asarray(g, dtype=float)
    b = viscous_matrices(params)
    return np.einsum("...iv,ijvw,...jw->...", g, b, g)
