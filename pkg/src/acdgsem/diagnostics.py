"""Quadrature-based diagnostics: errors, entropy traces, balance terms.

All reductions run over fixed-order numpy sums, so traces are
bit-reproducible for a given mesh regardless of thread count.
"""

from dataclasses import dataclass

import numpy as np

from . import physics, riemann
from .mesh import BTYPE_INTERIOR, BTYPE_FREE_SLIP, BTYPE_NO_SLIP


@dataclass
class EntropyReport:
    """Total entropy and its discrete rate at one instant; the interior /
    physical boundary split is filled only when instrumentation is on."""

    t: float
    total: float
    rate: float
    ibt_e: float | None = None
    ibt_v: float | None = None
    pbt_e: float | None = None
    pbt_v: float | None = None


@dataclass
class ConvergenceRow:
    mesh_label: str
    order: int
    errors: np.ndarray
    estimated_order: np.ndarray | None = None


def quad_weights_3d(ops):
    w = ops.weights
    return w[:, None, None] * w[None, :, None] * w[None, None, :]


def volume_sum(mesh, nodal):
    """sum of w_ijk * J_ijk * nodal over the whole mesh."""
    w3 = quad_weights_3d(mesh.ops)
    return float(np.sum(w3[None] * mesh.jac * nodal))


def total_entropy(q, mesh, params):
    return volume_sum(mesh, physics.entropy(q, params))


def total_mass(q, mesh):
    return volume_sum(mesh, np.asarray(q)[..., 0])


def entropy_rate(q, dqdt, mesh, params):
    """Discrete d/dt of the total entropy: quadrature of w^T dq/dt."""
    w = physics.entropy_vars(q, params)
    return volume_sum(mesh, np.sum(w * np.asarray(dqdt), axis=-1))


def l2_error(q, exact, mesh, t):
    """Per-variable L2 errors sqrt(sum w J (q - q0)^2), q0 = exact(x, t)."""
    q0 = exact(mesh.x, t)
    w3 = quad_weights_3d(mesh.ops)
    diff2 = (np.asarray(q) - q0) ** 2
    return np.sqrt(np.einsum("ijk,eijk,eijkv->v", w3, mesh.jac, diff2))


def convergence_order(e1, e2, h1, h2):
    """log(e1/e2) / log(h1/h2); h is the reciprocal mesh count."""
    if e1 == e2:
        return 0.0
    return float(np.log(e1 / e2) / np.log(h1 / h2))


def viscous_dissipation(grad, mesh, params):
    """(2/Re) integral of S:S computed from the discrete gradients."""
    if not params.viscous:
        return 0.0
    s = physics.strain_tensor(grad)
    return (2.0 / params.re) * volume_sum(mesh, np.sum(s * s, axis=(-2, -1)))


def _face_values(arr_flat, elem, idx):
    return arr_flat[elem][idx.ravel()].reshape(idx.shape + arr_flat.shape[2:])


def face_entropy_terms(solver, q, t=0.0):
    """Interior and boundary contributions to the discrete entropy balance.

    Returns (ibt_e, ibt_v, pbt_e, pbt_v).  The semi-discrete identity
    (gravity and manufactured sources excluded) is

        dE/dt + ibt_e + ibt_v + pbt_e - pbt_v = -dissipation,

    with ibt_v = 0 for BR1 coupling and pbt_v = 0 for both wall kinds.
    Quadratic in face count and meant for verification runs, not the
    marching loop.
    """
    mesh = solver.mesh
    params = solver.params
    np1 = mesh.order + 1
    nn = np1**3
    qf = np.ascontiguousarray(q, dtype=float).reshape(mesh.ne, nn, 5)
    wq = solver.mesh.ops.weights
    w2 = wq[:, None] * wq[None, :]

    viscous = solver.viscous
    if viscous:
        from .dg_core import br1_gradients
        grad = br1_gradients(q, mesh, params, dirichlet=solver.dirichlet, t=t)
        gflat = grad.reshape(mesh.ne, nn, 3, 5)
    solver._boundary_data(t)

    ibt_e = ibt_v = pbt_e = pbt_v = 0.0
    for f in range(mesh.nf):
        el, er = int(mesh.face_elem_l[f]), int(mesh.face_elem_r[f])
        bt = int(mesh.face_btype[f])
        idx_l, idx_r = mesh.face_idx_l[f], mesh.face_idx_r[f]
        n = mesh.face_normal[f]
        t1, t2 = mesh.face_t1[f], mesh.face_t2[f]
        ds = w2 * mesh.face_jac[f]

        ql = _face_values(qf, el, idx_l)
        wl = physics.entropy_vars(ql, params)
        fl = _one_sided_flux(ql, n, params, solver.config)
        fel = np.sum(physics.entropy_flux(ql, params) * n, axis=-1)

        if bt == BTYPE_INTERIOR:
            qr = _face_values(qf, er, idx_r)
            wr = physics.entropy_vars(qr, params)
            fr = _one_sided_flux(qr, n, params, solver.config)
            fer = np.sum(physics.entropy_flux(qr, params) * n, axis=-1)
            if solver.config.interface == "central":
                fstar = riemann.central_ec_interface(ql, qr, n, params)
            else:
                fstar = riemann.exact_riemann(ql, qr, n, t1, t2, params)
            ibt_e -= np.sum(ds * (np.sum((wr - wl) * fstar, axis=-1)
                                  + (fer - fel)
                                  - (np.sum(wr * fr, axis=-1)
                                     - np.sum(wl * fl, axis=-1))))
            if viscous:
                fvl = _viscous_normal_flux(gflat, el, idx_l, n, params)
                fvr = _viscous_normal_flux(gflat, er, idx_r, n, params)
                wstar, fvstar = riemann.br1_interface(wl, wr, fvl, fvr)
                ibt_v += np.sum(ds * (np.sum((wr - wl) * fvstar, axis=-1)
                                      + np.sum(wstar * (fvr - fvl), axis=-1)
                                      - (np.sum(wr * fvr, axis=-1)
                                         - np.sum(wl * fvl, axis=-1))))
            continue

        # physical boundary
        if bt in (BTYPE_FREE_SLIP, BTYPE_NO_SLIP):
            fstar = riemann.wall_inviscid_flux(
                ql, n, t1, t2, params, mode=solver.config.wall_inviscid)
        else:
            qext = solver._q_ext[solver._dir_slot[f]]
            fstar = riemann.exact_riemann(ql, qext, n, t1, t2, params)
        pbt_e += np.sum(ds * (np.sum(wl * (fstar - fl), axis=-1) + fel))
        if viscous:
            fvl = _viscous_normal_flux(gflat, el, idx_l, n, params)
            if bt == BTYPE_FREE_SLIP:
                wstar, fvstar = riemann.wall_viscous_bc(
                    wl, fvl, ql[..., 4], params, "free-slip")
            elif bt == BTYPE_NO_SLIP:
                wstar, fvstar = riemann.wall_viscous_bc(
                    wl, fvl, ql[..., 4], params, "no-slip")
            else:
                wstar = solver._w_ext[solver._dir_slot[f]]
                fvstar = fvl
            pbt_v += np.sum(ds * (np.sum(wl * fvstar, axis=-1)
                                  + np.sum(wstar * fvl, axis=-1)
                                  - np.sum(wl * fvl, axis=-1)))
    return ibt_e, ibt_v, pbt_e, pbt_v


def _one_sided_flux(q, n, params, config):
    """Flux consistent with the volume operator, dotted with n."""
    if config.volume == "split":
        f = physics.two_point_flux(q, q, params)
    else:
        f = physics.inviscid_flux(q, params)
    return np.einsum("...dv,...d->...v", f, n)


def _viscous_normal_flux(gflat, elem, idx, n, params):
    g = _face_values(gflat, elem, idx)
    fv = physics.viscous_flux(g, params)
    return np.einsum("...dv,...d->...v", fv, n)
