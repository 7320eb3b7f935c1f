"""Randomized, seed-controlled property checks of the discrete operators.

Each check draws its own cases from the supplied generator, evaluates the
algebraic identity it guards, and returns (worst residual, tolerance).
The pytest suite and the `acdgsem verify` command both drive this module,
so a field failure can be reproduced with the recorded seed.
"""

import numpy as np

from . import physics, riemann
from .basis import build_ops
from .mesh import apply_deriv, compute_metrics_curl_form


def random_states(rng, n, rho_range=(0.2, 3.0), vel_scale=2.0, p_scale=2.0):
    q = np.empty((n, 5))
    q[:, 0] = rng.uniform(*rho_range, n)
    q[:, 1:4] = q[:, 0:1] * rng.uniform(-vel_scale, vel_scale, (n, 3))
    q[:, 4] = rng.uniform(-p_scale, p_scale, n)
    return q


def random_normals(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def _params(m0sq=1.0, re=np.inf, opt=1):
    return physics.PhysParams(re=re, m0sq=m0sq, momentum_average=opt)


# -- basis -------------------------------------------------------------------

def check_sbp_identity(rng=None, n=10000):
    """M D + (M D)^T equals the boundary matrix for orders 1..12."""
    worst = 0.0
    for order in range(1, 13):
        ops = build_ops(order)
        m = np.diag(ops.weights)
        b = np.zeros((order + 1, order + 1))
        b[0, 0], b[-1, -1] = -1.0, 1.0
        worst = max(worst, np.max(np.abs(m @ ops.deriv + ops.deriv.T @ m - b)))
    return worst, 1e-13


# -- metric terms ------------------------------------------------------------

def random_curved_elements(rng, n, order):
    """Batch of perturbed unit-cube elements with positive Jacobians."""
    ops = build_ops(order)
    g = ops.nodes
    base = np.empty((n, order + 1, order + 1, order + 1, 3))
    base[..., 0] = g[None, :, None, None]
    base[..., 1] = g[None, None, :, None]
    base[..., 2] = g[None, None, None, :]
    amp = 0.04
    ph = rng.uniform(0, 2 * np.pi, (n, 3, 3))
    freq = rng.integers(1, 3, (n, 3, 3))
    x = base.copy()
    for comp in range(3):
        bump = np.ones(base.shape[:-1])
        for ax in range(3):
            bump = bump * np.sin(
                0.5 * np.pi * freq[:, comp, ax, None, None, None]
                * (base[..., ax] + 1.0) + ph[:, comp, ax, None, None, None])
        x[..., comp] += amp * bump
    return ops, x


def check_metric_identities(rng, n=10000):
    """Discrete divergence of the curl-form metric vectors vanishes."""
    worst = 0.0
    cases_per_order = max(1, n // 4)
    for order in (2, 3, 4, 5):
        ops, x = random_curved_elements(rng, cases_per_order, order)
        ja, _ = compute_metrics_curl_form(x, ops)
        resid = sum(apply_deriv(ja[..., ax, :], ops.deriv, ax + 1)
                    for ax in range(3))
        worst = max(worst, np.max(np.abs(resid)) / max(1.0, np.max(np.abs(ja))))
    return worst, 1e-12


# -- two-point flux ----------------------------------------------------------

def check_two_point_jump_condition(rng, n=10000):
    """jump(w)^T F# - jump(w^T F) + jump(F^E) = 0, both momentum options,
    per Cartesian direction."""
    ql, qr = random_states(rng, n), random_states(rng, n)
    worst = 0.0
    for m0sq in (1.0, 1e-3):
        for opt in (1, 2):
            par = _params(m0sq=m0sq, opt=opt)
            wl = physics.entropy_vars(ql, par)
            wr = physics.entropy_vars(qr, par)
            fsharp = physics.two_point_flux(ql, qr, par)
            fl = physics.inviscid_flux(ql, par)
            fr = physics.inviscid_flux(qr, par)
            fel = physics.entropy_flux(ql, par)
            fer = physics.entropy_flux(qr, par)
            lhs = (np.einsum("nv,ndv->nd", wr - wl, fsharp)
                   - (np.einsum("nv,ndv->nd", wr, fr)
                      - np.einsum("nv,ndv->nd", wl, fl))
                   + (fer - fel))
            scale = np.maximum(1.0, np.abs(np.einsum("nv,ndv->nd", wr, fr))
                               + np.abs(fer))
            worst = max(worst, np.max(np.abs(lhs) / scale))
    return worst, 1e-12


def check_two_point_symmetry_consistency(rng, n=10000):
    ql, qr = random_states(rng, n), random_states(rng, n)
    worst = 0.0
    for opt in (1, 2):
        par = _params(m0sq=0.5, opt=opt)
        f1 = physics.two_point_flux(ql, qr, par)
        f2 = physics.two_point_flux(qr, ql, par)
        fc = physics.two_point_flux(ql, ql, par)
        fe = physics.inviscid_flux(ql, par)
        scale = np.maximum(1.0, np.max(np.abs(f1)))
        worst = max(worst, np.max(np.abs(f1 - f2)) / scale,
                    np.max(np.abs(fc - fe)) / scale)
    return worst, 1e-13


# -- entropy pieces ----------------------------------------------------------

def check_entropy_variable_gradient(rng, n=10000):
    """Central finite differences of E reproduce w."""
    q = random_states(rng, max(100, n // 100))
    par = _params(m0sq=0.7)
    w = physics.entropy_vars(q, par)
    eps = 1e-6
    worst = 0.0
    for comp in range(5):
        dq = np.zeros_like(q)
        dq[:, comp] = eps
        fd = (physics.entropy(q + dq, par) - physics.entropy(q - dq, par)) / (2 * eps)
        rel = np.abs(fd - w[:, comp]) / np.maximum(1.0, np.abs(w[:, comp]))
        worst = max(worst, rel.max())
    return worst, 1e-6


def check_hessian_eigenvalues(rng, n=10000):
    q = random_states(rng, n)
    par = _params(m0sq=0.3)
    h = physics.entropy_hessian(q, par)
    ev = np.linalg.eigvalsh(h)
    rho = q[:, 0]
    v2 = np.sum((q[:, 1:4] / rho[:, None]) ** 2, axis=1)
    expect = np.sort(np.stack([
        1.0 / rho, 1.0 / rho, (1.0 + v2) / rho,
        np.full_like(rho, par.m0sq), np.zeros_like(rho)], axis=1), axis=1)
    return np.max(np.abs(np.sort(ev, axis=1) - expect)), 1e-10


def check_viscous_matrices(rng, n=10000):
    """Block symmetry, the S:S quadratic-form identity, nonnegativity."""
    par = _params(re=3.0)
    b = physics.viscous_matrices(par)
    worst = 0.0
    for i in range(3):
        for j in range(3):
            worst = max(worst, np.max(np.abs(b[i, j] - b[j, i].T)))
    g = rng.standard_normal((n, 3, 5))
    quad = physics.viscous_quadratic_form(g, par)
    s = physics.strain_tensor(g)
    ss = (2.0 / par.re) * np.sum(s * s, axis=(-2, -1))
    worst = max(worst, np.max(np.abs(quad - ss) / np.maximum(1.0, ss)))
    worst = max(worst, max(0.0, -quad.min()))
    fv = physics.viscous_flux(g, par)
    fv_b = np.einsum("ijvw,njw->niv", b, g)
    worst = max(worst, np.max(np.abs(fv - fv_b)))
    return worst, 1e-13


# -- Riemann solver ----------------------------------------------------------

def check_riemann_consistency(rng, n=10000):
    q = random_states(rng, n)
    nv = random_normals(rng, n)
    t1, t2 = riemann.face_frame(nv)
    worst = 0.0
    for m0sq in (1.0, 1e-3):
        par = _params(m0sq=m0sq)
        f = riemann.exact_riemann(q, q, nv, t1, t2, par)
        fe = np.einsum("ndv,nd->nv", physics.inviscid_flux(q, par), nv)
        worst = max(worst, np.max(np.abs(f - fe) / np.maximum(1.0, np.abs(fe))))
    return worst, 1e-12


def check_rotational_invariance(rng, n=10000):
    q = random_states(rng, n)
    nv = random_normals(rng, n)
    t1, t2 = riemann.face_frame(nv)
    par = _params(m0sq=0.8)
    qn = riemann.rotate_state(q, nv, t1, t2)
    fn = physics.inviscid_flux(qn, par)[:, 0, :]
    lhs = riemann.rotate_back_flux(fn, nv, t1, t2)
    rhs = np.einsum("ndv,nd->nv", physics.inviscid_flux(q, par), nv)
    worst = np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))
    frame = np.stack([nv, t1, t2], axis=-2)
    ortho = np.einsum("nab,ncb->nac", frame, frame) - np.eye(3)
    return max(worst, np.max(np.abs(ortho))), 1e-13


def check_riemann_dissipation(rng, n=100000):
    """Delta_e >= 0 from the definition, and agreement with the
    closed-form expression on both upwind branches."""
    ql, qr = random_states(rng, n), random_states(rng, n)
    nv = random_normals(rng, n)
    t1, t2 = riemann.face_frame(nv)
    worst_def = 0.0
    worst_match = 0.0
    branches = set()
    for m0sq in (1.0, 1e-2):
        par = _params(m0sq=m0sq)
        de = riemann.interface_dissipation(ql, qr, nv, t1, t2, par)
        dc = riemann.riemann_dissipation_closed_form(ql, qr, nv, t1, t2, par)
        uns = riemann.star_state(ql, qr, nv, t1, t2, par)[0]
        branches |= {"left"} if np.any(uns >= 0) else set()
        branches |= {"right"} if np.any(uns < 0) else set()
        worst_def = max(worst_def, -de.min())
        worst_match = max(worst_match,
                          np.max(np.abs(de - dc) / np.maximum(1.0, np.abs(dc))))
    assert branches == {"left", "right"}, "both upwind branches must occur"
    return max(worst_def - 1e-12, worst_match), 1e-10


def check_central_dissipation(rng, n=10000):
    ql, qr = random_states(rng, n), random_states(rng, n)
    nv = random_normals(rng, n)
    t1, t2 = riemann.face_frame(nv)
    worst = 0.0
    for opt in (1, 2):
        par = _params(m0sq=0.5, opt=opt)
        flux = riemann.central_ec_interface(ql, qr, nv, par)
        de = riemann.interface_dissipation(ql, qr, nv, t1, t2, par, flux=flux)
        wl = physics.entropy_vars(ql, par)
        wr = physics.entropy_vars(qr, par)
        scale = np.maximum(1.0, np.sum(np.abs(wr - wl) * np.abs(flux), axis=-1))
        worst = max(worst, np.max(np.abs(de) / scale))
    return worst, 1e-12


def check_br1_identity(rng, n=10000):
    """Interior viscous boundary-term integrand vanishes for averages."""
    par = _params(re=2.0)
    wl = rng.standard_normal((n, 5))
    wr = rng.standard_normal((n, 5))
    gl = rng.standard_normal((n, 3, 5))
    gr = rng.standard_normal((n, 3, 5))
    nv = random_normals(rng, n)
    fvl = np.einsum("ndv,nd->nv", physics.viscous_flux(gl, par), nv)
    fvr = np.einsum("ndv,nd->nv", physics.viscous_flux(gr, par), nv)
    ws, fvs = riemann.br1_interface(wl, wr, fvl, fvr)
    lhs = (np.sum((wr - wl) * fvs, axis=-1)
           + np.sum(ws * (fvr - fvl), axis=-1)
           - (np.sum(wr * fvr, axis=-1) - np.sum(wl * fvl, axis=-1)))
    scale = np.maximum(1.0, np.abs(np.sum(wr * fvr, axis=-1)))
    return np.max(np.abs(lhs) / scale), 1e-13


def check_wall_dissipation(rng, n=10000):
    """Direct wall flux is neutral; reflected wall flux dissipates
    rho lambda^+ U_n^2."""
    q = random_states(rng, n)
    nv = random_normals(rng, n)
    t1, t2 = riemann.face_frame(nv)
    par = _params(m0sq=0.4)
    w = physics.entropy_vars(q, par)
    fe_n = np.einsum("ndv,nd->nv", physics.inviscid_flux(q, par), nv)
    fee = np.sum(physics.entropy_flux(q, par) * nv, axis=-1)

    def delta(flux):
        return np.sum(w * (flux - fe_n), axis=-1) + fee

    d_direct = delta(riemann.wall_inviscid_flux(q, nv, t1, t2, par, "direct"))
    worst = np.max(np.abs(d_direct) / np.maximum(1.0, np.abs(fee)))

    d_refl = delta(riemann.wall_inviscid_flux(q, nv, t1, t2, par, "reflected"))
    u = physics.velocity(q, par)
    un = np.sum(u * nv, axis=-1)
    lam_p, _ = riemann.wave_speeds(un, q[:, 0], par)
    expect = q[:, 0] * lam_p * un**2
    worst = max(worst, np.max(np.abs(d_refl - expect) / np.maximum(1.0, expect)))
    return worst, 1e-10


# -- split-form operator equivalences ----------------------------------------

def two_point_divergence_generic(fields, deriv, flux_of_averages):
    """Reference evaluation of 2 sum_m D_im flux(avg(fields)_im) along all
    three axes; fields is a dict of (ne, Np, Np, Np) nodal arrays and
    flux_of_averages maps averaged fields to the three flux components."""
    np1 = deriv.shape[0]
    out = 0.0
    for ax in range(3):
        sh_i = [1, 1, 1]
        sh_m = [1, 1, 1]
        avg = {}
        for name, arr in fields.items():
            a_i = np.expand_dims(arr, axis=2 + ax)  # (ne, .., i, m at ax)
            a_m = np.expand_dims(arr, axis=1 + ax)
            avg[name] = 0.5 * (a_i + a_m)
        comp = flux_of_averages(avg)[ax]
        # contract D over the m-axis (located right after the i-axis)
        out = out + 2.0 * np.einsum(
            deriv, [10, 11],
            np.moveaxis(comp, [1 + ax, 2 + ax], [1, 2]),
            [0, 10, 11, 2, 3], [0, 10, 2, 3]).transpose(
                _restore_axes(ax))
    return out


def _restore_axes(ax):
    order = [0, 1, 2, 3]
    pos = order.pop(1)
    order.insert(1 + ax, pos)
    return order


def check_split_form_operator_equivalences(rng, n=10000):
    """The two-point volume operator equals the average-of-forms split
    operator: single averages differentiate exactly, double averages give
    the mean of conservative and product-rule forms, triple averages give
    the quarter-weighted product rule of three factors."""
    order = 3
    ops = build_ops(order)
    d = ops.deriv
    ne = max(16, n // 64)
    np1 = order + 1
    a1, a2, a3, b, c = (rng.standard_normal((ne, np1, np1, np1))
                        for _ in range(5))

    def div(vec):
        return sum(apply_deriv(vec[ax], d, 1 + ax) for ax in range(3))

    def grad_dot(vec, scal):
        return sum(vec[ax] * apply_deriv(scal, d, 1 + ax) for ax in range(3))

    worst = 0.0
    # single average: recovers the plain divergence
    lhs = two_point_divergence_generic(
        {"a1": a1, "a2": a2, "a3": a3}, d,
        lambda f: (f["a1"], f["a2"], f["a3"]))
    rhs = div((a1, a2, a3))
    scale = max(1.0, np.max(np.abs(rhs)))
    worst = max(worst, np.max(np.abs(lhs - rhs)) / scale)

    # double average: mean of conservative and advective forms
    lhs = two_point_divergence_generic(
        {"a1": a1, "a2": a2, "a3": a3, "b": b}, d,
        lambda f: (f["a1"] * f["b"], f["a2"] * f["b"], f["a3"] * f["b"]))
    rhs = 0.5 * (div((a1 * b, a2 * b, a3 * b))
                 + grad_dot((a1, a2, a3), b) + b * div((a1, a2, a3)))
    scale = max(1.0, np.max(np.abs(rhs)))
    worst = max(worst, np.max(np.abs(lhs - rhs)) / scale)

    # triple average: quarter-weighted three-factor product rule
    lhs = two_point_divergence_generic(
        {"a1": a1, "a2": a2, "a3": a3, "b": b, "c": c}, d,
        lambda f: (f["c"] * f["a1"] * f["b"], f["c"] * f["a2"] * f["b"],
                   f["c"] * f["a3"] * f["b"]))
    rhs = 0.25 * (div((c * a1 * b, c * a2 * b, c * a3 * b))
                  + grad_dot((c * a1, c * a2, c * a3), b)
                  + c * b * div((a1, a2, a3))
                  + c * div((a1 * b, a2 * b, a3 * b))
                  + grad_dot((b * a1, b * a2, b * a3), c)
                  + grad_dot((a1, a2, a3), c * b)
                  + b * div((c * a1, c * a2, c * a3)))
    scale = max(1.0, np.max(np.abs(rhs)))
    worst = max(worst, np.max(np.abs(lhs - rhs)) / scale)
    return worst, 1e-12


def check_gauss_law(rng, n=10000):
    """Discrete integration by parts: <div F, V> = surface - <F, grad V>."""
    worst = 0.0
    reps = max(8, n // 1024)
    for order in (2, 3, 4):
        ops = build_ops(order)
        d, w = ops.deriv, ops.weights
        np1 = order + 1
        w3 = w[:, None, None] * w[None, :, None] * w[None, None, :]
        w2 = w[:, None] * w[None, :]
        f = rng.standard_normal((reps, 3, np1, np1, np1))
        v = rng.standard_normal((reps, np1, np1, np1))
        divf = sum(apply_deriv(f[:, ax], d, 1 + ax) for ax in range(3))
        lhs = np.einsum("ijk,rijk,rijk->r", w3, divf, v)
        gradv = [apply_deriv(v, d, 1 + ax) for ax in range(3)]
        vol = sum(np.einsum("ijk,rijk,rijk->r", w3, f[:, ax], gradv[ax])
                  for ax in range(3))
        surf = (np.einsum("jk,rjk,rjk->r", w2, f[:, 0, -1], v[:, -1])
                - np.einsum("jk,rjk,rjk->r", w2, f[:, 0, 0], v[:, 0])
                + np.einsum("ik,rik,rik->r", w2, f[:, 1, :, -1], v[:, :, -1])
                - np.einsum("ik,rik,rik->r", w2, f[:, 1, :, 0], v[:, :, 0])
                + np.einsum("ij,rij,rij->r", w2, f[:, 2, :, :, -1], v[:, :, :, -1])
                - np.einsum("ij,rij,rij->r", w2, f[:, 2, :, :, 0], v[:, :, :, 0]))
        resid = np.abs(lhs - (surf - vol)) / np.maximum(1.0, np.abs(surf) + np.abs(vol))
        worst = max(worst, resid.max())
    return worst, 1e-12


ALL_CHECKS = [
    ("sbp_identity", check_sbp_identity),
    ("metric_identities", check_metric_identities),
    ("two_point_jump_condition", check_two_point_jump_condition),
    ("two_point_symmetry_consistency", check_two_point_symmetry_consistency),
    ("entropy_variable_gradient", check_entropy_variable_gradient),
    ("hessian_eigenvalues", check_hessian_eigenvalues),
    ("viscous_matrices", check_viscous_matrices),
    ("riemann_consistency", check_riemann_consistency),
    ("rotational_invariance", check_rotational_invariance),
    ("riemann_dissipation", check_riemann_dissipation),
    ("central_dissipation", check_central_dissipation),
    ("br1_identity", check_br1_identity),
    ("wall_dissipation", check_wall_dissipation),
    ("split_form_operator_equivalences", check_split_form_operator_equivalences),
    ("gauss_law", check_gauss_law),
]


def run_all(seed=2024, n=10000, report=print):
    """Run every check; returns True when all pass."""
    ok = True
    for name, fn in ALL_CHECKS:
        rng = np.random.default_rng(seed)
        worst, tol = fn(rng, n=n)
        passed = worst <= tol
        ok &= passed
        report(f"{'PASS' if passed else 'FAIL'}  {name:34s} "
               f"worst={worst:.3e}  tol={tol:.0e}")
    return ok
