"""Interface fluxes: exact Riemann solver, central coupling, BR1, walls.

The advective interface flux rotates both states into an orthonormal face
frame (normal + two tangents), solves the one-dimensional Riemann problem
of the artificial-compressibility system exactly, and rotates the flux of
the star state back.  The system is always subsonic: the acoustic speed
a = sqrt(U_n^2 + 4/(M0^2 rho)) exceeds |U_n|, so the two wave speeds
lambda^+ = (U_n + a)/2 and lambda^- = (U_n - a)/2 never change sign.

Everything here is vectorized over leading axes; states are (..., 5),
directions (..., 3).
"""

import numpy as np

from . import physics


def face_frame(normal):
    """Deterministic orthonormal tangents (t1, t2) for unit normals.

    t1 is the Gram-Schmidt projection of the coordinate axis with the
    smallest |normal| component (first axis on ties), t2 = n x t1, so the
    frame {n, t1, t2} is right-handed and reproducible across runs.
    """
    n = np.asarray(normal, dtype=float)
    nrm = np.linalg.norm(n, axis=-1)
    if not np.allclose(nrm, 1.0, atol=1e-10):
        raise ValueError("face_frame expects unit normals")
    pivot = np.argmin(np.abs(n), axis=-1)
    e = np.zeros_like(n)
    np.put_along_axis(e, pivot[..., None], 1.0, axis=-1)
    t1 = e - np.sum(e * n, axis=-1)[..., None] * n
    t1 /= np.linalg.norm(t1, axis=-1)[..., None]
    t2 = np.cross(n, t1)
    return t1, t2


def rotate_state(q, n, t1, t2):
    """Rotate momentum into the face frame: (rho, rho U_n, rho V_t1, rho V_t2, p)."""
    q = np.asarray(q, dtype=float)
    qn = q.copy()
    mom = q[..., 1:4]
    qn[..., 1] = np.sum(mom * n, axis=-1)
    qn[..., 2] = np.sum(mom * t1, axis=-1)
    qn[..., 3] = np.sum(mom * t2, axis=-1)
    return qn


def rotate_back_flux(fn, n, t1, t2):
    """Apply the transposed rotation to a face-frame flux vector."""
    fn = np.asarray(fn, dtype=float)
    f = fn.copy()
    f[..., 1:4] = (
        fn[..., 1:2] * n + fn[..., 2:3] * t1 + fn[..., 3:4] * t2
    )
    return f


def _face_frame_velocities(q, n, t1, t2, params):
    u = physics.velocity(q, params)
    un = np.sum(u * n, axis=-1)
    vt1 = np.sum(u * t1, axis=-1)
    vt2 = np.sum(u * t2, axis=-1)
    return un, vt1, vt2


def wave_speeds(un, rho_lim, params):
    """lambda^+/- = (U_n +/- a)/2 with a = sqrt(U_n^2 + 4/(M0^2 rho))."""
    a = np.sqrt(un * un + 4.0 / (params.m0sq * rho_lim))
    return 0.5 * (un + a), 0.5 * (un - a)


def star_state(q_left, q_right, n, t1, t2, params):
    """Exact star-region solution in the face frame.

    Returns (un_star, p_star, rho_star, vt1_star, vt2_star) where the
    density and tangential velocities are upwinded on the sign of
    un_star; ties (un_star == 0) take the left values.
    """
    rho_l = physics.limited_density(np.asarray(q_left, dtype=float)[..., 0], params)
    rho_r = physics.limited_density(np.asarray(q_right, dtype=float)[..., 0], params)
    un_l, vt1_l, vt2_l = _face_frame_velocities(q_left, n, t1, t2, params)
    un_r, vt1_r, vt2_r = _face_frame_velocities(q_right, n, t1, t2, params)
    p_l = np.asarray(q_left, dtype=float)[..., 4]
    p_r = np.asarray(q_right, dtype=float)[..., 4]

    lp_l, lm_l = wave_speeds(un_l, rho_l, params)
    lp_r, lm_r = wave_speeds(un_r, rho_r, params)

    denom = rho_l * lp_l - rho_r * lm_r
    assert np.all(denom > 0.0), "wave-speed denominator must stay positive"
    un_s = (p_l - p_r + rho_l * un_l * lp_l - rho_r * un_r * lm_r) / denom
    p_s = p_l + rho_l * lp_l * (un_l - un_s)
    left_side = un_s >= 0.0
    rho_s = np.where(left_side,
                     rho_l * lp_l / (un_s - lm_l),
                     rho_r * lm_r / (un_s - lp_r))
    vt1_s = np.where(left_side, vt1_l, vt1_r)
    vt2_s = np.where(left_side, vt2_l, vt2_r)
    return un_s, p_s, rho_s, vt1_s, vt2_s


def exact_riemann(q_left, q_right, n, t1, t2, params):
    """Upwind numerical flux F* . n, rotated back to physical components."""
    un_s, p_s, rho_s, vt1_s, vt2_s = star_state(q_left, q_right, n, t1, t2, params)
    fn = np.empty(np.shape(un_s) + (physics.NVAR,))
    mass = rho_s * un_s
    fn[..., 0] = mass
    fn[..., 1] = mass * un_s + p_s
    fn[..., 2] = mass * vt1_s
    fn[..., 3] = mass * vt2_s
    fn[..., 4] = un_s / params.m0sq
    return rotate_back_flux(fn, n, t1, t2)


def central_ec_interface(q_left, q_right, n, params):
    """Entropy-conserving interface flux: the two-point flux dotted with n."""
    f = physics.two_point_flux(q_left, q_right, params)
    return np.einsum("...dv,...d->...v", f, np.asarray(n, dtype=float))


def br1_interface(w_left, w_right, fv_left, fv_right):
    """BR1 coupling: arithmetic means of entropy variables and viscous fluxes."""
    w_star = 0.5 * (np.asarray(w_left) + np.asarray(w_right))
    fv_star = 0.5 * (np.asarray(fv_left) + np.asarray(fv_right))
    return w_star, fv_star


def mirror_state(q, n):
    """Reflection state: normal momentum flipped, all else kept."""
    q = np.asarray(q, dtype=float)
    qm = q.copy()
    mn = np.sum(q[..., 1:4] * n, axis=-1)
    qm[..., 1:4] = q[..., 1:4] - 2.0 * mn[..., None] * n
    return qm


def wall_inviscid_flux(q, n, t1, t2, params, mode="reflected"):
    """Advective wall flux.

    mode='direct' prescribes zero normal velocity through the flux and
    keeps the interior pressure, giving (0, p n, 0) exactly (neutrally
    stable).  mode='reflected' runs the exact Riemann solver against the
    mirror state, which adds boundary dissipation rho lambda^+ U_n^2 that
    vanishes as the normal velocity converges to zero.
    """
    q = np.asarray(q, dtype=float)
    if mode == "direct":
        f = np.zeros(q.shape)
        f[..., 1:4] = q[..., 4:5] * n
        return f
    if mode == "reflected":
        return exact_riemann(q, mirror_state(q, n), n, t1, t2, params)
    raise ValueError(f"unknown wall mode {mode!r}")


def wall_viscous_bc(w, fv_normal, p_interior, params, kind):
    """Boundary values (w*, F_v* . n) for the viscous coupling at walls.

    free-slip: entropy variables from the interior and zero viscous flux.
    no-slip: zeroed velocities in w* with the pressure entry kept, and
    the viscous flux taken from the interior.  The pressure entry never
    enters the stress, so it does not change the scheme.
    """
    w = np.asarray(w, dtype=float)
    fv_normal = np.asarray(fv_normal, dtype=float)
    if kind == "free-slip":
        return w, np.zeros_like(fv_normal)
    if kind == "no-slip":
        w_star = np.zeros_like(w)
        w_star[..., 4] = params.m0sq * np.asarray(p_interior, dtype=float)
        return w_star, fv_normal
    raise ValueError(f"unknown wall kind {kind!r}")


def interface_dissipation(q_left, q_right, n, t1, t2, params, flux=None):
    """Entropy production Delta_e of an interface flux, from its definition.

    Delta_e = -jump(w)^T F* - jump(F^E . n) + jump(w^T F_e . n), with
    jump(x) = x_R - x_L and one-sided fluxes F_e.  Nonnegative for the
    exact Riemann solver, identically zero for the entropy-conserving
    two-point flux.
    """
    if flux is None:
        flux = exact_riemann(q_left, q_right, n, t1, t2, params)
    w_l = physics.entropy_vars(q_left, params)
    w_r = physics.entropy_vars(q_right, params)
    f_l = np.einsum("...dv,...d->...v", physics.inviscid_flux(q_left, params), n)
    f_r = np.einsum("...dv,...d->...v", physics.inviscid_flux(q_right, params), n)
    fe_l = np.sum(physics.entropy_flux(q_left, params) * n, axis=-1)
    fe_r = np.sum(physics.entropy_flux(q_right, params) * n, axis=-1)
    jump_w_flux = np.sum((w_r - w_l) * flux, axis=-1)
    jump_wf = np.sum(w_r * f_r - w_l * f_l, axis=-1)
    return -jump_w_flux - (fe_r - fe_l) + jump_wf


def riemann_dissipation_closed_form(q_left, q_right, n, t1, t2, params):
    """Closed-form Delta_e of the exact Riemann flux (both upwind branches)."""
    rho_l = physics.limited_density(np.asarray(q_left, dtype=float)[..., 0], params)
    rho_r = physics.limited_density(np.asarray(q_right, dtype=float)[..., 0], params)
    un_l, vt1_l, vt2_l = _face_frame_velocities(q_left, n, t1, t2, params)
    un_r, vt1_r, vt2_r = _face_frame_velocities(q_right, n, t1, t2, params)
    lp_l, lm_l = wave_speeds(un_l, rho_l, params)
    lp_r, lm_r = wave_speeds(un_r, rho_r, params)
    un_s, _, _, _, _ = star_state(q_left, q_right, n, t1, t2, params)

    jt2 = (vt1_r - vt1_l) ** 2 + (vt2_r - vt2_l) ** 2
    dl2 = (un_l - un_s) ** 2
    dr2 = (un_r - un_s) ** 2

    left = (
        0.5 * rho_l * lp_l * (un_s - 2.0 * lm_l) * dl2
        + (0.5 * rho_l * lp_l * un_s - rho_r * lm_r * (un_s - lm_l)) * dr2
        + 0.5 * rho_l * lp_l * un_s * jt2
    ) / (un_s - lm_l)
    right = (
        -0.5 * rho_r * lm_r * (un_s - 2.0 * lp_r) * dr2
        + (-0.5 * rho_r * lm_r * un_s + rho_l * lp_l * (un_s - lp_r)) * dl2
        - 0.5 * rho_r * lm_r * un_s * jt2
    ) / (un_s - lp_r)
    return np.where(un_s >= 0.0, left, right)
