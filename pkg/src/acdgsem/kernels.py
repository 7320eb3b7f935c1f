"""Compiled inner loops of the semi-discrete operator.

These kernels mirror the array-level functions in physics/riemann; the
test suite cross-checks them against those reference implementations on
random data.  Volume kernels parallelize over elements (disjoint writes),
face kernels run serially in a fixed order, so results are bit-identical
across runs and thread counts.

Sign convention: the accumulator R collects J * dQ/dt contributions, i.e.
volume kernels add the negated advective divergence and the positive
viscous divergence, face kernels add the lifted numerical-flux
corrections.  The caller divides by the Jacobian and adds sources.
"""

import numpy as np
from numba import njit, prange

# face btype codes, kept in sync with mesh.py
_INTERIOR = 0
_FREE_SLIP = 1
_NO_SLIP = 2
_DIRICHLET = 3


@njit(cache=True, parallel=True)
def nodal_primitives(q, limiter_on, rho_floor, m0sq, prim, w):
    """prim = (u, v, w, p, limited rho); w = entropy variables."""
    ne, nn = q.shape[0], q.shape[1]
    for e in prange(ne):
        for n in range(nn):
            rho = q[e, n, 0]
            rt = rho
            if limiter_on and rt < rho_floor:
                rt = rho_floor
            uu = q[e, n, 1] / rt
            vv = q[e, n, 2] / rt
            ww = q[e, n, 3] / rt
            pp = q[e, n, 4]
            prim[e, n, 0] = uu
            prim[e, n, 1] = vv
            prim[e, n, 2] = ww
            prim[e, n, 3] = pp
            prim[e, n, 4] = rt
            w[e, n, 0] = -0.5 * (uu * uu + vv * vv + ww * ww)
            w[e, n, 1] = uu
            w[e, n, 2] = vv
            w[e, n, 3] = ww
            w[e, n, 4] = m0sq * pp


@njit(cache=True, parallel=True, fastmath=True)
def split_form_volume(q, prim, ja, deriv, m0sq, opt, r):
    """Accumulate minus the two-point-flux divergence into r.

    The pair (i, m) is visited once per line; both endpoints receive
    their 2 D[i,m] / 2 D[m,i] weighted share of the symmetric flux,
    contracted with the arithmetic mean of the two metric vectors.
    Work runs on copied line buffers and a local accumulator, so all
    strided traffic happens once per line.
    """
    ne, np1 = q.shape[0], q.shape[1]
    inv_m0sq = 1.0 / m0sq
    for e in prange(ne):
        bq = np.empty((np1, 4))
        bu = np.empty((np1, 4))
        ba = np.empty((np1, 3))
        acc = np.empty((np1, 5))
        for axis in range(3):
            for c1 in range(np1):
                for c2 in range(np1):
                    for s in range(np1):
                        if axis == 0:
                            i, j, k = s, c1, c2
                        elif axis == 1:
                            i, j, k = c1, s, c2
                        else:
                            i, j, k = c1, c2, s
                        bq[s, 0] = q[e, i, j, k, 0]
                        bq[s, 1] = q[e, i, j, k, 1]
                        bq[s, 2] = q[e, i, j, k, 2]
                        bq[s, 3] = q[e, i, j, k, 3]
                        bu[s, 0] = prim[e, i, j, k, 0]
                        bu[s, 1] = prim[e, i, j, k, 1]
                        bu[s, 2] = prim[e, i, j, k, 2]
                        bu[s, 3] = prim[e, i, j, k, 3]
                        ba[s, 0] = ja[e, i, j, k, axis, 0]
                        ba[s, 1] = ja[e, i, j, k, axis, 1]
                        ba[s, 2] = ja[e, i, j, k, axis, 2]
                        for v in range(5):
                            acc[s, v] = 0.0
                    for a in range(np1):
                        for m in range(a, np1):
                            ub = 0.5 * (bu[a, 0] + bu[m, 0])
                            vb = 0.5 * (bu[a, 1] + bu[m, 1])
                            wb = 0.5 * (bu[a, 2] + bu[m, 2])
                            pb = 0.5 * (bu[a, 3] + bu[m, 3])
                            if opt == 1:
                                tu = 0.5 * (bq[a, 1] + bq[m, 1])
                                tv = 0.5 * (bq[a, 2] + bq[m, 2])
                                tw = 0.5 * (bq[a, 3] + bq[m, 3])
                            else:
                                rb = 0.5 * (bq[a, 0] + bq[m, 0])
                                tu = rb * ub
                                tv = rb * vb
                                tw = rb * wb
                            a0 = 0.5 * (ba[a, 0] + ba[m, 0])
                            a1 = 0.5 * (ba[a, 1] + ba[m, 1])
                            a2 = 0.5 * (ba[a, 2] + ba[m, 2])
                            kk = a0 * tu + a1 * tv + a2 * tw
                            p0 = kk
                            p1 = kk * ub + a0 * pb
                            p2 = kk * vb + a1 * pb
                            p3 = kk * wb + a2 * pb
                            p4 = (a0 * ub + a1 * vb + a2 * wb) * inv_m0sq
                            ca = 2.0 * deriv[a, m]
                            acc[a, 0] += ca * p0
                            acc[a, 1] += ca * p1
                            acc[a, 2] += ca * p2
                            acc[a, 3] += ca * p3
                            acc[a, 4] += ca * p4
                            if m > a:
                                cm = 2.0 * deriv[m, a]
                                acc[m, 0] += cm * p0
                                acc[m, 1] += cm * p1
                                acc[m, 2] += cm * p2
                                acc[m, 3] += cm * p3
                                acc[m, 4] += cm * p4
                    for s in range(np1):
                        if axis == 0:
                            i, j, k = s, c1, c2
                        elif axis == 1:
                            i, j, k = c1, s, c2
                        else:
                            i, j, k = c1, c2, s
                        for v in range(5):
                            r[e, i, j, k, v] -= acc[s, v]


@njit(cache=True, parallel=True, fastmath=True)
def standard_volume(q, prim, ja, deriv, m0sq, r):
    """Accumulate minus the standard divergence of the contravariant
    advective flux (direct differentiation of the nodal flux)."""
    ne, np1 = q.shape[0], q.shape[1]
    for e in prange(ne):
        ft = np.empty((3, np1, np1, np1, 5))
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    m1 = q[e, i, j, k, 1]
                    m2 = q[e, i, j, k, 2]
                    m3 = q[e, i, j, k, 3]
                    uu = prim[e, i, j, k, 0]
                    vv = prim[e, i, j, k, 1]
                    ww = prim[e, i, j, k, 2]
                    pp = prim[e, i, j, k, 3]
                    for d in range(3):
                        a0 = ja[e, i, j, k, d, 0]
                        a1 = ja[e, i, j, k, d, 1]
                        a2 = ja[e, i, j, k, d, 2]
                        adotu = a0 * uu + a1 * vv + a2 * ww
                        ft[d, i, j, k, 0] = a0 * m1 + a1 * m2 + a2 * m3
                        ft[d, i, j, k, 1] = m1 * adotu + pp * a0
                        ft[d, i, j, k, 2] = m2 * adotu + pp * a1
                        ft[d, i, j, k, 3] = m3 * adotu + pp * a2
                        ft[d, i, j, k, 4] = adotu / m0sq
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    for v in range(5):
                        acc = 0.0
                        for m in range(np1):
                            acc += deriv[i, m] * ft[0, m, j, k, v]
                            acc += deriv[j, m] * ft[1, i, m, k, v]
                            acc += deriv[k, m] * ft[2, i, j, m, v]
                        r[e, i, j, k, v] -= acc


@njit(cache=True, parallel=True, fastmath=True)
def gradient_volume(w, ja, deriv, jg):
    """jg[l, v] = sum_d Ja^d_l (D_d w)_v  (volume part of J * grad w)."""
    ne, np1 = w.shape[0], w.shape[1]
    for e in prange(ne):
        dw = np.empty((3, np1, np1, np1, 5))
        buf = np.empty((np1, 5))
        for axis in range(3):
            for c1 in range(np1):
                for c2 in range(np1):
                    for s in range(np1):
                        if axis == 0:
                            i, j, k = s, c1, c2
                        elif axis == 1:
                            i, j, k = c1, s, c2
                        else:
                            i, j, k = c1, c2, s
                        for v in range(5):
                            buf[s, v] = w[e, i, j, k, v]
                    for s in range(np1):
                        if axis == 0:
                            i, j, k = s, c1, c2
                        elif axis == 1:
                            i, j, k = c1, s, c2
                        else:
                            i, j, k = c1, c2, s
                        for v in range(5):
                            acc = 0.0
                            for m in range(np1):
                                acc += deriv[s, m] * buf[m, v]
                            dw[axis, i, j, k, v] = acc
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    for l in range(3):
                        for v in range(5):
                            jg[e, i, j, k, l, v] = (
                                ja[e, i, j, k, 0, l] * dw[0, i, j, k, v]
                                + ja[e, i, j, k, 1, l] * dw[1, i, j, k, v]
                                + ja[e, i, j, k, 2, l] * dw[2, i, j, k, v])


@njit(cache=True, parallel=True, fastmath=True)
def scale_by_jacobian(jg, jac):
    ne, np1 = jg.shape[0], jg.shape[1]
    for e in prange(ne):
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    inv = 1.0 / jac[e, i, j, k]
                    for l in range(3):
                        for v in range(5):
                            jg[e, i, j, k, l, v] *= inv


@njit(cache=True, parallel=True, fastmath=True)
def viscous_volume(g, ja, deriv, re, r):
    """Accumulate the standard divergence of the contravariant viscous flux."""
    ne, np1 = g.shape[0], g.shape[1]
    inv_re = 1.0 / re
    for e in prange(ne):
        ft = np.empty((3, np1, np1, np1, 3))
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    t00 = 2.0 * inv_re * g[e, i, j, k, 0, 1]
                    t11 = 2.0 * inv_re * g[e, i, j, k, 1, 2]
                    t22 = 2.0 * inv_re * g[e, i, j, k, 2, 3]
                    t01 = inv_re * (g[e, i, j, k, 1, 1] + g[e, i, j, k, 0, 2])
                    t02 = inv_re * (g[e, i, j, k, 2, 1] + g[e, i, j, k, 0, 3])
                    t12 = inv_re * (g[e, i, j, k, 2, 2] + g[e, i, j, k, 1, 3])
                    for d in range(3):
                        a0 = ja[e, i, j, k, d, 0]
                        a1 = ja[e, i, j, k, d, 1]
                        a2 = ja[e, i, j, k, d, 2]
                        ft[d, i, j, k, 0] = a0 * t00 + a1 * t01 + a2 * t02
                        ft[d, i, j, k, 1] = a0 * t01 + a1 * t11 + a2 * t12
                        ft[d, i, j, k, 2] = a0 * t02 + a1 * t12 + a2 * t22
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    for c in range(3):
                        acc = 0.0
                        for m in range(np1):
                            acc += deriv[i, m] * ft[0, m, j, k, c]
                            acc += deriv[j, m] * ft[1, i, m, k, c]
                            acc += deriv[k, m] * ft[2, i, j, m, c]
                        r[e, i, j, k, 1 + c] += acc


@njit(cache=True)
def _riemann_face_flux(rl, unl, v1l, v2l, pl, rr, unr, v1r, v2r, pr, m0sq):
    """Exact star-region flux in the face frame; returns 5 components."""
    al = np.sqrt(unl * unl + 4.0 / (m0sq * rl))
    ar = np.sqrt(unr * unr + 4.0 / (m0sq * rr))
    lpl = 0.5 * (unl + al)
    lml = 0.5 * (unl - al)
    lpr = 0.5 * (unr + ar)
    lmr = 0.5 * (unr - ar)
    denom = rl * lpl - rr * lmr
    uns = (pl - pr + rl * unl * lpl - rr * unr * lmr) / denom
    ps = pl + rl * lpl * (unl - uns)
    if uns >= 0.0:
        rs = rl * lpl / (uns - lml)
        v1s = v1l
        v2s = v2l
    else:
        rs = rr * lmr / (uns - lpr)
        v1s = v1r
        v2s = v2r
    mass = rs * uns
    return mass, mass * uns + ps, mass * v1s, mass * v2s, uns / m0sq


@njit(cache=True, parallel=True)
def face_fluxes(q, prim, g, r, color_starts,
                face_elem_l, face_elem_r, face_btype, face_idx_l, face_idx_r,
                face_normal, face_t1, face_t2, face_jac,
                dir_slot, q_ext,
                w_end, m0sq, re, opt,
                split_volume, central_interface, wall_reflected, viscous,
                limiter_on, rho_floor):
    """Interface and boundary lift terms, scattered to both sides.

    Advective: exact Riemann (or the entropy-conserving two-point flux at
    interior faces), minus the one-sided flux consistent with the volume
    operator (the two-point flux of a state with itself for the split
    form, the plain flux for the standard form).  Viscous: BR1 averages
    and the wall rules.  Faces of one color share no element, so every
    color batch runs parallel with disjoint writes.
    """
    np1 = face_idx_l.shape[1]
    inv_re = 1.0 / re
    for ci in range(color_starts.shape[0] - 1):
        for f in prange(color_starts[ci], color_starts[ci + 1]):
            el = face_elem_l[f]
            er = face_elem_r[f]
            bt = face_btype[f]
            slot = dir_slot[f]
            for a in range(np1):
                for b in range(np1):
                    nl = face_idx_l[f, a, b]
                    n0 = face_normal[f, a, b, 0]
                    n1 = face_normal[f, a, b, 1]
                    n2 = face_normal[f, a, b, 2]
                    t10 = face_t1[f, a, b, 0]
                    t11 = face_t1[f, a, b, 1]
                    t12 = face_t1[f, a, b, 2]
                    t20 = face_t2[f, a, b, 0]
                    t21 = face_t2[f, a, b, 1]
                    t22 = face_t2[f, a, b, 2]
                    scale = face_jac[f, a, b] / w_end

                    rho_l = q[el, nl, 0]
                    ul0 = prim[el, nl, 0]
                    ul1 = prim[el, nl, 1]
                    ul2 = prim[el, nl, 2]
                    pl = prim[el, nl, 3]
                    rtl = prim[el, nl, 4]
                    unl = ul0 * n0 + ul1 * n1 + ul2 * n2
                    v1l = ul0 * t10 + ul1 * t11 + ul2 * t12
                    v2l = ul0 * t20 + ul1 * t21 + ul2 * t22

                    have_right = bt == _INTERIOR
                    nr = face_idx_r[f, a, b]

                    # exterior state
                    if bt == _INTERIOR:
                        rho_r = q[er, nr, 0]
                        ur0 = prim[er, nr, 0]
                        ur1 = prim[er, nr, 1]
                        ur2 = prim[er, nr, 2]
                        pr = prim[er, nr, 3]
                        rtr = prim[er, nr, 4]
                    elif bt == _DIRICHLET:
                        rho_r = q_ext[slot, a, b, 0]
                        rtr = rho_r
                        if limiter_on and rtr < rho_floor:
                            rtr = rho_floor
                        ur0 = q_ext[slot, a, b, 1] / rtr
                        ur1 = q_ext[slot, a, b, 2] / rtr
                        ur2 = q_ext[slot, a, b, 3] / rtr
                        pr = q_ext[slot, a, b, 4]
                    else:
                        # wall: mirror state (used by the reflected mode)
                        rho_r = rho_l
                        rtr = rtl
                        ur0 = ul0 - 2.0 * unl * n0
                        ur1 = ul1 - 2.0 * unl * n1
                        ur2 = ul2 - 2.0 * unl * n2
                        pr = pl
                    unr = ur0 * n0 + ur1 * n1 + ur2 * n2
                    v1r = ur0 * t10 + ur1 * t11 + ur2 * t12
                    v2r = ur0 * t20 + ur1 * t21 + ur2 * t22

                    # advective numerical flux (physical frame)
                    if (bt == _FREE_SLIP or bt == _NO_SLIP) and not wall_reflected:
                        fs0 = 0.0
                        fs1 = pl * n0
                        fs2 = pl * n1
                        fs3 = pl * n2
                        fs4 = 0.0
                    elif bt == _INTERIOR and central_interface:
                        ub = 0.5 * (ul0 + ur0)
                        vb = 0.5 * (ul1 + ur1)
                        wb = 0.5 * (ul2 + ur2)
                        pb = 0.5 * (pl + pr)
                        if opt == 1:
                            tu = 0.5 * (q[el, nl, 1] + q[er, nr, 1])
                            tv = 0.5 * (q[el, nl, 2] + q[er, nr, 2])
                            tw = 0.5 * (q[el, nl, 3] + q[er, nr, 3])
                        else:
                            rb = 0.5 * (rho_l + rho_r)
                            tu = rb * ub
                            tv = rb * vb
                            tw = rb * wb
                        kk = n0 * tu + n1 * tv + n2 * tw
                        fs0 = kk
                        fs1 = kk * ub + n0 * pb
                        fs2 = kk * vb + n1 * pb
                        fs3 = kk * wb + n2 * pb
                        fs4 = (n0 * ub + n1 * vb + n2 * wb) / m0sq
                    else:
                        fn0, fn1, fn2, fn3, fn4 = _riemann_face_flux(
                            rtl, unl, v1l, v2l, pl, rtr, unr, v1r, v2r, pr,
                            m0sq)
                        fs0 = fn0
                        fs1 = fn1 * n0 + fn2 * t10 + fn3 * t20
                        fs2 = fn1 * n1 + fn2 * t11 + fn3 * t21
                        fs3 = fn1 * n2 + fn2 * t12 + fn3 * t22
                        fs4 = fn4

                    # one-sided fluxes consistent with the volume operator
                    if split_volume and opt == 2:
                        mlu = rho_l * ul0
                        mlv = rho_l * ul1
                        mlw = rho_l * ul2
                    else:
                        mlu = q[el, nl, 1]
                        mlv = q[el, nl, 2]
                        mlw = q[el, nl, 3]
                    kl = mlu * n0 + mlv * n1 + mlw * n2
                    fl0 = kl
                    if split_volume:
                        fl1 = kl * ul0 + n0 * pl
                        fl2 = kl * ul1 + n1 * pl
                        fl3 = kl * ul2 + n2 * pl
                    else:
                        fl1 = mlu * unl + n0 * pl
                        fl2 = mlv * unl + n1 * pl
                        fl3 = mlw * unl + n2 * pl
                    fl4 = unl / m0sq

                    r[el, nl, 0] -= scale * (fs0 - fl0)
                    r[el, nl, 1] -= scale * (fs1 - fl1)
                    r[el, nl, 2] -= scale * (fs2 - fl2)
                    r[el, nl, 3] -= scale * (fs3 - fl3)
                    r[el, nl, 4] -= scale * (fs4 - fl4)
                    if have_right:
                        if split_volume and opt == 2:
                            mru = rho_r * ur0
                            mrv = rho_r * ur1
                            mrw = rho_r * ur2
                        else:
                            mru = q[er, nr, 1]
                            mrv = q[er, nr, 2]
                            mrw = q[er, nr, 3]
                        kr = mru * n0 + mrv * n1 + mrw * n2
                        fr0 = kr
                        if split_volume:
                            fr1 = kr * ur0 + n0 * pr
                            fr2 = kr * ur1 + n1 * pr
                            fr3 = kr * ur2 + n2 * pr
                        else:
                            fr1 = mru * unr + n0 * pr
                            fr2 = mrv * unr + n1 * pr
                            fr3 = mrw * unr + n2 * pr
                        fr4 = unr / m0sq
                        r[er, nr, 0] += scale * (fs0 - fr0)
                        r[er, nr, 1] += scale * (fs1 - fr1)
                        r[er, nr, 2] += scale * (fs2 - fr2)
                        r[er, nr, 3] += scale * (fs3 - fr3)
                        r[er, nr, 4] += scale * (fs4 - fr4)

                    if not viscous:
                        continue

                    # viscous normal fluxes from both sides
                    tl00 = 2.0 * inv_re * g[el, nl, 0, 1]
                    tl11 = 2.0 * inv_re * g[el, nl, 1, 2]
                    tl22 = 2.0 * inv_re * g[el, nl, 2, 3]
                    tl01 = inv_re * (g[el, nl, 1, 1] + g[el, nl, 0, 2])
                    tl02 = inv_re * (g[el, nl, 2, 1] + g[el, nl, 0, 3])
                    tl12 = inv_re * (g[el, nl, 2, 2] + g[el, nl, 1, 3])
                    fvl1 = tl00 * n0 + tl01 * n1 + tl02 * n2
                    fvl2 = tl01 * n0 + tl11 * n1 + tl12 * n2
                    fvl3 = tl02 * n0 + tl12 * n1 + tl22 * n2

                    if bt == _INTERIOR:
                        tr00 = 2.0 * inv_re * g[er, nr, 0, 1]
                        tr11 = 2.0 * inv_re * g[er, nr, 1, 2]
                        tr22 = 2.0 * inv_re * g[er, nr, 2, 3]
                        tr01 = inv_re * (g[er, nr, 1, 1] + g[er, nr, 0, 2])
                        tr02 = inv_re * (g[er, nr, 2, 1] + g[er, nr, 0, 3])
                        tr12 = inv_re * (g[er, nr, 2, 2] + g[er, nr, 1, 3])
                        fvr1 = tr00 * n0 + tr01 * n1 + tr02 * n2
                        fvr2 = tr01 * n0 + tr11 * n1 + tr12 * n2
                        fvr3 = tr02 * n0 + tr12 * n1 + tr22 * n2
                        fvs1 = 0.5 * (fvl1 + fvr1)
                        fvs2 = 0.5 * (fvl2 + fvr2)
                        fvs3 = 0.5 * (fvl3 + fvr3)
                        r[er, nr, 1] -= scale * (fvs1 - fvr1)
                        r[er, nr, 2] -= scale * (fvs2 - fvr2)
                        r[er, nr, 3] -= scale * (fvs3 - fvr3)
                    elif bt == _FREE_SLIP:
                        fvs1 = 0.0
                        fvs2 = 0.0
                        fvs3 = 0.0
                    else:
                        # no-slip and Dirichlet take the interior viscous flux
                        fvs1 = fvl1
                        fvs2 = fvl2
                        fvs3 = fvl3
                    r[el, nl, 1] += scale * (fvs1 - fvl1)
                    r[el, nl, 2] += scale * (fvs2 - fvl2)
                    r[el, nl, 3] += scale * (fvs3 - fvl3)


@njit(cache=True, parallel=True)
def gradient_face_lift(w, jg, color_starts, face_elem_l, face_elem_r,
                       face_btype, face_idx_l, face_idx_r, face_normal,
                       face_jac, dir_slot, w_ext, w_end):
    """Add the (w* - w) surface terms of the gradient equation to jg."""
    np1 = face_idx_l.shape[1]
    for ci in range(color_starts.shape[0] - 1):
        for f in prange(color_starts[ci], color_starts[ci + 1]):
            el = face_elem_l[f]
            er = face_elem_r[f]
            bt = face_btype[f]
            slot = dir_slot[f]
            if bt == _FREE_SLIP:
                continue  # w* equals the interior values, nothing to lift
            for a in range(np1):
                for b in range(np1):
                    nl = face_idx_l[f, a, b]
                    scale = face_jac[f, a, b] / w_end
                    for v in range(5):
                        wl = w[el, nl, v]
                        if bt == _INTERIOR:
                            ws = 0.5 * (wl + w[er, face_idx_r[f, a, b], v])
                        elif bt == _NO_SLIP:
                            # velocities zeroed, pressure entry kept
                            ws = wl if v == 4 else 0.0
                        else:  # Dirichlet analytic data
                            ws = w_ext[slot, a, b, v]
                        diff = (ws - wl) * scale
                        for l in range(3):
                            jg[el, nl, l, v] += diff * face_normal[f, a, b, l]
                    if bt == _INTERIOR:
                        nr = face_idx_r[f, a, b]
                        for v in range(5):
                            ws = 0.5 * (w[el, nl, v] + w[er, nr, v])
                            diff = (ws - w[er, nr, v]) * scale
                            for l in range(3):
                                jg[er, nr, l, v] -= diff * face_normal[f, a, b, l]


@njit(cache=True, parallel=True, fastmath=True)
def finalize_rhs(r, jac, rho, have_gravity, fr2inv, g0, g1, g2):
    """dQ/dt = R / J plus the gravity source, in place on r."""
    ne, np1 = r.shape[0], r.shape[1]
    for e in prange(ne):
        for i in range(np1):
            for j in range(np1):
                for k in range(np1):
                    inv = 1.0 / jac[e, i, j, k]
                    for v in range(5):
                        r[e, i, j, k, v] *= inv
                    if have_gravity:
                        coef = rho[e, i, j, k] * fr2inv
                        r[e, i, j, k, 1] += coef * g0
                        r[e, i, j, k, 2] += coef * g1
                        r[e, i, j, k, 3] += coef * g2


@njit(cache=True, parallel=True)
def count_below(qrows, threshold):
    """Number of nodes whose density sits under the limiter floor;
    qrows is the state reshaped to (nodes, 5)."""
    total = 0
    for i in prange(qrows.shape[0]):
        if qrows[i, 0] < threshold:
            total += 1
    return total

@njit(cache=True, parallel=True)
def rk_stage_update(kreg, rhs, qarr, acoef, bcoef, dt):
    """Low-storage stage: K = a K + dt R; Q += b K (flat arrays)."""
    n = kreg.shape[0]
    for i in prange(n):
        kv = acoef * kreg[i] + dt * rhs[i]
        kreg[i] = kv
        qarr[i] += bcoef * kv
