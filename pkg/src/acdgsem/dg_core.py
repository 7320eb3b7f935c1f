"""Semi-discrete operator: volume terms, BR1 gradients, surface lifts.

The advective volume term is the two-point-flux divergence (split form)
or the direct polynomial differentiation (standard form, kept as the
comparison scheme); viscous fluxes are always differentiated in standard
form after the BR1 gradient solve.  Interface corrections are lifted with
the boundary quadrature weights, computed once per face and scattered to
both sides with opposite sign, so the scheme is discretely conservative.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, physics
from .mesh import BTYPE_DIRICHLET, apply_deriv


class SolverDivergedError(RuntimeError):
    """Raised when a non-finite value shows up in the state."""

    def __init__(self, step, element, node, message=None):
        self.step = step
        self.element = element
        self.node = node
        super().__init__(
            message or f"non-finite state at step {step}, element {element}, "
                       f"node {node}")


@dataclass(frozen=True)
class SchemeConfig:
    """Discretization switches.

    volume : 'split' (two-point flux divergence) or 'standard'.
    interface : 'riemann' (exact solver, entropy stable) or 'central'
        (two-point flux at interior faces, entropy conserving).
    wall_inviscid : 'direct' (prescribed pressure flux, neutrally stable)
        or 'reflected' (Riemann against the mirror state, dissipative).
    viscous : None derives the switch from the Reynolds number.
    """

    volume: str = "split"
    interface: str = "riemann"
    wall_inviscid: str = "reflected"
    viscous: bool | None = None

    def __post_init__(self):
        if self.volume not in ("split", "standard"):
            raise ValueError(f"unknown volume scheme {self.volume!r}")
        if self.interface not in ("riemann", "central"):
            raise ValueError(f"unknown interface flux {self.interface!r}")
        if self.wall_inviscid not in ("direct", "reflected"):
            raise ValueError(f"unknown wall mode {self.wall_inviscid!r}")
        if self.volume == "standard" and self.interface == "central":
            raise ValueError(
                "standard volume with the central interface has no stability "
                "guarantee; combination rejected")

    def resolve_viscous(self, params):
        if self.viscous is None:
            return params.viscous
        if self.viscous and not params.viscous:
            raise ValueError("viscous scheme requested with an infinite "
                             "Reynolds number")
        return self.viscous


def allocate_field(mesh, ncomp=5):
    np1 = mesh.order + 1
    return np.zeros((mesh.ne, np1, np1, np1, ncomp))


def standard_divergence(flux_tilde, ops):
    """sum_d D-contraction of the contravariant flux along axis d.

    flux_tilde has shape (..., Np, Np, Np, 3, nv), where axis -2 indexes
    the reference direction.  Exact for polynomial data of degree <= N.
    """
    d = ops.deriv
    ft = np.asarray(flux_tilde, dtype=float)
    off = ft.ndim - 5
    return (apply_deriv(ft[..., 0, :], d, off)
            + apply_deriv(ft[..., 1, :], d, off + 1)
            + apply_deriv(ft[..., 2, :], d, off + 2))


def split_form_divergence(q, ja, ops, params):
    """Two-point-flux divergence on one element or a batch of elements.

    q: (..., Np, Np, Np, 5), ja: (..., Np, Np, Np, 3, 3).  Metric vectors
    enter through two-point arithmetic means, which is what makes constant
    states annihilate on curved geometry via the metric identities.
    """
    q = np.ascontiguousarray(q, dtype=float)
    single = q.ndim == 4
    if single:
        q = q[None]
        ja = np.ascontiguousarray(ja, dtype=float)[None]
    ne = q.shape[0]
    nn = q.shape[1] * q.shape[2] * q.shape[3]
    prim = np.empty((ne, nn, 5))
    w = np.empty((ne, nn, 5))
    kernels.nodal_primitives(q.reshape(ne, nn, 5), params.limiter,
                             params.rho_floor, params.m0sq, prim, w)
    r = np.zeros_like(q)
    kernels.split_form_volume(q, prim.reshape(q.shape), ja, ops.deriv,
                              params.m0sq, params.momentum_average, r)
    out = -r
    return out[0] if single else out


def contravariant_inviscid_flux(q, ja, params):
    """Nodal contravariant advective flux Ja^d . f_e, shape (..., 3, 5)."""
    f = physics.inviscid_flux(q, params)
    return np.einsum("...dn,...nv->...dv", np.asarray(ja, dtype=float), f)


def br1_gradients(q, mesh, params, dirichlet=None, t=0.0):
    """Entropy-variable gradients of the first-order system, full mesh.

    Interface values are arithmetic means; walls use the free-slip /
    no-slip rules; Dirichlet faces evaluate the supplied analytic state.
    Exact for degree-N entropy-variable fields with matching boundary
    data.
    """
    solver = DGSolver(mesh, params, SchemeConfig(volume="split",
                                                 interface="riemann"),
                      dirichlet=dirichlet, _force_viscous=True)
    qc = np.ascontiguousarray(q, dtype=float)
    ne, np1 = mesh.ne, mesh.order + 1
    nn = np1**3
    kernels.nodal_primitives(qc.reshape(ne, nn, 5), params.limiter,
                             params.rho_floor, params.m0sq,
                             solver._prim.reshape(ne, nn, 5),
                             solver._w.reshape(ne, nn, 5))
    solver._boundary_data(t)
    solver._gradients(qc, t)
    return solver._grad.copy()


class DGSolver:
    """Assembles dQ/dt for one mesh, parameter set and scheme choice.

    Work buffers are owned by the instance and reused across evaluations;
    a single instance must not be driven from several threads at once
    (element- and face-level parallelism lives inside the kernels).
    """

    def __init__(self, mesh, params, config, source=None, dirichlet=None,
                 _force_viscous=False):
        self.mesh = mesh
        self.params = params
        self.config = config
        self.source = source
        self.dirichlet = dirichlet
        self.viscous = config.resolve_viscous(params) or _force_viscous

        ne, np1 = mesh.ne, mesh.order + 1
        self._nn = np1**3
        self._prim = np.empty((ne, np1, np1, np1, 5))
        self._w = np.empty((ne, np1, np1, np1, 5))
        self._r = np.empty((ne, np1, np1, np1, 5))
        if self.viscous:
            self._grad = np.empty((ne, np1, np1, np1, 3, 5))
        else:
            self._grad = np.empty((1, 1, 1, 1, 3, 5))
        self._w_end = float(mesh.ops.weights[0])

        dir_faces = np.nonzero(mesh.face_btype == BTYPE_DIRICHLET)[0]
        self._dir_slot = np.full(mesh.nf, -1, dtype=np.int32)
        self._dir_slot[dir_faces] = np.arange(dir_faces.size, dtype=np.int32)
        self._dir_coords = mesh.face_coord[dir_faces]
        if dir_faces.size and dirichlet is None:
            raise ValueError("mesh has Dirichlet faces but no analytic state "
                             "evaluator was given")
        self._q_ext = np.zeros((max(dir_faces.size, 1), np1, np1, 5))
        self._w_ext = np.zeros_like(self._q_ext)
        self._have_dirichlet = dir_faces.size > 0

    # -- pieces -----------------------------------------------------------

    def _boundary_data(self, t):
        if not self._have_dirichlet:
            return
        q_ext = np.ascontiguousarray(self.dirichlet(self._dir_coords, t))
        self._q_ext[...] = q_ext
        self._w_ext[...] = physics.entropy_vars(q_ext, self.params)

    def _gradients(self, q, t):
        m = self.mesh
        ne, nn = m.ne, self._nn
        kernels.gradient_volume(self._w, m.ja, m.ops.deriv, self._grad)
        kernels.gradient_face_lift(
            self._w.reshape(ne, nn, 5), self._grad.reshape(ne, nn, 3, 5),
            m.face_color_starts, m.face_elem_l, m.face_elem_r, m.face_btype,
            m.face_idx_l, m.face_idx_r, m.face_normal, m.face_jac,
            self._dir_slot, self._w_ext, self._w_end)
        kernels.scale_by_jacobian(self._grad, m.jac)

    # -- full evaluation ---------------------------------------------------

    def rhs(self, q, t):
        """Semi-discrete time derivative. The returned array is an
        internal buffer, consumed before the next evaluation."""
        m = self.mesh
        p = self.params
        ne, nn = m.ne, self._nn
        qc = np.ascontiguousarray(q, dtype=float)
        qf = qc.reshape(ne, nn, 5)

        kernels.nodal_primitives(qf, p.limiter, p.rho_floor, p.m0sq,
                                 self._prim.reshape(ne, nn, 5),
                                 self._w.reshape(ne, nn, 5))
        self._boundary_data(t)
        self._r[...] = 0.0
        if self.viscous:
            self._gradients(qc, t)
            kernels.viscous_volume(self._grad, m.ja, m.ops.deriv, p.re,
                                   self._r)
        if self.config.volume == "split":
            kernels.split_form_volume(qc, self._prim, m.ja, m.ops.deriv,
                                      p.m0sq, p.momentum_average, self._r)
        else:
            kernels.standard_volume(qc, self._prim, m.ja, m.ops.deriv,
                                    p.m0sq, self._r)
        gshape = self._grad.shape
        gflat = self._grad.reshape(gshape[0], gshape[1] * gshape[2] * gshape[3], 3, 5)
        kernels.face_fluxes(
            qf, self._prim.reshape(ne, nn, 5), gflat,
            self._r.reshape(ne, nn, 5), m.face_color_starts,
            m.face_elem_l, m.face_elem_r, m.face_btype,
            m.face_idx_l, m.face_idx_r,
            m.face_normal, m.face_t1, m.face_t2, m.face_jac,
            self._dir_slot, self._q_ext,
            self._w_end, p.m0sq, p.re if self.viscous else np.inf,
            p.momentum_average,
            self.config.volume == "split",
            self.config.interface == "central",
            self.config.wall_inviscid == "reflected",
            self.viscous, p.limiter, p.rho_floor)

        out = self._r
        have_gravity = bool(np.isfinite(p.fr))
        g = np.asarray(p.gravity_dir, dtype=float)
        kernels.finalize_rhs(out, m.jac, qc[..., 0], have_gravity,
                             1.0 / p.fr**2 if have_gravity else 0.0,
                             g[0], g[1], g[2])
        if self.source is not None:
            out += self.source(m.x, t)
        return out

    def check_finite(self, q, step):
        finite = np.isfinite(q)
        if finite.all():
            return
        bad = np.argwhere(~finite)[0]
        raise SolverDivergedError(step, int(bad[0]), tuple(int(v) for v in bad[1:4]))
