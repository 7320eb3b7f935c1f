"""The four benchmark configurations as self-describing case objects.

Two-dimensional problems run as one-element-thick 3D boxes with a
periodic third direction and zero third velocity component; the solver
core stays purely three-dimensional.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dg_core import SchemeConfig
from .mesh import build_cartesian_mesh
from .physics import PhysParams
from .time_integration import StepControl


@dataclass
class CaseSpec:
    """Everything a run needs: mesh recipe, parameters, fields, control."""

    name: str
    params: PhysParams
    scheme: SchemeConfig
    step: StepControl
    build_mesh: Callable
    initial: Callable
    exact: Optional[Callable] = None
    source: Optional[Callable] = None
    dirichlet: Optional[Callable] = None

    def __post_init__(self):
        self.scheme.resolve_viscous(self.params)


# -- manufactured solution -------------------------------------------------

def _manufactured_fields(re):
    def exact(x, t):
        ph = np.pi * (x[..., 0] + x[..., 1] + x[..., 2] - 2.0 * t)
        c, s = np.cos(ph), np.sin(ph)
        q = np.empty(x.shape[:-1] + (5,))
        q[..., 0] = 1.0
        q[..., 1] = c
        q[..., 2] = -2.0 * c
        q[..., 3] = c
        q[..., 4] = 2.0 * c - 3.0 * np.pi * s / re
        return q

    def source(x, t):
        ph = np.pi * (x[..., 0] + x[..., 1] + x[..., 2] - 2.0 * t)
        c, s = np.cos(ph), np.sin(ph)
        out = np.zeros(x.shape[:-1] + (5,))
        out[..., 2] = -6.0 * np.pi * s - 9.0 * np.pi**2 * c / re
        out[..., 4] = 4.0 * np.pi * s + 6.0 * np.pi**2 * c / re
        return out

    return exact, source


def manufactured_case(order=2, counts=(4, 4, 4), re=1000.0, m0sq=1.0e-3,
                      momentum_average=1, cfl=0.5, t_final=10.0,
                      volume="split", interface="riemann"):
    """Space-time separable field with a divergence-free velocity and the
    matching source; periodic [-1,1]^3 box.  The convergence-table runs
    use split form with the first momentum average and CFL 0.5."""
    exact, source = _manufactured_fields(re)
    params = PhysParams(re=re, m0sq=m0sq, momentum_average=momentum_average)
    box = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    return CaseSpec(
        name="manufactured",
        params=params,
        scheme=SchemeConfig(volume=volume, interface=interface),
        step=StepControl(cfl=cfl, t_final=t_final),
        build_mesh=lambda: build_cartesian_mesh(counts, box, order=order),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        source=source,
    )


# -- Kovasznay flow ---------------------------------------------------------

def kovasznay_lambda(re):
    """Decaying root of the similarity relation lam^2 - Re lam = 4 pi^2."""
    return 0.5 * re - np.sqrt(0.25 * re**2 + 4.0 * np.pi**2)


def kovasznay_exact(re):
    lam = kovasznay_lambda(re)

    def exact(x, t):
        ex = np.exp(lam * x[..., 0])
        q = np.empty(x.shape[:-1] + (5,))
        q[..., 0] = 1.0
        q[..., 1] = 1.0 - ex * np.cos(2.0 * np.pi * x[..., 1])
        q[..., 2] = lam / (2.0 * np.pi) * ex * np.sin(2.0 * np.pi * x[..., 1])
        q[..., 3] = 0.0
        q[..., 4] = 0.5 * (1.0 - ex * ex)
        return q

    return exact


def kovasznay_case(order, counts=(8, 8, 1), re=40.0, m0sq=1.0e-3, cfl=0.75,
                   residual_target=1.0e-9, t_final=200.0):
    """Steady laminar wake behind a grid; analytic state imposed weakly
    through the exact Riemann solver on all four lateral boundaries.
    Starts from a uniform stream and marches until the max-norm residual
    falls under the target."""
    exact = kovasznay_exact(re)
    params = PhysParams(re=re, m0sq=m0sq, momentum_average=2)
    dz = 2.0 / counts[1]
    box = ((-0.5, 1.5), (0.0, 2.0), (0.0, dz))
    tags = {k: "dirichlet" for k in ("x-", "x+", "y-", "y+")}

    def initial(x):
        q = np.zeros(x.shape[:-1] + (5,))
        q[..., 0] = 1.0
        q[..., 1] = 1.0
        return q

    return CaseSpec(
        name="kovasznay",
        params=params,
        scheme=SchemeConfig(volume="split", interface="riemann"),
        step=StepControl(cfl=cfl, t_final=t_final,
                         residual_target=residual_target),
        build_mesh=lambda: build_cartesian_mesh(
            counts, box, order=order, periodic=(False, False, True),
            boundary_tags=tags),
        initial=initial,
        exact=exact,
        dirichlet=exact,
    )


# -- inviscid Taylor-Green vortex -------------------------------------------

def tgv_initial(x):
    px, py, pz = (np.pi * x[..., d] for d in range(3))
    q = np.empty(x.shape[:-1] + (5,))
    q[..., 0] = 1.0
    q[..., 1] = np.sin(px) * np.cos(py) * np.cos(pz)
    q[..., 2] = -np.cos(px) * np.sin(py) * np.cos(pz)
    q[..., 3] = 0.0
    q[..., 4] = (np.cos(2 * px) + np.cos(2 * py)) * (2.0 + np.cos(2 * pz)) / 16.0
    return q


def tgv_case(order=4, counts=(8, 8, 8), m0sq=1.0e-3, cfl=0.75, t_final=20.0,
             volume="split", interface="riemann", momentum_average=1):
    """Inviscid vortex breakdown in a periodic box; the total entropy is
    conserved with the central interface flux and dissipated with the
    exact Riemann solver, which is the whole point of the case."""
    params = PhysParams(re=np.inf, m0sq=m0sq,
                        momentum_average=momentum_average)
    box = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    return CaseSpec(
        name="tgv",
        params=params,
        scheme=SchemeConfig(volume=volume, interface=interface),
        step=StepControl(cfl=cfl, t_final=t_final),
        build_mesh=lambda: build_cartesian_mesh(counts, box, order=order),
        initial=tgv_initial,
    )


# -- Rayleigh-Taylor instability ---------------------------------------------

def rti_initial(x):
    eta = 2.0 - 0.01 * np.cos(2.0 * np.pi * x[..., 0])
    q = np.zeros(x.shape[:-1] + (5,))
    q[..., 0] = 2.0 + np.tanh((x[..., 1] - eta) / 0.01)
    return q


def rti_case(order=6, re=1000.0, counts=(16, 128, 1), m0sq=2.0e-4,
             dt=1.5e-5, t_final=2.5, rho_floor=0.9,
             wall_inviscid="reflected"):
    """Heavy fluid (rho=3) over light (rho=1) in a tall box under gravity.

    Free-slip left/right walls, no-slip top/bottom, periodic in the thin
    third direction.  The density floor is enabled only here: Gibbs
    oscillations around the sharpening interface would otherwise push the
    recovery density toward zero.
    """
    params = PhysParams(re=re, fr=1.0, m0sq=m0sq,
                        gravity_dir=(0.0, -1.0, 0.0),
                        rho_floor=rho_floor, limiter=True,
                        momentum_average=2)
    dz = 0.5 / counts[0]
    box = ((0.0, 0.5), (0.0, 4.0), (0.0, dz))
    tags = {"x-": "free-slip", "x+": "free-slip",
            "y-": "no-slip", "y+": "no-slip"}
    return CaseSpec(
        name="rti",
        params=params,
        scheme=SchemeConfig(volume="split", interface="riemann",
                            wall_inviscid=wall_inviscid),
        step=StepControl(fixed_dt=dt, t_final=t_final),
        build_mesh=lambda: build_cartesian_mesh(
            counts, box, order=order, periodic=(False, False, True),
            boundary_tags=tags),
        initial=rti_initial,
    )


CASE_BUILDERS = {
    "manufactured": manufactured_case,
    "kovasznay": kovasznay_case,
    "tgv": tgv_case,
    "rti": rti_case,
}
