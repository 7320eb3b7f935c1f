"""Explicit low-storage RK3 marching and CFL step-size control."""

from dataclasses import dataclass

import numpy as np

from . import kernels, physics

# Williamson 2N-register coefficients, third order, three stages.
RK3_A = (0.0, -5.0 / 9.0, -153.0 / 128.0)
RK3_B = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)
RK3_C = (0.0, 1.0 / 3.0, 3.0 / 4.0)


@dataclass(frozen=True)
class StepControl:
    """Either a CFL number or a fixed step; marching stops at t_final,
    max_steps, or (when set) a steady residual threshold."""

    cfl: float | None = None
    fixed_dt: float | None = None
    t_final: float = 1.0
    max_steps: int = 10_000_000
    residual_target: float | None = None

    def __post_init__(self):
        if (self.cfl is None) == (self.fixed_dt is None):
            raise ValueError("exactly one of cfl / fixed_dt must be set")
        if self.cfl is not None and not self.cfl > 0:
            raise ValueError("cfl must be positive")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError("fixed_dt must be positive")


def rk3_step(q, rhs, t, dt, kreg=None):
    """Advance q in place by one RK3 step; returns the stage register.

    q must be a C-contiguous float64 array; rhs(q, t) may return a shared
    buffer since each stage consumes it immediately.
    """
    if kreg is None:
        kreg = np.zeros_like(q)
    qflat = q.reshape(-1)
    kflat = kreg.reshape(-1)
    for a, b, c in zip(RK3_A, RK3_B, RK3_C):
        r = rhs(q, t + c * dt)
        kernels.rk_stage_update(kflat, np.asarray(r, dtype=float).reshape(-1),
                                qflat, a, b, dt)
    return kreg


def max_wave_speeds(q, params):
    """Directional wave speed |u_d| + sqrt(u_d^2 + 4/(M0^2 rho)) per node."""
    q = np.asarray(q, dtype=float)
    u = physics.velocity(q, params)
    rho = physics.limited_density(q[..., 0], params)
    a = np.sqrt(u * u + (4.0 / (params.m0sq * rho))[..., None])
    return np.abs(u) + a


def compute_dt(q, mesh, params, cfl):
    """CFL step: cfl * min over nodes and directions of
    (element extent / (N+1)) / wave speed."""
    speeds = max_wave_speeds(q, params)  # (ne, Np, Np, Np, 3)
    h = mesh.extents / (mesh.order + 1)  # (ne, 3)
    ratio = h[:, None, None, None, :] / speeds
    return float(cfl * ratio.min())
