"""Batch run machinery: march a case, emit traces, snapshots, a summary.

Reruns with an identical configuration produce bit-identical CSV output:
every reduction happens in a fixed order and floats are written with
shortest round-trip formatting.
"""

import json
import os
import time

import numpy as np

from . import diagnostics, kernels, physics
from .dg_core import DGSolver, SolverDivergedError
from .time_integration import compute_dt, rk3_step


class RunResult:
    def __init__(self, summary, trace_path=None, summary_path=None):
        self.summary = summary
        self.trace_path = trace_path
        self.summary_path = summary_path

    @property
    def ok(self):
        return self.summary.get("diverged") is None


def _fmt(x):
    return repr(float(x))


class TraceWriter:
    def __init__(self, path, with_errors, with_instrumentation):
        self.fh = open(path, "w")
        cols = ["t", "E_total", "dEdt", "residual"]
        if with_errors:
            cols += ["err_rho", "err_rhou", "err_rhov", "err_rhow", "err_p"]
        if with_instrumentation:
            cols += ["ibt_e", "ibt_v", "pbt_e", "pbt_v"]
        self.fh.write(",".join(cols) + "\n")

    def row(self, values):
        self.fh.write(",".join(_fmt(v) for v in values) + "\n")

    def close(self):
        self.fh.close()


def write_vtk_snapshot(path, mesh, q, params):
    """Legacy ASCII VTK unstructured grid: each element is split into its
    (N)^3 nodal sub-hexahedra; point data are rho, u, v, w, p."""
    np1 = mesh.order + 1
    pts = mesh.x.reshape(-1, 3)
    u = physics.velocity(q, params).reshape(-1, 3)
    rho = np.asarray(q)[..., 0].reshape(-1)
    p = np.asarray(q)[..., 4].reshape(-1)

    ncell_e = (np1 - 1) ** 3
    ncells = mesh.ne * ncell_e
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("acdgsem snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {pts.shape[0]} double\n")
        for pt in pts:
            fh.write(f"{pt[0]:.12g} {pt[1]:.12g} {pt[2]:.12g}\n")
        fh.write(f"CELLS {ncells} {9 * ncells}\n")
        for e in range(mesh.ne):
            base = e * np1**3

            def nid(i, j, k):
                return base + (i * np1 + j) * np1 + k

            for i in range(np1 - 1):
                for j in range(np1 - 1):
                    for k in range(np1 - 1):
                        corners = (nid(i, j, k), nid(i + 1, j, k),
                                   nid(i + 1, j + 1, k), nid(i, j + 1, k),
                                   nid(i, j, k + 1), nid(i + 1, j, k + 1),
                                   nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1))
                        fh.write("8 " + " ".join(str(c) for c in corners) + "\n")
        fh.write(f"CELL_TYPES {ncells}\n")
        fh.write("\n".join(["12"] * ncells) + "\n")
        fh.write(f"POINT_DATA {pts.shape[0]}\n")
        for name, arr in (("rho", rho), ("u", u[:, 0]), ("v", u[:, 1]),
                          ("w", u[:, 2]), ("p", p)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(f"{v:.12g}" for v in arr) + "\n")


def run_case(case, output_dir=None, cadence_steps=100, snapshot_times=(),
             instrument=False, label=None, progress=None):
    """March a CaseSpec to its stopping point.

    Writes <label>_trace.csv, optional snapshots and <label>_summary.json
    into output_dir (created if needed) when it is given; always returns
    a RunResult with the summary dict.  A non-finite state aborts the run
    and records the failing (step, element, node) instead of raising.
    """
    label = label or case.name
    mesh = case.build_mesh()
    params = case.params
    solver = DGSolver(mesh, params, case.scheme, source=case.source,
                      dirichlet=case.dirichlet)
    q = np.ascontiguousarray(case.initial(mesh.x))
    kreg = np.zeros_like(q)
    ctrl = case.step

    trace = None
    trace_path = summary_path = None
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        trace_path = os.path.join(output_dir, f"{label}_trace.csv")
        trace = TraceWriter(trace_path, case.exact is not None, instrument)
    snapshots = sorted(snapshot_times)
    next_snap = 0

    t = 0.0
    step = 0
    start = time.perf_counter()
    mass0 = diagnostics.total_mass(q, mesh)
    limiter_activations = 0
    max_dedt = -np.inf
    max_abs_dedt = 0.0
    diverged = None
    residual = np.inf

    def observe():
        nonlocal max_dedt, max_abs_dedt, residual
        dqdt = solver.rhs(q, t)
        residual = float(np.max(np.abs(dqdt)))
        e_tot = diagnostics.total_entropy(q, mesh, params)
        dedt = diagnostics.entropy_rate(q, dqdt, mesh, params)
        max_dedt = max(max_dedt, dedt)
        max_abs_dedt = max(max_abs_dedt, abs(dedt))
        row = [t, e_tot, dedt, residual]
        if case.exact is not None:
            row += list(diagnostics.l2_error(q, case.exact, mesh, t))
        if instrument:
            row += list(diagnostics.face_entropy_terms(solver, q, t))
        if trace is not None:
            trace.row(row)
        return e_tot

    e_tot = observe()
    try:
        while t < ctrl.t_final - 1e-12 and step < ctrl.max_steps:
            if ctrl.fixed_dt is not None:
                dt = ctrl.fixed_dt
            else:
                dt = compute_dt(q, mesh, params, ctrl.cfl)
            dt = min(dt, ctrl.t_final - t)
            rk3_step(q, solver.rhs, t, dt, kreg)
            t += dt
            step += 1
            if not np.isfinite(np.sum(q)):
                solver.check_finite(q, step)
            if params.limiter:
                limiter_activations += int(kernels.count_below(
                    q.reshape(-1, 5), params.rho_floor))
            at_end = t >= ctrl.t_final - 1e-12 or step >= ctrl.max_steps
            if step % cadence_steps == 0 or at_end:
                e_tot = observe()
                if progress is not None:
                    progress(step, t, residual)
                if (ctrl.residual_target is not None
                        and residual <= ctrl.residual_target):
                    break
            while (next_snap < len(snapshots) and t >= snapshots[next_snap]
                   and output_dir is not None):
                snap_path = os.path.join(
                    output_dir, f"{label}_t{snapshots[next_snap]:g}.vtk")
                write_vtk_snapshot(snap_path, mesh, q, params)
                next_snap += 1
    except SolverDivergedError as exc:
        diverged = {"step": exc.step, "element": exc.element,
                    "node": list(exc.node)}
    wall = time.perf_counter() - start
    if trace is not None:
        trace.close()

    mass1 = diagnostics.total_mass(q, mesh)
    summary = {
        "case": case.name,
        "label": label,
        "order": mesh.order,
        "elements": mesh.ne,
        "steps": step,
        "t_final": t,
        "wall_clock_s": wall,
        "E_final": e_tot,
        "max_dEdt": None if max_dedt == -np.inf else max_dedt,
        "max_abs_dEdt": max_abs_dedt,
        "residual": residual,
        "mass_initial": mass0,
        "mass_final": mass1,
        "mass_drift_rel": abs(mass1 - mass0) / abs(mass0) if mass0 else 0.0,
        "limiter_activations": limiter_activations,
        "diverged": diverged,
    }
    if case.exact is not None and diverged is None:
        summary["final_errors"] = [float(v) for v in
                                   diagnostics.l2_error(q, case.exact, mesh, t)]
    if output_dir is not None:
        summary_path = os.path.join(output_dir, f"{label}_summary.json")
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2)
    result = RunResult(summary, trace_path, summary_path)
    result.q = q
    result.mesh = mesh
    return result
