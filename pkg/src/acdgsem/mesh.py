"""Curvilinear hexahedral meshes for the tensor-product DG discretization.

Each element carries the physical coordinates of its (N+1)^3 Lobatto
geometry nodes (isoparametric, same order as the solution), the volume
weighted contravariant basis vectors Ja^d computed in curl form, and the
mapping Jacobian.  The curl form guarantees the discrete metric identities
sum_d D_d (Ja^d) = 0 to round-off on any nodal geometry, which is what
makes constant states exact steady solutions on curved grids.

Face connectivity is recovered from coincident geometry nodes, so any
conforming mesh (including periodic wrap-around and all eight face
orientations) is handled by the same code path.  Normals and face
Jacobians are taken from the left element of each pair; conforming faces
make this a pure convention.
"""

import numpy as np
from scipy.spatial import cKDTree

from .basis import build_ops

BTYPE_INTERIOR = 0
BTYPE_FREE_SLIP = 1
BTYPE_NO_SLIP = 2
BTYPE_DIRICHLET = 3

BTYPE_NAMES = {
    "free-slip": BTYPE_FREE_SLIP,
    "no-slip": BTYPE_NO_SLIP,
    "dirichlet": BTYPE_DIRICHLET,
}
BTYPE_TAGS = {v: k for k, v in BTYPE_NAMES.items()}


class MeshQualityError(RuntimeError):
    pass


def apply_deriv(arr, d, axis):
    """Contract the derivative matrix along one reference axis of arr."""
    return np.moveaxis(np.tensordot(d, arr, axes=([1], [axis])), 0, axis)


def compute_metrics_curl_form(x, ops):
    """Metric terms Ja^d and Jacobian J from nodal geometry.

    x has shape (ne, Np, Np, Np, 3).  Returns (ja, jac) with
    ja[..., d, n] the n-th Cartesian component of Ja^d and jac > 0.
    For Cartesian component n the curl form takes the interpolant of
    X_l grad_xi(X_m), (n, m, l) cyclic, and sets Ja^d_n to minus the d-th
    component of its reference-space curl.  A nonpositive Jacobian raises
    MeshQualityError.
    """
    x = np.asarray(x, dtype=float)
    d = ops.deriv
    cov = [apply_deriv(x, d, ax + 1) for ax in range(3)]  # cov[d] = dX/dxi_d

    ja = np.empty(x.shape[:-1] + (3, 3))
    for n in range(3):
        m = (n + 1) % 3
        l = (n + 2) % 3
        v = [x[..., l] * cov[ax][..., m] for ax in range(3)]
        curl = (
            apply_deriv(v[2], d, 2) - apply_deriv(v[1], d, 3),
            apply_deriv(v[0], d, 3) - apply_deriv(v[2], d, 1),
            apply_deriv(v[1], d, 1) - apply_deriv(v[0], d, 2),
        )
        for ax in range(3):
            ja[..., ax, n] = -curl[ax]

    jac = np.einsum("...i,...i->...", cov[0], np.cross(cov[1], cov[2]))
    if np.any(jac <= 0.0):
        raise MeshQualityError(
            f"nonpositive mapping Jacobian (min {jac.min():.3e})")

    resid = sum(apply_deriv(ja[..., ax, :], d, ax + 1) for ax in range(3))
    scale = max(1.0, np.max(np.abs(ja)))
    worst = np.max(np.abs(resid)) / scale
    if worst > 1e-12:
        raise MeshQualityError(f"metric identity residual {worst:.3e} > 1e-12")
    return ja, jac


def _face_axes(face):
    """(normal axis, tangential axes, side) of a local face id 0..5."""
    d = face // 2
    side = face % 2
    tang = [ax for ax in range(3) if ax != d]
    return d, tang, side


def face_node_indices(order, face):
    """Flat node indices (Np, Np) of a local face, C-order (i*Np + j)*Np + k."""
    np1 = order + 1
    idx3 = np.arange(np1**3).reshape(np1, np1, np1)
    d, tang, side = _face_axes(face)
    sl = [slice(None)] * 3
    sl[d] = -1 if side else 0
    out = idx3[tuple(sl)]
    return np.ascontiguousarray(out)


class Mesh:
    """Conforming hexahedral mesh with precomputed face coupling data.

    Attributes (ne elements, Np = order+1 nodes per direction, nf faces):
      x          (ne, Np, Np, Np, 3) geometry nodes
      ja         (ne, Np, Np, Np, 3, 3) contravariant metric vectors
      jac        (ne, Np, Np, Np) mapping Jacobian
      extents    (ne, 3) per-direction element size (affine estimate)
      face_elem_l/r, face_face_l/r, face_btype   (nf,) int arrays
      face_idx_l/r  (nf, Np, Np) flat node indices into each side
      face_normal/t1/t2  (nf, Np, Np, 3), face_jac (nf, Np, Np)
      face_coord (nf, Np, Np, 3) physical face node coordinates

    Immutable after construction; all solver phases share it read-only.
    """

    def __init__(self, ops, x, boundary_tags=None, periodic=(False,) * 3,
                 bbox=None):
        self.ops = ops
        self.order = ops.order
        self.x = np.ascontiguousarray(x, dtype=float)
        self.ne = self.x.shape[0]
        self.periodic = tuple(bool(p) for p in periodic)
        if bbox is None:
            lo = self.x.reshape(-1, 3).min(axis=0)
            hi = self.x.reshape(-1, 3).max(axis=0)
            bbox = np.array([lo, hi])
        self.bbox = np.asarray(bbox, dtype=float)
        self.ja, self.jac = compute_metrics_curl_form(self.x, ops)
        self._compute_extents()
        self._build_faces(boundary_tags or {})

    # -- construction helpers -------------------------------------------

    def _compute_extents(self):
        n = self.order
        corners = self.x[:, ::n, ::n, ::n, :]  # (ne, 2, 2, 2, 3)
        ext = np.empty((self.ne, 3))
        ext[:, 0] = np.linalg.norm(
            corners[:, 1] - corners[:, 0], axis=-1).mean(axis=(1, 2))
        ext[:, 1] = np.linalg.norm(
            corners[:, :, 1] - corners[:, :, 0], axis=-1).mean(axis=(1, 2))
        ext[:, 2] = np.linalg.norm(
            corners[:, :, :, 1] - corners[:, :, :, 0], axis=-1).mean(axis=(1, 2))
        self.extents = ext

    def _build_faces(self, boundary_tags):
        ne, np1 = self.ne, self.order + 1
        xflat = self.x.reshape(ne, np1**3, 3)
        scale = max(1.0, np.max(np.abs(self.bbox)))
        match_tol = 1e-9 * scale

        fidx = [face_node_indices(self.order, f) for f in range(6)]
        centroids = np.empty((ne * 6, 3))
        for f in range(6):
            coords = xflat[:, fidx[f].ravel(), :]
            centroids[f::6] = coords.mean(axis=1)
        # slot s = 6*e + f; matching centroids coincide to round-off, the
        # nearest distinct ones are half an element apart
        pair_tol = 1e-7 * scale

        tree = cKDTree(centroids)
        partner = np.full(ne * 6, -1, dtype=np.int64)
        shift = np.zeros((ne * 6, 3))
        for i, j in tree.query_pairs(pair_tol):
            if partner[i] != -1 or partner[j] != -1:
                raise MeshQualityError("ambiguous face match; mesh not conforming")
            partner[i], partner[j] = j, i

        period = self.bbox[1] - self.bbox[0]
        for ax in range(3):
            if not self.periodic[ax]:
                continue
            free = np.nonzero(partner == -1)[0]
            if free.size == 0:
                continue
            sub = cKDTree(centroids[free])
            moved = centroids[free].copy()
            moved[:, ax] -= period[ax]
            dist, j = sub.query(moved, distance_upper_bound=pair_tol)
            for a, (dd, b) in enumerate(zip(dist, j)):
                i_slot, j_slot = free[a], free[b] if np.isfinite(dd) else -1
                if not np.isfinite(dd) or i_slot == j_slot:
                    continue
                if partner[i_slot] != -1:
                    continue
                partner[i_slot], partner[j_slot] = j_slot, i_slot
                shift[i_slot, ax] = -period[ax]
                shift[j_slot, ax] = +period[ax]

        tag_map = {}
        for key, name in boundary_tags.items():
            tag_map[key] = BTYPE_NAMES[name]

        faces = []
        seen = np.zeros(ne * 6, dtype=bool)
        for s in range(ne * 6):
            if seen[s]:
                continue
            e, f = divmod(s, 6)
            if partner[s] == -1:
                if (e, f) not in tag_map:
                    raise MeshQualityError(
                        f"element {e} face {f} has no neighbor and no boundary tag")
                faces.append((e, f, -1, -1, tag_map[(e, f)], np.zeros(3)))
                seen[s] = True
            else:
                e2, f2 = divmod(int(partner[s]), 6)
                if (e, f) in tag_map or (e2, f2) in tag_map:
                    raise MeshQualityError(
                        f"boundary tag on matched face ({e},{f})/({e2},{f2})")
                faces.append((e, f, e2, f2, BTYPE_INTERIOR, shift[partner[s]]))
                seen[s] = True
                seen[partner[s]] = True

        # color faces so no two faces of one color touch the same element;
        # face kernels then parallelize within each color without write
        # conflicts (results stay independent of the thread count)
        elem_face_colors = [[] for _ in range(ne)]
        colors = []
        for e, f, e2, f2, btype, shf in faces:
            used = set(elem_face_colors[e])
            if e2 >= 0:
                used |= set(elem_face_colors[e2])
            c = 0
            while c in used:
                c += 1
            colors.append(c)
            elem_face_colors[e].append(c)
            if e2 >= 0 and e2 != e:
                elem_face_colors[e2].append(c)
        perm = sorted(range(len(faces)), key=lambda i: (colors[i], i))
        faces = [faces[i] for i in perm]
        colors = [colors[i] for i in perm]
        ncolors = (max(colors) + 1) if colors else 0
        starts = [0] * (ncolors + 1)
        for c in colors:
            starts[c + 1] += 1
        self.face_color_starts = np.cumsum(starts).astype(np.int64)

        nf = len(faces)
        self.nf = nf
        self.face_elem_l = np.array([rec[0] for rec in faces], dtype=np.int32)
        self.face_face_l = np.array([rec[1] for rec in faces], dtype=np.int32)
        self.face_elem_r = np.array([rec[2] for rec in faces], dtype=np.int32)
        self.face_face_r = np.array([rec[3] for rec in faces], dtype=np.int32)
        self.face_btype = np.array([rec[4] for rec in faces], dtype=np.int32)

        self.face_idx_l = np.empty((nf, np1, np1), dtype=np.int32)
        self.face_idx_r = np.empty((nf, np1, np1), dtype=np.int32)
        self.face_normal = np.empty((nf, np1, np1, 3))
        self.face_t1 = np.empty((nf, np1, np1, 3))
        self.face_t2 = np.empty((nf, np1, np1, 3))
        self.face_jac = np.empty((nf, np1, np1))
        self.face_coord = np.empty((nf, np1, np1, 3))

        from .riemann import face_frame

        jaflat = self.ja.reshape(ne, np1**3, 3, 3)
        for rec_i, (e, f, e2, f2, btype, shf) in enumerate(faces):
            idx_l = fidx[f]
            self.face_idx_l[rec_i] = idx_l
            coords_l = xflat[e, idx_l.ravel(), :]
            self.face_coord[rec_i] = coords_l.reshape(np1, np1, 3)

            d, _, side = _face_axes(f)
            sign = 1.0 if side else -1.0
            ja_face = jaflat[e, idx_l.ravel(), d, :]
            norm = np.linalg.norm(ja_face, axis=-1)
            nvec = sign * ja_face / norm[:, None]
            self.face_normal[rec_i] = nvec.reshape(np1, np1, 3)
            self.face_jac[rec_i] = norm.reshape(np1, np1)
            t1, t2 = face_frame(nvec)
            self.face_t1[rec_i] = t1.reshape(np1, np1, 3)
            self.face_t2[rec_i] = t2.reshape(np1, np1, 3)

            if btype != BTYPE_INTERIOR:
                self.face_idx_r[rec_i] = idx_l
                continue
            idx_r = fidx[f2].ravel()
            coords_r = xflat[e2, idx_r, :] + shf
            dist = np.linalg.norm(
                coords_l[:, None, :] - coords_r[None, :, :], axis=-1)
            match = np.argmin(dist, axis=1)
            if np.max(dist[np.arange(match.size), match]) > match_tol:
                raise MeshQualityError(
                    f"face nodes of elements {e}/{e2} do not coincide")
            if len(set(match.tolist())) != match.size:
                raise MeshQualityError("degenerate face node matching")
            self.face_idx_r[rec_i] = idx_r[match].reshape(np1, np1)

    # -- queries ----------------------------------------------------------

    def total_volume(self):
        w = self.ops.weights
        w3 = w[:, None, None] * w[None, :, None] * w[None, None, :]
        return float(np.sum(w3[None] * self.jac))

    def boundary_faces(self):
        return np.nonzero(self.face_btype != BTYPE_INTERIOR)[0]


def _structured_corners(counts, box):
    nx, ny, nz = counts
    (x0, x1), (y0, y1), (z0, z1) = box
    if not (x1 > x0 and y1 > y0 and z1 > z0):
        raise ValueError("degenerate box extents")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    zs = np.linspace(z0, z1, nz + 1)
    return xs, ys, zs


def _structured_tags(counts, periodic, tags):
    """Boundary tag map for a structured grid; tags keyed 'x-','x+',...,'z+'."""
    nx, ny, nz = counts
    names = {}
    planes = {"x-": (0, 0), "x+": (0, 1), "y-": (1, 0), "y+": (1, 1),
              "z-": (2, 0), "z+": (2, 1)}
    lims = {0: nx - 1, 1: ny - 1, 2: nz - 1}
    for key, (ax, side) in planes.items():
        if periodic[ax]:
            continue
        name = tags.get(key, "dirichlet")
        for ez in range(nz):
            for ey in range(ny):
                for ex in range(nx):
                    eidx = (ex, ey, ez)[ax]
                    if (side == 0 and eidx == 0) or (side == 1 and eidx == lims[ax]):
                        e = ex + nx * (ey + ny * ez)
                        names[(e, 2 * ax + side)] = name
    return names


def build_cartesian_mesh(counts, box, periodic=(True, True, True), order=4,
                         boundary_tags=None, warp=None):
    """Structured hexahedral mesh of a box, optionally smoothly warped.

    counts is (nx, ny, nz), box is ((x0,x1),(y0,y1),(z0,z1)).  Non-periodic
    planes take their tag from boundary_tags ('x-', 'x+', ..), defaulting
    to 'dirichlet'.  warp, when given, is a smooth map applied to the
    affine geometry nodes; shared faces sample identical points from both
    sides so the mesh stays conforming.
    """
    counts = tuple(int(c) for c in counts)
    if min(counts) < 1:
        raise ValueError("element counts must be >= 1 per axis")
    ops = build_ops(order)
    xs, ys, zs = _structured_corners(counts, box)
    np1 = order + 1
    ref = 0.5 * (ops.nodes + 1.0)

    nx, ny, nz = counts
    ne = nx * ny * nz
    x = np.empty((ne, np1, np1, np1, 3))
    for ez in range(nz):
        for ey in range(ny):
            for ex in range(nx):
                e = ex + nx * (ey + ny * ez)
                gx = xs[ex] + (xs[ex + 1] - xs[ex]) * ref
                gy = ys[ey] + (ys[ey + 1] - ys[ey]) * ref
                gz = zs[ez] + (zs[ez + 1] - zs[ez]) * ref
                x[e, ..., 0] = gx[:, None, None]
                x[e, ..., 1] = gy[None, :, None]
                x[e, ..., 2] = gz[None, None, :]
    if warp is not None:
        x = warp(x)
    bbox = np.array([[xs[0], ys[0], zs[0]], [xs[-1], ys[-1], zs[-1]]])
    tags = _structured_tags(counts, periodic, boundary_tags or {})
    return Mesh(ops, x, boundary_tags=tags, periodic=periodic, bbox=bbox)


def build_curved_box_mesh(counts, box, periodic=(True, True, True), order=4,
                          boundary_tags=None, amplitude=0.03):
    """Box mesh with a sinusoidal interior perturbation.

    The warp is proportional to sin(2 pi xh) sin(2 pi yh) sin(2 pi zh) in
    normalized coordinates, so it vanishes on the entire outer boundary:
    the domain shape and any periodic pairing are untouched while every
    interior face is genuinely curved.
    """
    (x0, x1), (y0, y1), (z0, z1) = box
    lo = np.array([x0, y0, z0])
    span = np.array([x1 - x0, y1 - y0, z1 - z0])

    def warp(x):
        xh = (x - lo) / span
        bump = np.sin(2 * np.pi * xh[..., 0]) * np.sin(2 * np.pi * xh[..., 1]) \
            * np.sin(2 * np.pi * xh[..., 2])
        return x + amplitude * span * bump[..., None]

    return build_cartesian_mesh(counts, box, periodic=periodic, order=order,
                                boundary_tags=boundary_tags, warp=warp)


# -- mesh file round trip -------------------------------------------------

_CORNER_BITS = [(cx, cy, cz) for cz in (0, 1) for cy in (0, 1) for cx in (0, 1)]


def write_mesh_file(mesh, path):
    """Line-oriented text dump: header, 8 corner records per element,
    boundary tag records.  Interior connectivity is recomputed on load."""
    n = mesh.order
    with open(path, "w") as fh:
        fh.write("acdgsem-mesh 1\n")
        fh.write(f"order {mesh.order}\n")
        fh.write(f"elements {mesh.ne}\n")
        b = mesh.bbox
        fh.write("box " + " ".join(f"{v!r}" for v in
                                   (b[0, 0], b[1, 0], b[0, 1], b[1, 1],
                                    b[0, 2], b[1, 2])) + "\n")
        fh.write("periodic " + " ".join(str(int(p)) for p in mesh.periodic) + "\n")
        for e in range(mesh.ne):
            fh.write(f"element {e}\n")
            for cx, cy, cz in _CORNER_BITS:
                pt = mesh.x[e, cx * n, cy * n, cz * n]
                fh.write(f"{pt[0]!r} {pt[1]!r} {pt[2]!r}\n")
        for fi in mesh.boundary_faces():
            tag = BTYPE_TAGS[int(mesh.face_btype[fi])]
            fh.write(f"boundary {mesh.face_elem_l[fi]} {mesh.face_face_l[fi]} {tag}\n")
        fh.write("end\n")


def read_mesh_file(path):
    """Rebuild a Mesh from write_mesh_file output (trilinear geometry)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    it = iter(lines)

    def expect(keyword):
        ln = next(it)
        parts = ln.split()
        if parts[0] != keyword:
            raise ValueError(f"mesh file: expected {keyword!r}, got {ln!r}")
        return parts[1:]

    if next(it) != "acdgsem-mesh 1":
        raise ValueError("mesh file: bad magic line")
    order = int(expect("order")[0])
    ne = int(expect("elements")[0])
    bv = [float(v) for v in expect("box")]
    bbox = np.array([[bv[0], bv[2], bv[4]], [bv[1], bv[3], bv[5]]])
    periodic = tuple(bool(int(v)) for v in expect("periodic"))

    ops = build_ops(order)
    np1 = order + 1
    ref = 0.5 * (ops.nodes + 1.0)
    x = np.empty((ne, np1, np1, np1, 3))
    tags = {}
    for _ in range(ne):
        e = int(expect("element")[0])
        corners = np.array([[float(v) for v in next(it).split()] for _ in range(8)])
        c = corners.reshape(2, 2, 2, 3)  # indexed [cz, cy, cx]
        rx = ref[:, None, None, None]
        ry = ref[None, :, None, None]
        rz = ref[None, None, :, None]
        x[e] = ((1 - rx) * (1 - ry) * (1 - rz) * c[0, 0, 0]
                + rx * (1 - ry) * (1 - rz) * c[0, 0, 1]
                + (1 - rx) * ry * (1 - rz) * c[0, 1, 0]
                + rx * ry * (1 - rz) * c[0, 1, 1]
                + (1 - rx) * (1 - ry) * rz * c[1, 0, 0]
                + rx * (1 - ry) * rz * c[1, 0, 1]
                + (1 - rx) * ry * rz * c[1, 1, 0]
                + rx * ry * rz * c[1, 1, 1])
    for ln in it:
        if ln == "end":
            break
        parts = ln.split()
        if parts[0] != "boundary":
            raise ValueError(f"mesh file: unexpected record {ln!r}")
        tags[(int(parts[1]), int(parts[2]))] = parts[3]
    return Mesh(ops, x, boundary_tags=tags, periodic=periodic, bbox=bbox)
