"""Small-strain tetrahedral finite elements.

Meshes carry straight-sided P1 (4-node) or P2 (10-node) tetrahedra.
Strain-displacement operators follow the Voigt convention of
:mod:`hwdd.tensor_lab` (engineering shear strains).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

# P2 edge nodes 4..9 sit on these vertex pairs
P2_EDGES = ((0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3))
_TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


class MeshError(ValueError):
    pass


class SingularSystemError(RuntimeError):
    pass


@dataclass
class Mesh:
    nodes: np.ndarray  # (n, 3) coordinates in m
    elements: np.ndarray  # (m, 4) or (m, 10) connectivity
    order: int = 1
    name: str = "mesh"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64)
        expected = {1: 4, 2: 10}.get(self.order)
        if expected is None:
            raise MeshError(f"unsupported element order {self.order}")
        if self.elements.ndim != 2 or self.elements.shape[1] != expected:
            raise MeshError(f"order {self.order} elements need {expected} nodes each")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise MeshError("connectivity index out of range")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_dofs(self):
        return 3 * len(self.nodes)

    def volumes(self):
        return tet_volumes(self.nodes, self.elements[:, :4])


def tet_volumes(nodes, tets):
    x = nodes[tets]
    return np.linalg.det(x[:, 1:] - x[:, :1]) / 6.0


def _orient(nodes, tets):
    vol = tet_volumes(nodes, tets)
    tets = tets.copy()
    neg = vol < 0
    tets[neg, 1], tets[neg, 2] = tets[neg, 2], tets[neg, 1].copy()
    return tets


def _kuhn_tets():
    # six tets of the unit cube along paths 000 -> 111; vertex id = i + 2j + 4k
    out = []
    for perm in permutations(range(3)):
        bits = [0, 0, 0]
        path = [0]
        for ax in perm:
            bits[ax] = 1
            path.append(bits[0] + 2 * bits[1] + 4 * bits[2])
        out.append(path)
    return np.array(out)


def _hexes_to_tets(nodes, index):
    """Split a structured block ``index[i, j, k] -> node id`` into conforming tets."""
    ni, nj, nk = (s - 1 for s in index.shape)
    kuhn = _kuhn_tets()
    tets = []
    for i in range(ni):
        for j in range(nj):
            for k in range(nk):
                corner = np.array(
                    [index[i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1)] for v in range(8)]
                )
                tets.append(corner[kuhn])
    tets = np.concatenate(tets)
    return _orient(nodes, tets)


def unit_cube_mesh(nx=1, ny=1, nz=1, lengths=(1.0, 1.0, 1.0), order=1):
    """Box ``[0, lx] x [0, ly] x [0, lz]`` split into ``6 nx ny nz`` tets."""
    if min(nx, ny, nz) < 1:
        raise MeshError("divisions must be >= 1")
    xs = [np.linspace(0.0, L, n + 1) for L, n in zip(lengths, (nx, ny, nz))]
    X, Y, Z = np.meshgrid(*xs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    index = np.arange(len(nodes)).reshape(nx + 1, ny + 1, nz + 1)
    mesh = Mesh(nodes, _hexes_to_tets(nodes, index), 1, f"cube_{nx}x{ny}x{nz}")
    return elevate_to_p2(mesh) if order == 2 else mesh


def quarter_plate_mesh(a=5.0, b=5.0, c=2.0, r=1.0, n_theta=4, n_r=5, n_z=2, order=1):
    """Quarter of a plate with a central hole: ``[0,a] x [0,b] x [0,c]`` minus ``x^2 + y^2 < r^2``.

    Symmetry faces lie at ``x = 0``, ``y = 0`` and ``z = 0``. ``n_theta`` is
    the number of angular divisions per 45 degree block.
    """
    if r <= 0 or r >= min(a, b):
        raise MeshError(f"hole radius r={r} must satisfy 0 < r < min(a, b)")
    if min(n_theta, n_r, n_z) < 1:
        raise MeshError("divisions must be >= 1")
    n_ang = 2 * n_theta
    pts2 = np.empty((n_ang + 1, n_r + 1, 2))
    for i in range(n_ang + 1):
        phi = 0.5 * np.pi * i / n_ang
        inner = r * np.array([np.cos(phi), np.sin(phi)])
        if i <= n_theta:
            outer = np.array([a, b * i / n_theta])
        else:
            outer = np.array([a * (1.0 - (i - n_theta) / n_theta), b])
        for j in range(n_r + 1):
            pts2[i, j] = inner + (j / n_r) * (outer - inner)
    zs = np.linspace(0.0, c, n_z + 1)
    nodes = np.array([[p[0], p[1], z] for p in pts2.reshape(-1, 2) for z in zs])
    index = np.arange(len(nodes)).reshape(n_ang + 1, n_r + 1, n_z + 1)
    name = f"plate_a{a:g}_b{b:g}_c{c:g}_r{r:g}_{n_theta}x{n_r}x{n_z}"
    mesh = Mesh(nodes, _hexes_to_tets(nodes, index), 1, name)
    return elevate_to_p2(mesh) if order == 2 else mesh


def single_tet_mesh(order=1):
    """Corner tetrahedron ``(0,0,0), (1,0,0), (0,1,0), (0,0,1)``."""
    nodes = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    mesh = Mesh(nodes, np.array([[0, 1, 2, 3]]), 1, "tet")
    return elevate_to_p2(mesh) if order == 2 else mesh


def elevate_to_p2(mesh):
    """Add mid-edge nodes to a P1 mesh (straight-sided P2)."""
    if mesh.order == 2:
        return mesh
    nodes = [*mesh.nodes]
    edge_id = {}
    conn = []
    for tet in mesh.elements:
        row = list(tet)
        for a, b in P2_EDGES:
            key = (min(tet[a], tet[b]), max(tet[a], tet[b]))
            if key not in edge_id:
                edge_id[key] = len(nodes)
                nodes.append(0.5 * (mesh.nodes[key[0]] + mesh.nodes[key[1]]))
            row.append(edge_id[key])
        conn.append(row)
    return Mesh(np.array(nodes), np.array(conn), 2, mesh.name + "_p2")


def generate_mesh(spec):
    """Build a mesh from a dict spec with ``kind`` in ``{"cube", "plate", "tet"}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "cube":
        return unit_cube_mesh(**spec)
    if kind == "plate":
        return quarter_plate_mesh(**spec)
    if kind == "tet":
        return single_tet_mesh(**spec)
    raise MeshError(f"unknown mesh kind {kind!r}")


def write_mesh(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} elements {len(mesh.elements)} order {mesh.order}\n")
        for x in mesh.nodes:
            fh.write(" ".join(repr(float(v)) for v in x) + "\n")
        for e in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in e) + "\n")


def read_mesh(path):
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "nodes" or head[2] != "elements" or head[4] != "order":
        raise MeshError(f"{path}: bad header {lines[0]!r}")
    n, m, order = int(head[1]), int(head[3]), int(head[5])
    nodes = np.array([[float(v) for v in lines[1 + i].split()] for i in range(n)])
    elems = np.array([[int(v) for v in lines[1 + n + i].split()] for i in range(m)])
    return Mesh(nodes.reshape(n, 3), elems, order, Path(path).stem)


# --------------------------------------------------------------------------
# integration points


@dataclass
class IntegrationPoints:
    """Columnar integration-point data: one row per quadrature point."""

    element: np.ndarray  # (q,)
    local: np.ndarray  # (q,)
    weight: np.ndarray  # (q,) includes the Jacobian, m^3
    B: np.ndarray  # (q, 6, nde)
    dofs: np.ndarray  # (q, nde)
    n_dofs: int

    def __len__(self):
        return len(self.weight)

    def strain(self, u):
        """Voigt strains ``B u`` at every point, shape ``(q, 6)``."""
        return np.einsum("qai,qi->qa", self.B, np.asarray(u)[self.dofs])

    def internal_force(self, sigma):
        """``sum_e w_e B_e^T sigma_e`` for Voigt stresses ``(q, 6)``."""
        fe = np.einsum("q,qai,qa->qi", self.weight, self.B, sigma)
        return np.bincount(self.dofs.ravel(), fe.ravel(), minlength=self.n_dofs)


_P2_RULE_A = 0.5854101966249685
_P2_RULE_B = 0.1381966011250105


def _b_from_gradients(grads):
    """Voigt B rows from shape-function gradients ``(..., nn, 3)``."""
    nn = grads.shape[-2]
    B = np.zeros(grads.shape[:-2] + (6, 3 * nn))
    gx, gy, gz = grads[..., 0], grads[..., 1], grads[..., 2]
    B[..., 0, 0::3] = gx
    B[..., 1, 1::3] = gy
    B[..., 2, 2::3] = gz
    B[..., 3, 1::3] = gz
    B[..., 3, 2::3] = gy
    B[..., 4, 0::3] = gz
    B[..., 4, 2::3] = gx
    B[..., 5, 0::3] = gy
    B[..., 5, 1::3] = gx
    return B


def build_integration(mesh):
    """Integration points with weights and B operators.

    P1 uses one centroid point, P2 the symmetric four-point rule.
    """
    x = mesh.nodes[mesh.elements[:, :4]]
    vol = tet_volumes(mesh.nodes, mesh.elements[:, :4])
    bad = np.flatnonzero(vol <= 0)
    if bad.size:
        raise MeshError(f"element {int(bad[0])} has non-positive Jacobian (volume {vol[bad[0]]:.3e})")
    # barycentric gradients: rows of inv([[1, x, y, z] ...]) without the first column
    A = np.concatenate([np.ones(x.shape[:2] + (1,)), x], axis=2)
    dL = np.linalg.inv(A)[:, 1:, :].transpose(0, 2, 1)  # (m, 4, 3)
    nel = len(mesh.elements)
    conn = mesh.elements
    dofs_e = (3 * conn[:, :, None] + np.arange(3)).reshape(nel, -1)
    if mesh.order == 1:
        B = _b_from_gradients(dL)
        return IntegrationPoints(
            np.arange(nel), np.zeros(nel, int), vol.copy(), B, dofs_e, mesh.n_dofs
        )

    bary = np.full((4, 4), _P2_RULE_B)
    np.fill_diagonal(bary, _P2_RULE_A)
    Bs, ws, el, loc = [], [], [], []
    for qi, L in enumerate(bary):
        g = np.empty((nel, 10, 3))
        for a in range(4):
            g[:, a] = (4.0 * L[a] - 1.0) * dL[:, a]
        for n, (a, b) in enumerate(P2_EDGES):
            g[:, 4 + n] = 4.0 * (L[a] * dL[:, b] + L[b] * dL[:, a])
        Bs.append(_b_from_gradients(g))
        ws.append(vol / 4.0)
        el.append(np.arange(nel))
        loc.append(np.full(nel, qi))
    order = np.lexsort((np.concatenate(loc), np.concatenate(el)))
    B = np.concatenate(Bs)[order]
    return IntegrationPoints(
        np.concatenate(el)[order],
        np.concatenate(loc)[order],
        np.concatenate(ws)[order],
        B,
        dofs_e[np.concatenate(el)[order]],
        mesh.n_dofs,
    )


# --------------------------------------------------------------------------
# boundary conditions and solve


@dataclass
class BoundaryConditions:
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    force: np.ndarray

    def __post_init__(self):
        self.dirichlet_dofs = np.asarray(self.dirichlet_dofs, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        self.force = np.asarray(self.force, dtype=float)
        if len(np.unique(self.dirichlet_dofs)) != len(self.dirichlet_dofs):
            raise ValueError("a node-dof pair appears twice in the Dirichlet list")
        if self.dirichlet_values.shape != self.dirichlet_dofs.shape:
            raise ValueError("Dirichlet dofs and values differ in length")

    def free_dofs(self):
        mask = np.ones(len(self.force), bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


def assemble_stiffness(points, C):
    """Sparse ``sum_e w_e B_e^T C_e B_e`` for Voigt tangents ``C`` of shape ``(q, 6, 6)``."""
    Ke = np.einsum("q,qai,qab,qbj->qij", points.weight, points.B, C, points.B)
    nde = points.dofs.shape[1]
    rows = np.repeat(points.dofs, nde, axis=1).ravel()
    cols = np.tile(points.dofs, (1, nde)).ravel()
    n = points.n_dofs
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsc()


def solve_constrained(K, rhs, bc, rtol=1e-10):
    """Solve ``K u = rhs`` on free dofs with prescribed Dirichlet values."""
    n = K.shape[0]
    u = np.zeros(n)
    u[bc.dirichlet_dofs] = bc.dirichlet_values
    free = bc.free_dofs()
    if free.size == 0:
        return u
    K = K.tocsc()
    Kff = K[free][:, free].tocsc()
    b = rhs[free] - K[free][:, bc.dirichlet_dofs] @ bc.dirichlet_values
    try:
        lu = splu(Kff)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular stiffness: {exc}") from exc
    d = np.abs(lu.U.diagonal())
    if d.min() <= 1e-13 * d.max():
        raise SingularSystemError("stiffness is singular (insufficient constraints?)")
    uf = lu.solve(b)
    res = np.linalg.norm(Kff @ uf - b)
    scale = max(np.linalg.norm(b), np.linalg.norm(Kff @ uf))
    if scale > 0 and res > rtol * scale:
        raise SingularSystemError(f"linear solve residual {res / scale:.2e} exceeds {rtol:g}")
    u[free] = uf
    return u


def assemble_and_solve(points, C, eps_hat, sig_hat, bc):
    """Solve ``(sum w B^T C B) u = f - sum w B^T (sig_hat - C eps_hat)``."""
    K = assemble_stiffness(points, C)
    pre = sig_hat - np.einsum("qab,qb->qa", C, eps_hat)
    rhs = bc.force - points.internal_force(pre)
    return solve_constrained(K, rhs, bc)


# --------------------------------------------------------------------------
# geometry helpers for loads


def nodes_where(mesh, predicate):
    x = mesh.nodes
    return np.flatnonzero(predicate(x[:, 0], x[:, 1], x[:, 2]))


def boundary_faces(mesh):
    """Boundary triangles as (vertex ids (f,3), full node ids (f,3|6))."""
    counts = {}
    for e, tet in enumerate(mesh.elements):
        for fi, face in enumerate(_TET_FACES):
            key = tuple(sorted(tet[list(face)]))
            counts.setdefault(key, []).append((e, fi))
    verts, full = [], []
    for key, owners in counts.items():
        if len(owners) != 1:
            continue
        e, fi = owners[0]
        tet = mesh.elements[e]
        face = _TET_FACES[fi]
        verts.append(tet[list(face)])
        if mesh.order == 2:
            mids = []
            for a, b in ((face[0], face[1]), (face[1], face[2]), (face[0], face[2])):
                pair = (min(a, b), max(a, b))
                mids.append(tet[4 + P2_EDGES.index(pair)])
            full.append(np.concatenate([tet[list(face)], mids]))
        else:
            full.append(tet[list(face)])
    return np.array(verts), np.array(full)


def surface_load(mesh, predicate, traction):
    """Consistent nodal forces for a uniform traction vector on faces matching ``predicate``."""
    traction = np.asarray(traction, dtype=float)
    f = np.zeros(mesh.n_dofs)
    verts, full = boundary_faces(mesh)
    for tri, nodes in zip(verts, full):
        x = mesh.nodes[tri]
        if not np.all(predicate(x[:, 0], x[:, 1], x[:, 2])):
            continue
        area = 0.5 * np.linalg.norm(np.cross(x[1] - x[0], x[2] - x[0]))
        if mesh.order == 1:
            share = [(n, area / 3.0) for n in nodes]
        else:
            share = [(n, area / 3.0) for n in nodes[3:]]
        for n, a in share:
            f[3 * n : 3 * n + 3] += a * traction
    return f
