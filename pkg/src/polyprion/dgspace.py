"""Discontinuous polynomial spaces on polygonal meshes and operator assembly.

Each element carries scaled monomials of total degree <= ``degree`` on its
bounding box, orthonormalised in the element L2 product, so the global mass
matrix is the identity up to rounding. Volume integrals use a fan
sub-triangulation from a kernel point (the centroid whenever it lies
in the kernel) with collapsed Gauss rules;
face integrals use Gauss-Legendre rules. Both are exact to degree
``2 * degree + 1`` by default.

All element-level data is stored in zero-padded arrays (padding carries
zero quadrature weight) so every assembly loop is a single ``einsum``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.special import roots_jacobi, roots_legendre

from .mesh import MeshError, PolyMesh, fan_center, signed_area


def n_local(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def monomial_exponents(degree: int) -> np.ndarray:
    return np.array([(d - j, j) for d in range(degree + 1) for j in range(d + 1)], dtype=np.int64)


def triangle_rule(degree: int):
    """Collapsed (Duffy) Gauss rule on the unit triangle, exact to ``degree``.

    Returns barycentric-free reference points (xi, eta) in the triangle
    (0,0),(1,0),(0,1) and weights summing to 1/2.
    """
    n = max(1, (degree + 2) // 2)
    xg, wg = roots_legendre(n)
    u, wu = 0.5 * (xg + 1.0), 0.5 * wg
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    v, wv = 0.5 * (xj + 1.0), 0.25 * wj
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    w = np.outer(wu, wv).ravel()
    return pts, w


def line_rule(degree: int):
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _monomials(pts: np.ndarray, center: np.ndarray, scale: np.ndarray, exps: np.ndarray):
    """Scaled monomials and their gradients at ``pts`` (npts, 2)."""
    X = (pts[:, 0] - center[0]) / scale[0]
    Y = (pts[:, 1] - center[1]) / scale[1]
    deg = int(exps.max())
    px = np.stack([X**i for i in range(deg + 1)], axis=1)
    py = np.stack([Y**i for i in range(deg + 1)], axis=1)
    ex, ey = exps[:, 0], exps[:, 1]
    val = px[:, ex] * py[:, ey]
    dpx = np.zeros_like(px)
    dpy = np.zeros_like(py)
    for i in range(1, deg + 1):
        dpx[:, i] = i * px[:, i - 1]
        dpy[:, i] = i * py[:, i - 1]
    gx = dpx[:, ex] * py[:, ey] / scale[0]
    gy = px[:, ex] * dpy[:, ey] / scale[1]
    return val, np.stack([gx, gy], axis=-1)


def _orthonormalize(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt (two passes) in the weighted product.

    Returns coefficients ``C`` such that ``V @ C`` is orthonormal.
    """
    sw = np.sqrt(w)[:, None]
    Q = sw * V
    n = V.shape[1]
    C = np.eye(n)
    for j in range(n):
        for _ in range(2):
            for i in range(j):
                r = Q[:, i] @ Q[:, j]
                Q[:, j] -= r * Q[:, i]
                C[:, j] -= r * C[:, i]
        nrm = np.linalg.norm(Q[:, j])
        if nrm <= 1e-14 * np.sqrt(w.sum()):
            raise MeshError("element basis is numerically rank deficient")
        Q[:, j] /= nrm
        C[:, j] /= nrm
    return C


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b
    out = np.zeros_like(s, dtype=float)
    nz = s > 0
    out[nz] = 2.0 * a[nz] * b[nz] / s[nz]
    return out


@dataclass(eq=False)
class DGSpace:
    mesh: PolyMesh
    degree: int
    n_loc: int
    exps: np.ndarray
    centers: np.ndarray        # (E, 2) bounding-box centres
    scales: np.ndarray         # (E, 2) bounding-box half widths
    coeffs: np.ndarray         # (E, n, n) orthonormalisation coefficients
    qw: np.ndarray             # (E, Q) volume weights (zero padded)
    qp: np.ndarray             # (E, Q, 2)
    B: np.ndarray              # (E, Q, n) basis values
    G: np.ndarray              # (E, Q, n, 2) basis gradients
    areas: np.ndarray
    h: np.ndarray
    face_owner: np.ndarray     # interior faces only
    face_neighbor: np.ndarray
    face_normal: np.ndarray
    face_w: np.ndarray         # (F, q) weights including face length
    face_Bp: np.ndarray
    face_Bm: np.ndarray
    face_Gp: np.ndarray
    face_Gm: np.ndarray
    basis_integrals: np.ndarray  # (E, n)

    @property
    def n_elements(self) -> int:
        return self.mesh.n_elements

    @property
    def ndof(self) -> int:
        return self.n_elements * self.n_loc

    @property
    def domain_area(self) -> float:
        return float(self.areas.sum())

    def dofs(self, k: int) -> slice:
        return slice(k * self.n_loc, (k + 1) * self.n_loc)

    def eval_basis(self, k: int, pts: np.ndarray):
        """Values (npts, n) and gradients (npts, n, 2) of element ``k``'s basis."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        V, dV = _monomials(pts, self.centers[k], self.scales[k], self.exps)
        C = self.coeffs[k]
        return V @ C, np.einsum("pma,mn->pna", dV, C)

    def evaluate(self, u: np.ndarray, k: int, pts: np.ndarray) -> np.ndarray:
        vals, _ = self.eval_basis(k, pts)
        return vals @ np.asarray(u)[self.dofs(k)]

    def at_quadrature(self, u: np.ndarray) -> np.ndarray:
        """Values of the DG function ``u`` at all volume quadrature points (E, Q)."""
        U = np.asarray(u, dtype=float).reshape(self.n_elements, self.n_loc)
        return np.einsum("eqi,ei->eq", self.B, U)

    def element_means(self, u: np.ndarray) -> np.ndarray:
        U = np.asarray(u, dtype=float).reshape(self.n_elements, self.n_loc)
        return np.einsum("ei,ei->e", self.basis_integrals, U) / self.areas


def _as_field(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or have one value per element ({n})")
    return arr


def build_space(mesh: PolyMesh, degree: int, quad_degree: int | None = None) -> DGSpace:
    """Build the DG space of total degree ``degree`` on ``mesh``."""
    if degree < 1:
        raise ValueError("polynomial degree must be >= 1")
    qdeg = 2 * degree + 1 if quad_degree is None else int(quad_degree)
    exps = monomial_exponents(degree)
    n = len(exps)
    E = mesh.n_elements
    tri_pts, tri_w = triangle_rule(qdeg)
    nq_tri = len(tri_w)
    nv = np.array([len(e) for e in mesh.elements])
    Q = int(nv.max()) * nq_tri

    centers = np.empty((E, 2))
    scales = np.empty((E, 2))
    coeffs = np.empty((E, n, n))
    qw = np.zeros((E, Q))
    qp = np.zeros((E, Q, 2))
    B = np.zeros((E, Q, n))
    G = np.zeros((E, Q, n, 2))
    areas = np.empty(E)
    for k in range(E):
        pts = mesh.element_points(k)
        area = signed_area(pts)
        c = fan_center(pts)
        if c is None:
            raise MeshError(f"element {k}: polygon is not star-shaped, fan triangulation would overlap")
        nxt = np.roll(pts, -1, axis=0)
        # fan triangles (c, v_i, v_{i+1})
        e1 = pts - c
        e2 = nxt - c
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 1e-12 * area):
            raise MeshError(f"element {k}: fan triangulation overlaps (polygon not star-shaped)")
        P = c + tri_pts[:, 0, None, None] * e1[None] + tri_pts[:, 1, None, None] * e2[None]
        P = P.transpose(1, 0, 2).reshape(-1, 2)
        W = (tri_w[None, :] * det[:, None]).ravel()
        m = len(W)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        centers[k] = 0.5 * (lo + hi)
        scales[k] = 0.5 * (hi - lo)
        V, dV = _monomials(P, centers[k], scales[k], exps)
        C = _orthonormalize(V, W)
        coeffs[k] = C
        qw[k, :m] = W
        qp[k, :m] = P
        qp[k, m:] = c
        B[k, :m] = V @ C
        G[k, :m] = np.einsum("pma,mn->pna", dV, C)
        areas[k] = area

    # interior faces
    s, ws = line_rule(qdeg)
    faces = mesh.interior_faces
    F = len(faces)
    nqf = len(ws)
    f_owner = np.array([f.owner for f in faces], dtype=np.int64)
    f_neigh = np.array([f.neighbor for f in faces], dtype=np.int64)
    f_normal = np.array([f.normal for f in faces], dtype=float).reshape(F, 2)
    f_w = np.zeros((F, nqf))
    Bp = np.zeros((F, nqf, n))
    Bm = np.zeros((F, nqf, n))
    Gp = np.zeros((F, nqf, n, 2))
    Gm = np.zeros((F, nqf, n, 2))
    space = DGSpace(mesh, degree, n, exps, centers, scales, coeffs, qw, qp, B, G, areas,
                    mesh.diameters(), f_owner, f_neigh, f_normal, f_w, Bp, Bm, Gp, Gm,
                    np.einsum("eq,eqi->ei", qw, B))
    for i, f in enumerate(faces):
        a, b = mesh.vertices[f.endpoints[0]], mesh.vertices[f.endpoints[1]]
        pts = a + s[:, None] * (b - a)
        f_w[i] = ws * f.length
        Bp[i], Gp[i] = space.eval_basis(f.owner, pts)
        Bm[i], Gm[i] = space.eval_basis(f.neighbor, pts)
    return space


# ---------------------------------------------------------------------------
# assembly


def _block_diagonal(space: DGSpace, blocks: np.ndarray) -> sp.csr_matrix:
    E, n = space.n_elements, space.n_loc
    base = (np.arange(E) * n)[:, None, None]
    rows = np.broadcast_to(base + np.arange(n)[None, :, None], (E, n, n))
    cols = np.broadcast_to(base + np.arange(n)[None, None, :], (E, n, n))
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(space.ndof, space.ndof))


def mass_blocks(space: DGSpace) -> np.ndarray:
    return np.einsum("eq,eqi,eqj->eij", space.qw, space.B, space.B)


def assemble_mass(space: DGSpace) -> sp.csr_matrix:
    """[M]_ij = (phi_j, phi_i); the identity up to rounding for this basis."""
    return _block_diagonal(space, mass_blocks(space))


def assemble_linear_reaction(space: DGSpace, omega) -> sp.csr_matrix:
    """[M_w]_ij = (w phi_j, phi_i) for an elementwise-constant coefficient w."""
    om = _as_field(omega, space.n_elements, "omega")
    return _block_diagonal(space, om[:, None, None] * mass_blocks(space))


def assemble_nonlinear_reaction(space: DGSpace, omega, theta) -> sp.csr_matrix:
    """[M^_w(T)]_ij = (w T_h phi_j, phi_i) where T_h is the DG function with coefficients ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (space.ndof,):
        raise ValueError(f"coefficient vector has length {theta.size}, expected {space.ndof}")
    om = _as_field(omega, space.n_elements, "omega")
    th = space.at_quadrature(theta)
    blocks = np.einsum("eq,eqi,eqj->eij", space.qw * om[:, None] * th, space.B, space.B)
    return _block_diagonal(space, blocks)


def nonlinear_apply(space: DGSpace, omega, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``M^_w(theta) @ u`` without forming the matrix."""
    om = _as_field(omega, space.n_elements, "omega")
    prod = space.at_quadrature(theta) * space.at_quadrature(u)
    return np.einsum("eq,eqi->ei", space.qw * om[:, None] * prod, space.B).ravel()


def assemble_load(space: DGSpace, k0) -> np.ndarray:
    """[F]_i = (k0, phi_i) for an elementwise-constant source k0."""
    val = _as_field(k0, space.n_elements, "k0")
    return (val[:, None] * space.basis_integrals).ravel()


def max_eigenvalue_2x2(D: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of each symmetric 2x2 tensor in ``D`` (E, 2, 2)."""
    a, b, d = D[:, 0, 0], D[:, 0, 1], D[:, 1, 1]
    return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + b * b)


def face_penalty(space: DGSpace, D: np.ndarray, reaction_scale, eta0: float) -> np.ndarray:
    """eta = eta0 * max({d}_H, {k}_H) * degree^2 / {h}_H on each interior face."""
    dK = max_eigenvalue_2x2(D)
    kK = np.abs(_as_field(reaction_scale, space.n_elements, "reaction_scale"))
    p, m = space.face_owner, space.face_neighbor
    hH = _harmonic(space.h[p], space.h[m])
    scale = np.maximum(_harmonic(dK[p], dK[m]), _harmonic(kK[p], kK[m]))
    return eta0 * scale * space.degree**2 / hH


def assemble_stiffness(space: DGSpace, D, reaction_scale=0.0, eta0: float = 10.0) -> sp.csr_matrix:
    """Symmetric interior-penalty form with Neumann boundaries.

    ``D`` is an (E, 2, 2) array of elementwise tensors (or a single 2x2
    tensor), ``reaction_scale`` the elementwise reaction magnitude entering
    the penalty.
    """
    if not eta0 > 0:
        raise ValueError("penalty constant eta0 must be positive")
    E, n = space.n_elements, space.n_loc
    D = np.asarray(D, dtype=float)
    if D.shape == (2, 2):
        D = np.broadcast_to(D, (E, 2, 2))
    if D.shape != (E, 2, 2):
        raise ValueError(f"diffusion tensor field must have shape ({E}, 2, 2)")
    if not np.allclose(D, D.transpose(0, 2, 1), rtol=0.0, atol=1e-14 * max(1.0, np.abs(D).max())):
        raise ValueError("diffusion tensor must be symmetric")

    vol = np.einsum("eq,eqia,eab,eqjb->eij", space.qw, space.G, D, space.G)
    A = _block_diagonal(space, vol)
    if len(space.face_owner) == 0:
        return A

    eta = face_penalty(space, D, reaction_scale, eta0)
    p, m = space.face_owner, space.face_neighbor
    nrm = space.face_normal
    # normal flux of each basis function: (D grad phi) . n
    Fp = np.einsum("fqia,fab,fb->fqi", space.face_Gp, D[p], nrm)
    Fm = np.einsum("fqia,fab,fb->fqi", space.face_Gm, D[m], nrm)
    J = np.concatenate([space.face_Bp, -space.face_Bm], axis=2)
    Phi = 0.5 * np.concatenate([Fp, Fm], axis=2)
    w = space.face_w
    loc = np.einsum("fq,fqi,fqj->fij", w * eta[:, None], J, J)
    cross = np.einsum("fq,fqi,fqj->fij", w, J, Phi)
    loc -= cross + cross.transpose(0, 2, 1)
    idx = np.concatenate([p[:, None] * n + np.arange(n), m[:, None] * n + np.arange(n)], axis=1)
    rows = np.broadcast_to(idx[:, :, None], loc.shape)
    cols = np.broadcast_to(idx[:, None, :], loc.shape)
    Af = sp.csr_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=A.shape)
    return (A + Af).tocsr()


# ---------------------------------------------------------------------------
# projection and functionals


def assemble_source(space: DGSpace, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """[F]_i = (f, phi_i) for a pointwise function ``f(x, y)``."""
    vals = np.broadcast_to(np.asarray(f(space.qp[..., 0], space.qp[..., 1]), dtype=float), space.qw.shape)
    return np.einsum("eq,eqi->ei", space.qw * vals, space.B).ravel()


def project(space: DGSpace, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Elementwise L2 projection of a pointwise function ``f(x, y)``."""
    rhs = assemble_source(space, f).reshape(space.n_elements, space.n_loc)
    return np.linalg.solve(mass_blocks(space), rhs[..., None])[..., 0].ravel()


def project_elementwise(space: DGSpace, values) -> np.ndarray:
    """Coefficients of the piecewise-constant function with the given element values."""
    vals = _as_field(values, space.n_elements, "values")
    rhs = vals[:, None] * space.basis_integrals
    return np.linalg.solve(mass_blocks(space), rhs[..., None])[..., 0].ravel()


def constant_coefficients(space: DGSpace, value: float = 1.0) -> np.ndarray:
    return project_elementwise(space, value)


def space_average(space: DGSpace, u: np.ndarray) -> float:
    """Domain mean of the DG function: |Omega|^-1 * integral of u_h."""
    U = np.asarray(u, dtype=float).reshape(space.n_elements, space.n_loc)
    return float(np.einsum("ei,ei->", space.basis_integrals, U) / space.domain_area)


def l2_error(space: DGSpace, u: np.ndarray, exact: Callable) -> float:
    diff = space.at_quadrature(u) - exact(space.qp[..., 0], space.qp[..., 1])
    return float(np.sqrt(np.sum(space.qw * diff**2)))


def h1_seminorm_error(space: DGSpace, u: np.ndarray, exact_grad: Callable) -> float:
    """Broken H1 seminorm of the error."""
    U = np.asarray(u, dtype=float).reshape(space.n_elements, space.n_loc)
    gu = np.einsum("eqia,ei->eqa", space.G, U)
    gx, gy = exact_grad(space.qp[..., 0], space.qp[..., 1])
    err = (gu[..., 0] - gx) ** 2 + (gu[..., 1] - gy) ** 2
    return float(np.sqrt(np.sum(space.qw * err)))


def export_matrix(path, A) -> None:
    """Write a sparse operator in Matrix Market text format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), precision=17)
