"""Per-face Jacobian field deformation via a prefactorized Poisson solve.

The optimization variable is one 3x3 matrix per face. Vertex positions are
recovered as the least-squares fit

    minimize  sum_f area_f * ||grad(Phi)_f - J_f||_F^2

over vertex positions Phi, with the area-weighted centroid pinned at the
template centroid through a bordered constraint row. grad(Phi)_f stacks the
tangential gradients of the three coordinate functions, so the row space
of each attainable Jacobian lies in the template face plane; normal
components of a target J are annihilated by the normal equations, which is
what makes the identity field reproduce the template exactly.

The bordered matrix (the template's cotangent Laplacian plus the centroid
row) depends only on the template, so its factorization is computed once
and reused for every solve and for the adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import MeshError, SolverError
from .mesh import TriMesh, connected_components, face_areas, face_corners, face_cross

IDENTITY_TOL = 1e-6


@dataclass(frozen=True)
class PoissonSystem:
    template: TriMesh
    grad_op: sp.csr_matrix        # (3F, V): vertex scalars -> per-face gradients
    area_grad_op: sp.csr_matrix   # rows scaled by face area
    lu: object                    # factorization of [[L, w], [w^T, 0]]
    vertex_weights: np.ndarray    # area-weighted, sums to 1
    centroid: np.ndarray

    @property
    def num_faces(self) -> int:
        return self.template.num_faces

    @property
    def num_vertices(self) -> int:
        return self.template.num_vertices


def build_poisson_system(template: TriMesh) -> PoissonSystem:
    """Assembles and factorizes the deformation solve for a template mesh."""
    ncomp = connected_components(template)
    if ncomp != 1:
        raise MeshError(
            f"template has {ncomp} connected components; build one system per component"
        )
    areas = face_areas(template)
    grad_op = _face_gradient_operator(template, areas)
    area_diag = sp.diags(np.repeat(areas, 3))
    area_grad_op = (area_diag @ grad_op).tocsr()
    lap = (grad_op.T @ area_grad_op).tocsr()

    nv = template.num_vertices
    w = np.zeros(nv)
    for k in range(3):
        np.add.at(w, template.faces[:, k], areas / 3.0)
    w /= w.sum()
    wcol = sp.csr_matrix((w, (np.arange(nv), np.zeros(nv, dtype=np.int64))), shape=(nv, 1))
    bordered = sp.bmat([[lap, wcol], [wcol.T, None]], format="csc")
    try:
        lu = splu(bordered)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc

    centroid = w @ template.vertices
    sys_ = PoissonSystem(template, grad_op, area_grad_op, lu, w, centroid)

    residual = np.abs(
        solve_deformation(sys_, template_jacobians(sys_)) - template.vertices
    ).max()
    if residual > IDENTITY_TOL:
        raise SolverError(
            f"identity reproduction residual {residual:.3e} exceeds {IDENTITY_TOL}"
        )
    return sys_


def _face_gradient_operator(mesh: TriMesh, areas: np.ndarray) -> sp.csr_matrix:
    """Sparse (3F, V) map from vertex scalars to per-face spatial gradients.

    The gradient of hat function k on a face is n x e_k / (2A), where e_k
    is the CCW edge opposite vertex k.
    """
    va, vb, vc = face_corners(mesh)
    cross = face_cross(mesh)
    normals = cross / np.linalg.norm(cross, axis=1)[:, None]
    inv2a = 1.0 / (2.0 * areas)
    gphi = np.empty((mesh.num_faces, 3, 3))
    gphi[:, 0] = np.cross(normals, vc - vb) * inv2a[:, None]
    gphi[:, 1] = np.cross(normals, va - vc) * inv2a[:, None]
    gphi[:, 2] = np.cross(normals, vb - va) * inv2a[:, None]

    nf = mesh.num_faces
    rows = np.repeat(3 * np.arange(nf), 9) + np.tile(np.repeat(np.arange(3), 3), nf)
    cols = np.repeat(mesh.faces, 3, axis=0).reshape(-1)
    # entry (3f + r, vertex k) = gphi[f, k, r]
    data = gphi.transpose(0, 2, 1).reshape(-1)
    return sp.coo_matrix((data, (rows, cols)), shape=(3 * nf, mesh.num_vertices)).tocsr()


def template_jacobians(sys: PoissonSystem) -> np.ndarray:
    """The template's own per-face Jacobians (the optimizer's natural init)."""
    return jacobians_of(sys, sys.template.vertices)


def jacobians_of(sys: PoissonSystem, vertices: np.ndarray) -> np.ndarray:
    """Per-face deformation gradients of a vertex layout, as (F, 3, 3).

    Row c of each 3x3 block is the tangential gradient of coordinate c.
    """
    g = sys.grad_op @ vertices
    return g.reshape(sys.num_faces, 3, 3).transpose(0, 2, 1)


def solve_deformation(sys: PoissonSystem, jacobians: np.ndarray) -> np.ndarray:
    """Vertex positions whose per-face gradients best match the Jacobian field."""
    jacobians = np.asarray(jacobians, dtype=np.float64)
    if jacobians.shape != (sys.num_faces, 3, 3):
        raise ValueError(
            f"jacobian field must be ({sys.num_faces}, 3, 3), got {jacobians.shape}"
        )
    if not np.isfinite(jacobians).all():
        raise ValueError("jacobian field contains non-finite entries")
    # j[:, c, :] flattened matches the (3F,) row layout of grad_op
    rhs = sys.area_grad_op.T @ jacobians.transpose(0, 2, 1).reshape(3 * sys.num_faces, 3)
    rhs_aug = np.vstack([rhs, sys.centroid[None, :]])
    return sys.lu.solve(rhs_aug)[:-1]


def backprop_deformation(sys: PoissonSystem, grad_vertices: np.ndarray) -> np.ndarray:
    """Adjoint of solve_deformation: vertex gradients -> Jacobian gradients.

    The bordered matrix is symmetric, so the adjoint reuses the same
    factorization followed by the transpose of the divergence assembly.
    """
    grad_vertices = np.asarray(grad_vertices, dtype=np.float64)
    if grad_vertices.shape != (sys.num_vertices, 3):
        raise ValueError(
            f"vertex gradient must be ({sys.num_vertices}, 3), got {grad_vertices.shape}"
        )
    if not np.isfinite(grad_vertices).all():
        raise ValueError("vertex gradient contains non-finite entries")
    g_aug = np.vstack([grad_vertices, np.zeros((1, 3))])
    u = sys.lu.solve(g_aug)[:-1]
    dj = sys.area_grad_op @ u  # (3F, 3)
    return dj.reshape(sys.num_faces, 3, 3).transpose(0, 2, 1)
