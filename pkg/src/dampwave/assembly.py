"""P1 Galerkin matrices and load vectors with Dirichlet elimination.

All integrals use the three-point edge-midpoint rule on each triangle,
which is exact for quadratics. Matrices are returned as
``scipy.sparse.csr_matrix`` restricted to interior nodes unless
``dirichlet=False`` is passed.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

# barycentric values of the three basis functions at the three edge midpoints;
# midpoint q is opposite vertex q
_PHI_AT_MID = 0.5 * (1.0 - np.eye(3))


class CoefficientError(ValueError):
    """A coefficient violated its sign or definiteness requirement."""


@dataclass(frozen=True)
class CoefficientField:
    """A scalar field on the domain, constant or given by a function ``f(x, y)``."""

    value: Optional[float] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if (self.value is None) == (self.func is None):
            raise ValueError("give exactly one of value or func")

    @property
    def is_constant(self):
        return self.func is None

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        if self.func is None:
            return np.full(np.shape(x), float(self.value))
        return np.broadcast_to(np.asarray(self.func(x, y), dtype=float), np.shape(x))


def as_field(c):
    if isinstance(c, CoefficientField):
        return c
    if callable(c):
        return CoefficientField(func=c)
    return CoefficientField(value=float(c))


def _geometry(mesh):
    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    # gradients of the barycentric coordinates, constant per triangle
    e = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=-1) / (2.0 * area[:, None, None])
    return area, grads


def _sample(field, mesh):
    mid = mesh.edge_midpoints()
    return field(mid[..., 0], mid[..., 1]), mid


def _assemble(mesh, local, dirichlet):
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    if dirichlet:
        idx = mesh.interior
        A = A[idx][:, idx].tocsr()
    A.sort_indices()
    return A


def _mass_local(area, w):
    # sum_q (|T|/3) w_q phi_i(m_q) phi_j(m_q)
    return np.einsum("t,tq,qi,qj->tij", area / 3.0, w, _PHI_AT_MID, _PHI_AT_MID)


def assemble_weighted_mass(mesh, weight=1.0, dirichlet=True):
    """Matrix of ``(weight * phi_j, phi_i)``.

    ``weight = 1`` gives the mass matrix; a damping field gives the damping
    matrix. The weight must be strictly positive at every quadrature point.
    """
    field = as_field(weight)
    w, mid = _sample(field, mesh)
    bad = np.argwhere(~(w > 0))
    if bad.size:
        t, q = bad[0]
        raise CoefficientError(
            f"weight must be positive, got {w[t, q]!r} at {tuple(mid[t, q])}")
    area, _ = _geometry(mesh)
    return _assemble(mesh, _mass_local(area, w), dirichlet)


def assemble_stiffness(mesh, a11=1.0, a12=0.0, a22=1.0, a0=0.0, dirichlet=True):
    """Matrix of ``a(phi_j, phi_i) = (a grad phi_j, grad phi_i) + (a0 phi_j, phi_i)``."""
    c11, mid = _sample(as_field(a11), mesh)
    c12, _ = _sample(as_field(a12), mesh)
    c22, _ = _sample(as_field(a22), mesh)
    c0, _ = _sample(as_field(a0), mesh)

    not_pd = ~((c11 > 0) & (c11 * c22 - c12 * c12 > 0))
    if not_pd.any():
        t, q = np.argwhere(not_pd)[0]
        raise CoefficientError(
            f"coefficient matrix not positive definite at {tuple(mid[t, q])}")
    if (c0 < 0).any():
        t, q = np.argwhere(c0 < 0)[0]
        raise CoefficientError(f"a0 must be nonnegative, got {c0[t, q]!r} at {tuple(mid[t, q])}")

    area, g = _geometry(mesh)
    # quadrature-averaged coefficient matrix per triangle
    A11 = c11.mean(axis=1)
    A12 = c12.mean(axis=1)
    A22 = c22.mean(axis=1)
    ag_x = A11[:, None] * g[..., 0] + A12[:, None] * g[..., 1]
    ag_y = A12[:, None] * g[..., 0] + A22[:, None] * g[..., 1]
    local = area[:, None, None] * (
        ag_x[:, :, None] * g[:, None, :, 0] + ag_y[:, :, None] * g[:, None, :, 1])
    if np.any(c0 != 0):
        local = local + _mass_local(area, c0)
    return _assemble(mesh, local, dirichlet)


def assemble_load(mesh, f, t=0.0, dirichlet=True):
    """Vector of ``(f(., t), phi_i)``; ``f`` is called as ``f(x, y, t)``."""
    mid = mesh.edge_midpoints()
    vals = np.broadcast_to(
        np.asarray(f(mid[..., 0], mid[..., 1], t), dtype=float), mid.shape[:2])
    area = mesh.signed_areas()
    local = (area / 3.0)[:, None] * (vals @ _PHI_AT_MID)
    b = np.zeros(mesh.n_nodes)
    # fixed accumulation order: triangle by triangle, vertex by vertex
    np.add.at(b, mesh.triangles.ravel(), local.ravel())
    return b[mesh.interior] if dirichlet else b


def nodal_interpolant(mesh, g):
    """Values of ``g(x, y)`` at the interior nodes."""
    p = mesh.nodes[mesh.interior]
    return np.array(np.broadcast_to(g(p[:, 0], p[:, 1]), (len(p),)), dtype=float)
