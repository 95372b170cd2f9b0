"""Structured triangulations of axis-aligned rectangles."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of a rectangle with per-node Dirichlet flags.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Node coordinates, row-major by y then x.
    triangles : ndarray, shape (n_tri, 3)
        Node indices, counter-clockwise.
    boundary : ndarray of bool, shape (n_nodes,)
        True for nodes on the rectangle's edge.
    nx, ny : int
        Cell counts per axis.
    h : float
        Maximum edge length (the cell diagonal).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    nx: int
    ny: int
    h: float
    x_range: tuple = (0.0, 1.0)
    y_range: tuple = (0.0, 1.0)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def interior(self):
        """Indices of the non-boundary nodes in node order."""
        return np.flatnonzero(~self.boundary)

    @property
    def n_interior(self):
        return int(np.count_nonzero(~self.boundary))

    def signed_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self):
        """Midpoints of the three edges of every triangle, shape (n_tri, 3, 2).

        Midpoint q sits opposite vertex q, i.e. on the edge (q+1, q+2).
        """
        p = self.nodes[self.triangles]
        return 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])

    def lift(self, values):
        """Extend an interior coefficient vector by zeros on the boundary."""
        full = np.zeros(self.n_nodes)
        full[self.interior] = values
        return full

    def write(self, path):
        """Dump the mesh in a plain-text format.

        Header ``nodes <N> triangles <T>``, then ``x y boundary_flag`` per
        node and ``i j k`` per triangle.
        """
        with open(path, "w") as fh:
            fh.write(f"nodes {self.n_nodes} triangles {self.n_triangles}\n")
            for (x, y), b in zip(self.nodes, self.boundary):
                fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")


def build_rect_mesh(nx, ny, x_range=(0.0, 1.0), y_range=(0.0, 1.0)):
    """Uniform nx-by-ny grid, each cell cut along its lower-left to upper-right diagonal.

    Examples
    --------
    >>> m = build_rect_mesh(2, 2)
    >>> m.n_nodes, m.n_triangles, m.n_interior
    (9, 8, 1)
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {x_range} x {y_range}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ll = (j * (nx + 1) + i).ravel()
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    # index arithmetic, no float comparisons
    row = np.repeat(np.arange(ny + 1), nx + 1)
    col = np.tile(np.arange(nx + 1), ny + 1)
    boundary = (row == 0) | (row == ny) | (col == 0) | (col == nx)

    h = float(np.hypot((x1 - x0) / nx, (y1 - y0) / ny))
    for a in (nodes, triangles, boundary):
        a.setflags(write=False)
    return Mesh(nodes, triangles, boundary, nx, ny, h, (x0, x1), (y0, y1))


def interior_index_map(mesh):
    """Map each interior node id to its dense unknown index (order preserving)."""
    return {int(node): i for i, node in enumerate(mesh.interior)}


def read_mesh(path):
    """Inverse of :meth:`Mesh.write`; nx, ny and h are recovered from the grid."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "nodes" or header[2] != "triangles":
            raise ValueError(f"{path}: bad header {' '.join(header)!r}")
        n, t = int(header[1]), int(header[3])
        rows = [fh.readline().split() for _ in range(n)]
        tris = [fh.readline().split() for _ in range(t)]
    nodes = np.array([[float(r[0]), float(r[1])] for r in rows])
    boundary = np.array([r[2] == "1" for r in rows])
    triangles = np.array(tris, dtype=np.int64)
    xs, ys = np.unique(nodes[:, 0]), np.unique(nodes[:, 1])
    nx, ny = len(xs) - 1, len(ys) - 1
    h = float(np.hypot((xs[-1] - xs[0]) / nx, (ys[-1] - ys[0]) / ny))
    return Mesh(nodes, triangles, boundary, nx, ny, h,
                (float(xs[0]), float(xs[-1])), (float(ys[0]), float(ys[-1])))
