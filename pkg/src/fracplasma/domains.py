"""Grid domains and the Dirichlet eigenbasis.

Domains live on uniform tensor grids: an interval, an axis-aligned
rectangle, or a disk mask carved out of a rectangular bounding grid.
Fields are stored on the full grid (boundary nodes included, value 0
under Dirichlet conditions); linear algebra happens on the packed
interior nodes.  The eigenbasis consists of eigenpairs of the standard
second-difference Dirichlet Laplacian, orthonormal in the discrete
inner product  <f, g> = h^dim * sum(f * g)  over interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

__all__ = [
    "Domain",
    "EigenBasis",
    "build_domain",
    "eigendecompose",
    "laplacian_matrix",
    "l2_norm",
]

_SIGN_EPS = 1e-12


@dataclass(frozen=True)
class Domain:
    """A gridded thin domain.

    ``axes`` holds the node coordinates per axis (boundary included),
    ``interior``/``boundary`` are boolean masks over the full grid.
    Boundary-flagged nodes are the non-interior nodes adjacent to an
    interior node; Dirichlet data lives there.  ``symmetry_axes`` lists
    the axes along which the node set is mirror symmetric about
    ``center``.
    """

    dim: int
    shape: str
    h: float
    axes: tuple
    interior: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    symmetry_axes: tuple
    center: tuple
    metadata: dict = field(default_factory=dict, repr=False)

    @property
    def grid_shape(self) -> tuple:
        return tuple(len(ax) for ax in self.axes)

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def interior_coords(self) -> np.ndarray:
        """Coordinates of interior nodes, shape (n_interior, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m[self.interior] for m in mesh])

    def embed(self, vec: np.ndarray) -> np.ndarray:
        """Scatter a packed interior vector onto the full grid (zeros elsewhere)."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_interior,):
            raise ValueError(
                f"expected interior vector of length {self.n_interior}, got {vec.shape}"
            )
        full = np.zeros(self.grid_shape)
        full[self.interior] = vec
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        """Pack a full-grid array down to the interior nodes."""
        full = np.asarray(full, dtype=float)
        if full.shape != self.grid_shape:
            raise ValueError(
                f"expected full-grid array of shape {self.grid_shape}, got {full.shape}"
            )
        return full[self.interior]

    def reflect(self, full: np.ndarray, axis: int) -> np.ndarray:
        """Mirror a full-grid array across the domain midline along ``axis``."""
        if axis not in self.symmetry_axes:
            raise ValueError(f"axis {axis} is not a symmetry axis of this {self.shape}")
        return np.flip(full, axis=axis)

    def distance_to_boundary(self, point) -> float:
        """Distance from ``point`` to the thin-domain boundary."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        if self.shape == "disk":
            radius = self.metadata["radius"]
            centre = np.asarray(self.metadata["center"])
            return float(radius - np.linalg.norm(p - centre))
        dists = []
        for k, ax in enumerate(self.axes):
            dists.append(p[k] - ax[0])
            dists.append(ax[-1] - p[k])
        return float(min(dists))

    def interior_index_map(self) -> np.ndarray:
        """Full-grid array of packed interior indices (-1 outside)."""
        idx = -np.ones(self.grid_shape, dtype=int)
        idx[self.interior] = np.arange(self.n_interior)
        return idx


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of the discrete Dirichlet Laplacian on a domain.

    ``vectors`` has shape (n_interior, K); columns are orthonormal in
    the discrete inner product and each column's first component above
    the sign-convention threshold is positive.  Eigenvalues ascend.
    """

    domain: Domain
    eigenvalues: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def weight(self) -> float:
        """Quadrature weight h^dim of the discrete inner product."""
        return self.domain.h ** self.domain.dim

    def nodal(self, coeffs: np.ndarray) -> np.ndarray:
        """Interior nodal values of sum_k coeffs[k] * phi_k."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got {coeffs.shape}")
        return self.vectors @ coeffs

    def coefficients(self, interior_values: np.ndarray) -> np.ndarray:
        """Discrete-L2 projection of interior nodal values onto the basis."""
        v = np.asarray(interior_values, dtype=float)
        if v.shape != (self.domain.n_interior,):
            raise ValueError("interior value vector has the wrong length")
        return self.weight * (self.vectors.T @ v)


def _axis_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    if hi <= lo:
        raise ValueError(f"axis bounds must satisfy lo < hi, got ({lo}, {hi})")
    if n < 3:
        raise ValueError(f"need at least 3 nodes per axis, got {n}")
    return np.linspace(lo, hi, n)


def build_domain(kind: str, n, *, bounds=None, radius: float = None, center=None) -> Domain:
    """Construct a gridded domain.

    Parameters
    ----------
    kind : "interval", "rectangle", or "disk"
    n : int or tuple of int
        Nodes per axis, boundary included (an int applies to every axis).
    bounds : axis bounds; ``(lo, hi)`` for an interval, a pair of such
        pairs for a rectangle or a disk's bounding box.
    radius, center : disk geometry (the disk must sit strictly inside
        its bounding box).

    A node of the disk grid is interior iff it lies strictly inside the
    disk; the grid spacing must agree on both axes.
    """
    if kind == "interval":
        if bounds is None:
            raise ValueError("interval requires bounds=(lo, hi)")
        lo, hi = float(bounds[0]), float(bounds[1])
        nn = int(n if np.isscalar(n) else n[0])
        xs = _axis_nodes(lo, hi, nn)
        h = xs[1] - xs[0]
        interior = np.zeros(nn, dtype=bool)
        interior[1:-1] = True
        bdry = np.zeros(nn, dtype=bool)
        bdry[0] = bdry[-1] = True
        return Domain(
            dim=1, shape="interval", h=float(h), axes=(xs,),
            interior=interior, boundary=bdry,
            symmetry_axes=(0,), center=((lo + hi) / 2,),
        )

    if kind not in ("rectangle", "disk"):
        raise ValueError(f"unknown domain kind {kind!r}")

    if bounds is None:
        raise ValueError(f"{kind} requires bounds=((lox, hix), (loy, hiy))")
    (lox, hix), (loy, hiy) = bounds
    if np.isscalar(n):
        nx = ny = int(n)
    else:
        nx, ny = int(n[0]), int(n[1])
    xs = _axis_nodes(float(lox), float(hix), nx)
    ys = _axis_nodes(float(loy), float(hiy), ny)
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    if abs(hx - hy) > 1e-12 * max(hx, hy):
        raise ValueError(
            f"grid spacing must agree on both axes (got {hx} and {hy}); "
            "choose node counts commensurate with the side lengths"
        )
    h = float(hx)

    if kind == "rectangle":
        interior = np.zeros((nx, ny), dtype=bool)
        interior[1:-1, 1:-1] = True
        bdry = np.zeros((nx, ny), dtype=bool)
        bdry[[0, -1], :] = True
        bdry[:, [0, -1]] = True
        return Domain(
            dim=2, shape="rectangle", h=h, axes=(xs, ys),
            interior=interior, boundary=bdry,
            symmetry_axes=(0, 1),
            center=((lox + hix) / 2, (loy + hiy) / 2),
        )

    # disk mask
    if radius is None or center is None:
        raise ValueError("disk requires radius and center")
    radius = float(radius)
    cx, cy = float(center[0]), float(center[1])
    if radius <= 0:
        raise ValueError("disk radius must be positive")
    margin = min(cx - lox, hix - cx, cy - loy, hiy - cy)
    if radius >= margin:
        raise ValueError("disk must sit strictly inside its bounding box")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    interior = (X - cx) ** 2 + (Y - cy) ** 2 < radius**2
    interior[[0, -1], :] = False
    interior[:, [0, -1]] = False
    if not interior.any():
        raise ValueError("disk mask has no interior nodes; refine the grid")
    bdry = np.zeros_like(interior)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        shifted = np.roll(interior, shift, axis=axis)
        # roll wraps around; wrapped entries can never be neighbours of
        # interior nodes because the outermost ring is masked off above
        bdry |= shifted & ~interior
    sym = tuple(
        k for k in (0, 1)
        if np.array_equal(interior, np.flip(interior, axis=k))
    )
    return Domain(
        dim=2, shape="disk", h=h, axes=(xs, ys),
        interior=interior, boundary=bdry,
        symmetry_axes=sym, center=(cx, cy),
        metadata={"radius": radius, "center": (cx, cy)},
    )


def laplacian_matrix(domain: Domain, *, sparse: bool = False):
    """Positive-definite second-difference Dirichlet Laplacian -Delta_h.

    Acts on packed interior vectors; Dirichlet (zero) values at
    boundary-flagged nodes are eliminated.
    """
    idx = domain.interior_index_map()
    m = domain.n_interior
    h2 = domain.h**2
    rows, cols, vals = [], [], []
    it = np.argwhere(domain.interior)
    flat = idx[domain.interior]
    rows.extend(flat)
    cols.extend(flat)
    vals.extend(np.full(m, 2.0 * domain.dim / h2))
    for axis in range(domain.dim):
        for step in (-1, 1):
            nb = it.copy()
            nb[:, axis] += step
            ok = (nb[:, axis] >= 0) & (nb[:, axis] < domain.grid_shape[axis])
            nb_idx = np.full(len(it), -1)
            nb_idx[ok] = idx[tuple(nb[ok].T)]
            inside = nb_idx >= 0
            rows.extend(flat[inside])
            cols.extend(nb_idx[inside])
            vals.extend(np.full(inside.sum(), -1.0 / h2))
    A = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    return A if sparse else A.toarray()


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """First component above the noise threshold made positive, per column."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        big = np.abs(col) > _SIGN_EPS * np.abs(col).max()
        j = np.argmax(big)
        if col[j] < 0:
            out[:, k] = -col
    return out


def eigendecompose(domain: Domain, K: int) -> EigenBasis:
    """First K Dirichlet eigenpairs, ascending.

    Small problems (or nearly full bases) use a dense symmetric solve;
    large, strongly truncated bases use sparse shift-invert Lanczos with
    a fixed start vector so results are deterministic.
    """
    m = domain.n_interior
    if not 1 <= K <= m:
        raise ValueError(f"K must be in [1, {m}], got {K}")
    if m > 2500 and K <= m // 4:
        A = laplacian_matrix(domain, sparse=True)
        lam, V = scipy.sparse.linalg.eigsh(
            A.tocsc(), k=K, sigma=0, which="LM", v0=np.ones(m),
        )
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
    else:
        A = laplacian_matrix(domain)
        if K == m:
            lam, V = scipy.linalg.eigh(A)
        else:
            lam, V = scipy.linalg.eigh(A, subset_by_index=[0, K - 1])
    V = _fix_signs(V) / np.sqrt(domain.h**domain.dim)
    return EigenBasis(domain=domain, eigenvalues=lam, vectors=V)


def l2_norm(domain: Domain, values: np.ndarray) -> float:
    """Discrete L2 norm sqrt(h^dim * sum(v^2)); accepts full or packed arrays."""
    v = np.asarray(values, dtype=float)
    if v.shape == domain.grid_shape:
        v = v[domain.interior]
    return float(np.sqrt(domain.h**domain.dim * np.sum(v**2)))
