"""Degenerate-elliptic extension of thin-space fields.

A field u on the thin domain extends to w(x, y) on the slab
Omega x (0, Y) solving div(y^a grad w) = 0 with w(., 0) = u, where
a = 1 - 2s in (-1, 1).  Mode by mode the extension is explicit:

    w = sum_k a_k phi_k(x) psi_s(sqrt(lambda_k) y),
    psi_s(z) = 2^{1-s} / Gamma(s) * z^s K_s(z),

with psi_s(0) = 1 and psi_{1/2}(z) = exp(-z).  The weighted normal
derivative -lim y^a dw/dy recovers the fractional operator up to the
constant d_s = 2^{1-2s} Gamma(1-s) / Gamma(s), so a Dirichlet-to-Neumann
map calibrated on the first mode reproduces lambda^s exactly there.

Near y = 0 the profile behaves like 1 - kappa_s z^{2s} + O(z^2): boundary
quantities (dtn, hopf_ratio) therefore fit the first few off-trace layers
against the powers {y^{2s}, y^2, y^{2s+2}, y^4} instead of differencing.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gamma as gamma_fn, kve

from .domains import Domain, laplacian_matrix
from .spectral import SpectralField, _check_order
from . import halfball

__all__ = [
    "YMesh",
    "build_ymesh",
    "ExtensionField",
    "mode_profile",
    "mode_profile_derivative",
    "extension_energy_constant",
    "trace_coupling_constant",
    "smallest_eigenvalue",
    "extend_semianalytic",
    "extend_fd",
    "dtn",
    "check_uy_sign",
    "UySignReport",
    "weighted_energy",
    "trace_norms",
    "TraceReport",
    "hopf_ratio",
]


# -- extension-direction mesh -------------------------------------------------


@dataclass(frozen=True)
class YMesh:
    """Graded mesh 0 = y_0 < ... < y_M = Y for the extension direction."""

    nodes: np.ndarray
    grading: float

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def Y(self) -> float:
        return float(self.nodes[-1])


def build_ymesh(s: float, lam1: float, *, span_factor: float = 20.0,
                layers: int = 200, grading: float = None) -> YMesh:
    """Graded mesh y_j = Y (j/M)^g clustering nodes at the trace.

    The default grading g = max(2, 1/s) resolves the y^{2s} boundary
    layer of the mode profile; the default span Y = span_factor / sqrt(lam1)
    makes the slowest mode decay below 3e-9 at the top.
    """
    _check_order(s)
    if lam1 <= 0:
        raise ValueError("lam1 must be positive")
    if layers < 8:
        raise ValueError("need at least 8 layers")
    if grading is None:
        grading = max(2.0, 1.0 / s)
    if grading < 1:
        raise ValueError("grading must be >= 1")
    Y = span_factor / np.sqrt(lam1)
    nodes = Y * (np.arange(layers + 1) / layers) ** grading
    return YMesh(nodes=nodes, grading=float(grading))


# -- extension fields ----------------------------------------------------------


@dataclass(frozen=True)
class ExtensionField:
    """Field on the slab grid: values[..., j] is the layer at height y_j.

    ``provenance`` records how the field was produced ('semianalytic',
    'fd', or 'synthetic' for resampled/blow-up fields).
    """

    domain: Domain
    ymesh: YMesh
    s: float
    values: np.ndarray
    provenance: str = "synthetic"

    def __post_init__(self):
        expected = self.domain.grid_shape + (self.ymesh.M + 1,)
        if self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid x layers "
                f"{expected}"
            )
        _check_order(self.s)

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def trace(self) -> np.ndarray:
        return self.values[..., 0]

    def shifted(self, level: float) -> "ExtensionField":
        """Subtract a constant from every layer (free-boundary recentring)."""
        return ExtensionField(
            domain=self.domain,
            ymesh=self.ymesh,
            s=self.s,
            values=self.values - level,
            provenance="synthetic",
        )


# -- mode profile and constants ------------------------------------------------


def mode_profile(s: float, z) -> np.ndarray:
    """psi_s(z) = 2^{1-s}/Gamma(s) z^s K_s(z); psi_s(0) = 1, decaying in z.

    Uses the scaled Bessel function kve to stay finite for large z and
    clamps to 0 once exp(-z) underflows.
    """
    _check_order(s)
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    pos = z > 0
    zp = z[pos]
    with np.errstate(over="ignore", under="ignore"):
        vals = (2 ** (1 - s) / gamma_fn(s)) * zp**s * kve(s, zp) * np.exp(-zp)
    vals[zp > 700] = 0.0
    out[pos] = vals
    return out


def mode_profile_derivative(s: float, z) -> np.ndarray:
    """psi_s'(z) = -2^{1-s}/Gamma(s) z^s K_{s-1}(z)  (z > 0)."""
    _check_order(s)
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    zp = z[pos]
    with np.errstate(over="ignore", under="ignore"):
        vals = -(2 ** (1 - s) / gamma_fn(s)) * zp**s * kve(1 - s, zp) * np.exp(-zp)
    vals[zp > 700] = 0.0
    out[pos] = vals
    return out


def extension_energy_constant(s: float) -> float:
    """d_s = 2^{1-2s} Gamma(1-s)/Gamma(s): weighted energy of a unit mode.

    The slab energy of the extension of a single eigenmode equals
    d_s * lambda_k^s * a_k^2; d_{1/2} = 1.
    """
    _check_order(s)
    if s == 1.0:
        raise ValueError("extension requires s in (0, 1)")
    return float(2 ** (1 - 2 * s) * gamma_fn(1 - s) / gamma_fn(s))


def trace_coupling_constant(s: float) -> float:
    """kappa_s = 4^{-s} Gamma(1-s)/(s Gamma(s)): psi_s(z) = 1 - kappa_s z^{2s} + O(z^2)."""
    _check_order(s)
    if s == 1.0:
        raise ValueError("extension requires s in (0, 1)")
    return float(4.0 ** (-s) * gamma_fn(1 - s) / (s * gamma_fn(s)))


def smallest_eigenvalue(domain: Domain) -> float:
    """Smallest discrete Dirichlet eigenvalue by inverse power iteration."""
    A = laplacian_matrix(domain, sparse=True).tocsc()
    lu = spla.splu(A)
    v = np.ones(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(400):
        w = lu.solve(v)
        v = w / np.linalg.norm(w)
        lam_new = float(v @ (A @ v))
        if abs(lam_new - lam) <= 1e-14 * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


# -- building extensions --------------------------------------------------------


def extend_semianalytic(f: SpectralField, s: float, ymesh: YMesh) -> ExtensionField:
    """Extend a spectral field mode by mode with the exact profile."""
    _check_order(s)
    if s == 1.0:
        raise ValueError("extension requires s in (0, 1)")
    basis = f.basis
    dom = basis.domain
    z = np.sqrt(basis.eigenvalues)[:, None] * ymesh.nodes[None, :]
    profiles = mode_profile(s, z)  # (K, M+1)
    layers_int = basis.vectors @ (f.coeffs[:, None] * profiles)  # (n_int, M+1)
    vals = np.zeros(dom.grid_shape + (ymesh.M + 1,))
    vals[dom.interior] = layers_int
    return ExtensionField(domain=dom, ymesh=ymesh, s=s, values=vals,
                          provenance="semianalytic")


def extend_fd(domain: Domain, trace_values: np.ndarray, s: float,
              ymesh: YMesh) -> ExtensionField:
    """Solve the weighted slab problem by a finite-volume scheme.

    Unknowns live at interior grid nodes and layers 1..M-1; the trace is
    Dirichlet data at y = 0, and zero is imposed on the lateral walls and
    the top.  Face conductances integrate the weight y^a exactly:

      horizontal faces of layer j:  int over the control volume of y^a
      vertical   faces j -> j+1:    harmonic transmissibility
                                    (1 - a) / (y_{j+1}^{1-a} - y_j^{1-a})

    so the matrix is symmetric positive definite and satisfies a discrete
    maximum principle (nonnegative data give nonnegative solutions).
    """
    _check_order(s)
    if s == 1.0:
        raise ValueError("extension requires s in (0, 1)")
    a = 1.0 - 2.0 * s
    trace_full = np.asarray(trace_values, dtype=float)
    if trace_full.shape != domain.grid_shape:
        raise ValueError("trace must be a full-grid array")
    if not np.all(np.isfinite(trace_full)):
        raise ValueError("trace contains non-finite values")
    off = np.abs(trace_full[~domain.interior])
    scale = max(np.abs(trace_full).max(), 1.0)
    if off.size and off.max() > 1e-12 * scale:
        raise ValueError("trace must vanish off the interior nodes")

    ys = ymesh.nodes
    M = ymesh.M
    h, dim = domain.h, domain.dim
    mid = 0.5 * (ys[:-1] + ys[1:])
    # control volume of layer j = 1..M-1 spans [mid_{j-1}, mid_j]
    wvol = (mid[1:] ** (1 + a) - mid[:-1] ** (1 + a)) / (1 + a)  # layers 1..M-1
    cond_x = wvol * h ** (dim - 2)
    # vertical conductance between layers j and j+1, j = 0..M-1
    resist = (ys[1:] ** (1 - a) - ys[:-1] ** (1 - a)) / (1 - a)
    cond_y = h**dim / resist

    m = domain.n_interior
    L = M - 1
    B = laplacian_matrix(domain, sparse=True) * h**2  # graph Laplacian, Dirichlet walls
    Ty = sp.diags(cond_y[:-1] + cond_y[1:])
    if L > 1:
        off_diag = sp.diags(cond_y[1:L], offsets=1, shape=(L, L))
        Ty = Ty - off_diag - off_diag.T
    A = sp.kron(B, sp.diags(cond_x), format="csc") + sp.kron(
        sp.identity(m, format="csc"), Ty, format="csc"
    )
    rhs = np.zeros((m, L))
    rhs[:, 0] = cond_y[0] * trace_full[domain.interior]
    sol = spla.splu(A).solve(rhs.ravel()).reshape(m, L)

    vals = np.zeros(domain.grid_shape + (M + 1,))
    vals[..., 0] = trace_full
    vals[domain.interior, 1:M] = sol
    return ExtensionField(domain=domain, ymesh=ymesh, s=s, values=vals,
                          provenance="fd")


# -- boundary-layer fits ---------------------------------------------------------


def _fit_powers(s: float) -> list:
    """Powers of y used to model w(x, y) - w(x, 0) near the trace."""
    candidates = [2 * s, 2.0, 2 * s + 2, 4.0, 2 * s + 4, 6.0]
    powers = []
    for p in candidates:
        if all(abs(p - q) > 0.05 for q in powers):
            powers.append(p)
        if len(powers) == 4:
            break
    return powers


def _boundary_fit_weights(ymesh: YMesh, s: float):
    """Weights alpha so that sum_l alpha_l (w(y_l) - w(0)) estimates the
    coefficient of y^{2s} in the near-trace expansion of w."""
    powers = np.asarray(_fit_powers(s))
    L = len(powers)
    if ymesh.M < L + 1:
        raise ValueError(f"need at least {L + 1} layers, got {ymesh.M}")
    ys = ymesh.nodes[1:L + 1]
    A = ys[:, None] ** powers[None, :]
    col = np.abs(A).max(axis=0)
    alpha = np.linalg.pinv(A / col)[0] / col[0]
    return alpha, L


def dtn(w: ExtensionField, *, lam1: float = None) -> np.ndarray:
    """Dirichlet-to-Neumann value of the extension at every grid node.

    Fits the first layers against the near-trace powers of y, then
    calibrates the single remaining constant on the first eigenmode so
    that dtn(extend(phi_1)) = lambda_1^s phi_1 holds exactly on the grid.
    Returns a full-grid array approximating the fractional operator
    applied to the trace.
    """
    alpha, L = _boundary_fit_weights(w.ymesh, w.s)
    delta = w.values[..., 1:L + 1] - w.values[..., :1]
    b = np.tensordot(delta, alpha, axes=([-1], [0]))
    if lam1 is None:
        lam1 = smallest_eigenvalue(w.domain)
    ref = mode_profile(w.s, np.sqrt(lam1) * w.ymesh.nodes[1:L + 1]) - 1.0
    b_ref = float(alpha @ ref)
    if not b_ref < 0:
        raise ValueError("calibration failed: reference profile fit is not negative")
    return (lam1**w.s / b_ref) * b


def hopf_ratio(w: ExtensionField, x0, *, min_radius_cells: float = 2.0) -> float:
    """Growth coefficient of w away from the trace at a thin-space minimum.

    At a point x0 where w(., 0) attains a local minimum m0 on the half-ball
    and w is not constant, the ratio (w(x0, y) - m0) / y^{1-a} tends to a
    nonnegative limit; this returns the limit estimated by the near-trace
    power fit.  Raises if x0 is not a nodal point, not a local minimum of
    the trace on the ball, or if w is constant there.
    """
    dom = w.domain
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    idx = tuple(int(np.argmin(np.abs(ax - c))) for ax, c in zip(dom.axes, x0))
    node = np.array([dom.axes[d][idx[d]] for d in range(dom.dim)])
    if np.max(np.abs(node - x0)) > dom.h / 2 + 1e-12:
        raise ValueError("x0 must lie at (or within half a cell of) a grid node")
    r = 0.5 * min(dom.distance_to_boundary(node), w.ymesh.Y)
    if r < min_radius_cells * dom.h:
        raise ValueError("x0 is too close to the boundary for a half-ball")
    vals = w.values
    m0 = vals[idx + (0,)]
    # nodal minimum check over the half-ball
    coords = np.meshgrid(*dom.axes, indexing="ij")
    dist2 = sum((c - node[d]) ** 2 for d, c in enumerate(coords))
    scale = np.abs(vals).max()
    inside = (dist2[..., None] + w.ymesh.nodes[None, :] ** 2) <= r**2
    ball_vals = vals[inside]
    if ball_vals.min() < m0 - 1e-10 * max(scale, 1.0):
        raise ValueError("trace value at x0 is not the half-ball minimum")
    if ball_vals.max() - ball_vals.min() <= 1e-13 * max(scale, 1.0):
        raise ValueError("field is constant on the half-ball")
    alpha, L = _boundary_fit_weights(w.ymesh, w.s)
    delta = vals[idx + (slice(1, L + 1),)] - m0
    return float(alpha @ delta)


# -- diagnostics -----------------------------------------------------------------


@dataclass(frozen=True)
class UySignReport:
    """Signs of the one-sided y-derivatives of an extension field."""

    max_derivative: float
    n_violations: int
    worst_location: tuple
    passed: bool


def check_uy_sign(w: ExtensionField, *, tol: float = 1e-8) -> UySignReport:
    """Check that w is nonincreasing in y at every node (up to tol).

    The derivative is measured by one-sided differences between adjacent
    layers; positive values beyond ``tol`` (relative to the field scale)
    are violations.
    """
    ys = w.ymesh.nodes
    dy = ys[1:] - ys[:-1]
    grad = (w.values[..., 1:] - w.values[..., :-1]) / dy
    scale = max(np.abs(w.values).max(), 1.0)
    viol = grad > tol * scale
    flat = int(np.argmax(grad))
    worst = np.unravel_index(flat, grad.shape)
    return UySignReport(
        max_derivative=float(grad.max()),
        n_violations=int(np.count_nonzero(viol)),
        worst_location=tuple(int(k) for k in worst),
        passed=not bool(viol.any()),
    )


def _cell_moments(ys: np.ndarray, a: float):
    """Exact integrals of y^a {1, t, t^2} over each y-cell, t the local coordinate."""
    y0, y1 = ys[:-1], ys[1:]
    d = y1 - y0
    m0 = (y1 ** (a + 1) - y0 ** (a + 1)) / (a + 1)
    m1 = (y1 ** (a + 2) - y0 ** (a + 2)) / (a + 2)
    m2 = (y1 ** (a + 3) - y0 ** (a + 3)) / (a + 3)
    i0 = m0
    i1 = (m1 - y0 * m0) / d
    i2 = (m2 - 2 * y0 * m1 + y0**2 * m0) / d**2
    return i0, i1, i2


def weighted_energy(w: ExtensionField) -> float:
    """int y^a |grad w|^2 over the slab, for the multilinear interpolant.

    The y-moments of the weight are integrated exactly per cell; the thin
    directions use two-point Gauss, which is exact for the interpolant.
    """
    a = w.a
    vals = w.values
    ys = w.ymesh.nodes
    i0, i1, i2 = _cell_moments(ys, a)
    h = w.domain.h
    dy = ys[1:] - ys[:-1]
    if w.domain.dim == 1:
        A = np.diff(vals[:, :-1], axis=0)         # x-slope at bottom of cell
        Bt = np.diff(vals[:, 1:], axis=0)         # x-slope at top
        C = np.diff(vals[:-1, :], axis=1)         # y-jump at left edge
        D = np.diff(vals[1:, :], axis=1)          # y-jump at right edge
        ex = (A**2 * i0 + 2 * A * (Bt - A) * i1 + (Bt - A) ** 2 * i2) / h
        ey = (h / dy**2) * i0 * (C**2 + C * D + D**2) / 3.0
        return float(ex.sum() + ey.sum())
    g = 0.5 - 0.5 / np.sqrt(3.0)
    gauss = (g, 1.0 - g)
    total = 0.0
    v = vals
    for x1g in gauss:
        for x2g in gauss:
            bot = v[:, :, :-1]
            top = v[:, :, 1:]
            g1b = ((1 - x2g) * (bot[1:, :-1] - bot[:-1, :-1])
                   + x2g * (bot[1:, 1:] - bot[:-1, 1:])) / h
            g1t = ((1 - x2g) * (top[1:, :-1] - top[:-1, :-1])
                   + x2g * (top[1:, 1:] - top[:-1, 1:])) / h
            g2b = ((1 - x1g) * (bot[:-1, 1:] - bot[:-1, :-1])
                   + x1g * (bot[1:, 1:] - bot[1:, :-1])) / h
            g2t = ((1 - x1g) * (top[:-1, 1:] - top[:-1, :-1])
                   + x1g * (top[1:, 1:] - top[1:, :-1])) / h
            jy = ((1 - x1g) * (1 - x2g) * (top[:-1, :-1] - bot[:-1, :-1])
                  + x1g * (1 - x2g) * (top[1:, :-1] - bot[1:, :-1])
                  + (1 - x1g) * x2g * (top[:-1, 1:] - bot[:-1, 1:])
                  + x1g * x2g * (top[1:, 1:] - bot[1:, 1:]))
            e1 = g1b**2 * i0 + 2 * g1b * (g1t - g1b) * i1 + (g1t - g1b) ** 2 * i2
            e2 = g2b**2 * i0 + 2 * g2b * (g2t - g2b) * i1 + (g2t - g2b) ** 2 * i2
            eyl = (jy / dy) ** 2 * i0
            total += 0.25 * h**2 * float((e1 + e2 + eyl).sum())
    return total


@dataclass(frozen=True)
class TraceReport:
    """Half-ball comparison of boundary, thin, and energy integrals."""

    radius: float
    energy: float
    boundary_norm: float
    thin_norm: float
    boundary_over_energy: float
    thin_over_energy: float


def trace_norms(w: ExtensionField, center, r: float) -> TraceReport:
    """Half-ball integrals at radius r around a thin-space center.

    Reports H(r), D(r), the thin-ball trace mass, and the scale-free
    ratios H / (r^{n+a-1} ...) used in trace inequalities; all integrals
    use the weighted quadrature engine.
    """
    engine = halfball.HalfBallQuadrature(w, center, r)
    D = engine.energy(r)
    H = engine.boundary_norm(r)
    T = engine.thin_mass(r)
    eps = np.finfo(float).tiny
    return TraceReport(
        radius=float(r),
        energy=D,
        boundary_norm=H,
        thin_norm=T,
        boundary_over_energy=H / (r * D) if D > eps else np.inf,
        thin_over_energy=T / (r ** (1 - w.a) * D) if D > eps else np.inf,
    )
