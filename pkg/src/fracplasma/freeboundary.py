"""Free-boundary geometry, frequency monitoring, and blow-up classification.

Works on extension fields w of the (shifted) solution u - gamma.  The
free boundary is the zero level set of the trace; its points are tagged
regular or singular by combining a gradient test with an Almgren-type
frequency

    N(r) = r D(r) / H(r),
    D(r) = int_{B_r^+} y^a |grad w|^2,
    H(r) = int_{(dB_r)^+} y^a w^2,

and its adjusted variant N~(r) = r (D(r) - lam_f int_{B'_r} (w)_+^2) / H(r),
where lam_f is the thin-flux coefficient (the eigenvalue scaled by the
extension flux constant, so that lim y^a dw/dy = -lam_f (w)_+ on the thin
space).  N~ equals r times the half-sphere flux integral over H and tends
to the same limit N(0+) as N, but its raw values can drift downward at
finite radii: differentiating with the Rellich identity gives

    d/dr log N~ = -(1-a) lam_f T(r) / (r F(r)) + (Cauchy-Schwarz gap),

with T the thin mass of (w)_+^2 and F = D - lam_f T, so only the corrected
functional  log N~(r) + (1-a) int (N - N~)/(rho N~) drho  is provably
nondecreasing.  Profiles expose both the raw values and the corrected
functional.  N(0+) = 1 marks regular points (blow-up a half-plane
profile), N(0+) = 2 marks singular candidates whose blow-up should match
a quadratic model p(x) - c y^2 with c >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .domains import Domain, build_domain
from .extension import ExtensionField, YMesh, extension_energy_constant
from . import halfball

__all__ = [
    "FreeBoundaryPoint",
    "FreeBoundary",
    "extract_free_boundary",
    "FrequencyProfile",
    "frequency_profile",
    "BlowupField",
    "blowup",
    "Classification",
    "classify_point",
    "InclusionReport",
    "check_boundary_inclusion",
    "StripReport",
    "check_subharmonic_strip",
    "Census",
    "singular_census",
]


# -- free-boundary extraction -------------------------------------------------


@dataclass(frozen=True)
class FreeBoundaryPoint:
    """A level-set crossing on a grid edge."""

    location: tuple
    gradient: tuple
    tag: str
    cell: tuple
    edge: tuple


@dataclass(frozen=True)
class FreeBoundary:
    """Level set of the trace: crossing points, chained segments, cells."""

    level: float
    points: list
    chains: list
    cells: list
    degenerate: bool = False
    note: str = ""


def _interp_grid(domain: Domain, arr: np.ndarray, point) -> float:
    """Multilinear interpolation of a full-grid array at one thin point."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    idx, ts = [], []
    for d, ax in enumerate(domain.axes):
        i = int(np.clip(np.searchsorted(ax, p[d]) - 1, 0, len(ax) - 2))
        idx.append(i)
        ts.append((p[d] - ax[i]) / (ax[i + 1] - ax[i]))
    if domain.dim == 1:
        i, t = idx[0], ts[0]
        return float(arr[i] * (1 - t) + arr[i + 1] * t)
    (i, j), (t, u) = idx, ts
    return float(
        arr[i, j] * (1 - t) * (1 - u) + arr[i + 1, j] * t * (1 - u)
        + arr[i, j + 1] * (1 - t) * u + arr[i + 1, j + 1] * t * u
    )


def _gradient_arrays(domain: Domain, values: np.ndarray):
    return [np.gradient(values, domain.h, axis=d) for d in range(domain.dim)]


def _second_difference_scale(domain: Domain, values: np.ndarray) -> float:
    """Largest second difference / h^2 over the grid, a curvature proxy."""
    h2 = domain.h**2
    worst = 0.0
    for d in range(domain.dim):
        sl_lo = [slice(None)] * domain.dim
        sl_mid = [slice(None)] * domain.dim
        sl_hi = [slice(None)] * domain.dim
        sl_lo[d] = slice(0, -2)
        sl_mid[d] = slice(1, -1)
        sl_hi[d] = slice(2, None)
        d2 = values[tuple(sl_lo)] - 2 * values[tuple(sl_mid)] + values[tuple(sl_hi)]
        worst = max(worst, float(np.abs(d2).max()) / h2)
    return worst


# marching-squares segment table: corners c0=(i,j) c1=(i+1,j) c2=(i+1,j+1)
# c3=(i,j+1); edges 0=bottom 1=right 2=top 3=left; case bit k set iff
# corner ck is at-or-above the level
_MS_TABLE = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}


def extract_free_boundary(domain: Domain, values: np.ndarray, level: float) -> FreeBoundary:
    """Locate the level set of a full-grid field by edgewise interpolation.

    In 2-D, cell crossings are chained into polylines by marching
    squares, with saddle cells disambiguated by the cell-centre average.
    A field that sits entirely at the level is flagged degenerate: the
    level set is area-filling and every cell is returned.
    """
    u = np.asarray(values, dtype=float)
    if u.shape != domain.grid_shape:
        raise ValueError("values must be a full-grid array")
    phi = u - level
    scale = max(float(np.abs(u).max()), abs(level), 1e-300)
    if np.all(np.abs(phi) <= 1e-13 * scale):
        all_cells = [tuple(c) for c in np.ndindex(*[s - 1 for s in domain.grid_shape])]
        return FreeBoundary(level=float(level), points=[], chains=[],
                            cells=all_cells, degenerate=True,
                            note="field sits at the level everywhere; "
                                 "level set is area-filling")
    grads = _gradient_arrays(domain, u)
    thr = 10.0 * domain.h * _second_difference_scale(domain, u)

    def make_point(loc, cell, edge):
        g = tuple(_interp_grid(domain, ga, loc) for ga in grads)
        gn = float(np.hypot(*g)) if len(g) == 2 else abs(g[0])
        tag = "regular" if gn > thr else "unresolved"
        return FreeBoundaryPoint(location=tuple(float(c) for c in loc),
                                 gradient=g, tag=tag, cell=cell, edge=edge)

    above = phi >= 0

    if domain.dim == 1:
        xs = domain.axes[0]
        points, cells = [], []
        for i in range(len(xs) - 1):
            if above[i] != above[i + 1]:
                t = phi[i] / (phi[i] - phi[i + 1])
                loc = (xs[i] + t * domain.h,)
                cells.append((i,))
                points.append(make_point(loc, (i,), (0, i)))
        note = "" if points else "level set is empty"
        return FreeBoundary(level=float(level), points=points, chains=[],
                            cells=cells, note=note)

    xs, ys = domain.axes
    nx, ny = domain.grid_shape
    crossings = {}  # edge key -> location

    def edge_point(key):
        if key in crossings:
            return crossings[key]
        axis, i, j = key
        p0 = phi[i, j]
        p1 = phi[i + 1, j] if axis == 0 else phi[i, j + 1]
        t = p0 / (p0 - p1)
        loc = ((xs[i] + t * domain.h, ys[j]) if axis == 0
               else (xs[i], ys[j] + t * domain.h))
        crossings[key] = loc
        return loc

    cell_edges = {}
    diff_x = above[:-1, :] != above[1:, :]
    diff_y = above[:, :-1] != above[:, 1:]
    cross_any = diff_x[:, :-1] | diff_x[:, 1:] | diff_y[:-1, :] | diff_y[1:, :]
    segments = []
    for i, j in np.argwhere(cross_any):
        case = (int(above[i, j]) + 2 * int(above[i + 1, j])
                + 4 * int(above[i + 1, j + 1]) + 8 * int(above[i, j + 1]))
        if case in (5, 10):
            centre_above = (phi[i, j] + phi[i + 1, j] + phi[i + 1, j + 1]
                            + phi[i, j + 1]) >= 0
            if case == 5:
                pairs = [(0, 1), (2, 3)] if centre_above else [(3, 0), (1, 2)]
            else:
                pairs = [(3, 0), (1, 2)] if centre_above else [(0, 1), (2, 3)]
        else:
            pairs = _MS_TABLE[case]
        local = {0: (0, i, j), 1: (1, i + 1, j), 2: (0, i, j + 1), 3: (1, i, j)}
        for e0, e1 in pairs:
            k0, k1 = local[e0], local[e1]
            edge_point(k0)
            edge_point(k1)
            segments.append(((i, j), k0, k1))
        cell_edges[(i, j)] = pairs

    points = [make_point(loc, _owner_cell(key, nx, ny), key)
              for key, loc in crossings.items()]
    chains = _chain_segments(segments, crossings)
    cells = sorted(cell_edges.keys())
    note = "" if points else "level set is empty"
    return FreeBoundary(level=float(level), points=points, chains=chains,
                        cells=[tuple(int(c) for c in cc) for cc in cells], note=note)


def _owner_cell(edge_key, nx, ny):
    axis, i, j = edge_key
    ci = min(i, nx - 2)
    cj = min(j, ny - 2)
    return (int(ci), int(cj))


def _chain_segments(segments, crossings):
    """Assemble marching-squares segments into polylines (open chains first)."""
    adj = {}
    for sid, (_, k0, k1) in enumerate(segments):
        adj.setdefault(k0, []).append((sid, k1))
        adj.setdefault(k1, []).append((sid, k0))
    used = set()
    chains = []

    def walk(start):
        chain = [start]
        current = start
        while True:
            nxt = None
            for sid, other in adj[current]:
                if sid not in used:
                    used.add(sid)
                    nxt = other
                    break
            if nxt is None:
                break
            chain.append(nxt)
            current = nxt
        return chain

    endpoints = [k for k, nbrs in adj.items() if len(nbrs) == 1]
    for k in endpoints:
        if all(sid in used for sid, _ in adj[k]):
            continue
        chains.append(walk(k))
    for k in adj:
        if any(sid not in used for sid, _ in adj[k]):
            chains.append(walk(k))
    return [np.array([crossings[k] for k in chain]) for chain in chains]


# -- frequency profiles ----------------------------------------------------------


@dataclass(frozen=True)
class FrequencyProfile:
    """Frequency data over a ladder of radii around one centre."""

    center: tuple
    radii: np.ndarray
    energy: np.ndarray
    boundary: np.ndarray
    thin_mass: np.ndarray
    frequency: np.ndarray
    adjusted: np.ndarray
    corrected: np.ndarray
    lam: float
    lam_flux: float
    n_zero_plus: float
    sandwich_constant: float
    monotone_violations: list
    n_truncated: int
    note: str = ""


def frequency_profile(w: ExtensionField, center, radii, lam: float) -> FrequencyProfile:
    """Frequency N and adjusted frequency N~ along a radius ladder.

    ``lam`` is the eigenvalue of the thin equation; the adjusted frequency
    internally uses the thin-flux coefficient lam * d_s, because the
    half-sphere flux identity reads D - d_s lam T = int y^a w dw/dnu.

    Radii must stay above five grid cells (below that the half-ball sees
    too few nodes to mean anything) and inside both the thin domain and
    the extension span.  Radii where the boundary integral underflows
    relative to its peak are truncated from the end of the ladder.
    """
    dom = w.domain
    center = np.atleast_1d(np.asarray(center, dtype=float))
    radii = np.asarray(sorted(set(float(r) for r in np.atleast_1d(radii))))
    if len(radii) == 0 or radii[0] <= 0:
        raise ValueError("radii must be positive")
    if radii[0] < 5 * dom.h * (1 - 1e-9):
        raise ValueError(
            f"smallest radius {radii[0]:.4g} is below five grid cells "
            f"({5 * dom.h:.4g}); the half-ball would be under-resolved"
        )
    room = min(dom.distance_to_boundary(center), w.ymesh.Y)
    if radii[-1] > room * (1 + 1e-9):
        raise ValueError(
            f"largest radius {radii[-1]:.4g} exceeds the distance "
            f"{room:.4g} to the boundary of the slab"
        )
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    engine = halfball.HalfBallQuadrature(w, center, radii[-1])
    D = np.array([engine.energy(r) for r in radii])
    H = np.array([engine.boundary_norm(r) for r in radii])
    T = np.array([engine.thin_mass(r, positive=True) for r in radii])

    floor = H.max() * 1e-13
    keep = len(H)
    for i, hv in enumerate(H):
        if hv <= floor:
            keep = i
            break
    truncated = len(H) - keep
    note = ""
    if keep == 0:
        raise ValueError("boundary integral vanishes at every radius; "
                         "the field is zero near this centre")
    if truncated:
        note = f"dropped {truncated} radii with vanishing boundary integral"
    radii, D, H, T = radii[:keep], D[:keep], H[:keep], T[:keep]

    a = w.a
    lam_flux = lam * extension_energy_constant(w.s) if w.s < 1 else lam
    N = radii * D / H
    Ntil = radii * (D - lam_flux * T) / H

    if keep >= 3:
        X = np.column_stack([np.ones(3), radii[:3] ** (1 - a)])
        coef, *_ = np.linalg.lstsq(X, Ntil[:3], rcond=None)
        n0 = float(coef[0])
    else:
        n0 = float("nan")

    if lam_flux > 0:
        ok = N > 0
        gaps = np.zeros_like(N)
        gaps[ok] = (N[ok] - Ntil[ok]) / (lam_flux * N[ok] * radii[ok] ** (1 - a))
        sandwich = float(gaps.max()) if ok.any() else 0.0
    else:
        sandwich = 0.0

    corrected = np.full_like(Ntil, np.nan)
    if (Ntil > 0).all():
        integrand = (1 - a) * (N - Ntil) / (radii * Ntil)
        drift = np.concatenate([
            [0.0],
            np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(radii)),
        ])
        corrected = np.log(Ntil) + drift

    viol = [int(i) for i in range(len(Ntil) - 1)
            if Ntil[i + 1] < Ntil[i] - 1e-10 * max(1.0, abs(Ntil[i]))]

    return FrequencyProfile(
        center=tuple(float(c) for c in center), radii=radii, energy=D,
        boundary=H, thin_mass=T, frequency=N, adjusted=Ntil,
        corrected=corrected, lam=float(lam), lam_flux=float(lam_flux),
        n_zero_plus=n0, sandwich_constant=sandwich,
        monotone_violations=viol, n_truncated=truncated, note=note,
    )


# -- blow-up ------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupField:
    """Rescaled field u(x0 + r.)/norm on the reference half-ball grid.

    The reference slab is [-1, 1]^dim x [0, 1]; the normalization makes
    the weighted boundary integral over the unit half-sphere equal one.
    """

    field: ExtensionField
    center: tuple
    source_radius: float
    normalization: float
    boundary_mass: float


def blowup(w: ExtensionField, center, r: float, *, ref_nodes: int = 65,
           ref_layers: int = 48) -> BlowupField:
    """Resample w around a centre at scale r onto the reference slab grid."""
    dom = w.domain
    center = np.atleast_1d(np.asarray(center, dtype=float))
    r = float(r)
    if r < 5 * dom.h * (1 - 1e-9):
        raise ValueError(f"blow-up radius {r:.4g} is below five grid cells")
    room = min(dom.distance_to_boundary(center), w.ymesh.Y)
    if r > room * (1 + 1e-9):
        raise ValueError(f"blow-up ball of radius {r:.4g} leaves the slab "
                         f"(room {room:.4g})")

    if dom.dim == 1:
        ref_dom = build_domain("interval", ref_nodes, bounds=(-1.0, 1.0))
    else:
        ref_dom = build_domain("rectangle", ref_nodes,
                               bounds=((-1.0, 1.0), (-1.0, 1.0)))
    g = w.ymesh.grading
    ref_ym = YMesh(nodes=(np.arange(ref_layers + 1) / ref_layers) ** g,
                   grading=g)

    mesh = np.meshgrid(*ref_dom.axes, indexing="ij")
    thin = np.column_stack([m.ravel() for m in mesh])            # (Q, dim)
    nthin = thin.shape[0]
    yv = ref_ym.nodes
    pts_thin = np.repeat(center[None, :] + r * thin, len(yv), axis=0)
    pts_y = np.tile(r * yv, nthin)
    vals = halfball.interp_values(
        w, pts_thin if dom.dim == 2 else pts_thin[:, 0], pts_y
    ).reshape(ref_dom.grid_shape + (len(yv),))

    raw = ExtensionField(domain=ref_dom, ymesh=ref_ym, s=w.s, values=vals,
                         provenance="synthetic")
    engine = halfball.HalfBallQuadrature(raw, np.zeros(dom.dim), 1.0)
    h1 = engine.boundary_norm(1.0)
    if not np.isfinite(h1) or h1 <= 0:
        raise ValueError("field has vanishing boundary mass at this centre/radius")
    norm = float(np.sqrt(h1))
    scaled = ExtensionField(domain=ref_dom, ymesh=ref_ym, s=w.s,
                            values=vals / norm, provenance="synthetic")
    return BlowupField(field=scaled, center=tuple(float(c) for c in center),
                       source_radius=r, normalization=norm,
                       boundary_mass=float(h1 / norm**2))


# -- classification -------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Outcome of the regular/singular test at one free-boundary point."""

    tag: str                     # 'regular' | 'singular-candidate' | 'unresolved'
    gradient_norm: float
    frequency_at_zero: float
    quadratic_coefficient: float
    fit_residual: float
    note: str = ""
    profile: FrequencyProfile = dc_field(default=None, repr=False)


def _quadratic_fit(bl: BlowupField):
    """Weighted fit of the blow-up against the quadratic model p(x) - c y^2.

    Returns (c_relative, residual): c is reported relative to the leading
    eigenvalue of the thin quadratic form, and the residual is the
    weighted relative misfit over the unit half-ball.
    """
    ref = bl.field
    dom = ref.domain
    ys = ref.ymesh.nodes
    mesh = np.meshgrid(*dom.axes, indexing="ij")
    # node weights: uniform in the thin directions, exact y^a moments in y
    mids = np.concatenate([[0.0], 0.5 * (ys[:-1] + ys[1:]), [ys[-1]]])
    a = ref.a
    wy = (mids[1:] ** (1 + a) - mids[:-1] ** (1 + a)) / (1 + a)

    rho2 = sum(m**2 for m in mesh)[..., None] + ys[None, ...] ** 2
    inside = rho2 <= 1.0
    vals = ref.values[inside]
    weights = np.broadcast_to(wy, ref.values.shape)[inside]

    coords = [np.broadcast_to(m[..., None], ref.values.shape)[inside] for m in mesh]
    yy = np.broadcast_to(ys, ref.values.shape)[inside]
    if dom.dim == 1:
        X = np.column_stack([coords[0] ** 2, yy**2])
    else:
        X = np.column_stack([coords[0] ** 2, coords[0] * coords[1],
                             coords[1] ** 2, yy**2])
    sw = np.sqrt(weights)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], vals * sw, rcond=None)
    fit = X @ beta
    denom = float(np.sum(weights * vals**2))
    resid = float(np.sqrt(np.sum(weights * (vals - fit) ** 2) / max(denom, 1e-300)))
    c = -float(beta[-1])
    if dom.dim == 1:
        lead = abs(float(beta[0]))
    else:
        Q = np.array([[beta[0], beta[1] / 2], [beta[1] / 2, beta[2]]])
        lead = float(np.max(np.abs(np.linalg.eigvalsh(Q))))
    c_rel = c / lead if lead > 0 else float("inf")
    return c_rel, resid


def classify_point(w: ExtensionField, center, lam: float, *,
                   band: float = 0.15, fit_tol: float = 0.05) -> Classification:
    """Tag a free-boundary point as regular, singular candidate, or unresolved.

    ``w`` must be the extension of the shifted solution (zero at the free
    boundary).  A trace gradient clearly above discretisation noise means
    regular immediately; otherwise the frequency limit N(0+) decides:
    within ``band`` of 1 regular, within ``band`` of 2 a quadratic-model
    fit of the blow-up confirms or rejects the singular candidacy.
    """
    dom = w.domain
    center = np.atleast_1d(np.asarray(center, dtype=float))
    u = w.trace
    scale = max(float(np.abs(u).max()), 1e-300)
    if abs(_interp_grid(dom, u, center)) > 2e-2 * scale:
        raise ValueError("centre does not lie on the zero level of the trace")
    grads = _gradient_arrays(dom, u)
    gvec = [abs(_interp_grid(dom, g, center)) for g in grads]
    gnorm = float(np.linalg.norm(gvec))
    thr = 10.0 * dom.h * _second_difference_scale(dom, u)
    if gnorm > thr:
        return Classification(tag="regular", gradient_norm=gnorm,
                              frequency_at_zero=float("nan"),
                              quadratic_coefficient=float("nan"),
                              fit_residual=float("nan"),
                              note="trace gradient above discretisation noise")

    room = min(dom.distance_to_boundary(center), w.ymesh.Y)
    rmax = 0.5 * room
    rmin = 5 * dom.h
    if rmax < 1.2 * rmin:
        return Classification(tag="unresolved", gradient_norm=gnorm,
                              frequency_at_zero=float("nan"),
                              quadratic_coefficient=float("nan"),
                              fit_residual=float("nan"),
                              note="too close to the boundary for a radius ladder")
    radii = np.linspace(rmin, rmax, 10)
    prof = frequency_profile(w, center, radii, lam)
    n0 = prof.n_zero_plus
    if not np.isfinite(n0):
        return Classification(tag="unresolved", gradient_norm=gnorm,
                              frequency_at_zero=n0,
                              quadratic_coefficient=float("nan"),
                              fit_residual=float("nan"),
                              note="frequency limit could not be extrapolated",
                              profile=prof)
    if abs(n0 - 1.0) <= band:
        return Classification(tag="regular", gradient_norm=gnorm,
                              frequency_at_zero=n0,
                              quadratic_coefficient=float("nan"),
                              fit_residual=float("nan"),
                              note="frequency limit near 1", profile=prof)
    if abs(n0 - 2.0) <= band:
        # resampling error of the blow-up scales like (h / r)^2, so fit the
        # quadratic model on the widest radius the geometry allows up to 15h
        bl = blowup(w, center, min(rmax, max(radii[0], 15 * dom.h)))
        c_rel, resid = _quadratic_fit(bl)
        if resid < fit_tol and c_rel >= -2e-2:
            return Classification(tag="singular-candidate", gradient_norm=gnorm,
                                  frequency_at_zero=n0,
                                  quadratic_coefficient=c_rel,
                                  fit_residual=resid,
                                  note="frequency near 2 and quadratic blow-up",
                                  profile=prof)
        return Classification(tag="unresolved", gradient_norm=gnorm,
                              frequency_at_zero=n0, quadratic_coefficient=c_rel,
                              fit_residual=resid,
                              note="frequency near 2 but blow-up rejects the "
                                   "quadratic model", profile=prof)
    return Classification(tag="unresolved", gradient_norm=gnorm,
                          frequency_at_zero=n0,
                          quadratic_coefficient=float("nan"),
                          fit_residual=float("nan"),
                          note=f"frequency limit {n0:.3f} away from 1 and 2",
                          profile=prof)


# -- structural checks -------------------------------------------------------------


@dataclass(frozen=True)
class InclusionReport:
    """Edge-set comparison of the two one-sided level transitions."""

    n_lower_edges: int
    n_upper_edges: int
    max_gap_cells: float
    violations: list
    passed: bool
    note: str = ""


def check_boundary_inclusion(domain: Domain, values: np.ndarray,
                             level: float) -> InclusionReport:
    """Check that {u < level} -> {u >= level} and {u > level} -> {u <= level}
    transitions happen along the same cells.

    Every grid edge crossing the level from strictly below is matched to
    an edge crossing from strictly above within one cell (Chebyshev
    distance in index units), and vice versa; a fat or one-sided level
    set fails.
    """
    u = np.asarray(values, dtype=float)
    if u.shape != domain.grid_shape:
        raise ValueError("values must be a full-grid array")
    lower_mid, upper_mid = [], []
    inside = domain.interior
    for axis in range(domain.dim):
        sl_a = [slice(None)] * domain.dim
        sl_b = [slice(None)] * domain.dim
        sl_a[axis] = slice(0, -1)
        sl_b[axis] = slice(1, None)
        va, vb = u[tuple(sl_a)], u[tuple(sl_b)]
        touch = inside[tuple(sl_a)] | inside[tuple(sl_b)]
        low = (((va < level) & (vb >= level)) | ((vb < level) & (va >= level))) & touch
        upp = (((va > level) & (vb <= level)) | ((vb > level) & (va <= level))) & touch
        for mask, store in ((low, lower_mid), (upp, upper_mid)):
            locs = np.argwhere(mask).astype(float)
            if locs.size:
                locs[:, axis] += 0.5
                store.append(locs)
    lower = np.vstack(lower_mid) if lower_mid else np.empty((0, domain.dim))
    upper = np.vstack(upper_mid) if upper_mid else np.empty((0, domain.dim))
    if len(lower) == 0 and len(upper) == 0:
        return InclusionReport(0, 0, 0.0, [], True, note="level set is empty")
    if len(lower) == 0 or len(upper) == 0:
        return InclusionReport(len(lower), len(upper), float("inf"),
                               [], False,
                               note="one-sided level set: transitions exist in "
                                    "only one direction")
    violations = []
    max_gap = 0.0
    for src, dst in ((lower, upper), (upper, lower)):
        tree = cKDTree(dst)
        dists, _ = tree.query(src, p=np.inf)
        max_gap = max(max_gap, float(dists.max()))
        bad = np.where(dists > 1.0 + 1e-9)[0]
        violations.extend(tuple(src[b]) for b in bad)
    return InclusionReport(
        n_lower_edges=len(lower), n_upper_edges=len(upper),
        max_gap_cells=max_gap, violations=violations,
        passed=len(violations) == 0,
    )


@dataclass(frozen=True)
class StripReport:
    """Minimum of the discrete thin Laplacian on a strip around the level set."""

    min_laplacian: float
    location: tuple
    n_nodes: int
    passed: bool


def check_subharmonic_strip(domain: Domain, values: np.ndarray, level: float,
                            s: float, *, width_cells: float = 2.0) -> StripReport:
    """Verify the discrete thin Laplacian of u is positive near the level set.

    Valid only for s > 1/2, where the solution is superharmonic nowhere
    and subharmonic across the free boundary in the thin variables.
    """
    if not s > 0.5:
        raise ValueError("the subharmonic-strip check requires s > 1/2")
    u = np.asarray(values, dtype=float)
    fb = extract_free_boundary(domain, u, level)
    if not fb.points:
        raise ValueError("no free boundary at this level")
    pts = np.array([p.location for p in fb.points])
    coords = domain.interior_coords()
    tree = cKDTree(pts)
    dists, _ = tree.query(coords)
    strip = dists <= width_cells * domain.h * (1 + 1e-12)
    if not strip.any():
        raise ValueError("strip around the free boundary contains no interior nodes")
    lap = np.zeros(domain.grid_shape)
    h2 = domain.h**2
    for axis in range(domain.dim):
        lap += (np.roll(u, 1, axis=axis) + np.roll(u, -1, axis=axis) - 2 * u) / h2
    lap_int = lap[domain.interior][strip]
    k = int(np.argmin(lap_int))
    worst = coords[strip][k]
    return StripReport(min_laplacian=float(lap_int.min()),
                       location=tuple(float(c) for c in worst),
                       n_nodes=int(strip.sum()),
                       passed=bool(lap_int.min() > 0))


# -- census -----------------------------------------------------------------------------


@dataclass(frozen=True)
class Census:
    """Free-boundary point census with cluster-level classification."""

    points: list
    n_points: int
    n_cells: int
    n_regular: int
    n_clusters: int
    singular_locations: list
    unresolved_locations: list
    note: str = ""

    @property
    def singular_count(self) -> int:
        return len(self.singular_locations)


def _cluster_cells(cells, reach: int = 2):
    """Group cell indices into connected clusters under Chebyshev reach."""
    cells = [np.asarray(c) for c in cells]
    n = len(cells)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.max(np.abs(cells[i] - cells[j])) <= reach:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def singular_census(w: ExtensionField, level: float, lam: float, *,
                    band: float = 0.15, fit_tol: float = 0.05) -> Census:
    """Classify every free-boundary point of the trace of w at a level.

    Points whose trace gradient clears the discretisation-noise
    threshold are regular.  The rest are grouped into cell clusters
    (candidate singular points straddle several cells at one location);
    each cluster is classified once at its most central point and the
    outcome is shared by the cluster's members.
    """
    dom = w.domain
    u = w.trace
    fb = extract_free_boundary(dom, u, level)
    if fb.degenerate:
        return Census(points=[], n_points=0, n_cells=len(fb.cells),
                      n_regular=0, n_clusters=0, singular_locations=[],
                      unresolved_locations=[],
                      note="degenerate plateau at the level; census unresolved")
    if not fb.points:
        return Census(points=[], n_points=0, n_cells=0, n_regular=0,
                      n_clusters=0, singular_locations=[],
                      unresolved_locations=[], note="no free boundary")

    shifted = w.shifted(level)
    regular = [p for p in fb.points if p.tag == "regular"]
    pending = [p for p in fb.points if p.tag != "regular"]
    singular_locs, unresolved_locs = [], []
    tagged = list(regular)
    clusters = []
    if pending:
        clusters = _cluster_cells([p.cell for p in pending])
        for group in clusters:
            members = [pending[i] for i in group]
            locs = np.array([m.location for m in members])
            centroid = locs.mean(axis=0)
            rep = members[int(np.argmin(np.linalg.norm(locs - centroid, axis=1)))]
            try:
                cls = classify_point(shifted, rep.location, lam,
                                     band=band, fit_tol=fit_tol)
                tag = cls.tag
            except ValueError:
                tag = "unresolved"
            if tag == "singular-candidate":
                singular_locs.append(rep.location)
            elif tag == "unresolved":
                unresolved_locs.append(rep.location)
            for m in members:
                tagged.append(FreeBoundaryPoint(location=m.location,
                                                gradient=m.gradient, tag=tag,
                                                cell=m.cell, edge=m.edge))
    return Census(points=tagged, n_points=len(fb.points), n_cells=len(fb.cells),
                  n_regular=sum(1 for p in tagged if p.tag == "regular"),
                  n_clusters=len(clusters),
                  singular_locations=singular_locs,
                  unresolved_locations=unresolved_locs)
