"""Solvers for the fractional plasma problem.

The unknown is a spectral field u >= 0 on the thin domain solving

    L^s u = lam * (u - gamma)_+        (gamma > 0),

where L^s acts diagonally on the Dirichlet eigenbasis.  Three routes:

* ``solve_fixed_lambda``: damped Picard iteration with an active-set
  fallback.  Picard contracts only for small lam; beyond roughly
  3.4 * lam_1^s the linearised iteration has gain > 1 and diverges, so
  divergence or stalling hands the current iterate to an active-set
  loop that solves the piecewise-linear problem exactly on each guess
  of {u > gamma} and typically finishes in a handful of updates.
* ``solve_constrained``: outer 1-D root-find in lam matching a mass
  constraint, warm-starting the inner solver along the bracket.
* ``minimize_energy``: augmented-Lagrangian minimisation of the
  fractional Dirichlet energy subject to the same constraint; an
  independent route whose multiplier recovers lam.

The mass constraint is quadratic by default, G(u) = h^dim sum (u-gamma)_+^2,
whose Euler-Lagrange equation is exactly the equation above; the linear
variant G(u) = h^dim sum (u-gamma)_+ is available via ``constraint_kind``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.optimize import brentq, minimize

from .domains import Domain, EigenBasis
from .spectral import SpectralField, _check_order

__all__ = [
    "SolverOptions",
    "PlasmaSolution",
    "SolverError",
    "plasma_rhs",
    "constraint_mass",
    "residual_norm",
    "solve_fixed_lambda",
    "solve_constrained",
    "minimize_energy",
    "steiner_symmetrize",
    "symmetric_decreasing_rearrangement",
]


class SolverError(RuntimeError):
    """Raised when an iterative solver cannot meet its tolerance."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the plasma solvers.

    ``picard_budget`` iterations of damped Picard run first; divergence
    or failure to converge falls back to the active-set loop.  Set the
    budget to 0 to go straight to the active set.
    """

    damping: float = 0.5
    tolerance: float = 1e-10
    picard_budget: int = 300
    active_set_max: int = 80
    constraint_kind: str = "quadratic"
    constraint_rtol: float = 1e-6
    lambda_bracket: tuple = (1.05, 50.0)
    bracket_samples: int = 12
    energy_outer_max: int = 40
    energy_rtol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.constraint_kind not in ("quadratic", "linear"):
            raise ValueError("constraint_kind must be 'quadratic' or 'linear'")


@dataclass(frozen=True)
class PlasmaSolution:
    """A solver result: the field plus convergence metadata."""

    field: SpectralField
    lam: float
    gamma: float
    s: float
    residual: float
    iterations: int
    status: str              # 'converged' | 'trivial' | 'failed'
    method: str              # 'picard' | 'picard+active-set' | 'active-set' | 'energy'
    history: np.ndarray = dc_field(repr=False, default=None)
    constraint_kind: str = None
    constraint_target: float = None
    constraint_value: float = None

    @property
    def trace(self) -> np.ndarray:
        """Full-grid nodal values of the solution."""
        return self.field.full()


def plasma_rhs(u: np.ndarray, gamma: float) -> np.ndarray:
    """(u - gamma)_+ applied nodewise."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return np.maximum(np.asarray(u, dtype=float) - gamma, 0.0)


def constraint_mass(domain: Domain, values: np.ndarray, gamma: float,
                    kind: str = "quadratic") -> float:
    """Mass of the overshoot: h^dim * sum over interior of (u-gamma)_+^p."""
    v = np.asarray(values, dtype=float)
    if v.shape == domain.grid_shape:
        v = v[domain.interior]
    plus = plasma_rhs(v, gamma)
    p = 2 if kind == "quadratic" else 1
    if kind not in ("quadratic", "linear"):
        raise ValueError("kind must be 'quadratic' or 'linear'")
    return float(domain.h**domain.dim * np.sum(plus**p))


def residual_norm(basis: EigenBasis, coeffs: np.ndarray, lam: float,
                  gamma: float, s: float) -> float:
    """Discrete L2 norm of the basis-projected equation residual.

    With a full basis this equals the nodal residual norm of
    L^s u - lam (u - gamma)_+; with a truncated basis it measures the
    component the spectral method can see.
    """
    u = basis.nodal(coeffs)
    proj = basis.weight * (basis.vectors.T @ plasma_rhs(u, gamma))
    return float(np.linalg.norm(basis.eigenvalues**s * coeffs - lam * proj))


def _validate_problem(basis: EigenBasis, lam: float, gamma: float, s: float):
    _check_order(s)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")


def _active_set_step(basis: EigenBasis, lam: float, gamma: float, s: float,
                     active: np.ndarray) -> np.ndarray:
    """Exact coefficient solve of the problem linearized on a plasma set.

    On a guessed coincidence complement A = {u > gamma} the equation is
    linear in the coefficients:

        (diag(lam_k^s) - lam * h^dim V_A^T V_A) a = -lam gamma h^dim V_A^T 1.

    Solved densely, or through the Woodbury identity when the set is
    small compared to the basis (the system is diagonal plus a rank-|A|
    correction).
    """
    V = basis.vectors
    lam_s = basis.eigenvalues**s
    w = basis.weight
    if not active.any():
        return np.zeros(basis.size)
    VA = V[active]
    rhs = -lam * gamma * w * VA.sum(axis=0)
    p = VA.shape[0]
    if 4 * p < basis.size:
        dinv_rhs = rhs / lam_s
        U = VA.T / lam_s[:, None]          # D^{-1} V_A^T, shape (K, p)
        S = np.eye(p) / (lam * w) - VA @ U  # p x p capacitance matrix
        return dinv_rhs + U @ np.linalg.solve(S, VA @ dinv_rhs)
    M = np.diag(lam_s) - lam * w * (VA.T @ VA)
    return np.linalg.solve(M, rhs)


def _active_set_solve(basis: EigenBasis, lam: float, gamma: float, s: float,
                      a0: np.ndarray, max_updates: int, tol: float):
    """Semismooth Newton on the piecewise-linear plasma equation.

    Fresh plasma sets take the full Newton step (exact solve on the set),
    which converges in a few steps when it converges at all; a set seen
    before signals a cycle, broken by a backtracking blend step from the
    best iterate so far (strict residual decrease, so the same cycle
    cannot recur).  Returns (coeffs, iterations, status).
    """
    V = basis.vectors
    a = np.asarray(a0, dtype=float).copy()
    res = residual_norm(basis, a, lam, gamma, s)
    best = (res, a.copy())
    seen = set()
    for it in range(1, max_updates + 1):
        if res <= tol:
            return a, it, "converged"
        active = (V @ a) > gamma
        key = active.tobytes()
        if key not in seen:
            seen.add(key)
            try:
                a_new = _active_set_step(basis, lam, gamma, s, active)
            except np.linalg.LinAlgError:
                return best[1], it, "failed"
            stable = np.array_equal((V @ a_new) > gamma, active)
            a = a_new
            res = residual_norm(basis, a, lam, gamma, s)
            if res < best[0]:
                best = (res, a.copy())
            if stable:
                return a, it, "converged"  # stable set: exact piecewise solve
            continue
        # cycle: blend from the best point along its own Newton direction
        res, a = best
        a = a.copy()
        try:
            a_new = _active_set_step(basis, lam, gamma, s, (V @ a) > gamma)
        except np.linalg.LinAlgError:
            return best[1], it, "failed"
        d = a_new - a
        t, accepted = 1.0, False
        while t >= 2.0**-30:
            trial = a + t * d
            res_t = residual_norm(basis, trial, lam, gamma, s)
            if res_t <= tol or res_t < res * (1.0 - 1e-4 * t):
                a, res, accepted = trial, res_t, True
                break
            t *= 0.5
        if not accepted:
            return best[1], it, "failed"  # stalled on a kink of the residual
        best = (res, a.copy())
    return best[1], max_updates, "failed"


def solve_fixed_lambda(basis: EigenBasis, lam: float, gamma: float, s: float,
                       *, options: SolverOptions = None,
                       initial: np.ndarray = None) -> PlasmaSolution:
    """Solve L^s u = lam (u - gamma)_+ at a fixed multiplier lam.

    Damped Picard runs within its budget; on divergence (the iteration
    is expansive once lam is a few multiples of lam_1^s) or stalling,
    the active-set loop finishes from the best available iterate.
    """
    opts = options or SolverOptions()
    _validate_problem(basis, lam, gamma, s)
    lam_s = basis.eigenvalues**s
    w = basis.weight
    V = basis.vectors
    if initial is not None:
        a = np.asarray(initial, dtype=float).copy()
        if a.shape != (basis.size,):
            raise ValueError("initial coefficients have the wrong length")
    else:
        # start above the obstacle so the rhs is active
        a = np.zeros(basis.size)
        a[0] = 2.0 * gamma / max(V[:, 0].max(), 1e-300)

    history = []
    method = "picard"
    theta = opts.damping
    res0 = None
    best_res, best_a = np.inf, a.copy()
    converged = False
    picard_iters = 0
    for it in range(opts.picard_budget):
        u = V @ a
        proj = w * (V.T @ plasma_rhs(u, gamma))
        res = float(np.linalg.norm(lam_s * a - lam * proj))
        history.append(res)
        picard_iters = it + 1
        if not np.isfinite(res):
            break
        if res < best_res:
            best_res, best_a = res, a.copy()
        if res0 is None:
            res0 = res
        if res <= opts.tolerance:
            converged = True
            break
        if res > 1e3 * (res0 + 1.0):
            break  # diverging; hand off early, before the iterate explodes
        a = (1 - theta) * a + theta * lam * proj / lam_s

    iterations = picard_iters
    if not converged:
        if opts.picard_budget > 0:
            method = "picard+active-set"
        else:
            method = "active-set"
        # start the set iteration from the best iterate seen, not the last
        # one: after divergence the last iterate's plasma set is garbage
        a, set_iters, set_status = _active_set_solve(
            basis, lam, gamma, s, best_a, opts.active_set_max, opts.tolerance
        )
        iterations += set_iters
        res = residual_norm(basis, a, lam, gamma, s)
        if res > opts.tolerance:
            # second chance from the canonical bump start, whose plasma
            # set is a centred blob independent of the failed iteration
            bump = np.zeros(basis.size)
            bump[0] = 2.0 * gamma / max(V[:, 0].max(), 1e-300)
            a2, set_iters2, _ = _active_set_solve(
                basis, lam, gamma, s, bump, opts.active_set_max, opts.tolerance
            )
            iterations += set_iters2
            res2 = residual_norm(basis, a2, lam, gamma, s)
            if res2 < res:
                a, res = a2, res2
        lam1s = float(basis.eigenvalues[0] ** s)
        if res > opts.tolerance and lam > 1.1 * lam1s:
            # continuation from just above the bifurcation threshold,
            # where the discrete plasma set covers the whole interior; the
            # fully active solve has the correct (large) amplitude there,
            # unlike any fixed-size bump, which contracts to zero
            method += "+continuation"
            ladder = np.geomspace(1.05 * lam1s, lam, 8)
            try:
                a3 = _active_set_step(
                    basis, float(ladder[0]), gamma, s,
                    np.ones(basis.domain.n_interior, dtype=bool),
                )
                for lam_j in ladder:
                    a3, set_iters3, _ = _active_set_solve(
                        basis, float(lam_j), gamma, s, a3,
                        opts.active_set_max, opts.tolerance,
                    )
                    iterations += set_iters3
                res3 = residual_norm(basis, a3, lam, gamma, s)
                if res3 < res:
                    a, res = a3, res3
            except np.linalg.LinAlgError:
                pass
        history.append(res)
        converged = res <= opts.tolerance

    res = residual_norm(basis, a, lam, gamma, s)
    u = V @ a
    if converged and u.max() <= gamma * (1 + 1e-12):
        # nothing exceeds the obstacle, so the rhs vanishes identically and
        # the exact solution on this branch is zero; return it exactly
        status = "trivial"
        a = np.zeros(basis.size)
        res = 0.0
    elif converged:
        status = "converged"
    else:
        status = "failed"
    return PlasmaSolution(
        field=SpectralField(basis, a), lam=float(lam), gamma=float(gamma),
        s=float(s), residual=res, iterations=iterations, status=status,
        method=method, history=np.asarray(history),
    )


def solve_constrained(basis: EigenBasis, mass: float, gamma: float, s: float,
                      *, options: SolverOptions = None) -> PlasmaSolution:
    """Find lam so the solution carries a prescribed overshoot mass.

    Scans lam over a geometric ladder of multiples of lam_1^s (the mass
    decreases in lam above the bifurcation threshold), brackets the
    target, then runs a scalar root-find with warm-started inner solves.
    """
    opts = options or SolverOptions()
    _validate_problem(basis, 1.0, gamma, s)
    if mass <= 0:
        raise ValueError("constraint mass must be positive")
    lam1s = float(basis.eigenvalues[0] ** s)
    dom = basis.domain
    kind = opts.constraint_kind
    cache = {"coeffs": None}

    def solve_at(lam):
        sol = solve_fixed_lambda(basis, lam, gamma, s, options=opts,
                                 initial=cache["coeffs"])
        if sol.status == "trivial" and lam > lam1s * (1 + 1e-9):
            # above the bifurcation threshold a nontrivial branch exists;
            # restart from a fully active state so the active-set loop
            # lands on it instead of the trivial solution
            phi1_min = float(basis.vectors[:, 0].min())
            if phi1_min > 0:
                full = np.zeros(basis.size)
                full[0] = 2 * gamma / phi1_min
                retry = solve_fixed_lambda(
                    basis, lam, gamma, s,
                    options=replace(opts, picard_budget=0), initial=full,
                )
                if retry.status == "converged":
                    sol = retry
        if sol.status == "failed":
            raise SolverError(
                f"inner solve failed at lam={lam:.6g} (residual {sol.residual:.3e})",
                history=sol.history,
            )
        cache["coeffs"] = sol.field.coeffs
        return sol

    lo_m, hi_m = opts.lambda_bracket
    ladder = np.geomspace(lo_m, hi_m, opts.bracket_samples) * lam1s
    masses = []
    sols = []
    bracket = None
    for lam in ladder:
        sol = solve_at(lam)
        g = constraint_mass(dom, sol.trace, gamma, kind)
        masses.append(g)
        sols.append(sol)
        if g < mass and len(masses) > 1 and masses[-2] >= mass:
            bracket = (ladder[len(masses) - 2], lam)
            break
        if g < mass and len(masses) == 1:
            raise SolverError(
                f"target mass {mass:.6g} exceeds the value {g:.6g} at the lower "
                f"lambda bracket; widen lambda_bracket downward"
            )
    if bracket is None:
        raise SolverError(
            f"target mass {mass:.6g} not reached by lam up to {ladder[-1]:.6g} "
            f"(smallest mass seen {min(masses):.6g}); widen lambda_bracket upward"
        )

    def gap(lam):
        sol = solve_at(lam)
        return constraint_mass(dom, sol.trace, gamma, kind) - mass

    lam_star = brentq(gap, bracket[0], bracket[1], xtol=1e-13 * lam1s, rtol=8.9e-16)
    sol = solve_at(lam_star)
    achieved = constraint_mass(dom, sol.trace, gamma, kind)
    if abs(achieved - mass) > opts.constraint_rtol * mass:
        raise SolverError(
            f"constraint matched only to {abs(achieved - mass) / mass:.3e} "
            f"relative error at lam={lam_star:.8g}"
        )
    return replace(sol, constraint_kind=kind, constraint_target=float(mass),
                   constraint_value=achieved)


def minimize_energy(basis: EigenBasis, mass: float, gamma: float, s: float,
                    *, options: SolverOptions = None) -> PlasmaSolution:
    """Minimise the fractional Dirichlet energy at fixed overshoot mass.

    Augmented-Lagrangian outer loop with L-BFGS inner solves in
    coefficient space; the converged multiplier is reported as lam.
    This route is deliberately independent of the fixed-point solvers.
    """
    opts = options or SolverOptions()
    _validate_problem(basis, 1.0, gamma, s)
    if mass <= 0:
        raise ValueError("constraint mass must be positive")
    dom = basis.domain
    V = basis.vectors
    w = basis.weight
    lam_s = basis.eigenvalues**s
    kind = opts.constraint_kind
    p = 2 if kind == "quadratic" else 1

    def gval_grad(a):
        u = V @ a
        plus = np.maximum(u - gamma, 0.0)
        if p == 2:
            g = w * np.sum(plus**2) - mass
            grad = 2 * w * (V.T @ plus)
        else:
            g = w * np.sum(plus) - mass
            grad = w * (V.T @ (plus > 0).astype(float))
        return g, grad

    # feasible start: a multiple of the ground mode matching the mass
    phi1_max = V[:, 0].max()

    def mass_of_beta(beta):
        u = beta * V[:, 0]
        return constraint_mass(dom, dom.embed(u), gamma, kind) - mass

    lo = gamma / phi1_max * (1 + 1e-9)
    hi = 2 * lo
    while mass_of_beta(hi) < 0:
        hi *= 2
        if hi > 1e12 * lo:
            raise SolverError("could not find a feasible starting amplitude")
    beta = brentq(mass_of_beta, lo, hi, rtol=1e-12)
    a = np.zeros(basis.size)
    a[0] = beta
    a0 = a.copy()

    def restore_feasibility(a_):
        """Rescale the amplitude until the mass constraint holds again.

        The constraint gradient vanishes identically on {u <= gamma}, so
        an inner solve that collapses below the obstacle leaves the
        augmented Lagrangian without a restoring force; rescaling puts
        the iterate back where the constraint is active.
        """
        base = a_ if np.linalg.norm(a_) > 1e-12 * beta else a0

        def gap(t):
            u = V @ (t * base)
            plus = np.maximum(u - gamma, 0.0)
            return w * np.sum(plus**p) - mass

        t_hi = 1.0
        while gap(t_hi) < 0:
            t_hi *= 2
            if t_hi > 1e9:
                raise SolverError("feasibility restoration failed")
        t_lo = t_hi / 2 if t_hi > 1 else 0.0
        while gap(t_lo) > 0:
            t_lo /= 2
        t = brentq(gap, t_lo, t_hi, rtol=1e-12)
        return t * base

    mu = 0.0
    # full constraint violation must cost more than the energy saved by
    # collapsing below the obstacle, else the dead zone swallows the iterate
    e0 = 0.5 * float(np.sum(lam_s * a**2))
    rho = 4.0 * max(e0, 1e-12) / mass**2
    g_prev = None
    history = []
    outer_used = opts.energy_outer_max
    for outer in range(1, opts.energy_outer_max + 1):

        def objective(a_):
            g, ggrad = gval_grad(a_)
            e = 0.5 * np.sum(lam_s * a_**2)
            f = e + mu * g + 0.5 * rho * g * g
            grad = lam_s * a_ + (mu + rho * g) * ggrad
            return f, grad

        result = minimize(objective, a, jac=True, method="L-BFGS-B",
                          options={"maxiter": 800, "ftol": 1e-18, "gtol": 1e-13})
        a = result.x
        g, ggrad = gval_grad(a)
        if g <= -0.99 * mass:  # collapsed below the obstacle
            a = restore_feasibility(a)
            rho *= 10.0
            g, ggrad = gval_grad(a)
        history.append(abs(g))
        mu_eff = mu + rho * g
        if abs(g) <= opts.energy_rtol * mass:
            outer_used = outer
            break
        if g_prev is not None and abs(g) > 0.25 * abs(g_prev):
            rho *= 10.0
        mu = mu_eff
        g_prev = g
    else:
        raise SolverError(
            f"constraint gap stalled at {history[-1]:.3e} after "
            f"{opts.energy_outer_max} outer iterations",
            history=history,
        )

    # stationarity:  lam_k^s a_k + mu_eff * dG/da_k = 0  identifies lam
    if p == 2:
        lam_est = -2.0 * mu_eff
    else:
        lam_est = -mu_eff
    res = residual_norm(basis, a, lam_est, gamma, s) if p == 2 else float(
        np.linalg.norm(lam_s * a + mu_eff * gval_grad(a)[1])
    )
    achieved = constraint_mass(dom, dom.embed(V @ a), gamma, kind)
    status = "converged" if abs(achieved - mass) <= opts.constraint_rtol * mass else "failed"
    return PlasmaSolution(
        field=SpectralField(basis, a), lam=float(lam_est), gamma=float(gamma),
        s=float(s), residual=res, iterations=outer_used, status=status,
        method="energy", history=np.asarray(history), constraint_kind=kind,
        constraint_target=float(mass), constraint_value=achieved,
    )


# -- symmetrization ---------------------------------------------------------------


def symmetric_decreasing_rearrangement(values: np.ndarray) -> np.ndarray:
    """Rearrange a line of values symmetrically decreasing about its centre.

    The largest value goes to the central position; ties in distance to
    the centre are broken toward the lower index, so the result is
    deterministic and equimeasurable with the input.
    """
    v = np.asarray(values, dtype=float)
    m = len(v)
    centre = (m - 1) / 2
    order = sorted(range(m), key=lambda pos: (abs(pos - centre), pos))
    out = np.empty(m)
    out[order] = np.sort(v)[::-1]
    return out


def steiner_symmetrize(domain: Domain, values: np.ndarray, axis: int) -> np.ndarray:
    """Steiner symmetrization of a full-grid field along one axis.

    Every grid line parallel to ``axis`` is replaced by the symmetric
    decreasing rearrangement of its interior values.  The domain must be
    mirror-symmetric along the axis and every line's interior nodes must
    form a contiguous run centred on the midline (true for intervals,
    rectangles, and symmetric disk masks).
    """
    if axis not in domain.symmetry_axes:
        raise ValueError(f"axis {axis} is not a symmetry axis of this {domain.shape}")
    full = np.asarray(values, dtype=float)
    if full.shape != domain.grid_shape:
        raise ValueError("values must be a full-grid array")
    out = full.copy()
    moved = np.moveaxis(out, axis, 0)
    mask = np.moveaxis(domain.interior, axis, 0)
    n_axis = moved.shape[0]
    rest_shape = moved.shape[1:]
    for rest in np.ndindex(*rest_shape) if rest_shape else [()]:
        line_mask = mask[(slice(None),) + rest]
        idxs = np.flatnonzero(line_mask)
        if idxs.size == 0:
            continue
        if not np.all(np.diff(idxs) == 1):
            raise ValueError("line has a non-contiguous interior; cannot symmetrize")
        if idxs[0] + idxs[-1] != n_axis - 1:
            raise ValueError("line interior is not centred on the grid midline")
        sel = (idxs,) + rest
        moved[sel] = symmetric_decreasing_rearrangement(moved[sel])
    return out
