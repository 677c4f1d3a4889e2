"""Stray-field solvers: one maximization and two minimization routes.

For a magnetization ``m`` on faces (extended by zero outside the padded
box) the stray-field energy is computed three ways:

* scalar route: maximize  W(m, u) = <grad u, m> - 1/2 ||grad u||^2  over
  cell potentials; the optimum solves the discrete Poisson problem and the
  energy is 1/2 ||grad u||^2;
* gauged route: minimize  V_curl(m, a) = 1/2 ||curl a - m||^2  over edge
  potentials; conjugate gradients on the curl-curl normal equations keep
  the iterates divergence-free because the discrete divergence annihilates
  the discrete curl exactly;
* unconstrained route: minimize
  V(m, a) = 1/2 ||D a||^2 + 1/2 ||m||^2 - <m, curl a>,
  which decouples into componentwise Poisson solves; the divergence-free
  (Coulomb) representative of the minimizing gauge class is recovered by a
  single auxiliary Poisson solve and returned.

By construction W(m, u) <= V_curl(m, a) <= V(m, a) holds for *every*
discrete trial pair, so the duality sandwich is exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, GridError
from .grid import (CELL, EDGE, FACE, NODE, CellVectorField, DomainMask, Ellipsoid,
                   GridSpec, ScalarField, VectorField)
from .operators import (check_supported, curl, div, grad, grad_node,
                        grad_norm_sq, inner, norm)
from . import poisson

DENSE_UNKNOWN_CAP = 32768


@dataclass(frozen=True)
class SolverConfig:
    """Linear-solver policy shared by all field solves."""

    tol: float = 1e-8
    max_iter: int = 20000
    pad_ratio: float = 1.0
    backend: str = "iterative"
    preconditioner: str = "dst"

    def __post_init__(self):
        if not (0.0 < self.tol <= 1e-2):
            raise GridError(f"tol must lie in (0, 1e-2], got {self.tol}")
        if self.max_iter < 1:
            raise GridError("max_iter must be at least 1")
        if self.backend not in ("iterative", "dense_oracle"):
            raise GridError(f"unknown backend {self.backend!r}")
        if self.preconditioner not in ("dst", "none"):
            raise GridError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class StrayFieldSolution:
    u: ScalarField
    h: VectorField
    b: VectorField
    energy: float
    residual: float
    iterations: int


@dataclass
class VectorPotentialSolution:
    a: VectorField
    curl_a: VectorField
    div_norm: float
    energy: float
    residual: float
    iterations: int


def _validate_source(m: VectorField, mask: DomainMask | None):
    if m.staggering != FACE:
        raise GridError("magnetization must be face-staggered")
    for comp in m.components:
        if not np.all(np.isfinite(comp)):
            raise GridError("magnetization contains non-finite values")
    if mask is not None:
        check_supported(m, mask)


def _cell_poisson(b: np.ndarray, grid: GridSpec, cfg: SolverConfig):
    if cfg.backend == "dense_oracle":
        if b.size > DENSE_UNKNOWN_CAP:
            raise GridError(
                f"dense backend limited to {DENSE_UNKNOWN_CAP} unknowns, got {b.size}"
            )
        solve = poisson.dense_poisson_solver(b.shape, grid.h)
        u = solve(b.ravel()).reshape(b.shape)
        r = b - poisson.laplace_apply(u, grid.h)
        bn = np.linalg.norm(b)
        return u, float(np.linalg.norm(r) / bn) if bn else 0.0, 0
    return poisson.solve_poisson(b, grid.h, cfg.tol, cfg.max_iter, cfg.preconditioner)


def solve_scalar_potential(m: VectorField, mask: DomainMask | None,
                           cfg: SolverConfig) -> StrayFieldSolution:
    """Scalar-potential route: discrete weak Poisson problem for u.

    ``u`` maximizes W(m, .) over the cell potential space; ``h = -grad u``,
    ``b = h + m``, and ``energy = 1/2 ||grad u||^2``.
    """
    _validate_source(m, mask)
    rhs = -div(m).data
    u_data, res, iters = _cell_poisson(rhs, m.grid, cfg)
    del rhs
    u = ScalarField(m.grid, u_data, CELL)
    h = grad(u)
    for comp in h.components:
        np.negative(comp, out=comp)
    b = h + m
    energy = 0.5 * inner(h, h)
    return StrayFieldSolution(u=u, h=h, b=b, energy=energy, residual=res,
                              iterations=iters)


def functional_W(m: VectorField, u: ScalarField) -> float:
    """Scalar trial functional W(m, u) = <grad u, m> - 1/2 ||grad u||^2."""
    g = grad(u)
    return inner(g, m) - 0.5 * inner(g, g)


def functional_V(m: VectorField, a: VectorField) -> float:
    """Unconstrained trial functional (full difference-gradient stiffness)."""
    if a.staggering != EDGE:
        raise GridError("vector potential must be edge-staggered")
    return 0.5 * grad_norm_sq(a) + 0.5 * inner(m, m) - inner(m, curl(a))


def functional_V_curl(m: VectorField, a: VectorField) -> float:
    """Gauged trial functional 1/2 ||curl a - m||^2."""
    if a.staggering != EDGE:
        raise GridError("vector potential must be edge-staggered")
    d = curl(a) - m
    return 0.5 * inner(d, d)


def project_divergence_free(a: VectorField, cfg: SolverConfig):
    """Divergence-free representative of the gauge class of ``a``.

    Solves the node Poisson problem for the gauge scalar and adds its
    gradient; the curl of the result is unchanged to rounding.
    """
    d = div(a)
    bn = np.linalg.norm(d.data)
    if bn == 0.0:
        return a, 0.0, 0
    # div(grad_node p) is the no-flux node Laplacian; kill div a with its inverse
    p_data, res, iters = poisson.solve_poisson_neumann(d.data, a.grid.h, cfg.tol,
                                                       cfg.max_iter, cfg.preconditioner)
    p = ScalarField(a.grid, p_data, NODE)
    return a + grad_node(p), res, iters


def solve_vector_potential_unconstrained(m: VectorField, mask: DomainMask | None,
                                         cfg: SolverConfig) -> VectorPotentialSolution:
    """Minimize V(m, .): componentwise Poisson solves with source curl m.

    ``energy`` is the minimum of V.  The returned potential is the
    divergence-free representative of the minimizing gauge class (obtained
    by one auxiliary Poisson solve), so the Coulomb gauge holds to solver
    tolerance on the truncated grid as well.
    """
    _validate_source(m, mask)
    rhs = curl(m)
    comps = []
    res_max, iters_total = 0.0, 0
    for b in rhs.components:
        x, res, iters = poisson.solve_poisson(b, m.grid.h, cfg.tol, cfg.max_iter,
                                              cfg.preconditioner)
        comps.append(x)
        res_max = max(res_max, res)
        iters_total += iters
    a_min = VectorField(m.grid, *comps, staggering=EDGE)
    energy = functional_V(m, a_min)
    a_star, res_p, iters_p = project_divergence_free(a_min, cfg)
    res_max = max(res_max, res_p)
    iters_total += iters_p
    curl_a = curl(a_star)
    div_norm = norm(div(a_star))
    return VectorPotentialSolution(a=a_star, curl_a=curl_a, div_norm=div_norm,
                                   energy=energy, residual=res_max,
                                   iterations=iters_total)


def _curl_curl_apply(comps, grid: GridSpec):
    a = VectorField(grid, *comps, staggering=EDGE)
    cc = curl(curl(a))
    return cc.components


def solve_vector_potential_gauged(m: VectorField, mask: DomainMask | None,
                                  cfg: SolverConfig) -> VectorPotentialSolution:
    """Minimize V_curl(m, .) over the discrete divergence-free subspace.

    Conjugate gradients on the curl-curl normal equations: the right-hand
    side curl(m) is divergence-free by the exact discrete identity, so
    every iterate stays in the divergence-free subspace; a final projection
    removes rounding drift.
    """
    _validate_source(m, mask)
    grid = m.grid
    h = grid.h
    rhs = curl(m).components
    bnorm = np.sqrt(sum(float(np.vdot(b, b)) for b in rhs))
    if bnorm == 0.0:
        a = VectorField.zeros(grid, EDGE)
        return VectorPotentialSolution(a=a, curl_a=curl(a), div_norm=0.0,
                                       energy=functional_V_curl(m, a),
                                       residual=0.0, iterations=0)

    if cfg.preconditioner == "dst":
        solvers = [poisson.dst_solver(b.shape, h) for b in rhs]
        precond = lambda rs: [s.solve32(r) for s, r in zip(solvers, rs)]
    else:
        precond = lambda rs: [r.copy() for r in rs]

    x = [np.zeros_like(b) for b in rhs]
    r = [b.copy() for b in rhs]
    z = precond(r)
    p = [zi.copy() for zi in z]
    rz = sum(float(np.vdot(a_, b_)) for a_, b_ in zip(r, z))
    res = 1.0
    iters = 0
    for k in range(1, cfg.max_iter + 1):
        Ap = _curl_curl_apply(p, grid)
        pAp = sum(float(np.vdot(a_, b_)) for a_, b_ in zip(p, Ap))
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        for c in range(3):
            x[c] += alpha * p[c]
            r[c] -= alpha * Ap[c]
        res = np.sqrt(sum(float(np.vdot(ri, ri)) for ri in r)) / bnorm
        iters = k
        if res <= cfg.tol:
            break
        z = precond(r)
        rz_new = sum(float(np.vdot(a_, b_)) for a_, b_ in zip(r, z))
        for c in range(3):
            p[c] = z[c] + (rz_new / rz) * p[c]
        rz = rz_new
    if res > cfg.tol:
        raise ConvergenceError(
            f"gauged vector-potential solve stalled at relative residual "
            f"{res:.3e} (target {cfg.tol:.1e})", residual=res, iterations=iters)

    a = VectorField(grid, *x, staggering=EDGE)
    a, _, it_p = project_divergence_free(a, cfg)
    iters += it_p
    curl_a = curl(a)
    dn = norm(div(a))
    d = curl_a - m
    return VectorPotentialSolution(a=a, curl_a=curl_a, div_norm=dn,
                                   energy=0.5 * inner(d, d), residual=res,
                                   iterations=iters)


def stray_field(m: VectorField, mask: DomainMask | None, cfg: SolverConfig) -> VectorField:
    """The field operator: m -> h_m (face-staggered, linear to solver tol)."""
    return solve_scalar_potential(m, mask, cfg).h


def reciprocity_terms(m: VectorField, m2: VectorField, mask: DomainMask | None,
                      cfg: SolverConfig):
    """The three pairings that coincide for a self-adjoint field operator.

    Returns (<h_m, h_m'>, -<m, h_m'>, -<h_m, m'>).
    """
    h1 = stray_field(m, mask, cfg)
    h2 = stray_field(m2, mask, cfg)
    return inner(h1, h2), -inner(m, h2), -inner(h1, m2)


def reciprocity_gap(m: VectorField, m2: VectorField, mask: DomainMask | None,
                    cfg: SolverConfig) -> float:
    """|<H m, m'> - <m, H m'>| / (||m|| ||m'||)."""
    nm, nm2 = norm(m), norm(m2)
    if nm == 0.0 or nm2 == 0.0:
        raise ValueError("reciprocity gap needs two nonzero fields")
    h1 = stray_field(m, mask, cfg)
    h2 = stray_field(m2, mask, cfg)
    return abs(inner(h1, m2) - inner(m, h2)) / (nm * nm2)


def rayleigh_quotient(m: VectorField, mask: DomainMask | None,
                      cfg: SolverConfig) -> float:
    """2 E_s(m) / ||m||^2, in [0, 1] up to solver tolerance.

    Equals 1 on discrete gradient fields and 0 on the kernel of the field
    operator (compactly supported solenoidal fields).
    """
    nm2 = inner(m, m)
    if nm2 == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    sol = solve_scalar_potential(m, mask, cfg)
    return 2.0 * sol.energy / nm2


def helmholtz_residual(m: VectorField, sol_u: StrayFieldSolution,
                       sol_a: VectorPotentialSolution) -> float:
    """||m - curl a - grad u|| / ||m|| for solutions computed from the same m."""
    if sol_u.u.grid != m.grid or sol_a.a.grid != m.grid:
        raise GridError("solutions live on a different grid than m")
    nm = norm(m)
    if nm == 0.0:
        return 0.0
    recon = sol_a.curl_a + grad(sol_u.u)
    return norm(m - recon) / nm


def helmholtz_orthogonality_defect(m: VectorField, sol_u: StrayFieldSolution,
                                   sol_a: VectorPotentialSolution) -> float:
    """|1/2||m||^2 - E_s - 1/2||curl a||^2| / ||m||^2."""
    nm2 = inner(m, m)
    if nm2 == 0.0:
        return 0.0
    ca2 = inner(sol_a.curl_a, sol_a.curl_a)
    return abs(0.5 * nm2 - sol_u.energy - 0.5 * ca2) / nm2


def dense_oracle_energy(m: VectorField, mask: DomainMask | None) -> float:
    """Stray energy by explicit assembly and direct factorization.

    Independent of the iterative route; limited to 32768 cell unknowns.
    """
    _validate_source(m, mask)
    grid = m.grid
    if grid.n_cells > DENSE_UNKNOWN_CAP:
        raise GridError(
            f"dense oracle limited to {DENSE_UNKNOWN_CAP} cells, grid has "
            f"{grid.n_cells}")
    rhs = -div(m).data
    solve = poisson.dense_poisson_solver(rhs.shape, grid.h)
    u = ScalarField(grid, solve(rhs.ravel()).reshape(rhs.shape), CELL)
    g = grad(u)
    return 0.5 * inner(g, g)


def demag_tensor(geom: Ellipsoid, grid: GridSpec, cfg: SolverConfig,
                 mask: DomainMask | None = None) -> np.ndarray:
    """Demagnetizing tensor of a rasterized ellipsoid.

    Column j is the volume average over the domain of -H(e_j Chi); the
    energy-consistent pairing makes the matrix symmetric up to solver
    tolerance, and its trace is 1 up to discretization error.
    """
    from .grid import build_mask
    from .operators import masked_cell_to_faces
    if not isinstance(geom, Ellipsoid):
        raise GridError("demagnetizing tensor is defined for ellipsoids")
    if mask is None:
        mask = build_mask(geom, grid)
    vol = mask.volume
    if vol == 0.0:
        raise GridError("empty mask")

    def unit(j):  # built on demand: three full face fields would be large
        return masked_cell_to_faces(
            CellVectorField.constant(grid, np.eye(3)[j], mask), mask)

    N = np.zeros((3, 3))
    for j in range(3):
        h = solve_scalar_potential(unit(j), mask, cfg).h
        for i in range(3):
            N[i, j] = -inner(h, unit(i)) / vol
        del h
    return N


def ellipsoid_demag_factors(a: float, b: float, c: float) -> np.ndarray:
    """Analytic demagnetizing factors of an ellipsoid with semi-axes a,b,c.

    Classical elliptic integrals
    N_x = (a b c / 2) * Int_0^inf ds / ((s + a^2) R(s)),
    R(s) = sqrt((s+a^2)(s+b^2)(s+c^2)); evaluated by adaptive quadrature.
    The three factors sum to 1.
    """
    axes = np.array([a, b, c], dtype=float)
    if np.any(axes <= 0):
        raise ValueError("semi-axes must be positive")

    def factor(i):
        def integrand(s):
            R = np.sqrt((s + axes[0] ** 2) * (s + axes[1] ** 2) * (s + axes[2] ** 2))
            return 1.0 / ((s + axes[i] ** 2) * R)

        val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12,
                                limit=400)
        return 0.5 * axes[0] * axes[1] * axes[2] * val

    return np.array([factor(i) for i in range(3)])
