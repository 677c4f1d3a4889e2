"""Sphere-constrained energy minimization.

Two schemes:

* ``minimize_m``: projected gradient descent on the reduced energy.  The
  update is m <- normalize(m + step * tangential field) with an Armijo
  backtracking line search, so the energy trace is strictly nonincreasing
  and the unit-length constraint holds exactly after every iteration.
* ``minimize_joint``: alternating minimization of the product-space
  functional (magnetization, vector potential).  The potential step is the
  exact linear solve of the unconstrained stray functional for fixed m;
  the magnetization step is projected gradient descent at fixed potential,
  where the stray contribution to the field is curl a - m on the domain
  (no linear solves inside the line search).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, GridError
from .grid import EDGE, CellVectorField, DomainMask, VectorField
from .energy import ALL_TERMS, MaterialParams, effective_field, total_energy
from .magnetostatics import SolverConfig, functional_V
from .operators import curl, masked_cell_to_faces, masked_faces_to_cell_adjoint
from . import poisson

DESCENT_SLACK = 1e-12
ARMIJO_C = 0.1
STEP_GROWTH_CAP = 8.0


@dataclass(frozen=True)
class MinimizeConfig:
    method: str = "projected_gradient"
    step: float = 0.25
    backtrack: float = 0.5
    grad_tol: float = 1e-4
    max_iter: int = 500
    max_backtracks: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("projected_gradient", "joint_alternating"):
            raise GridError(f"unknown method {self.method!r}")
        if self.step <= 0 or self.grad_tol <= 0:
            raise GridError("step and grad_tol must be positive")
        if not (0.0 < self.backtrack < 1.0):
            raise GridError("backtracking factor must lie in (0, 1)")


@dataclass
class MinimizeReport:
    iterations: int
    energy_trace: list[float] = field(default_factory=list)
    final_grad_norm: float = float("nan")
    converged: bool = False


def random_unit_magnetization(seed: int, mask: DomainMask) -> CellVectorField:
    """Uniform-on-sphere unit vectors per mask cell, deterministic in seed."""
    rng = np.random.default_rng(seed)
    grid = mask.grid
    data = rng.standard_normal((3, *grid.shape))
    n = np.sqrt(np.sum(data ** 2, axis=0))
    n[n == 0] = 1.0
    data /= n
    data *= mask.indicator
    return CellVectorField(grid, data)


def _normalize_on_mask(data: np.ndarray, mask: DomainMask) -> np.ndarray:
    n = np.sqrt(np.sum(data ** 2, axis=0))
    safe = np.where(n > 0, n, 1.0)
    out = data / safe
    out *= mask.indicator
    return out


def _tangential(field_data: np.ndarray, m_data: np.ndarray) -> np.ndarray:
    proj = np.sum(field_data * m_data, axis=0)
    return field_data - proj[None] * m_data


def _grad_norm(t_data: np.ndarray, vol: float) -> float:
    return float(np.sqrt(np.sum(t_data ** 2) * vol))


def minimize_m(m0: CellVectorField, params: MaterialParams, mask: DomainMask,
               mcfg: MinimizeConfig, scfg: SolverConfig, *, terms=ALL_TERMS):
    """Projected gradient descent on the reduced energy over unit fields.

    Returns (m, MinimizeReport).  Raises ConvergenceError if backtracking
    cannot produce descent (step underflow before reaching grad_tol).
    """
    report = MinimizeReport(iterations=0)
    if mask.is_empty():
        report.converged = True
        report.final_grad_norm = 0.0
        report.energy_trace.append(0.0)
        return m0.copy(), report

    vol = mask.grid.cell_volume
    m = CellVectorField(mask.grid, _normalize_on_mask(m0.data.copy(), mask))
    energy = total_energy(m, params, mask, scfg, terms=terms).total
    report.energy_trace.append(energy)
    step = mcfg.step

    for it in range(1, mcfg.max_iter + 1):
        hf = effective_field(m, params, mask, scfg, terms=terms)
        t = _tangential(hf.data, m.data) * mask.indicator
        gnorm = _grad_norm(t, vol)
        report.final_grad_norm = gnorm
        if gnorm <= mcfg.grad_tol:
            report.converged = True
            report.iterations = it - 1
            return m, report

        accepted = False
        for _ in range(mcfg.max_backtracks):
            trial = CellVectorField(mask.grid,
                                    _normalize_on_mask(m.data + step * t, mask))
            e_trial = total_energy(trial, params, mask, scfg, terms=terms).total
            if e_trial <= energy - ARMIJO_C * step * gnorm ** 2 + DESCENT_SLACK:
                accepted = True
                break
            step *= mcfg.backtrack
        if not accepted:
            raise ConvergenceError(
                f"line search failed at iteration {it}: energy {energy:.6e}, "
                f"gradient norm {gnorm:.3e}, step {step:.3e}",
                residual=gnorm, iterations=it)
        m, energy = trial, e_trial
        report.energy_trace.append(energy)
        report.iterations = it
        step = min(step / mcfg.backtrack, mcfg.step * STEP_GROWTH_CAP)
    report.final_grad_norm = _grad_norm(
        _tangential(effective_field(m, params, mask, scfg, terms=terms).data,
                    m.data) * mask.indicator, vol)
    report.converged = report.final_grad_norm <= mcfg.grad_tol
    return m, report


def _joint_energy(m: CellVectorField, a: VectorField, params: MaterialParams,
                  mask: DomainMask, terms=ALL_TERMS) -> float:
    """Local terms plus V(face m, a): the product-space functional."""
    from .energy import anisotropy_energy, exchange_energy, zeeman_energy
    mf = masked_cell_to_faces(m, mask)
    total = functional_V(mf, a)
    if "exchange" in terms:
        total += exchange_energy(m, mask, check_norm=False)
    if "anisotropy" in terms:
        total += anisotropy_energy(m, params, mask, check_norm=False)
    if "zeeman" in terms:
        total += zeeman_energy(m, params, mask, check_norm=False)
    return total


def _a_step(m: CellVectorField, mask: DomainMask, scfg: SolverConfig) -> VectorField:
    """Exact minimizer of the unconstrained stray functional for fixed m."""
    mf = masked_cell_to_faces(m, mask)
    rhs = curl(mf)
    comps = []
    for b in rhs.components:
        x, _, _ = poisson.solve_poisson(b, mask.grid.h, scfg.tol, scfg.max_iter,
                                        scfg.preconditioner)
        comps.append(x)
    return VectorField(mask.grid, *comps, staggering=EDGE)


def minimize_joint(m0: CellVectorField, a0: VectorField | None,
                   params: MaterialParams, mask: DomainMask,
                   mcfg: MinimizeConfig, scfg: SolverConfig,
                   m_steps_per_sweep: int = 10, *, terms=ALL_TERMS):
    """Alternating minimization over (m, a).

    Each sweep performs one exact potential solve, then up to
    ``m_steps_per_sweep`` projected-gradient steps on the magnetization at
    fixed potential (the stray part of the field is then local:
    curl a - m pulled back to cells).  The joint energy trace is monotone.
    Returns (m, a, MinimizeReport).
    """
    report = MinimizeReport(iterations=0)
    if mask.is_empty():
        report.converged = True
        report.final_grad_norm = 0.0
        report.energy_trace.append(0.0)
        if a0 is None:
            a0 = VectorField.zeros(mask.grid, EDGE)
        return m0.copy(), a0, report

    vol = mask.grid.cell_volume
    m = CellVectorField(mask.grid, _normalize_on_mask(m0.data.copy(), mask))
    a = a0 if a0 is not None else VectorField.zeros(mask.grid, EDGE)
    energy = _joint_energy(m, a, params, mask, terms)
    report.energy_trace.append(energy)
    step = mcfg.step
    total_m_steps = 0

    for sweep in range(1, mcfg.max_iter + 1):
        a = _a_step(m, mask, scfg)
        energy = _joint_energy(m, a, params, mask, terms)
        report.energy_trace.append(energy)

        curl_a_cells = masked_faces_to_cell_adjoint(curl(a), mask)
        gnorm = None
        for _ in range(m_steps_per_sweep):
            hf = effective_field(m, params, mask, scfg,
                                 terms=tuple(t for t in terms if t != "stray"))
            mf_cells = masked_faces_to_cell_adjoint(masked_cell_to_faces(m, mask), mask)
            hf.data += (curl_a_cells.data - mf_cells.data) * mask.indicator
            t = _tangential(hf.data, m.data) * mask.indicator
            gnorm = _grad_norm(t, vol)
            if gnorm <= mcfg.grad_tol:
                break
            accepted = False
            for _ in range(mcfg.max_backtracks):
                trial = CellVectorField(mask.grid,
                                        _normalize_on_mask(m.data + step * t, mask))
                e_trial = _joint_energy(trial, a, params, mask, terms)
                if e_trial <= energy - ARMIJO_C * step * gnorm ** 2 + DESCENT_SLACK:
                    accepted = True
                    break
                step *= mcfg.backtrack
            if not accepted:
                raise ConvergenceError(
                    f"joint m-step line search failed in sweep {sweep}",
                    residual=gnorm, iterations=total_m_steps)
            m, energy = trial, e_trial
            report.energy_trace.append(energy)
            total_m_steps += 1
            step = min(step / mcfg.backtrack, mcfg.step * STEP_GROWTH_CAP)
        report.iterations = total_m_steps
        report.final_grad_norm = gnorm if gnorm is not None else float("nan")
        if gnorm is not None and gnorm <= mcfg.grad_tol:
            # converged only if the potential is also stationary
            a_new = _a_step(m, mask, scfg)
            e_new = _joint_energy(m, a_new, params, mask, terms)
            if abs(e_new - energy) <= max(abs(energy), 1.0) * 10 * scfg.tol:
                a = a_new
                report.energy_trace.append(e_new)
                report.converged = True
                return m, a, report
            a, energy = a_new, e_new
            report.energy_trace.append(energy)
    return m, a, report
