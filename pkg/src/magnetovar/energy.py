"""Dimensionless micromagnetic energy and its negative L2 gradient.

Energies are reported in the dimensionless unit system (lengths in
exchange lengths, fields in units of the saturation magnetization); the
README documents the conversion table back to SI.  The magnetization is a
collocated unit-vector field on the mask; the stray term goes through the
indicator-weighted face transfer so that the reported value and the
effective field are exact gradients of one another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .grid import CellVectorField, DomainMask
from .magnetostatics import SolverConfig, solve_scalar_potential
from .operators import masked_cell_to_faces, masked_faces_to_cell_adjoint

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class MaterialParams:
    """Quality factor, easy axis, and applied field (all dimensionless)."""

    Q: float = 0.0
    easy_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    h_applied: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.Q < 0:
            raise GridError("quality factor must be nonnegative")
        n = float(np.linalg.norm(self.easy_axis))
        if abs(n - 1.0) > 1e-9:
            raise GridError(f"easy axis must be a unit vector, |e| = {n}")

    @property
    def axis(self) -> np.ndarray:
        return np.asarray(self.easy_axis, dtype=float)

    @property
    def applied(self) -> np.ndarray:
        return np.asarray(self.h_applied, dtype=float)


@dataclass
class EnergyBreakdown:
    exchange: float
    anisotropy: float
    zeeman: float
    stray: float

    @property
    def total(self) -> float:
        return self.exchange + self.anisotropy + self.zeeman + self.stray


def check_unit_norm(m: CellVectorField, mask: DomainMask, tol: float = UNIT_NORM_TOL):
    """Raise GridError naming the worst cell if |m| != 1 on the mask."""
    norms = m.pointwise_norm()
    dev = np.abs(norms - 1.0) * mask.indicator
    worst = float(dev.max())
    if worst > tol:
        idx = np.unravel_index(np.argmax(dev), dev.shape)
        raise GridError(
            f"magnetization norm deviates by {worst:.3e} at cell "
            f"{tuple(int(i) for i in idx)}")


def _bond_masks(mask: DomainMask):
    """Per-axis indicators of neighbor pairs lying inside the domain."""
    ind = mask.indicator
    out = []
    for axis in range(3):
        lead = [slice(None)] * axis
        out.append(np.minimum(ind[tuple(lead + [slice(0, -1)])],
                              ind[tuple(lead + [slice(1, None)])]))
    return out


def exchange_energy(m: CellVectorField, mask: DomainMask, *,
                    check_norm: bool = True) -> float:
    """1/2 sum over interior bonds of |m_i - m_j|^2 h; free boundary.

    Differences are taken only between neighbor cells that both belong to
    the domain, which is the discrete form of the natural (no-flux)
    boundary condition of the Dirichlet integrand.
    """
    if check_norm:
        check_unit_norm(m, mask)
    h = m.grid.h
    bonds = _bond_masks(mask)
    total = 0.0
    for axis in range(3):
        d = np.diff(m.data, axis=1 + axis)
        total += float(np.sum(bonds[axis] * np.sum(d * d, axis=0)))
    return 0.5 * total * h  # (1/h^2) * h^3 = h


def anisotropy_energy(m: CellVectorField, params: MaterialParams,
                      mask: DomainMask, *, check_norm: bool = True) -> float:
    """(Q/2) integral of 1 - (m.e)^2 over the domain (uniaxial)."""
    if check_norm:
        check_unit_norm(m, mask)
    if params.Q == 0.0:
        return 0.0
    e = params.axis
    proj = np.einsum("c,cijk->ijk", e, m.data)
    val = (1.0 - proj ** 2) * mask.indicator
    return 0.5 * params.Q * float(val.sum()) * m.grid.cell_volume


def zeeman_energy(m: CellVectorField, params: MaterialParams,
                  mask: DomainMask, *, check_norm: bool = True) -> float:
    """- integral of h_a . m over the domain."""
    if check_norm:
        check_unit_norm(m, mask)
    ha = params.applied
    if not ha.any():
        return 0.0
    proj = np.einsum("c,cijk->ijk", ha, m.data)
    return -float((proj * mask.indicator).sum()) * m.grid.cell_volume


def stray_energy(m: CellVectorField, mask: DomainMask, cfg: SolverConfig):
    """Stray term of the cell magnetization: solve + pairing on faces.

    Returns (energy, solution); energy = 1/2 ||grad u||^2, which agrees
    with -1/2 <h, m> at the solver tolerance.
    """
    mf = masked_cell_to_faces(m, mask)
    sol = solve_scalar_potential(mf, mask, cfg)
    return sol.energy, sol


ALL_TERMS = ("exchange", "anisotropy", "zeeman", "stray")


def _check_terms(terms):
    terms = tuple(terms)
    for t in terms:
        if t not in ALL_TERMS:
            raise GridError(f"unknown energy term {t!r}")
    return terms


def total_energy(m: CellVectorField, params: MaterialParams, mask: DomainMask,
                 cfg: SolverConfig, *, terms=ALL_TERMS) -> EnergyBreakdown:
    """Selected terms of the energy; the stray term runs the field solver.

    ``terms`` restricts the functional (single-term studies such as
    Zeeman-only relaxations); omitted terms report exactly zero.
    """
    terms = _check_terms(terms)
    check_unit_norm(m, mask)
    ex = exchange_energy(m, mask, check_norm=False) if "exchange" in terms else 0.0
    an = (anisotropy_energy(m, params, mask, check_norm=False)
          if "anisotropy" in terms else 0.0)
    ze = zeeman_energy(m, params, mask, check_norm=False) if "zeeman" in terms else 0.0
    st = (stray_energy(m, mask, cfg)[0]
          if ("stray" in terms and not mask.is_empty()) else 0.0)
    return EnergyBreakdown(exchange=ex, anisotropy=an, zeeman=ze, stray=st)


def effective_field(m: CellVectorField, params: MaterialParams, mask: DomainMask,
                    cfg: SolverConfig, *, terms=ALL_TERMS) -> CellVectorField:
    """Negative variational derivative of the total energy per unit volume.

    Exchange: neighbor Laplacian restricted to domain bonds; anisotropy:
    Q (m.e) e; Zeeman: h_a; stray: the demagnetizing field pulled back to
    cells through the adjoint of the face transfer.  The finite-difference
    directional-derivative test in the suite pins the exactness of this
    gradient.
    """
    terms = _check_terms(terms)
    grid = m.grid
    h2 = grid.h ** 2
    ind = mask.indicator
    data = np.zeros_like(m.data)

    if "exchange" in terms:
        bonds = _bond_masks(mask)
        for axis in range(3):
            d = np.diff(m.data, axis=1 + axis) * bonds[axis]
            lead = [slice(None), *([slice(None)] * axis)]
            data[tuple(lead + [slice(0, -1)])] += d / h2
            data[tuple(lead + [slice(1, None)])] -= d / h2

    if "anisotropy" in terms and params.Q != 0.0:
        e = params.axis
        proj = np.einsum("c,cijk->ijk", e, m.data)
        data += params.Q * proj[None] * e[:, None, None, None]

    if "zeeman" in terms:
        ha = params.applied
        if ha.any():
            data += ha[:, None, None, None]

    field_cells = CellVectorField(grid, data * ind)
    if "stray" in terms and not mask.is_empty():
        sol = stray_energy(m, mask, cfg)[1]
        hd = masked_faces_to_cell_adjoint(sol.h, mask)
        field_cells.data += hd.data * ind
    return field_cells
