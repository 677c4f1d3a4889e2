"""Discrete vector calculus on the staggered grid.

The operator pairs are built so the continuum identities hold exactly in
floating point, not just to discretization order:

* ``grad`` (cells -> faces, zero-extended differences) and ``div``
  (faces -> cells) satisfy  <grad u, v> = -<u, div v>  for all fields;
* ``curl`` maps faces -> edges and edges -> faces; the two directions are
  exact adjoints of each other;
* ``curl(grad u) = 0`` and ``div(curl v) = 0`` hold to rounding;
* for fields vanishing on their outermost layer,
  ||D v||^2 = ||div v||^2 + ||curl v||^2  with D the componentwise
  difference gradient.

These exact identities are what make the scalar-potential maximization and
the two vector-potential minimizations agree at the discrete level.
"""

from __future__ import annotations

import numpy as np

from .errors import GridError, SupportError
from .grid import (CELL, EDGE, FACE, NODE, CellVectorField, DomainMask,
                   ScalarField, VectorField)


def _pad_diff(a: np.ndarray, axis: int) -> np.ndarray:
    """Difference with zero extension: output one longer along ``axis``."""
    shape = list(a.shape)
    shape[axis] += 1
    out = np.zeros(shape, dtype=a.dtype)
    lead = [slice(None)] * axis
    out[tuple(lead + [slice(0, -1)])] = a
    out[tuple(lead + [slice(1, None)])] -= a
    # out[i] = a[i] - a[i-1] with a[-1] = a[n] = 0
    return out


def _diff(a: np.ndarray, axis: int) -> np.ndarray:
    """Interior difference: output one shorter along ``axis``."""
    return np.diff(a, axis=axis)


def grad(u: ScalarField) -> VectorField:
    """Face-centered gradient of a cell scalar (zero outside the grid)."""
    if u.centering != CELL:
        raise GridError("grad expects a cell-centered scalar")
    h = u.grid.h
    return VectorField(u.grid,
                       _pad_diff(u.data, 0) / h,
                       _pad_diff(u.data, 1) / h,
                       _pad_diff(u.data, 2) / h,
                       staggering=FACE)


def grad_node(p: ScalarField) -> VectorField:
    """Edge-centered gradient of a node scalar (gauge transformations)."""
    if p.centering != NODE:
        raise GridError("grad_node expects a node-centered scalar")
    h = p.grid.h
    return VectorField(p.grid,
                       _diff(p.data, 0) / h,
                       _diff(p.data, 1) / h,
                       _diff(p.data, 2) / h,
                       staggering=EDGE)


def div(v: VectorField) -> ScalarField:
    """Divergence: faces -> cells, or edges -> nodes."""
    h = v.grid.h
    if v.staggering == FACE:
        data = (_diff(v.x, 0) + _diff(v.y, 1) + _diff(v.z, 2)) / h
        return ScalarField(v.grid, data, centering=CELL)
    data = (_pad_diff(v.x, 0) + _pad_diff(v.y, 1) + _pad_diff(v.z, 2)) / h
    return ScalarField(v.grid, data, centering=NODE)


def curl(v: VectorField) -> VectorField:
    """Staggered curl; flips the layout (faces -> edges, edges -> faces)."""
    h = v.grid.h
    if v.staggering == FACE:
        cx = (_pad_diff(v.z, 1) - _pad_diff(v.y, 2)) / h
        cy = (_pad_diff(v.x, 2) - _pad_diff(v.z, 0)) / h
        cz = (_pad_diff(v.y, 0) - _pad_diff(v.x, 1)) / h
        return VectorField(v.grid, cx, cy, cz, staggering=EDGE)
    cx = (_diff(v.z, 1) - _diff(v.y, 2)) / h
    cy = (_diff(v.x, 2) - _diff(v.z, 0)) / h
    cz = (_diff(v.y, 0) - _diff(v.x, 1)) / h
    return VectorField(v.grid, cx, cy, cz, staggering=FACE)


def inner(f, g) -> float:
    """L2 inner product with h^3 weight; raises on layout mismatch."""
    if isinstance(f, ScalarField) and isinstance(g, ScalarField):
        if f.data.shape != g.data.shape or f.centering != g.centering:
            raise GridError("scalar fields have different layouts")
        return float(np.vdot(f.data, g.data)) * f.grid.cell_volume
    if isinstance(f, VectorField) and isinstance(g, VectorField):
        if f.staggering != g.staggering:
            raise GridError("staggering mismatch in inner product")
        if any(a.shape != b.shape for a, b in zip(f.components, g.components)):
            raise GridError("vector fields have different shapes")
        s = sum(float(np.vdot(a, b)) for a, b in zip(f.components, g.components))
        return s * f.grid.cell_volume
    if isinstance(f, CellVectorField) and isinstance(g, CellVectorField):
        if f.data.shape != g.data.shape:
            raise GridError("cell vector fields have different shapes")
        return float(np.vdot(f.data, g.data)) * f.grid.cell_volume
    raise GridError(f"cannot pair {type(f).__name__} with {type(g).__name__}")


def norm(f) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def grad_norm_sq(v: VectorField) -> float:
    """||D v||^2: componentwise difference gradient with zero extension.

    Every finite array is treated as a compactly supported field on the
    infinite grid, so all nine difference arrays (one longer in the
    differencing direction) are kept.
    """
    h = v.grid.h
    total = 0.0
    for comp in v.components:
        for axis in range(3):
            d = _pad_diff(comp, axis)
            total += float(np.vdot(d, d))
    return total * v.grid.cell_volume / h ** 2


# ---------------------------------------------------------------------------
# transfer between collocated magnetization and MAC faces
# ---------------------------------------------------------------------------

def _avg_pad(a: np.ndarray, axis: int) -> np.ndarray:
    """Two-point average with zero extension: output one longer along axis."""
    shape = list(a.shape)
    shape[axis] += 1
    out = np.zeros(shape, dtype=a.dtype)
    lead = [slice(None)] * axis
    out[tuple(lead + [slice(0, -1)])] = a
    out[tuple(lead + [slice(1, None)])] += a
    return 0.5 * out


def _avg_adjoint(a: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint of ``_avg_pad``: output one shorter along axis."""
    lead = [slice(None)] * axis
    lo = a[tuple(lead + [slice(0, -1)])]
    hi = a[tuple(lead + [slice(1, None)])]
    return 0.5 * (lo + hi)


def cell_to_faces(m: CellVectorField) -> VectorField:
    """Sample a collocated field on faces by adjacent-cell averaging.

    Cells outside the grid count as zero, so faces on the domain boundary
    receive half the interior value (the flux-consistent choice for a
    magnetization extended by zero).
    """
    return VectorField(m.grid,
                       _avg_pad(m.data[0], 0),
                       _avg_pad(m.data[1], 1),
                       _avg_pad(m.data[2], 2),
                       staggering=FACE)


def faces_to_cell_adjoint(v: VectorField) -> CellVectorField:
    """Exact adjoint of ``cell_to_faces`` (same h^3 weight on both sides)."""
    if v.staggering != FACE:
        raise GridError("expected a face-staggered field")
    data = np.stack([_avg_adjoint(v.x, 0), _avg_adjoint(v.y, 1), _avg_adjoint(v.z, 2)])
    return CellVectorField(v.grid, data)


def _mask_face_weights(mask: DomainMask, axis: int):
    """(wL, wR) per face: indicator-weighted averaging coefficients.

    Interior faces average the two neighbors (1/2, 1/2); faces on the
    domain boundary take the full inside value (closed-voxel convention,
    which keeps the surface charge of a uniform body on the voxel surface).
    """
    ind = mask.indicator
    shape = list(ind.shape)
    shape[axis] += 1
    chiL = np.zeros(shape)
    chiR = np.zeros(shape)
    lead = [slice(None)] * axis
    chiL[tuple(lead + [slice(1, None)])] = ind
    chiR[tuple(lead + [slice(0, -1)])] = ind
    denom = chiL + chiR
    with np.errstate(invalid="ignore", divide="ignore"):
        wL = np.where(denom > 0, chiL / np.maximum(denom, 1.0), 0.0)
        wR = np.where(denom > 0, chiR / np.maximum(denom, 1.0), 0.0)
    return wL, wR


def masked_cell_to_faces(m: CellVectorField, mask: DomainMask) -> VectorField:
    """Indicator-weighted face sampling of a mask-supported collocated field."""
    comps = []
    for axis in range(3):
        wL, wR = _mask_face_weights(mask, axis)
        comp = np.zeros(wL.shape)
        lead = [slice(None)] * axis
        comp[tuple(lead + [slice(1, None)])] += wL[tuple(lead + [slice(1, None)])] * m.data[axis]
        comp[tuple(lead + [slice(0, -1)])] += wR[tuple(lead + [slice(0, -1)])] * m.data[axis]
        comps.append(comp)
    return VectorField(m.grid, *comps, staggering=FACE)


def masked_faces_to_cell_adjoint(v: VectorField, mask: DomainMask) -> CellVectorField:
    """Exact adjoint of ``masked_cell_to_faces`` with the same mask."""
    if v.staggering != FACE:
        raise GridError("expected a face-staggered field")
    data = np.zeros((3, *v.grid.shape))
    for axis, comp in enumerate(v.components):
        wL, wR = _mask_face_weights(mask, axis)
        lead = [slice(None)] * axis
        data[axis] = (wL[tuple(lead + [slice(1, None)])] * comp[tuple(lead + [slice(1, None)])]
                      + wR[tuple(lead + [slice(0, -1)])] * comp[tuple(lead + [slice(0, -1)])])
    return CellVectorField(v.grid, data)


# ---------------------------------------------------------------------------
# mask-aware helpers
# ---------------------------------------------------------------------------

def interior_face_masks(mask: DomainMask):
    """Indicators of faces whose *both* adjacent cells lie in the domain."""
    ind = mask.indicator
    return tuple(_shift_and(ind, axis) for axis in range(3))


def _shift_and(ind: np.ndarray, axis: int) -> np.ndarray:
    shape = list(ind.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    lead = [slice(None)] * axis
    out[tuple(lead + [slice(1, -1)])] = np.minimum(
        ind[tuple(lead + [slice(0, -1)])], ind[tuple(lead + [slice(1, None)])])
    return out


def touching_face_masks(mask: DomainMask):
    """Indicators of faces adjacent to at least one domain cell."""
    ind = mask.indicator
    out = []
    for axis in range(3):
        shape = list(ind.shape)
        shape[axis] += 1
        arr = np.zeros(shape)
        lead = [slice(None)] * axis
        arr[tuple(lead + [slice(0, -1)])] = ind
        arr[tuple(lead + [slice(1, None)])] = np.maximum(
            arr[tuple(lead + [slice(1, None)])], ind)
        out.append(arr)
    return tuple(out)


def check_supported(v: VectorField, mask: DomainMask):
    """Raise SupportError if ``v`` carries values on faces away from the mask."""
    if v.staggering != FACE:
        raise GridError("support check expects a face field")
    touch = touching_face_masks(mask)
    for comp, t, name in zip(v.components, touch, "xyz"):
        bad = np.abs(comp) * (1.0 - t)
        if bad.any():
            idx = np.unravel_index(np.argmax(bad), bad.shape)
            raise SupportError(
                f"magnetization component {name} is nonzero outside the domain "
                f"mask at face index {tuple(int(i) for i in idx)}"
            )
