"""Uniform box grids in one and two dimensions.

Cells are numbered with the x index running fastest, ``cell = i + nx * j``.
Interior faces are stored once, oriented from ``face_a`` to ``face_b`` along
the positive axis direction. Boundary faces carry the outward normal as an
(axis, sign) pair and a side label (0: x-, 1: x+, 2: y-, 3: y+).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIDE_NAMES = ("x-", "x+", "y-", "y+")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    cells_per_axis: tuple
    domain_extent: tuple
    spacing: tuple
    cell_volume: float
    centers: np.ndarray
    face_a: np.ndarray
    face_b: np.ndarray
    face_area: np.ndarray
    face_axis: np.ndarray
    face_distance: np.ndarray
    face_centers: np.ndarray
    bnd_cell: np.ndarray
    bnd_axis: np.ndarray
    bnd_sign: np.ndarray
    bnd_side: np.ndarray
    bnd_area: np.ndarray
    bnd_centers: np.ndarray
    layer: np.ndarray  # l-inf distance (in cells) to the nearest boundary layer

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def n_faces(self) -> int:
        return len(self.face_a)

    @property
    def n_boundary_faces(self) -> int:
        return len(self.bnd_cell)

    @property
    def volume(self) -> float:
        return float(np.prod(self.domain_extent))

    @property
    def interior_faces(self):
        return list(zip(self.face_a.tolist(), self.face_b.tolist(),
                        self.face_area.tolist(), self.face_axis.tolist()))

    @property
    def boundary_faces(self):
        return list(zip(self.bnd_cell.tolist(), self.bnd_axis.tolist(),
                        self.bnd_sign.tolist(), self.bnd_area.tolist()))

    def side_mask(self, side) -> np.ndarray:
        if isinstance(side, str):
            side = SIDE_NAMES.index(side)
        return self.bnd_side == side

    def integrate(self, field) -> float:
        return float(self.cell_volume * np.sum(field))

    def net_outflow(self, face_flux, boundary_flux=None) -> np.ndarray:
        """Per-cell net outflow (flux times area) of a face flux field.

        ``face_flux`` is oriented from ``face_a`` to ``face_b``;
        ``boundary_flux`` is the outward flux per boundary face.
        """
        out = np.zeros(self.n_cells)
        w = self.face_area * face_flux
        np.add.at(out, self.face_a, w)
        np.add.at(out, self.face_b, -w)
        if boundary_flux is not None:
            np.add.at(out, self.bnd_cell, self.bnd_area * boundary_flux)
        return out

    def face_difference(self, field) -> np.ndarray:
        """Two-point difference ``(u_b - u_a) / distance`` on interior faces."""
        field = np.asarray(field)
        return (field[..., self.face_b] - field[..., self.face_a]) / self.face_distance


def build_grid(dimension, cells_per_axis, domain_extent) -> Grid:
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    cells = tuple(int(n) for n in np.atleast_1d(cells_per_axis))
    extent = tuple(float(L) for L in np.atleast_1d(domain_extent))
    if len(cells) != dimension or len(extent) != dimension:
        raise ValueError("cells_per_axis and domain_extent must have one entry per axis")
    if any(n < 2 for n in cells):
        raise ValueError(f"need at least 2 cells per axis, got {cells}")
    if any(not (L > 0) for L in extent):
        raise ValueError(f"domain extents must be positive, got {extent}")

    h = tuple(L / n for L, n in zip(extent, cells))
    volume = float(np.prod(h))

    # per-axis integer index of every cell, x fastest
    n_total = int(np.prod(cells))
    flat = np.arange(n_total)
    idx = []
    stride = 1
    for n in cells:
        idx.append((flat // stride) % n)
        stride *= n
    idx = np.array(idx)  # (dim, n_total)
    centers = ((idx + 0.5) * np.array(h)[:, None]).T

    strides = np.cumprod((1,) + cells[:-1])
    fa, fb, farea, faxis, fdist, fcent = [], [], [], [], [], []
    ba, baxis, bsign, bside, barea, bcent = [], [], [], [], [], []
    for ax in range(dimension):
        area = volume / h[ax]
        left = flat[idx[ax] < cells[ax] - 1]
        fa.append(left)
        fb.append(left + strides[ax])
        farea.append(np.full(len(left), area))
        faxis.append(np.full(len(left), ax))
        fdist.append(np.full(len(left), h[ax]))
        c = centers[left].copy()
        c[:, ax] += 0.5 * h[ax]
        fcent.append(c)
        for sign, at in ((-1, 0), (1, cells[ax] - 1)):
            cell = flat[idx[ax] == at]
            ba.append(cell)
            baxis.append(np.full(len(cell), ax))
            bsign.append(np.full(len(cell), sign))
            bside.append(np.full(len(cell), 2 * ax + (sign > 0)))
            barea.append(np.full(len(cell), area))
            c = centers[cell].copy()
            c[:, ax] = 0.0 if sign < 0 else extent[ax]
            bcent.append(c)

    layer = np.min(np.minimum(idx, np.array(cells)[:, None] - 1 - idx), axis=0)

    return Grid(
        dimension=dimension,
        cells_per_axis=cells,
        domain_extent=extent,
        spacing=h,
        cell_volume=volume,
        centers=_frozen(centers),
        face_a=_frozen(np.concatenate(fa)),
        face_b=_frozen(np.concatenate(fb)),
        face_area=_frozen(np.concatenate(farea)),
        face_axis=_frozen(np.concatenate(faxis)),
        face_distance=_frozen(np.concatenate(fdist)),
        face_centers=_frozen(np.concatenate(fcent)),
        bnd_cell=_frozen(np.concatenate(ba)),
        bnd_axis=_frozen(np.concatenate(baxis)),
        bnd_sign=_frozen(np.concatenate(bsign)),
        bnd_side=_frozen(np.concatenate(bside)),
        bnd_area=_frozen(np.concatenate(barea)),
        bnd_centers=_frozen(np.concatenate(bcent)),
        layer=_frozen(layer),
    )


@dataclass(frozen=True, eq=False)
class CutoffField:
    """Compactly supported weight in [0, 1] with a plateau equal to one.

    The outermost cell layer is exactly zero; the value ramps up smoothly
    across ``support_margin`` layers and equals one from layer
    ``support_margin`` inwards.
    """
    values: np.ndarray
    support_margin: int
    profile: str


def _ramp(s, profile):
    if profile == "plateau-cosine":
        return 0.5 * (1.0 - np.cos(np.pi * s))
    if profile == "plateau-polynomial":
        return s * s * (3.0 - 2.0 * s)
    raise ValueError(f"unknown cutoff profile {profile!r}")


def build_cutoff(grid: Grid, support_margin: int, profile: str = "plateau-cosine") -> CutoffField:
    if support_margin < 1:
        raise ValueError("support_margin must be >= 1")
    if not np.any(grid.layer >= support_margin):
        raise ValueError(
            f"support_margin={support_margin} leaves no plateau cell on a "
            f"{grid.cells_per_axis} grid")
    s = np.clip(grid.layer / support_margin, 0.0, 1.0)
    values = _ramp(s, profile)
    values[grid.layer == 0] = 0.0
    values[grid.layer >= support_margin] = 1.0
    return CutoffField(values=_frozen(values), support_margin=int(support_margin), profile=profile)
