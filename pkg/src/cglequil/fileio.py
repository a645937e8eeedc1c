"""
CSV and legacy-VTK input/output for grids and sampled fields.

Formats:

* flux grids: CSV with header ``r,z,psi`` (or ``r,u,psi``), one node per row,
  r varying slowest;
* point samples: CSV with ``x,y,z`` and one column per field component;
* VTK legacy ASCII ``STRUCTURED_GRID`` with ``POINT_DATA`` (``VECTORS B``
  and one ``SCALARS`` block per pressure-like quantity).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .fields import Ball, CglState, CylindricalShell, Domain, MhdState
from .gs import FluxGrid
from .transforms import MappedDomain

PathLike = Union[str, Path]

# repr() round-trips doubles exactly
_FMT = repr


# ---------------------------------------------------------------------------
# Flux grids
# ---------------------------------------------------------------------------


def write_grid_csv(grid: FluxGrid, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    R, Z = grid.mesh()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", grid.coord, "psi"])
        for r, z, p in zip(R.ravel(), Z.ravel(), grid.psi.ravel()):
            w.writerow([_FMT(float(r)), _FMT(float(z)), _FMT(float(p))])
    return path


def read_grid_csv(path: PathLike) -> FluxGrid:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if len(header) != 3 or header[0] != "r" or header[2] != "psi":
        raise ValueError(f"unexpected grid header {header}")
    r = np.unique(body[:, 0])
    z = np.unique(body[:, 1])
    if body.shape[0] != r.size * z.size:
        raise ValueError("grid CSV is not a full tensor-product grid")
    order = np.lexsort((body[:, 1], body[:, 0]))
    psi = body[order, 2].reshape(r.size, z.size)
    return FluxGrid(r, z, psi, coord=header[1])


# ---------------------------------------------------------------------------
# Sampling states
# ---------------------------------------------------------------------------


@dataclass
class SampledState:
    """Structured sample of a state: points (n1, n2, n3, 3) and named fields."""

    points: np.ndarray
    vectors: dict
    scalars: dict

    @property
    def shape(self):
        return self.points.shape[:-1]


def structured_points(domain: Domain, n: int = 16, guard: float = 0.05) -> np.ndarray:
    """Logically structured points inside ``domain``, shape (n, n, n, 3).

    Balls use a spherical grid, cylindrical shells a cylindrical one and
    anything else a cube of side ``2 * extent``.  Moved or dilated domains
    carry the grid of their base domain along.
    """
    if isinstance(domain, MappedDomain):
        return domain.forward(structured_points(domain.base, n, guard))
    if isinstance(domain, Ball):
        rho = np.linspace(guard, 1 - guard, n) * domain.radius
        th = np.linspace(guard, np.pi - guard, n)
        ph = np.linspace(0, 2 * np.pi, n, endpoint=False)
        P, T, F = np.meshgrid(rho, th, ph, indexing="ij")
        pts = np.stack([P * np.sin(T) * np.cos(F), P * np.sin(T) * np.sin(F), P * np.cos(T)], -1)
        return pts + np.asarray(domain.center, float)
    if isinstance(domain, CylindricalShell):
        dr, dz = domain.r_max - domain.r_min, domain.z_max - domain.z_min
        r = np.linspace(domain.r_min + guard * dr, domain.r_max - guard * dr, n)
        ph = np.linspace(0, 2 * np.pi, n, endpoint=False)
        z = np.linspace(domain.z_min + guard * dz, domain.z_max - guard * dz, n)
        R, F, Z = np.meshgrid(r, ph, z, indexing="ij")
        return np.stack([R * np.cos(F), R * np.sin(F), Z], -1)
    ext = getattr(domain, "extent", 1.0)
    a = np.linspace(-ext * (1 - guard), ext * (1 - guard), n)
    return np.stack(np.meshgrid(a, a, a, indexing="ij"), -1)


def sample_state(st: Union[MhdState, CglState], points: np.ndarray) -> SampledState:
    points = np.asarray(points, float)
    B = st.B(points)
    b2 = np.sum(B * B, axis=-1)
    if isinstance(st, CglState):
        scalars = {
            "p_perp": st.p_perp(points),
            "p_par": st.p_par(points),
            "tau": st.tau(points),
            "magnetic_energy": 0.5 * b2,
        }
    else:
        scalars = {"P": st.P(points), "magnetic_energy": 0.5 * b2}
    return SampledState(points, {"B": B}, scalars)


# ---------------------------------------------------------------------------
# Point CSV
# ---------------------------------------------------------------------------


def write_samples_csv(sample: SampledState, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = sample.points.reshape(-1, 3)
    cols = [("x", pts[:, 0]), ("y", pts[:, 1]), ("z", pts[:, 2])]
    for name, v in sample.vectors.items():
        v = v.reshape(-1, 3)
        cols += [(f"{name}_x", v[:, 0]), (f"{name}_y", v[:, 1]), (f"{name}_z", v[:, 2])]
    for name, s in sample.scalars.items():
        cols.append((name, s.reshape(-1)))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([c[0] for c in cols])
        for row in zip(*(c[1] for c in cols)):
            w.writerow([_FMT(float(v)) for v in row])
    return path


def read_samples_csv(path: PathLike) -> dict:
    """Columns of a sample CSV as a name -> array mapping."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {name: data[:, i] for i, name in enumerate(rows[0])}


def write_slice_csv(st: Union[MhdState, CglState], path: PathLike, n: int = 101, extent: float = None) -> Path:
    """Samples on the half-plane y = 0, x >= 0 (the meridional plane).

    Columns: x, z and P (or p_perp, p_par, tau) plus |B|^2 / 2.  Points
    outside the state's domain are skipped.
    """
    dom = st.domain
    if extent is None:
        if isinstance(dom, MappedDomain):
            extent = 1.05 * float(np.max(np.abs(dom.lattice(8))))
        else:
            extent = getattr(dom, "radius", None) or getattr(dom, "extent", 1.0)
    x = np.linspace(0.0, extent, n)
    z = np.linspace(-extent, extent, 2 * n - 1)
    X, Z = np.meshgrid(x, z, indexing="ij")
    pts = np.stack([X, np.zeros_like(X), Z], -1).reshape(-1, 3)
    if dom is not None:
        pts = pts[dom.contains(pts)]
    scalars = sample_state(st, pts).scalars
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(scalars)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "z"] + names)
        for i in range(pts.shape[0]):
            w.writerow([_FMT(float(pts[i, 0])), _FMT(float(pts[i, 2]))] + [_FMT(float(scalars[k][i])) for k in names])
    return path


# ---------------------------------------------------------------------------
# Legacy VTK
# ---------------------------------------------------------------------------


def _vtk_order(a: np.ndarray) -> np.ndarray:
    """(n1, n2, n3, ...) -> flat with the first index fastest."""
    a = np.asarray(a, float)
    tail = a.shape[3:]
    return np.transpose(a, (2, 1, 0) + tuple(range(3, a.ndim))).reshape((-1,) + tail)


def write_vtk(sample: SampledState, path: PathLike, title: str = "cglequil field") -> Path:
    if sample.points.ndim != 4:
        raise ValueError("VTK export needs structured points of shape (n1, n2, n3, 3)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n1, n2, n3 = sample.shape
    npts = n1 * n2 * n3
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET STRUCTURED_GRID"]
    lines.append(f"DIMENSIONS {n1} {n2} {n3}")
    lines.append(f"POINTS {npts} double")
    lines += [" ".join(_FMT(float(v)) for v in p) for p in _vtk_order(sample.points)]
    lines.append(f"POINT_DATA {npts}")
    for name, v in sample.vectors.items():
        lines.append(f"VECTORS {name} double")
        lines += [" ".join(_FMT(float(c)) for c in row) for row in _vtk_order(v)]
    for name, s in sample.scalars.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_FMT(float(c)) for c in _vtk_order(s)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path: PathLike) -> SampledState:
    """Reader for files produced by ``write_vtk`` (structured grid, ASCII)."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens[4:])
    dims = next(it).split()
    if dims[0] != "DIMENSIONS":
        raise ValueError("expected DIMENSIONS")
    n1, n2, n3 = (int(v) for v in dims[1:4])
    npts = n1 * n2 * n3

    def block(count, width):
        out = np.array([next(it).split() for _ in range(count)], dtype=float)
        return out.reshape(count, width) if width > 1 else out.reshape(count)

    def unflatten(a):
        shape = (n3, n2, n1) + a.shape[1:]
        return np.transpose(a.reshape(shape), (2, 1, 0) + tuple(range(3, a.ndim + 2)))

    head = next(it).split()
    if head[0] != "POINTS":
        raise ValueError("expected POINTS")
    points = unflatten(block(npts, 3))
    vectors, scalars = {}, {}
    for line in it:
        parts = line.split()
        if not parts or parts[0] == "POINT_DATA":
            continue
        if parts[0] == "VECTORS":
            vectors[parts[1]] = unflatten(block(npts, 3))
        elif parts[0] == "SCALARS":
            next(it)  # LOOKUP_TABLE
            scalars[parts[1]] = unflatten(block(npts, 1))
        else:
            raise ValueError(f"unexpected VTK line {line!r}")
    return SampledState(points, vectors, scalars)
