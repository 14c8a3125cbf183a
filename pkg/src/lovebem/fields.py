"""Radiation of recovered surface currents and error diagnostics.

Evaluation points must stay at least one triangle diameter away from
the current-carrying surface: the kernels are integrated with plain
product rules that only converge for smooth integrands.  Reconstruction
quality is summarized as relative L2 field errors on concentric
Fibonacci-sampled spheres, and the interior zero-field property is
checked by radiating onto points inside the surface.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .dipole import DipoleSource, FieldSample, field_arrays
from .operators import ETA0
from .quadrature import triangle_rule
from .spaces import evaluate_rt0

__all__ = [
    "ErrorCurve",
    "check_love_condition",
    "error_curve",
    "fibonacci_directions",
    "radiate_arrays",
    "radiate_currents",
    "save_error_curve",
]

_FOUR_PI = 4.0 * math.pi
_CHUNK = 32


def fibonacci_directions(n: int) -> np.ndarray:
    """Deterministic near-uniform unit vectors, golden-angle ordered."""
    if n < 1:
        raise ValueError("need at least one direction")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * (math.pi * (3.0 - math.sqrt(5.0)))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _quadrature_tables(space, coeffs, pts, wts):
    """Current values and face divergences at mapped quadrature points."""
    fine = space.fine
    if coeffs is None:
        shape = pts.shape[:-1]
        return np.zeros(shape + (3,), dtype=complex), np.zeros(
            fine.n_faces, dtype=complex)
    fine_coeffs = space.to_fine @ np.asarray(coeffs)
    faces = np.arange(fine.n_faces)[:, None]
    values = evaluate_rt0(fine, fine_coeffs, faces, pts)
    div_slot = fine.face_edge_signs / fine.face_areas[:, None]
    divs = (div_slot * fine_coeffs[fine.face_edges]).sum(axis=1)
    return values, divs


def _reject_near(mesh, points):
    edges = mesh.face_corners - np.roll(mesh.face_corners, 1, axis=1)
    diameter = float(np.linalg.norm(edges, axis=2).max())
    cloud = np.vstack([mesh.vertices, mesh.face_centroids])
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        dist = np.linalg.norm(block[:, None, :] - cloud[None, :, :], axis=2)
        if dist.min() < diameter:
            raise ValueError(
                "evaluation point sits within one triangle diameter of the "
                "surface; near-surface evaluation is unsupported")


def radiate_arrays(solution, rwg, bc, points, degree: int = 4):
    """Electric and magnetic fields of a solution at exterior points.

    ``solution.m`` radiates through the magnetic-current potentials in
    the RWG space, ``solution.j`` through the scaled electric-current
    potentials in the BC space; a missing ``j`` contributes nothing.
    Returns two complex arrays of shape ``(n_points, 3)``.
    """
    if rwg.fine is not bc.fine:
        raise ValueError("spaces must share the same refined mesh")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    _reject_near(rwg.mesh, points)
    k = float(solution.wavenumber)
    fine = rwg.fine
    pts, wts = triangle_rule(degree).map_to(fine.face_corners)
    m_vals, m_divs = _quadrature_tables(rwg, solution.m, pts, wts)
    j_vals, j_divs = _quadrature_tables(bc, solution.j, pts, wts)

    e_out = np.empty((len(points), 3), dtype=complex)
    h_out = np.empty((len(points), 3), dtype=complex)
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        d = block[:, None, None, :] - pts[None, :, :, :]
        r = np.linalg.norm(d, axis=-1)
        kernel = np.exp(1j * k * r) / (_FOUR_PI * r) * wts
        grad = np.exp(1j * k * r) * (1j * k * r - 1.0) / (
            _FOUR_PI * r**3) * wts

        def smoothed(vals, divs):
            pot = np.einsum("pfq,fqc->pc", kernel, vals)
            charge = np.einsum("pfq,pfqc,f->pc", grad, d, divs)
            curl = np.einsum("pfq,pfqc->pc", grad, np.cross(d, vals[None]))
            return pot, charge, curl

        m_pot, m_charge, m_curl = smoothed(m_vals, m_divs)
        j_pot, j_charge, j_curl = smoothed(j_vals, j_divs)
        e_out[start:start + _CHUNK] = (
            (1j / k) * (k * k * j_pot + j_charge) - m_curl)
        h_out[start:start + _CHUNK] = (
            j_curl + (1j / k) * (k * k * m_pot + m_charge)) / ETA0
    return e_out, h_out


def radiate_currents(solution, rwg, bc, points, degree: int = 4):
    """Field samples of a solution at exterior points."""
    points = np.asarray(points, dtype=np.float64)
    e, h = radiate_arrays(solution, rwg, bc, points, degree)
    return [FieldSample(point=p, E=ev, H=hv)
            for p, ev, hv in zip(points, e, h)]


@dataclass(frozen=True)
class ErrorCurve:
    """Relative field errors over evaluation distance from the surface."""

    radii: np.ndarray
    errors: np.ndarray
    formulation: str

    def __post_init__(self) -> None:
        radii = np.asarray(self.radii, dtype=np.float64)
        errors = np.asarray(self.errors, dtype=np.float64)
        if radii.shape != errors.shape or radii.ndim != 1:
            raise ValueError("radii and errors must be matching vectors")
        if not np.all(np.diff(radii) > 0.0):
            raise ValueError("radii must be strictly increasing")
        if not np.all(errors >= 0.0):
            raise ValueError("errors must be nonnegative")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "errors", errors)


def _surface_center(mesh):
    weighted = mesh.face_areas[:, None] * mesh.face_centroids
    return weighted.sum(axis=0) / mesh.face_areas.sum()


def error_curve(solution, source: DipoleSource, rwg, bc, radii,
                n_points: int = 200, degree: int = 4) -> ErrorCurve:
    """Relative L2 field error on concentric evaluation spheres.

    ``radii`` are offsets from the surface in wavelengths; every sphere
    is sampled with the same deterministic direction set and compared
    against the source fields over all vector components.
    """
    k = float(solution.wavenumber)
    if abs(source.ctx.wavenumber - k) > 1e-9 * k:
        raise ValueError("solution and source disagree on the frequency")
    radii = np.asarray(radii, dtype=np.float64)
    wavelength = 2.0 * math.pi / k
    center = _surface_center(rwg.mesh)
    surface_radius = float(
        np.linalg.norm(rwg.mesh.vertices - center, axis=1).max())
    directions = fibonacci_directions(n_points)
    errors = []
    for offset in radii:
        points = center + (surface_radius + offset * wavelength) * directions
        e_rec, _ = radiate_arrays(solution, rwg, bc, points, degree)
        e_ref, _ = field_arrays(source, points)
        errors.append(np.linalg.norm(e_rec - e_ref)
                      / np.linalg.norm(e_ref))
    return ErrorCurve(radii=radii, errors=np.asarray(errors),
                      formulation=solution.formulation)


def check_love_condition(solution, rwg, bc, interior_points,
                         degree: int = 4) -> float:
    """Worst interior field leak relative to the surface current level.

    Radiates the pair onto points strictly inside the surface and
    normalizes the largest field magnitude by the area-weighted mean
    current magnitude on the surface, so a zero return means the pair
    radiates nothing inward at the sampled points.
    """
    e_in, _ = radiate_arrays(solution, rwg, bc, interior_points, degree)
    fine = rwg.fine
    pts, wts = triangle_rule(degree).map_to(fine.face_corners)
    m_vals, _ = _quadrature_tables(rwg, solution.m, pts, wts)
    j_vals, _ = _quadrature_tables(bc, solution.j, pts, wts)
    area = wts.sum()
    mean_m = float((np.linalg.norm(m_vals, axis=2) * wts).sum() / area)
    mean_j = float((np.linalg.norm(j_vals, axis=2) * wts).sum() / area)
    level = max(mean_m, mean_j)
    if level == 0.0:
        return 0.0
    return float(np.linalg.norm(e_in, axis=1).max() / level)


def save_error_curve(curve: ErrorCurve, path, extra=None) -> None:
    """Write an error curve as CSV.

    ``extra`` adds a leading JSON provenance comment line.
    """
    with open(path, "w", newline="") as handle:
        if extra:
            handle.write("# " + json.dumps(extra) + "\n")
        writer = csv.writer(handle)
        writer.writerow(["radius_lambda", "rel_error", "formulation"])
        for radius, error in zip(curve.radii, curve.errors):
            writer.writerow([repr(float(radius)), repr(float(error)),
                             curve.formulation])
