"""Spectral potential, density of states and GBZ residual as pixel fields.

The potential of a polynomial P(z, E) at one energy is
``-log|a_q(E)| - sum(log|z_i(E)|, i = p+1 .. p+q)`` with roots sorted by
magnitude; the density of states is ``-(1/2 pi)`` times its grid Laplacian.
When the leading coefficient underflows at isolated pixels, the same limit
is evaluated through the reduced polynomial (Vieta cancels the diverging
root against the vanishing coefficient), keeping the field finite.

Fields live on square, isotropic pixel grids; pixel (0, 0) is the lower-left
corner (smallest Re and Im), pixel centers are offset by half a pitch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import EmptySpectrumError, InvalidPolynomialError
from .poly import CoefficientSymmetry, LaurentCharPoly, real_space_hamiltonian
from .roots import root_magnitude_rows

LOG_FLOOR = 1e-300
FIELD_KINDS = ("potential", "dos", "gbz_residual", "binary")


@dataclass(frozen=True)
class EnergyWindow:
    """Square region of the complex energy plane with a pixel resolution."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    resolution: int

    def __post_init__(self):
        w = self.re_max - self.re_min
        h = self.im_max - self.im_min
        if w <= 0 or h <= 0:
            raise ValueError("window bounds must be increasing")
        if abs(w - h) > 1e-9 * max(w, h):
            raise ValueError("window must be square (isotropic pixels)")
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")

    @property
    def pitch(self) -> float:
        return (self.re_max - self.re_min) / self.resolution

    def re_centers(self) -> np.ndarray:
        h = self.pitch
        return self.re_min + h * (np.arange(self.resolution) + 0.5)

    def im_centers(self) -> np.ndarray:
        h = self.pitch
        return self.im_min + h * (np.arange(self.resolution) + 0.5)

    def pixel_to_energy(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        h = self.pitch
        return (self.re_min + h * (np.asarray(j) + 0.5)) + 1j * (
            self.im_min + h * (np.asarray(i) + 0.5)
        )

    def im_symmetric(self) -> bool:
        return abs(self.im_min + self.im_max) <= 1e-12 * (self.im_max - self.im_min)

    def re_symmetric(self) -> bool:
        return abs(self.re_min + self.re_max) <= 1e-12 * (self.re_max - self.re_min)

    def with_resolution(self, resolution: int) -> "EnergyWindow":
        return replace(self, resolution=resolution)


@dataclass(frozen=True)
class ScalarField:
    """Real-valued grid over a window; ``support`` marks trusted pixels."""

    window: EnergyWindow
    values: np.ndarray
    kind: str
    support: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        r = self.window.resolution
        if self.values.shape != (r, r):
            raise ValueError("grid shape must match the window resolution")
        if self.kind == "dos" and np.any(self.values < 0):
            raise ValueError("dos fields are non-negative after clamping")
        if self.kind == "binary":
            uniq = np.unique(self.values)
            if not np.all(np.isin(uniq, (0.0, 1.0))):
                raise ValueError("binary fields may contain only 0 and 1")
        self.values.setflags(write=False)
        if self.support is not None:
            self.support.setflags(write=False)


@dataclass(frozen=True)
class RefinementPlan:
    """Coarse mask and subdivision chosen by the adaptive two-stage pass."""

    mask: np.ndarray
    subdivision: int
    refined_coords: np.ndarray

    def __post_init__(self):
        self.mask.setflags(write=False)
        self.refined_coords.setflags(write=False)

    @property
    def refined_fraction(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.mask.size


# ---------------------------------------------------------------------------
# window estimation
# ---------------------------------------------------------------------------

def estimate_window(
    poly: LaurentCharPoly,
    cells: int = 40,
    pad_fraction: float = 0.20,
    resolution: int = 256,
    max_dim: int = 500,
) -> EnergyWindow:
    """Square window bounding the finite-chain spectrum, padded per side.

    A chain shorter than the hopping range is silently grown to the legal
    minimum.  Mirror-symmetric polynomials get a window centered on the
    symmetry axis so that half-plane mirroring is exact later on.
    """
    n = max(cells, poly.p + poly.q + 1)
    H = real_space_hamiltonian(poly, n, "open", max_dim=max_dim)
    ev = np.linalg.eigvals(H)
    re, im = ev.real, ev.imag
    re_lo, re_hi = float(re.min()), float(re.max())
    im_lo, im_hi = float(im.min()), float(im.max())
    sym = poly.coefficient_symmetry()
    if sym is CoefficientSymmetry.REAL_AXIS:
        m = max(abs(im_lo), abs(im_hi))
        im_lo, im_hi = -m, m
    elif sym is CoefficientSymmetry.IMAG_AXIS:
        m = max(abs(re_lo), abs(re_hi))
        re_lo, re_hi = -m, m
    c_re, c_im = (re_lo + re_hi) / 2.0, (im_lo + im_hi) / 2.0
    half = max((re_hi - re_lo) / 2.0, (im_hi - im_lo) / 2.0) * (1.0 + pad_fraction)
    if half < 1e-9:
        half = 1.0  # point spectrum: fall back to the documented unit window
    return EnergyWindow(c_re - half, c_re + half, c_im - half, c_im + half, resolution)


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------

def _phi_formula(poly: LaurentCharPoly, energies: np.ndarray, workers: int) -> np.ndarray:
    mags, deficits, lead_abs = root_magnitude_rows(poly, energies, workers=workers)
    p = poly.p
    d = p + poly.q
    finite = np.isfinite(mags)
    safe = np.where(finite, np.maximum(mags, LOG_FLOOR), 1.0)
    logs = np.where(finite, np.log(safe), 0.0)
    total = logs.sum(axis=1)
    prefix = logs[:, :p].sum(axis=1) if p else 0.0
    top = np.where(d - deficits >= p, total - prefix, 0.0)
    return -np.log(np.clip(lead_abs, LOG_FLOOR, None)) - top


def _phi_at_pixels(
    poly: LaurentCharPoly,
    window: EnergyWindow,
    ii: np.ndarray,
    jj: np.ndarray,
    workers: int,
    exploit_symmetry: bool,
) -> np.ndarray:
    """Potential at the given pixel indices, mirroring symmetric half-planes."""
    r = window.resolution
    ki, kj = ii, jj
    if exploit_symmetry:
        sym = poly.coefficient_symmetry()
        if sym is CoefficientSymmetry.REAL_AXIS and window.im_symmetric():
            ki = np.minimum(ii, r - 1 - ii)
        elif sym is CoefficientSymmetry.IMAG_AXIS and window.re_symmetric():
            kj = np.minimum(jj, r - 1 - jj)
    flat = ki.astype(np.int64) * r + kj.astype(np.int64)
    uniq, inverse = np.unique(flat, return_inverse=True)
    ui, uj = np.divmod(uniq, r)
    E = window.pixel_to_energy(ui, uj)
    vals = _phi_formula(poly, E, workers)
    return vals[inverse]


def spectral_potential(
    poly: LaurentCharPoly,
    window: EnergyWindow,
    workers: int = 1,
    exploit_symmetry: bool = True,
) -> ScalarField:
    """Potential field over the window; symmetric polynomials compute one
    half-plane and mirror it."""
    if poly.p + poly.q < 1:
        raise InvalidPolynomialError("polynomial has no z dependence; no potential field")
    r = window.resolution
    ii, jj = np.mgrid[0:r, 0:r]
    vals = _phi_at_pixels(poly, window, ii.ravel(), jj.ravel(), workers, exploit_symmetry)
    return ScalarField(window=window, values=vals.reshape(r, r), kind="potential")


# ---------------------------------------------------------------------------
# density of states
# ---------------------------------------------------------------------------

def grid_laplacian(values: np.ndarray, pitch: float) -> np.ndarray:
    """5-point Laplacian with replicate padding on the border ring."""
    padded = np.pad(values, 1, mode="edge")
    return (
        padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        - 4.0 * values
    ) / (pitch * pitch)


def density_of_states(phi: ScalarField, clamp: bool = True) -> ScalarField:
    """rho = -(1/2 pi) * Laplacian(phi); negative undershoot clamped to 0."""
    if phi.values.shape[0] < 3:
        raise ValueError("potential grid must be at least 3x3")
    rho = -grid_laplacian(phi.values, phi.window.pitch) / (2.0 * math.pi)
    if clamp:
        rho = np.maximum(rho, 0.0)
    return ScalarField(window=phi.window, values=rho, kind="dos", support=phi.support)


# ---------------------------------------------------------------------------
# GBZ residual
# ---------------------------------------------------------------------------

def gbz_residual(
    poly: LaurentCharPoly,
    window: EnergyWindow,
    workers: int = 1,
) -> ScalarField:
    """|z_{p+1}(E)| - |z_p(E)| per pixel; zero marks the spectral locus."""
    p, q = poly.p, poly.q
    if p < 1 or q < 1:
        raise InvalidPolynomialError(
            "the generalized-zone residual needs hopping in both directions (p >= 1 and q >= 1)"
        )
    r = window.resolution
    ii, jj = np.mgrid[0:r, 0:r]
    E = window.pixel_to_energy(ii.ravel(), jj.ravel())
    mags, _, _ = root_magnitude_rows(poly, E, workers=workers)
    res = mags[:, p] - mags[:, p - 1]
    res = np.where(np.isfinite(res), np.maximum(res, 0.0), 1e300)
    return ScalarField(window=window, values=res.reshape(r, r), kind="gbz_residual")


# ---------------------------------------------------------------------------
# adaptive two-stage refinement
# ---------------------------------------------------------------------------

def _cross_dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def adaptive_dos(
    poly: LaurentCharPoly,
    window: EnergyWindow,
    base_res: int = 256,
    m: int = 4,
    workers: int = 1,
    mask_override: np.ndarray | None = None,
) -> tuple[ScalarField, ScalarField, ScalarField, RefinementPlan]:
    """Two-stage potential/DOS computation.

    Stage 1 runs at ``base_res``, binarizes the DOS by its global mean and
    dilates the result into a conservative mask; stage 2 recomputes both
    fields on the m x m subdivision of masked pixels only.  The composed DOS
    is zero outside the mask and the final binary field thresholds it by the
    mean over refined pixels.
    """
    from . import morphology  # local import: morphology depends on this module's types

    if base_res * m > 4096:
        raise ValueError("base_res * m must not exceed 4096")
    win1 = window.with_resolution(base_res)
    phi1 = spectral_potential(poly, win1, workers=workers)
    rho1 = density_of_states(phi1)
    if mask_override is not None:
        if mask_override.shape != (base_res, base_res):
            raise ValueError("mask_override shape must match the coarse grid")
        mask = mask_override.astype(bool)
    else:
        coarse_bits = morphology.binarize_mean(rho1)
        mask = morphology.dilate_disk2(coarse_bits).bits.astype(bool)
    if not mask.any():
        raise EmptySpectrumError("empty spectrum window", phi=phi1, dos=rho1)

    fine_res = base_res * m
    win2 = window.with_resolution(fine_res)
    mask_fine = np.kron(mask, np.ones((m, m), dtype=bool))
    compute = _cross_dilate(mask_fine)
    ci, cj = np.nonzero(compute)
    phi_vals = _phi_at_pixels(poly, win2, ci, cj, workers, exploit_symmetry=True)

    phi_fine = np.kron(phi1.values, np.ones((m, m)))
    phi_fine[ci, cj] = phi_vals

    rho_fine = -grid_laplacian(phi_fine, win2.pitch) / (2.0 * math.pi)
    rho_fine = np.where(mask_fine, np.maximum(rho_fine, 0.0), 0.0)

    refined = rho_fine[mask_fine]
    threshold = float(refined.mean()) if refined.size else 0.0
    bits = (rho_fine > threshold).astype(np.float64)

    plan = RefinementPlan(
        mask=mask,
        subdivision=m,
        refined_coords=np.argwhere(mask),
    )
    phi_field = ScalarField(window=win2, values=phi_fine, kind="potential")
    dos_field = ScalarField(window=win2, values=rho_fine, kind="dos", support=mask_fine)
    bin_field = ScalarField(window=win2, values=bits, kind="binary", support=mask_fine)
    return phi_field, dos_field, bin_field, plan
