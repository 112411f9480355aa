"""Batched polynomial root extraction via Frobenius companion matrices.

Roots of P(z, E) at fixed E are the eigenvalues of the companion matrix of
the z-shifted coefficient vector.  The dense eigensolver is LAPACK's
balanced Hessenberg + shifted-QR routine (``numpy.linalg.eigvals``), which
is the standard method and is applied to whole stacks of companion matrices
at once; a thread pool can split large energy batches into chunks since the
solver releases the GIL.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EigensolverError
from .poly import LaurentCharPoly

# leading coefficients below this fraction of the largest one are treated as
# vanished: the corresponding roots sit at infinity and are dropped
LEAD_REL_EPS = 1e-12


@dataclass(frozen=True)
class CompanionMatrix:
    """Frobenius companion of c_0 + c_1 z + ... + c_d z^d (monic in z^d)."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)


@dataclass(frozen=True)
class RootSet:
    """Finite roots sorted by (|z|, arg z); roots at infinity are counted."""

    roots: tuple[complex, ...]
    degree_deficit: int = 0
    lead_coeff: complex = field(default=1.0 + 0.0j)

    def __post_init__(self):
        mags = [abs(r) for r in self.roots]
        if any(a > b + 1e-30 for a, b in zip(mags, mags[1:])):
            raise AssertionError("root magnitudes must be non-decreasing")

    def magnitudes(self) -> np.ndarray:
        return np.array([abs(r) for r in self.roots], dtype=np.float64)


def companion_in_z(coeffs: Sequence[complex]) -> CompanionMatrix:
    """Companion matrix with subdiagonal ones and last column -c_m / c_d."""
    c = np.asarray(coeffs, dtype=np.complex128)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("need at least a degree-1 coefficient vector")
    if c[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    d = c.size - 1
    m = np.zeros((d, d), dtype=np.complex128)
    m[np.arange(1, d), np.arange(d - 1)] = 1.0
    m[:, -1] = -c[:-1] / c[-1]
    return CompanionMatrix(dim=d, entries=m)


def eigenvalues(m: np.ndarray, max_dim: int = 4096) -> list[complex]:
    """All eigenvalues of a dense complex matrix, multiplicity included."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] > max_dim:
        raise ValueError(f"matrix dimension {a.shape[0]} exceeds max_dim={max_dim}")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as e:  # pragma: no cover - LAPACK rarely fails
        raise EigensolverError(f"eigensolver did not converge: {e}") from e
    return [complex(v) for v in vals]


def _sort_by_mag_phase(vals: np.ndarray) -> tuple[complex, ...]:
    order = np.lexsort((np.angle(vals), np.abs(vals)))
    return tuple(complex(v) for v in vals[order])


def poly_roots(coeffs: Sequence[complex]) -> RootSet:
    """Roots of sum_m c_m z^m, magnitude-sorted, with infinity accounting.

    When the leading coefficient underflows (relative to the largest one)
    the degree is reduced and the dropped root counted in ``degree_deficit``.
    """
    c = np.asarray(coeffs, dtype=np.complex128).ravel()
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        raise ValueError("all-zero coefficient vector has no roots")
    d_full = c.size - 1
    cut = LEAD_REL_EPS * scale
    top = c.size
    while top > 0 and abs(c[top - 1]) < cut:
        top -= 1
    deficit = c.size - top
    c = c[:top]
    if c.size <= 1:
        # constant polynomial after reduction: every root escaped to infinity
        return RootSet(roots=(), degree_deficit=d_full, lead_coeff=complex(c[0]) if c.size else 0j)
    comp = companion_in_z(c)
    vals = np.linalg.eigvals(comp.entries)
    return RootSet(
        roots=_sort_by_mag_phase(vals),
        degree_deficit=deficit,
        lead_coeff=complex(c[-1]),
    )


@dataclass(frozen=True)
class BatchRootError:
    """Failure record for one energy in a batch."""

    energy: complex
    message: str


def _mags_for_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sorted root magnitudes for a (K, d+1) coefficient block.

    Returns (magnitudes, deficits, lead_abs): magnitudes is (K, d) with
    rows right-padded by +inf for roots at infinity, deficits counts them,
    lead_abs is |leading coefficient| after degree reduction.
    """
    K, w = rows.shape
    d = w - 1
    mags = np.full((K, d), np.inf, dtype=np.float64)
    deficits = np.zeros(K, dtype=np.int64)
    lead_abs = np.zeros(K, dtype=np.float64)
    scale = np.max(np.abs(rows), axis=1)
    ok = (np.abs(rows[:, -1]) >= LEAD_REL_EPS * scale) & (scale > 0)
    if np.any(ok):
        block = rows[ok]
        comp = np.zeros((block.shape[0], d, d), dtype=np.complex128)
        idx = np.arange(d - 1)
        comp[:, idx + 1, idx] = 1.0
        comp[:, :, -1] = -block[:, :-1] / block[:, -1:]
        vals = np.linalg.eigvals(comp)
        mags[ok] = np.sort(np.abs(vals), axis=1)
        lead_abs[ok] = np.abs(block[:, -1])
    for i in np.nonzero(~ok)[0]:
        rs = poly_roots(rows[i])
        m = rs.magnitudes()
        mags[i, : m.size] = m
        deficits[i] = rs.degree_deficit
        lead_abs[i] = abs(rs.lead_coeff)
    return mags, deficits, lead_abs


def root_magnitude_rows(
    poly: LaurentCharPoly, energies: np.ndarray, workers: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized magnitude-only root batches for field computation."""
    E = np.asarray(energies, dtype=np.complex128).ravel()
    rows = poly.coefficient_rows(E)
    if workers <= 1 or E.size < 4096:
        return _mags_for_rows(rows)
    chunks = np.array_split(np.arange(E.size), workers * 4)
    chunks = [c for c in chunks if c.size]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: _mags_for_rows(rows[c]), chunks))
    mags = np.concatenate([p[0] for p in parts], axis=0)
    deficits = np.concatenate([p[1] for p in parts], axis=0)
    lead = np.concatenate([p[2] for p in parts], axis=0)
    return mags, deficits, lead


def batch_roots(
    poly: LaurentCharPoly,
    energies: Sequence[complex],
    workers: int = 1,
) -> list[RootSet | BatchRootError]:
    """Per-energy ``poly_roots`` of the coefficient vectors, order-aligned."""
    if len(energies) == 0:
        raise ValueError("energy list must be non-empty")
    E = np.asarray(list(energies), dtype=np.complex128)
    rows = poly.coefficient_rows(E)

    def solve(i: int) -> RootSet | BatchRootError:
        try:
            return poly_roots(rows[i])
        except (ValueError, EigensolverError) as err:
            return BatchRootError(energy=complex(E[i]), message=str(err))

    if workers <= 1:
        return [solve(i) for i in range(E.size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(solve, range(E.size)))
