"""Sparse polynomial arithmetic over complex coefficients.

A term is a mapping from an exponent tuple to a complex coefficient.  The
generator list is ordered; by convention generator 0 is the phase variable
``z`` (the only one allowed to carry negative exponents), generator 1 is the
energy variable ``E``, and any further generators are sweep parameters.
Everything here is plain-dict arithmetic; callers canonicalize via ``trim``.
"""

from __future__ import annotations

from typing import Iterable, Mapping

# Relative magnitude below which a coefficient is considered an artifact of
# cancellation and dropped during canonicalization.
TRIM_REL_TOL = 1e-14


class RingError(ValueError):
    """Unsupported ring operation (bad exponent, non-monomial division...)."""


class RingPoly:
    """Polynomial over ``gens`` with complex coefficients, Laurent in gens[0]."""

    __slots__ = ("gens", "terms")

    def __init__(self, gens: tuple[str, ...], terms: Mapping[tuple[int, ...], complex] | None = None):
        self.gens = gens
        self.terms: dict[tuple[int, ...], complex] = dict(terms) if terms else {}

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, gens: tuple[str, ...], value: complex) -> "RingPoly":
        if value == 0:
            return cls(gens)
        return cls(gens, {(0,) * len(gens): complex(value)})

    @classmethod
    def generator(cls, gens: tuple[str, ...], name: str) -> "RingPoly":
        idx = gens.index(name)
        exp = [0] * len(gens)
        exp[idx] = 1
        return cls(gens, {tuple(exp): 1.0 + 0.0j})

    # -- basic queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def degree_in(self, gen_index: int) -> int:
        """Highest exponent of the given generator (0 for the zero poly)."""
        return max((e[gen_index] for e in self.terms), default=0)

    def min_exp_in(self, gen_index: int) -> int:
        return min((e[gen_index] for e in self.terms), default=0)

    def depends_on(self, gen_index: int) -> bool:
        return any(e[gen_index] != 0 for e in self.terms)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "RingPoly") -> "RingPoly":
        out = dict(self.terms)
        for e, c in other.terms.items():
            acc = out.get(e, 0.0) + c
            if acc == 0:
                out.pop(e, None)
            else:
                out[e] = acc
        return RingPoly(self.gens, out)

    def __neg__(self) -> "RingPoly":
        return RingPoly(self.gens, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "RingPoly") -> "RingPoly":
        return self + (-other)

    def __mul__(self, other: "RingPoly") -> "RingPoly":
        out: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc = out.get(e, 0.0) + c1 * c2
                if acc == 0:
                    out.pop(e, None)
                else:
                    out[e] = acc
        return RingPoly(self.gens, out)

    def scale(self, value: complex) -> "RingPoly":
        if value == 0:
            return RingPoly(self.gens)
        return RingPoly(self.gens, {e: c * value for e, c in self.terms.items()})

    def pow_int(self, k: int) -> "RingPoly":
        """Integer power; negative powers only for invertible monomials."""
        if k == 0:
            return RingPoly.constant(self.gens, 1.0)
        base = self
        if k < 0:
            base = self.invert_monomial()
            k = -k
        out = RingPoly.constant(self.gens, 1.0)
        acc = base
        while k:
            if k & 1:
                out = out * acc
            acc = acc * acc if k > 1 else acc
            k >>= 1
        return out

    def invert_monomial(self) -> "RingPoly":
        """Inverse of a single-term polynomial in z and constants only."""
        if len(self.terms) != 1:
            raise RingError("only constants and single z-monomials are invertible")
        (exp, coeff), = self.terms.items()
        if any(e != 0 for e in exp[1:]):
            raise RingError("negative powers are only allowed on z")
        inv_exp = (-exp[0],) + exp[1:]
        return RingPoly(self.gens, {inv_exp: 1.0 / coeff})

    def __truediv__(self, other: "RingPoly") -> "RingPoly":
        return self * other.invert_monomial()

    # -- canonicalization ----------------------------------------------------

    def trim(self, rel_tol: float = TRIM_REL_TOL) -> "RingPoly":
        """Drop coefficients tiny relative to the largest one."""
        scale = self.max_abs()
        if scale == 0.0:
            return RingPoly(self.gens)
        cut = rel_tol * scale
        return RingPoly(self.gens, {e: c for e, c in self.terms.items() if abs(c) > cut})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingPoly):
            return NotImplemented
        return self.gens == other.gens and self.terms == other.terms

    def __hash__(self):
        return hash((self.gens, frozenset(self.terms.items())))

    def __repr__(self):
        return f"RingPoly({self.gens!r}, {self.terms!r})"


def exact_div(num: RingPoly, den: RingPoly, rel_tol: float = 1e-9) -> RingPoly:
    """Exact polynomial division ``num / den`` (remainder must vanish).

    Used by fraction-free elimination, where divisibility is guaranteed in
    exact arithmetic; with floating coefficients the residual is checked
    against ``rel_tol`` times the operand scale.
    """
    if den.is_zero():
        raise RingError("division by the zero polynomial")
    if len(den.terms) == 1:
        return (num / den).trim()
    ngens = len(num.gens)
    lead = max(den.terms)  # lexicographic monomial order over exponent tuples
    lead_c = den.terms[lead]
    rem = RingPoly(num.gens, num.terms)
    quo = RingPoly(num.gens)
    scale = max(num.max_abs(), 1.0)
    guard = len(rem.terms) * 4 + 16
    while not rem.trim(rel_tol).is_zero():
        guard -= 1
        cand = [e for e in rem.terms if all(a >= b for a, b in zip(e, lead))]
        if guard < 0 or not cand:
            raise RingError("polynomial division left a nonzero remainder")
        e = max(cand)
        t = RingPoly(num.gens, {tuple(a - b for a, b in zip(e, lead)): rem.terms[e] / lead_c})
        quo = quo + t
        rem = (rem - t * den)
        # keep cancellation noise from stalling the loop
        rem = RingPoly(num.gens, {k: v for k, v in rem.terms.items() if abs(v) > rel_tol * scale * 1e-3})
    return quo.trim()


def determinant(matrix: list[list[RingPoly]], gens: tuple[str, ...]) -> RingPoly:
    """Determinant over the polynomial ring.

    Cofactor expansion up to 4x4; fraction-free Bareiss elimination above
    (avoids rational-function intermediates, divisions are exact).
    """
    n = len(matrix)
    if n == 0:
        return RingPoly.constant(gens, 1.0)
    if any(len(row) != n for row in matrix):
        raise RingError("determinant requires a square matrix")
    if n <= 4:
        return _det_cofactor(matrix, gens).trim()
    return _det_bareiss(matrix, gens).trim()


def _det_cofactor(m: list[list[RingPoly]], gens: tuple[str, ...]) -> RingPoly:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    out = RingPoly(gens)
    for j in range(n):
        if m[0][j].is_zero():
            continue
        minor = [[row[k] for k in range(n) if k != j] for row in m[1:]]
        term = m[0][j] * _det_cofactor(minor, gens)
        out = out + (term if j % 2 == 0 else -term)
    return out


def _det_bareiss(m: list[list[RingPoly]], gens: tuple[str, ...]) -> RingPoly:
    n = len(m)
    a = [[RingPoly(gens, cell.terms) for cell in row] for row in m]
    sign = 1
    prev = RingPoly.constant(gens, 1.0)
    for k in range(n - 1):
        if a[k][k].trim().is_zero():
            pivot_row = next((r for r in range(k + 1, n) if not a[r][k].trim().is_zero()), None)
            if pivot_row is None:
                return RingPoly(gens)
            a[k], a[pivot_row] = a[pivot_row], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                a[i][j] = exact_div(num, prev)
            a[i][k] = RingPoly(gens)
        prev = a[k][k]
    det = a[n - 1][n - 1]
    return det if sign > 0 else -det


def substitute(poly: RingPoly, values: Mapping[str, complex], keep: Iterable[str]) -> RingPoly:
    """Replace the named generators by complex values, keeping the others.

    The result lives over the ``keep`` generators (in the given order).
    """
    keep = tuple(keep)
    keep_idx = [poly.gens.index(g) for g in keep]
    val_idx = [(poly.gens.index(name), complex(v)) for name, v in values.items()]
    out: dict[tuple[int, ...], complex] = {}
    for e, c in poly.terms.items():
        factor = c
        for idx, v in val_idx:
            k = e[idx]
            if k:
                if v == 0 and k < 0:
                    raise RingError("zero value raised to a negative power")
                factor *= v ** k
        new_e = tuple(e[i] for i in keep_idx)
        acc = out.get(new_e, 0.0) + factor
        if acc == 0:
            out.pop(new_e, None)
        else:
            out[new_e] = acc
    return RingPoly(keep, out).trim()
