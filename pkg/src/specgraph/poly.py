"""Bivariate Laurent characteristic polynomials and Bloch matrices.

The central object is ``LaurentCharPoly``: P(z, E) = sum_n a_n(E) z^n with
z-exponents spanning a tight range [-p, q] and energy-polynomial
coefficients a_n.  The open-boundary spectrum of the associated lattice
model depends only on this object, which is why parsing, determinants,
reciprocity, classification and real-space Hamiltonians all live here.
"""

from __future__ import annotations

import ast
import cmath
import enum
import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._ring import RingError, RingPoly, determinant
from .errors import InvalidPolynomialError, PolynomialSyntaxError

_ZE = ("z", "E")

# a trailing 'i' directly after a numeric literal is the imaginary unit
_IMAG_SUFFIX = re.compile(r"(?<=[0-9.])i\b")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyPolynomial:
    """Univariate polynomial in E; coeffs[m] multiplies E**m, trailing nonzero."""

    coeffs: tuple[complex, ...]

    @classmethod
    def from_seq(cls, coeffs: Sequence[complex]) -> "EnergyPolynomial":
        vals = [complex(c) for c in coeffs]
        while vals and vals[-1] == 0:
            vals.pop()
        return cls(tuple(vals))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, E: complex) -> complex:
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * E + c
        return acc

    def eval_array(self, E: np.ndarray) -> np.ndarray:
        if not self.coeffs:
            return np.zeros_like(E, dtype=np.complex128)
        acc = np.full(E.shape, self.coeffs[-1], dtype=np.complex128)
        for c in self.coeffs[-2::-1]:
            acc = acc * E + c
        return acc


class CoefficientSymmetry(enum.Enum):
    """Axis of mirror symmetry the spectral graph inherits from coefficients."""

    REAL_AXIS = "real_axis"
    IMAG_AXIS = "imag_axis"
    NONE = "none"


@dataclass(frozen=True)
class ClassSignature:
    """Unordered pair of monomial-presence vectors of P(z,E) and P(1/z,E).

    ``b`` spans z-exponents -p..q of the polynomial; ``b_prime`` is the vector
    of the reciprocal polynomial (exponents -q..p), i.e. ``b`` reversed.  The
    canonical key encodes both together with their exponent anchors, so that
    vectors with equal bits but different hopping splits stay distinct.
    """

    b: tuple[int, ...]
    b_prime: tuple[int, ...]
    p: int
    q: int

    @property
    def canonical_key(self) -> str:
        enc = f"{self.p}:{self.q}:" + "".join(map(str, self.b))
        enc_r = f"{self.q}:{self.p}:" + "".join(map(str, self.b_prime))
        lo, hi = sorted((enc, enc_r))
        return f"{lo}|{hi}"


class LaurentCharPoly:
    """Canonical bivariate Laurent polynomial P(z, E); immutable."""

    __slots__ = ("_terms", "_p", "_q", "_bands")

    def __init__(self, terms: Mapping[int, EnergyPolynomial]):
        clean = {int(n): a for n, a in terms.items() if not a.is_zero()}
        if not clean:
            raise InvalidPolynomialError("the zero polynomial has no spectrum")
        lo, hi = min(clean), max(clean)
        if lo > 0 or hi < 0:
            raise InvalidPolynomialError(
                "z-exponent range must include 0; divide out the common z power first"
            )
        bands = max(a.degree for a in clean.values())
        if bands < 1:
            raise InvalidPolynomialError("polynomial does not depend on E; no spectrum exists")
        self._terms = MappingProxyType(clean)
        self._p = -lo
        self._q = hi
        self._bands = bands

    # -- construction --------------------------------------------------------

    @classmethod
    def from_ring(cls, poly: RingPoly) -> "LaurentCharPoly":
        poly = poly.trim()
        if poly.is_zero():
            raise InvalidPolynomialError("the zero polynomial has no spectrum")
        by_n: dict[int, dict[int, complex]] = {}
        for (n, m), c in poly.terms.items():
            by_n.setdefault(n, {})[m] = c
        terms = {}
        for n, mc in by_n.items():
            deg = max(mc)
            coeffs = [mc.get(m, 0.0 + 0.0j) for m in range(deg + 1)]
            terms[n] = EnergyPolynomial.from_seq(coeffs)
        return cls(terms)

    def to_ring(self) -> RingPoly:
        terms = {}
        for n, a in self._terms.items():
            for m, c in enumerate(a.coeffs):
                if c != 0:
                    terms[(n, m)] = c
        return RingPoly(_ZE, terms)

    # -- basic structure -----------------------------------------------------

    @property
    def terms(self) -> Mapping[int, EnergyPolynomial]:
        return self._terms

    @property
    def p(self) -> int:
        return self._p

    @property
    def q(self) -> int:
        return self._q

    @property
    def bands(self) -> int:
        return self._bands

    def energy_poly(self, n: int) -> EnergyPolynomial:
        return self._terms.get(n, EnergyPolynomial(()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LaurentCharPoly):
            return NotImplemented
        return dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash(frozenset((n, a.coeffs) for n, a in self._terms.items()))

    def __repr__(self):
        return f"LaurentCharPoly({self.to_string()!r})"

    # -- operations ----------------------------------------------------------

    def to_string(self) -> str:
        """Canonical expression string; ``parse_char_poly`` round-trips it."""
        pieces: list[tuple[int, int, complex]] = []
        for n in sorted(self._terms):
            for m, c in enumerate(self._terms[n].coeffs):
                if c != 0:
                    pieces.append((n, m, c))
        out: list[str] = []
        for n, m, c in pieces:
            sign, body = _format_term(n, m, c)
            if not out:
                out.append(("-" if sign < 0 else "") + body)
            else:
                out.append((" - " if sign < 0 else " + ") + body)
        return "".join(out)

    def reciprocal(self) -> "LaurentCharPoly":
        """Substitute z -> 1/z (flip the chain); exponents stay tight."""
        return LaurentCharPoly({-n: a for n, a in self._terms.items()})

    def class_signature(self) -> ClassSignature:
        b = tuple(1 if n in self._terms else 0 for n in range(-self._p, self._q + 1))
        return ClassSignature(b=b, b_prime=tuple(reversed(b)), p=self._p, q=self._q)

    def evaluate_coefficients(self, E: complex) -> list[complex]:
        """(a_{-p}(E), ..., a_q(E)); absent exponents contribute 0."""
        if E != E or abs(E) == math.inf:
            raise ValueError("E must be finite")
        return [self.energy_poly(n)(E) for n in range(-self._p, self._q + 1)]

    def coefficient_rows(self, E: np.ndarray) -> np.ndarray:
        """Vectorized ``evaluate_coefficients``: rows align with the E array."""
        E = np.asarray(E, dtype=np.complex128)
        out = np.zeros(E.shape + (self._p + self._q + 1,), dtype=np.complex128)
        for n, a in self._terms.items():
            out[..., n + self._p] = a.eval_array(E)
        return out

    def coefficient_symmetry(self) -> CoefficientSymmetry:
        flat = [c for a in self._terms.values() for c in a.coeffs if c != 0]
        scale = max(abs(c) for c in flat)
        tol = 1e-14 * scale

        def real_up_to_phase(phase: int) -> bool:
            items = (
                (m, c)
                for a in self._terms.values()
                for m, c in enumerate(a.coeffs)
                if c != 0
            )
            return all(abs((c * 1j ** ((m - phase) % 4)).imag) <= tol for m, c in items)

        if all(abs(c.imag) <= tol for c in flat):
            return CoefficientSymmetry.REAL_AXIS
        if any(real_up_to_phase(phase) for phase in range(4)):
            return CoefficientSymmetry.IMAG_AXIS
        return CoefficientSymmetry.NONE


# ---------------------------------------------------------------------------
# Bloch matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochMatrix:
    """Square matrix of z-Laurent polynomials; one block T_j per z power."""

    entries: tuple[tuple[RingPoly, ...], ...]

    def __post_init__(self):
        s = len(self.entries)
        if s == 0 or any(len(row) != s for row in self.entries):
            raise InvalidPolynomialError("Bloch matrix must be square")
        for row in self.entries:
            for cell in row:
                if cell.gens != _ZE or cell.depends_on(1):
                    raise InvalidPolynomialError("Bloch matrix entries must be z-Laurent only")

    @classmethod
    def from_strings(cls, rows: Sequence[Sequence[str]]) -> "BlochMatrix":
        return cls(tuple(tuple(_parse_ring(s, ()) for s in row) for row in rows))

    @property
    def size(self) -> int:
        return len(self.entries)

    def j_range(self) -> tuple[int, int]:
        lo, hi = 0, 0
        for row in self.entries:
            for cell in row:
                if not cell.is_zero():
                    lo = min(lo, cell.min_exp_in(0))
                    hi = max(hi, cell.degree_in(0))
        return lo, hi

    def hop_block(self, j: int) -> np.ndarray:
        """T_j: the s x s matrix of z^j coefficients."""
        s = self.size
        out = np.zeros((s, s), dtype=np.complex128)
        for i, row in enumerate(self.entries):
            for k, cell in enumerate(row):
                out[i, k] = cell.terms.get((j, 0), 0.0)
        return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _parse_ring(text: str, params: tuple[str, ...]) -> RingPoly:
    gens = _ZE + params
    src = _IMAG_SUFFIX.sub("j", text)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise PolynomialSyntaxError(f"invalid expression: {e.msg}", e.offset) from None

    def pos(node: ast.AST) -> int:
        return getattr(node, "col_offset", 0) + 1

    def ev(node: ast.AST) -> RingPoly:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float, complex)):
                return RingPoly.constant(gens, complex(node.value))
            raise PolynomialSyntaxError("unsupported literal", pos(node))
        if isinstance(node, ast.Name):
            if node.id in ("i", "j"):
                return RingPoly.constant(gens, 1j)
            if node.id in gens:
                return RingPoly.generator(gens, node.id)
            raise PolynomialSyntaxError(f"unknown variable {node.id!r}", pos(node))
        if isinstance(node, ast.UnaryOp):
            val = ev(node.operand)
            if isinstance(node.op, ast.USub):
                return -val
            if isinstance(node.op, ast.UAdd):
                return val
            raise PolynomialSyntaxError("unsupported unary operator", pos(node))
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = ev(node.left)
                exp = ev(node.right)
                k = _as_int(exp, node.right)
                try:
                    return base.pow_int(k)
                except RingError as err:
                    raise PolynomialSyntaxError(str(err), pos(node)) from None
            lhs, rhs = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return lhs + rhs
            if isinstance(node.op, ast.Sub):
                return lhs - rhs
            if isinstance(node.op, ast.Mult):
                return lhs * rhs
            if isinstance(node.op, ast.Div):
                try:
                    return lhs / rhs
                except RingError as err:
                    raise PolynomialSyntaxError(str(err), pos(node)) from None
            raise PolynomialSyntaxError("unsupported operator", pos(node))
        raise PolynomialSyntaxError("unsupported syntax", pos(node))

    def _as_int(poly: RingPoly, node: ast.AST) -> int:
        terms = poly.terms
        if not terms:
            return 0
        if len(terms) != 1:
            raise PolynomialSyntaxError("exponent must be an integer constant", pos(node))
        (exp, c), = terms.items()
        if any(exp) or c.imag != 0 or c.real != int(c.real):
            raise PolynomialSyntaxError("exponent must be an integer constant", pos(node))
        return int(c.real)

    return ev(tree).trim()


def parse_char_poly(text: str) -> LaurentCharPoly:
    """Parse an expression in z and E into a canonical ``LaurentCharPoly``."""
    return LaurentCharPoly.from_ring(_parse_ring(text, ()))


def _format_real(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _format_term(n: int, m: int, c: complex) -> tuple[int, str]:
    """Sign and body of one monomial ``c * E**m * z**n``."""
    mono = []
    if m == 1:
        mono.append("E")
    elif m > 1:
        mono.append(f"E**{m}")
    if n == 1:
        mono.append("z")
    elif n != 0:
        mono.append(f"z**{n}")

    if c.imag == 0:
        sign = -1 if c.real < 0 else 1
        coeff = _format_real(abs(c.real))
        trivial = coeff == "1"
    elif c.real == 0:
        sign = -1 if c.imag < 0 else 1
        coeff = _format_real(abs(c.imag)) + "i"
        trivial = False
    else:
        sign = 1
        im_sign = "+" if c.imag > 0 else "-"
        coeff = f"({_format_real(c.real)}{im_sign}{_format_real(abs(c.imag))}i)"
        trivial = False

    if not mono:
        return sign, coeff
    if trivial:
        return sign, "*".join(mono)
    return sign, "*".join([coeff] + mono)


# ---------------------------------------------------------------------------
# determinant route and companions
# ---------------------------------------------------------------------------

def char_poly_from_bloch(h: BlochMatrix) -> LaurentCharPoly:
    """det[H(z) - E I], expanded exactly over the Laurent polynomial ring.

    No extra normalization is applied, so the E**s term carries sign (-1)**s.
    """
    s = h.size
    if s > 8:
        raise InvalidPolynomialError("symbolic determinants are supported up to 8 bands")
    E = RingPoly.generator(_ZE, "E")
    m = [
        [h.entries[i][k] - E if i == k else h.entries[i][k] for k in range(s)]
        for i in range(s)
    ]
    det = determinant(m, _ZE)
    if det.trim().is_zero():
        raise InvalidPolynomialError("determinant vanishes identically: invalid Hamiltonian family")
    return LaurentCharPoly.from_ring(det)


def bloch_from_char_poly(poly: LaurentCharPoly) -> BlochMatrix:
    """Companion matrix in E: one Bloch Hamiltonian reproducing the polynomial.

    The characteristic polynomial of the result equals the input up to the
    global factor (-1)**s / (leading E-coefficient).
    """
    s = poly.bands
    betas: list[RingPoly] = []
    for m in range(s + 1):
        terms = {}
        for n, a in poly.terms.items():
            if m <= a.degree and a.coeffs[m] != 0:
                terms[(n, 0)] = a.coeffs[m]
        betas.append(RingPoly(_ZE, terms))
    lead = betas[s]
    if lead.is_zero():
        raise InvalidPolynomialError("leading E-coefficient is identically zero")
    if len(lead.terms) != 1:
        raise InvalidPolynomialError(
            "leading E-coefficient must be a constant or a single z-monomial "
            "to admit a polynomial companion Hamiltonian"
        )
    if s == 1:
        return BlochMatrix(((-(betas[0] / lead),),))
    zero = RingPoly(_ZE)
    rows = []
    for i in range(s):
        row = [zero] * s
        row[s - 1] = -(betas[i] / lead)
        if i > 0:
            row[i - 1] = RingPoly.constant(_ZE, 1.0)
        rows.append(tuple(row))
    return BlochMatrix(tuple(rows))


# ---------------------------------------------------------------------------
# module-level operation aliases
# ---------------------------------------------------------------------------

def reciprocal(poly: LaurentCharPoly) -> LaurentCharPoly:
    return poly.reciprocal()


def class_signature(poly: LaurentCharPoly) -> ClassSignature:
    return poly.class_signature()


def evaluate_coefficients(poly: LaurentCharPoly, E: complex) -> list[complex]:
    return poly.evaluate_coefficients(E)


def coefficient_symmetry(poly: LaurentCharPoly) -> CoefficientSymmetry:
    return poly.coefficient_symmetry()


def real_space_hamiltonian(
    poly_or_bloch: LaurentCharPoly | BlochMatrix,
    cells: int,
    boundary: str = "open",
    max_dim: int = 500,
) -> np.ndarray:
    """Block-Toeplitz chain Hamiltonian with N = ``cells`` unit cells.

    Block (x, x') is T_{x-x'}, so a pure z term lands below the diagonal;
    open boundaries zero the wrap-around blocks, periodic ones keep them.
    """
    if boundary not in ("open", "periodic"):
        raise ValueError("boundary must amount to 'open' or 'periodic'")
    if isinstance(poly_or_bloch, LaurentCharPoly):
        bloch = bloch_from_char_poly(poly_or_bloch)
    else:
        bloch = poly_or_bloch
    s = bloch.size
    lo, hi = bloch.j_range()
    span = max(hi, 0) - min(lo, 0)
    if cells < span + 1:
        raise InvalidPolynomialError(
            f"chain of {cells} cells is shorter than the hopping range ({span + 1} required)"
        )
    if cells * s > max_dim:
        raise InvalidPolynomialError(
            f"Hamiltonian dimension {cells * s} exceeds max_dim={max_dim}"
        )
    blocks = {j: bloch.hop_block(j) for j in range(lo, hi + 1)}
    H = np.zeros((cells * s, cells * s), dtype=np.complex128)
    for j, T in blocks.items():
        if not T.any():
            continue
        for x in range(cells):
            y = x - j
            if boundary == "periodic":
                y %= cells
            elif not (0 <= y < cells):
                continue
            H[x * s:(x + 1) * s, y * s:(y + 1) * s] += T
    return H
