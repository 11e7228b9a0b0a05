"""Truncated multivariate power series with dense complex coefficients.

A :class:`TruncatedPolynomial` stores every coefficient of the monomials
``x_0**e_0 * ... * x_{V-1}**e_{V-1}`` with ``e_i <= caps[i]`` in a dense
``numpy`` array of shape ``(caps[0]+1, ..., caps[V-1]+1)``.  Arithmetic is exact
inside that box: a product only drops monomials that exceed a cap in some
variable, and such monomials can never feed back into lower orders.

This makes the class a convenient engine for reading off high-order mixed
partial derivatives at the origin of ``exp(kernel)`` where the kernel is a
low-degree polynomial::

    >>> x, y = variables(caps=(2, 1))
    >>> e = poly_exp(x * y + x)
    >>> complex(extract_derivative(e, (1, 1)))
    (1+0j)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TruncatedPolynomial",
    "poly_build",
    "poly_mul",
    "poly_exp",
    "extract_derivative",
    "variables",
    "constant",
    "EXTENDED",
]

#: Extended-precision coefficient type, for convergence checks only.
EXTENDED = np.clongdouble


class CapMismatchError(ValueError):
    """Operands live in different cap boxes."""


def _check_index(index: Sequence[int], caps: Sequence[int]) -> tuple[int, ...]:
    index = tuple(int(i) for i in index)
    if len(index) != len(caps):
        raise IndexError(f"multi-index {index} has {len(index)} entries, expected {len(caps)}")
    for i, c in zip(index, caps):
        if i < 0 or i > c:
            raise IndexError(f"multi-index {index} lies outside the cap box {tuple(caps)}")
    return index


@dataclass(frozen=True)
class TruncatedPolynomial:
    """Dense power series truncated to the box ``0 <= e_i <= caps[i]``."""

    caps: tuple[int, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        shape = tuple(c + 1 for c in self.caps)
        if self.coeffs.shape != shape:
            raise ValueError(f"coefficient array has shape {self.coeffs.shape}, expected {shape}")

    @property
    def var_count(self) -> int:
        return len(self.caps)

    @property
    def dtype(self):
        return self.coeffs.dtype

    def _compatible(self, other: "TruncatedPolynomial") -> None:
        if self.caps != other.caps:
            raise CapMismatchError(f"caps differ: {self.caps} vs {other.caps}")

    def _coerce(self, other) -> "TruncatedPolynomial":
        if isinstance(other, TruncatedPolynomial):
            self._compatible(other)
            return other
        return constant(other, self.caps, dtype=self.dtype)

    def __add__(self, other):
        other = self._coerce(other)
        return TruncatedPolynomial(self.caps, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPolynomial(self.caps, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, TruncatedPolynomial):
            return poly_mul(self, other)
        return TruncatedPolynomial(self.caps, self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TruncatedPolynomial(self.caps, self.coeffs / scalar)

    def __getitem__(self, index) -> complex:
        return self.coeffs[_check_index(index, self.caps)]

    @property
    def constant_term(self) -> complex:
        return self.coeffs[(0,) * self.var_count]

    def nonzero_terms(self) -> list[tuple[tuple[int, ...], complex]]:
        """``(multi_index, coefficient)`` pairs of the nonzero monomials."""
        idx = np.argwhere(self.coeffs != 0)
        return [(tuple(int(i) for i in row), self.coeffs[tuple(row)]) for row in idx]

    def __call__(self, point: Sequence[complex]) -> complex:
        """Evaluate the truncated polynomial at ``point``."""
        point = np.asarray(point, dtype=complex)
        if point.shape != (self.var_count,):
            raise ValueError(f"expected {self.var_count} coordinates")
        out = self.coeffs
        # contract the last axis first so the remaining axes keep their order
        for i in reversed(range(self.var_count)):
            powers = point[i] ** np.arange(self.caps[i] + 1)
            out = out @ powers
        return complex(out)

    def with_caps(self, caps: Sequence[int]) -> "TruncatedPolynomial":
        """Re-embed into a different box, truncating or zero-padding."""
        caps = tuple(int(c) for c in caps)
        if len(caps) != self.var_count:
            raise CapMismatchError("variable count differs")
        out = np.zeros(tuple(c + 1 for c in caps), dtype=self.dtype)
        common = tuple(slice(0, min(a, b) + 1) for a, b in zip(caps, self.caps))
        out[common] = self.coeffs[common]
        return TruncatedPolynomial(caps, out)


def poly_build(
    var_count: int,
    caps: Sequence[int],
    terms: Iterable[tuple[Sequence[int], complex]] = (),
    dtype=np.complex128,
) -> TruncatedPolynomial:
    """Polynomial with exactly the listed coefficients and zeros elsewhere.

    Repeated multi-indices are summed.  Raises ``IndexError`` when a term lies
    outside the cap box.
    """
    caps = tuple(int(c) for c in caps)
    if len(caps) != var_count:
        raise ValueError(f"{len(caps)} caps given for {var_count} variables")
    if any(c < 0 for c in caps):
        raise ValueError("caps must be non-negative")
    coeffs = np.zeros(tuple(c + 1 for c in caps), dtype=dtype)
    for index, value in terms:
        coeffs[_check_index(index, caps)] += value
    return TruncatedPolynomial(caps, coeffs)


def constant(value: complex, caps: Sequence[int], dtype=np.complex128) -> TruncatedPolynomial:
    caps = tuple(caps)
    return poly_build(len(caps), caps, [((0,) * len(caps), value)], dtype=dtype)


def variables(caps: Sequence[int], dtype=np.complex128) -> list[TruncatedPolynomial]:
    """One polynomial per coordinate; a coordinate with cap 0 becomes zero."""
    caps = tuple(caps)
    out = []
    for i, c in enumerate(caps):
        index = [0] * len(caps)
        index[i] = 1
        terms = [(index, 1.0)] if c >= 1 else []
        out.append(poly_build(len(caps), caps, terms, dtype=dtype))
    return out


def poly_mul(a: TruncatedPolynomial, b: TruncatedPolynomial) -> TruncatedPolynomial:
    """Truncated product.

    Loops over the nonzero monomials of the sparser operand and accumulates
    shifted copies of the other one, so multiplying by a low-degree kernel
    costs ``nnz(kernel) * box_size``.
    """
    a._compatible(b)
    if np.count_nonzero(a.coeffs) < np.count_nonzero(b.coeffs):
        a, b = b, a
    caps = a.caps
    dtype = np.result_type(a.dtype, b.dtype)
    out = np.zeros(a.coeffs.shape, dtype=dtype)
    dense = a.coeffs
    for index in np.argwhere(b.coeffs != 0):
        index = tuple(int(i) for i in index)
        dst = tuple(slice(e, c + 1) for e, c in zip(index, caps))
        src = tuple(slice(0, c + 1 - e) for e, c in zip(index, caps))
        out[dst] += b.coeffs[index] * dense[src]
    return TruncatedPolynomial(caps, out)


def poly_exp(p: TruncatedPolynomial) -> TruncatedPolynomial:
    """``exp(p)`` for a polynomial without constant term.

    Uses the Horner form of ``sum_{j<=J} p**j / j!`` with ``J = sum(caps)``,
    which is exact inside the box because every monomial of ``p`` has total
    degree at least one.
    """
    c0 = p.constant_term
    if c0 != 0:
        raise ValueError(f"poly_exp needs a zero constant term, got {c0!r}; factor exp(c0) out")
    order = sum(p.caps)
    result = constant(1.0, p.caps, dtype=p.dtype)
    for j in range(order, 0, -1):
        result = poly_mul(p, result) / j + 1.0
    return result


_FACTORIALS = [math.factorial(k) for k in range(171)]


def extract_derivative(p: TruncatedPolynomial, orders: Sequence[int]) -> complex:
    """Mixed partial derivative of ``p`` at the origin."""
    orders = _check_index(orders, p.caps)
    scale = 1
    for k in orders:
        scale *= _FACTORIALS[k]
    return p.coeffs[orders] * scale
