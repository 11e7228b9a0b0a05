import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hi_metrology.jet import (
    EXTENDED,
    CapMismatchError,
    constant,
    extract_derivative,
    poly_build,
    poly_exp,
    poly_mul,
    variables,
)


def test_build_single_monomial():
    p = poly_build(1, [2], [((1,), 1)])
    assert p[(1,)] == 1 and p[(0,)] == 0 and p[(2,)] == 0


def test_build_empty_is_zero():
    p = poly_build(2, [1, 1], [])
    assert not p.coeffs.any()


def test_build_two_variable_monomial():
    p = poly_build(2, [1, 1], [((1, 1), 2 + 0j)])
    assert p.nonzero_terms() == [((1, 1), 2 + 0j)]


def test_build_rejects_index_outside_box():
    with pytest.raises(IndexError):
        poly_build(1, [2], [((3,), 1)])
    with pytest.raises(IndexError):
        poly_build(2, [1, 1], [((1,), 1)])


def test_mul_examples():
    x, y = variables([1, 1])
    assert (poly_mul(x, y)).nonzero_terms() == [((1, 1), 1)]
    p = x + 2 * y + 3
    assert np.array_equal(poly_mul(p, constant(1, [1, 1])).coeffs, p.coeffs)
    (z,) = variables([1])
    sq = (1 + z) * (1 + z)
    assert np.array_equal(sq.coeffs, [1, 2])


def test_mul_cap_mismatch():
    (a,) = variables([1])
    (b,) = variables([2])
    with pytest.raises(CapMismatchError):
        poly_mul(a, b)


def test_exp_univariate():
    (x,) = variables([3])
    e = poly_exp(x)
    np.testing.assert_allclose(e.coeffs, [1, 1, 1 / 2, 1 / 6], rtol=1e-15)


def test_exp_of_zero():
    e = poly_exp(constant(0, [2, 2]))
    assert e.constant_term == 1 and e.coeffs.sum() == 1


def test_exp_mixed_example():
    x, y = variables([2, 1])
    e = poly_exp(x * y + x)
    # coefficients from hand expansion to total degree 3
    assert e[(1, 1)] == pytest.approx(1)
    assert e[(2, 1)] == pytest.approx(1)
    assert extract_derivative(e, (1, 1)) == pytest.approx(1)


def test_exp_rejects_constant_term():
    (x,) = variables([2])
    with pytest.raises(ValueError):
        poly_exp(x + 1)


def test_extract_examples():
    (x,) = variables([2])
    assert extract_derivative(1 + x + x * x / 2, (2,)) == pytest.approx(1.0)
    a, b = variables([1, 1])
    assert extract_derivative(2 * a * b, (1, 1)) == pytest.approx(2.0)
    with pytest.raises(IndexError):
        extract_derivative(a, (2, 0))


def test_cap_zero_variable_is_dropped():
    x, y = variables([2, 0])
    assert not y.coeffs.any()
    assert poly_exp(x + y)[(2, 0)] == pytest.approx(0.5)


def test_extended_precision_matches_double():
    caps = (3, 2)
    x, y = variables(caps)
    xe, ye = variables(caps, dtype=EXTENDED)
    d = poly_exp(0.7 * x * y + 0.3j * x - 1.1 * y)
    e = poly_exp(0.7 * xe * ye + 0.3j * xe - 1.1 * ye)
    assert e.dtype == EXTENDED
    np.testing.assert_allclose(d.coeffs, e.coeffs.astype(complex), rtol=1e-14, atol=1e-15)


def test_evaluate_polynomial():
    x, y = variables([2, 2])
    p = 3 * x * y + 2 * x - y * y + 1
    assert p((0.5, -2.0)) == pytest.approx(3 * 0.5 * -2 + 1 - 4 + 1)


# --------------------------------------------------------------------------
# Properties
# --------------------------------------------------------------------------

complexes = st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, caps=(2, 2, 1), constant_term=True):
    shape = tuple(c + 1 for c in caps)
    values = draw(st.lists(complexes, min_size=int(np.prod(shape)), max_size=int(np.prod(shape))))
    coeffs = np.array(values, dtype=complex).reshape(shape)
    if not constant_term:
        coeffs[(0,) * len(caps)] = 0
    return poly_build(len(caps), caps, [(i, coeffs[i]) for i in np.ndindex(shape)])


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(a, b, c):
    np.testing.assert_allclose(((a + b) * c).coeffs, (a * c + b * c).coeffs, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose((a * b).coeffs, (b * a).coeffs, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(polys(constant_term=False), polys(constant_term=False))
def test_exp_is_additive(p, q):
    lhs = poly_exp(p + q).coeffs
    rhs = (poly_exp(p) * poly_exp(q)).coeffs
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(st.lists(complexes, min_size=6, max_size=6))
def test_derivative_matches_finite_differences(c):
    # degree-2 kernel in two variables, caps large enough to hold it
    x, y = variables([2, 2])
    p = c[0] * x + c[1] * y + c[2] * x * x + c[3] * x * y + c[4] * y * y + c[5]
    h = 1e-4

    def f(u, v):
        return p((u, v))

    fd = {
        (1, 0): (f(h, 0) - f(-h, 0)) / (2 * h),
        (0, 1): (f(0, h) - f(0, -h)) / (2 * h),
        (2, 0): (f(h, 0) - 2 * f(0, 0) + f(-h, 0)) / h**2,
        (1, 1): (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h),
    }
    for orders, approx in fd.items():
        exact = extract_derivative(p, orders)
        assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))


@settings(max_examples=40, deadline=None)
@given(polys(caps=(2, 1, 1), constant_term=False), st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_cap_extension_is_exact(p, extra):
    small = poly_exp(p)
    big_caps = tuple(c + e for c, e in zip(p.caps, extra))
    big = poly_exp(p.with_caps(big_caps))
    box = tuple(slice(0, c + 1) for c in p.caps)
    np.testing.assert_allclose(big.coeffs[box], small.coeffs, rtol=1e-13, atol=1e-14)


def test_factorial_scaling_high_order():
    (x,) = variables([12])
    e = poly_exp(2 * x)
    assert extract_derivative(e, (12,)) == pytest.approx(2.0**12, rel=1e-13)
    assert e[(12,)] == pytest.approx(2.0**12 / math.factorial(12), rel=1e-13)
