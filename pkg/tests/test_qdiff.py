"""Tests for rational quadratic differentials and sqrt(phi) continuation.

Expected values marked as frozen were computed with independent oracles
(symbolic integration / 30-digit quadrature) before the implementation
existed; see the comments next to each constant.
"""

import cmath
import math

import numpy as np
import pytest

from specnet.errors import (
    CommonFactor,
    NonSimpleZero,
    PathTooCloseToCriticalPoint,
    PoleEvaluation,
)
from specnet.qdiff import (
    SheetPoint,
    construct,
    evaluate,
    find_zeros,
    local_zero_frame,
    phi_length,
    sqrt_continue,
    wall_angle,
)

# mpmath.quad of sqrt(x^2-1) on [2, 3], 30 digits
INT_SQRT_X2M1_2_3 = 2.2876952409932731819575337


def toy():
    """phi = z dz^2"""
    return construct([0, 1], [1])


def two_zero():
    """phi = (z^2 - 1) dz^2"""
    return construct([-1, 0, 1], [1])


class TestConstruct:
    def test_toy_inventory(self):
        qd = toy()
        assert qd.inventory.zeros == (0j,)
        assert qd.inventory.finite_poles == ()
        # z dz^2 = w^-5 dw^2 under w = 1/z
        assert qd.inventory.pole_at_infinity == 5
        assert qd.inventory.is_gmn
        assert qd.inventory.complete

    def test_two_zero_inventory(self):
        qd = two_zero()
        assert qd.inventory.pole_at_infinity == 6
        zs = sorted(qd.inventory.zeros, key=lambda z: z.real)
        assert abs(zs[0] + 1) < 1e-12 and abs(zs[1] - 1) < 1e-12

    def test_double_zero_rejected(self):
        with pytest.raises(NonSimpleZero):
            construct([0, 0, 1], [1])  # z^2

    def test_common_factor_rejected(self):
        # (z-1) / (z-1)(z-2)
        with pytest.raises(CommonFactor):
            construct([-1, 1], np.polynomial.polynomial.polymul([-1, 1], [-2, 1]))

    def test_incomplete_flag(self):
        # phi = 1/z: finite pole of order 1
        qd = construct([1], [0, 1])
        assert not qd.inventory.complete
        assert qd.inventory.has_pole

    def test_constant_differential(self):
        qd = construct([1], [1])
        assert qd.inventory.pole_at_infinity == 4
        assert not qd.inventory.has_finite_critical_point
        assert not qd.inventory.is_gmn

    def test_finite_pole_orders(self):
        # phi = 1 / z^2
        qd = construct([1], [0, 0, 1])
        assert qd.inventory.finite_poles == ((0j, 2),)
        assert qd.inventory.pole_at_infinity == 2
        assert qd.inventory.complete


class TestEvaluate:
    def test_values(self):
        assert evaluate(toy(), 4.0) == pytest.approx(4.0)
        assert evaluate(two_zero(), 0.0) == pytest.approx(-1.0)
        assert evaluate(toy(), 0.0) == pytest.approx(0.0)

    def test_pole_rejected(self):
        qd = construct([1], [0, 1])
        with pytest.raises(PoleEvaluation):
            evaluate(qd, 0.0)


class TestFindZeros:
    def test_simple_cases(self):
        assert find_zeros(toy()) == [0j]
        zs = find_zeros(two_zero())
        assert sorted(z.real for z in zs) == pytest.approx([-1.0, 1.0])

    def test_cubic_vieta(self):
        # z^3 - 2z + 2: check residuals and Vieta's formulas
        qd = construct([2, -2, 0, 1], [1])
        zs = find_zeros(qd)
        assert len(zs) == 3
        for z in zs:
            assert abs(z**3 - 2 * z + 2) < 1e-12 * (1 + abs(z)) ** 3
        s1 = sum(zs)
        s3 = zs[0] * zs[1] * zs[2]
        assert abs(s1 - 0.0) < 1e-10
        assert abs(s3 - (-2.0)) < 1e-10

    def test_reconstruction_idempotent(self):
        # rebuild P from roots and leading coefficient
        coeffs = [2, -2, 0, 1]
        zs = find_zeros(construct(coeffs, [1]))
        rebuilt = np.array([1.0 + 0j])
        for z in zs:
            rebuilt = np.polynomial.polynomial.polymul(rebuilt, [-z, 1])
        assert np.max(np.abs(rebuilt - np.array(coeffs, dtype=complex))) < 1e-8


class TestSqrtContinue:
    def test_monodromy_flip_around_single_zero(self):
        qd = toy()
        loop = [cmath.exp(2j * math.pi * k / 64) for k in range(65)]
        start = SheetPoint.at(qd, 1.0, +1)
        final, _ = sqrt_continue(qd, loop, start)
        assert final.sheet == -1
        assert abs(final.sqrt_value + 1.0) < 1e-9

    def test_no_flip_around_two_zeros(self):
        qd = two_zero()
        loop = [3.0 * cmath.exp(2j * math.pi * k / 128) for k in range(129)]
        start = SheetPoint.at(qd, 3.0, +1)
        final, _ = sqrt_continue(qd, loop, start)
        assert final.sheet == +1

    def test_closed_form_integral(self):
        # int_1^4 sqrt(x) dx = 14/3
        qd = toy()
        start = SheetPoint.at(qd, 1.0, +1)
        _, integral = sqrt_continue(qd, [1.0, 4.0], start)
        assert integral == pytest.approx(14.0 / 3.0, abs=1e-10)

    def test_quadrature_oracle(self):
        qd = two_zero()
        start = SheetPoint.at(qd, 2.0, +1)
        _, integral = sqrt_continue(qd, [2.0, 3.0], start)
        assert integral == pytest.approx(INT_SQRT_X2M1_2_3, abs=1e-9)

    def test_additivity_and_reversal(self):
        qd = two_zero()
        a, b, c = 2.0 + 1.0j, 3.0 + 0.5j, 1.5 + 2.0j
        start = SheetPoint.at(qd, a, +1)
        mid, i1 = sqrt_continue(qd, [a, b], start)
        _, i2 = sqrt_continue(qd, [b, c], mid)
        _, i_full = sqrt_continue(qd, [a, b, c], start)
        assert abs((i1 + i2) - i_full) < 1e-9
        final, _ = sqrt_continue(qd, [a, b], start)
        _, i_back = sqrt_continue(qd, [b, a], final)
        assert abs(i_back + i1) < 1e-9

    def test_metric_dominates_integral(self):
        qd = two_zero()
        path = [2.0 + 1.0j, 0.5 + 2.0j, -2.0 + 1.5j]
        start = SheetPoint.at(qd, path[0], +1)
        _, integral = sqrt_continue(qd, path, start)
        length = phi_length(qd, path)
        assert length >= abs(integral.real) - 1e-8

    def test_winding_parity(self):
        # two turns around the zero restore the sheet
        qd = toy()
        loop = [cmath.exp(2j * math.pi * k / 64) for k in range(129)]
        start = SheetPoint.at(qd, 1.0, +1)
        final, _ = sqrt_continue(qd, loop, start)
        assert final.sheet == +1

    def test_path_clearance_enforced(self):
        qd = toy()
        start = SheetPoint.at(qd, -1.0 + 1e-9j, +1)
        with pytest.raises(PathTooCloseToCriticalPoint):
            sqrt_continue(qd, [-1.0 + 1e-9j, 1.0 + 1e-9j], start)


class TestPhiLength:
    def test_toy_closed_form(self):
        qd = toy()
        eps, r = 1e-6, 2.0
        expected = (2.0 / 3.0) * (r**1.5 - eps**1.5)
        assert phi_length(qd, [eps, r]) == pytest.approx(expected, abs=1e-9)

    def test_flat_differential_is_euclidean(self):
        qd = construct([1], [1])
        assert phi_length(qd, [1 + 1j, 4 + 5j]) == pytest.approx(5.0, abs=1e-10)

    def test_vertical_saddle_length(self):
        # int_-1^1 sqrt|x^2-1| dx = pi/2, endpoints at the zeros
        qd = two_zero()
        length = phi_length(qd, [-1.0, 1.0], allow_singular_endpoints=True)
        assert length == pytest.approx(math.pi / 2.0, abs=1e-6)


class TestLocalZeroFrame:
    def test_toy_frame(self):
        qd = toy()
        fr = local_zero_frame(qd, 0j)
        assert fr.c == pytest.approx(1.0)
        assert np.allclose(sorted(fr.wall_angles), [0.0, 2 * math.pi / 3, 4 * math.pi / 3])
        assert fr.branch_cut_angle == pytest.approx(math.pi)

    def test_two_zero_frame(self):
        qd = two_zero()
        fr = local_zero_frame(qd, 1.0 + 0j)
        assert fr.c == pytest.approx(2.0)
        assert np.allclose(sorted(fr.wall_angles), [0.0, 2 * math.pi / 3, 4 * math.pi / 3])

    def test_rotated_frame(self):
        # phi = e^{i pi} z dz^2: arg c = pi, angles {-pi/3, pi/3, pi} mod 2pi
        qd = construct([0, cmath.exp(1j * math.pi)], [1])
        fr = local_zero_frame(qd, 0j)
        got = sorted(fr.wall_angles)
        assert np.allclose(got, [math.pi / 3, math.pi, 5 * math.pi / 3], atol=1e-12)

    def test_wall_angle_rotation(self):
        fr = local_zero_frame(toy(), 0j)
        assert wall_angle(fr, 0, math.pi / 6) == pytest.approx(math.pi / 9)
