"""Trajectory integration tests: ray geometry of the one-zero toy case,
the vertical saddle of (z^2-1) dz^2, flow-line agreement, and the
integration invariants."""

import cmath
import math

import numpy as np
import pytest

from specnet.errors import DegenerateLiftPair, StepUnderflow
from specnet.qdiff import SheetPoint, construct, nearest_sqrt
from specnet.trajectory import (
    IntegrationParams,
    flowline,
    horizontal_through,
    trace,
    trace_wall,
)

PARAMS = IntegrationParams()


def toy():
    return construct([0, 1], [1])


def two_zero():
    return construct([-1, 0, 1], [1])


def polyline_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines, measured with
    point-to-segment distances so dense sampling on one side suffices."""

    def directed(pts: np.ndarray, poly: np.ndarray) -> float:
        seg_a = poly[:-1]
        seg_d = poly[1:] - poly[:-1]
        dd = np.abs(seg_d) ** 2
        dd[dd == 0] = 1.0
        worst = 0.0
        for p in pts:
            t = ((p - seg_a).real * seg_d.real + (p - seg_a).imag * seg_d.imag) / dd
            t = np.clip(t, 0.0, 1.0)
            worst = max(worst, float(np.min(np.abs(seg_a + t * seg_d - p))))
        return worst

    return max(directed(a, b), directed(b, a))


class TestToyRays:
    def test_wall_zero_is_positive_axis(self):
        qd = toy()
        # phi-length to |z| = 100 is (2/3) 100^(3/2) ~ 667, so allow enough
        params = IntegrationParams(max_length=700.0)
        traj = trace_wall(qd, 0, 0, 0.0, params)
        assert traj.termination.kind == "escape"
        assert np.max(np.abs(traj.zs.imag)) < 1e-6
        assert traj.zs[-1].real > 99.0

    def test_wall_angles_at_theta_zero(self):
        qd = toy()
        for k in range(3):
            traj = trace_wall(qd, 0, k, 0.0, PARAMS)
            target = 2.0 * math.pi * k / 3.0
            tip = traj.zs[-1]
            ang = math.atan2(tip.imag, tip.real) % (2 * math.pi)
            assert abs((ang - target + math.pi) % (2 * math.pi) - math.pi) < 1e-6

    def test_rotation_law(self):
        qd = toy()
        theta = math.pi / 6
        traj = trace_wall(qd, 0, 0, theta, PARAMS)
        tip = traj.zs[-1]
        ang = math.atan2(tip.imag, tip.real) % (2 * math.pi)
        assert abs(ang - 2 * theta / 3.0) < 1e-6

    def test_outward_integral_real_positive(self):
        qd = toy()
        traj = trace_wall(qd, 0, 1, 0.0, PARAMS)
        samples = np.linspace(0.0, traj.length, 12)[1:-1]
        values = []
        for s in samples:
            z = traj.point_at(s)
            sq = nearest_sqrt(qd(z), traj.sqrt_at(s))
            values.append(sq)
        # d/ds of int sqrt(phi) dz is e^{i theta} = 1 outward, so the
        # running integral (= s here) is real, positive, increasing
        integrals = traj.integrals()
        assert np.max(np.abs(integrals.imag)) < 1e-9
        assert np.all(np.diff(integrals.real) > 0)
        del values


class TestSaddle:
    def test_vertical_saddle_hits_other_zero(self):
        qd = two_zero()
        traj = trace_wall(qd, 1, 1, math.pi / 2, PARAMS)  # seeded at +1 toward -1
        assert traj.termination.kind == "zero_hit"
        assert traj.termination.index == 0
        assert abs(traj.zs[-1] - (-1.0)) < 2 * PARAMS.zero_hit_radius
        # the saddle is the segment [-1, 1]
        assert np.max(np.abs(traj.zs.imag)) < 1e-6

    def test_theta_zero_no_saddle(self):
        qd = two_zero()
        params = IntegrationParams(escape_radius=15.0, max_length=150.0)
        for zi in range(2):
            for k in range(3):
                traj = trace_wall(qd, zi, k, 0.0, params)
                assert traj.termination.kind == "escape"


class TestFlowline:
    def test_toy_axis(self):
        qd = toy()
        params = IntegrationParams(max_length=5.0, max_step=0.05)
        poly = flowline(qd, 1.0 + 0j, (+1, -1), math.pi, params, dense_ds=0.01)
        assert np.max(np.abs(poly.imag)) < 1e-6
        assert poly[-1].real > 2.0

    def test_agrees_with_trace(self):
        qd = two_zero()
        params = IntegrationParams(max_length=3.0, max_step=0.05)
        z0 = 3.0 + 0.0j
        poly = flowline(qd, z0, (+1, -1), math.pi, params, dense_ds=0.005)
        start = SheetPoint.at(qd, z0, +1)
        traj = trace(qd, start, +1, 0.0, IntegrationParams(max_length=6.0, max_step=0.05), dense_ds=0.005)
        # flow line runs at phi-speed 2, trace at speed 1: compare the
        # overlapping phi-length-6 pieces as point sets
        d = polyline_hausdorff(poly, traj.zs)
        assert d < 1e-5

    def test_equal_lifts_rejected(self):
        with pytest.raises(DegenerateLiftPair):
            flowline(toy(), 1.0 + 0j, (+1, +1), 0.0, PARAMS)


class TestHorizontalThrough:
    def test_flat_differential(self):
        qd = construct([1], [1])
        # |phi| = 1: phi-length to |z| = 100 is ~ 100
        fwd, bwd = horizontal_through(qd, 1j, 0.0, IntegrationParams(max_length=150.0))
        assert fwd.termination.kind == "escape"
        assert bwd.termination.kind == "escape"
        assert np.max(np.abs(fwd.zs.imag - 1.0)) < 1e-9
        assert np.max(np.abs(bwd.zs.imag - 1.0)) < 1e-9

    def test_generic_point_escapes_both_ways(self):
        qd = toy()
        z = 10.0 * cmath.exp(1j * math.pi / 3)
        params = IntegrationParams(escape_radius=20.0, max_length=300.0)
        fwd, bwd = horizontal_through(qd, z, 0.0, params)
        assert fwd.termination.kind == "escape"
        assert bwd.termination.kind == "escape"

    def test_on_wall_point_hits_zero(self):
        qd = toy()
        params = IntegrationParams(escape_radius=20.0, max_length=100.0)
        fwd, bwd = horizontal_through(qd, 5.0 + 0j, 0.0, params)
        kinds = {fwd.termination.kind, bwd.termination.kind}
        assert "zero_hit" in kinds and "escape" in kinds


class TestInvariants:
    def test_residual_monitors_tight_at_default_tolerances(self):
        qd = two_zero()
        traj = trace_wall(qd, 0, 0, 0.0, PARAMS)
        assert traj.max_unit_speed_residual < 1e-6
        assert traj.max_gmn_residual < 1e-7

    def test_residuals_blow_up_at_coarse_tolerance(self):
        qd = two_zero()
        coarse = IntegrationParams(rel_tol=1e-2, abs_tol=1e-4)
        traj = trace_wall(qd, 0, 0, 0.0, coarse)
        assert traj.max_unit_speed_residual > 1e-6

    def test_reversal_consistency(self):
        qd = two_zero()
        traj = trace_wall(qd, 0, 0, 0.0, PARAMS, dense_ds=0.01)
        mid_idx = int(np.searchsorted(traj.ss, 0.5 * traj.length))
        z_mid = complex(traj.zs[mid_idx])
        sq_mid = complex(traj.sqrts[mid_idx])
        sheet = +1 if abs(sq_mid - np.sqrt(complex(qd(z_mid)))) <= abs(
            sq_mid + np.sqrt(complex(qd(z_mid)))
        ) else -1
        start = SheetPoint(z_mid, sheet, sq_mid)
        s_mid = float(traj.ss[mid_idx])
        back = trace(
            qd,
            start,
            -1,
            0.0,
            IntegrationParams(max_length=s_mid * 0.9, max_step=0.05),
            dense_ds=0.01,
        )
        # trimmed point sets against the full other polyline: no edge effects
        margin = 0.2
        bwin = back.zs[(back.ss >= margin) & (back.ss <= back.length - margin)]
        fwin = traj.zs[
            (traj.ss >= s_mid - back.length + margin) & (traj.ss <= s_mid - margin)
        ]

        def directed(pts, poly):
            seg_a = poly[:-1]
            seg_d = poly[1:] - poly[:-1]
            dd = np.abs(seg_d) ** 2
            dd[dd == 0] = 1.0
            worst = 0.0
            for p in pts:
                t = np.clip(
                    ((p - seg_a).real * seg_d.real + (p - seg_a).imag * seg_d.imag) / dd,
                    0.0,
                    1.0,
                )
                worst = max(worst, float(np.min(np.abs(seg_a + t * seg_d - p))))
            return worst

        d = max(directed(bwin, traj.zs), directed(fwin, back.zs))
        assert d < 1e-6

    def test_refinement_convergence(self):
        qd = two_zero()
        base = IntegrationParams(rel_tol=1e-7, abs_tol=1e-10, max_length=10.0)
        halved = IntegrationParams(rel_tol=5e-8, abs_tol=5e-11, max_length=10.0)
        t1 = trace_wall(qd, 0, 0, 0.0, base)
        t2 = trace_wall(qd, 0, 0, 0.0, halved)
        assert abs(t1.zs[-1] - t2.zs[-1]) < 10 * 1e-7 * abs(t1.zs[-1])

    def test_accumulated_integral_matches_phase(self):
        qd = toy()
        theta = 0.4
        traj = trace_wall(qd, 0, 0, theta, PARAMS)
        integ = traj.integrals()
        expected = np.exp(1j * theta) * traj.ss
        assert np.max(np.abs(integ - expected)) < 1e-6 * (1 + traj.length)

    def test_step_underflow_near_unprotected_zero(self):
        qd = toy()
        params = IntegrationParams(zero_hit_radius=1e-13, seed_offset=1e-12, max_length=2.0)
        start = SheetPoint.at(qd, 1.0 + 0j, +1)
        # aim straight at the zero with no capture radius to stop us
        with pytest.raises(StepUnderflow):
            trace(qd, start, -1, 0.0, params)

    def test_json_roundtrip_shape(self):
        traj = trace_wall(toy(), 0, 0, 0.0, IntegrationParams(max_length=700.0))
        d = traj.to_json_dict()
        assert d["termination"] == "escape"
        assert len(d["points"]) == len(d["s"]) == len(d["sheet"])
