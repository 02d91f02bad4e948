"""Groupoid chart tests: marked-point geometry, short-vertical and
hexagon crossing structure, clearance validation, and lift ordering."""

import math

import numpy as np
import pytest

from specnet.errors import ClearanceTooSmall
from specnet.groupoid import build_chart, free_path, lift_basepoints
from specnet.network import build, crossings
from specnet.qdiff import construct, sqrt_continue, SheetPoint
from specnet.trajectory import IntegrationParams

PARAMS = IntegrationParams()


def toy_chart(T=0.5, eta=0.05):
    qd = construct([0, 1], [1])
    net = build(qd, 0.0, PARAMS)
    return qd, net, build_chart(qd, net, T, eta)


def two_zero_chart(T=0.3, eta=0.03):
    qd = construct([-1, 0, 1], [1])
    net = build(qd, 0.0, PARAMS)
    return qd, net, build_chart(qd, net, T, eta)


class TestBuildChart:
    def test_toy_marked_point_radius(self):
        # phi-arclength T along a ray of z dz^2 sits at r = (3T/2)^(2/3)
        qd, net, chart = toy_chart(T=0.5)
        r_expect = (3.0 * 0.5 / 2.0) ** (2.0 / 3.0)
        for wall in net.walls:
            bu = chart.base_points[f"b:{wall.id}:u"]
            bd = chart.base_points[f"b:{wall.id}:d"]
            mid = 0.5 * (bu.z + bd.z)
            assert abs(abs(mid) - r_expect) < 2e-3

    def test_toy_hexagon_crossing_order(self):
        qd, net, chart = toy_chart()
        hl = chart.hex_loops[0]
        found = crossings(net, hl.polyline)
        ks = [next(w.k for w in net.walls if w.id == c.wall_id) for c in found]
        assert ks == [0, 1, 2]
        assert all(c.sign == +1 for c in found)

    def test_two_zero_chart_counts(self):
        qd, net, chart = two_zero_chart()
        assert len(chart.base_points) == 12
        svs = [a for a in chart.arcs.values() if a.kind == "short_vertical"]
        conns = [a for a in chart.arcs.values() if a.kind == "hex_connector"]
        assert len(svs) == 6 and len(conns) == 6
        for sv in svs:
            found = crossings(net, sv.polyline)
            assert [c.wall_id for c in found] == [sv.wall_id]
            assert found[0].sign == +1

    def test_eta_too_large_rejected(self):
        qd = construct([0, 1], [1])
        net = build(qd, 0.0, PARAMS)
        with pytest.raises(ClearanceTooSmall):
            build_chart(qd, net, 0.5, 0.5)

    def test_T_beyond_walls_rejected(self):
        qd = construct([0, 1], [1])
        net = build(qd, 0.0, PARAMS)
        with pytest.raises(ClearanceTooSmall):
            build_chart(qd, net, 100.0, 0.05)

    def test_short_vertical_im_w_increases(self):
        # Im of int sqrt(phi)_+ grows from b_down to b_up
        qd, net, chart = toy_chart()
        for wall in net.walls:
            sv = chart.short_vertical(wall.id)
            bd = chart.base_points[sv.source]
            start = SheetPoint(
                bd.z,
                +1
                if abs(bd.plus_sqrt - np.sqrt(complex(qd(bd.z)))) <= abs(bd.plus_sqrt + np.sqrt(complex(qd(bd.z))))
                else -1,
                bd.plus_sqrt,
            )
            _, integral = sqrt_continue(qd, list(sv.polyline), start)
            assert integral.imag > 0

    def test_down_is_reflected_up(self):
        # swapping eta -> -eta exchanges the two base points
        qd, net, chart = toy_chart()
        for wall in net.walls:
            sv = chart.short_vertical(wall.id)
            bu = chart.base_points[f"b:{wall.id}:u"]
            bd = chart.base_points[f"b:{wall.id}:d"]
            mid = 0.5 * (bu.z + bd.z)
            # the vertical arc is symmetric about the wall point
            assert abs((bu.z - mid) + (bd.z - mid)) < 1e-6


class TestLifts:
    def test_toy_k0_plus_lift_positive(self):
        qd, net, chart = toy_chart()
        lifts = lift_basepoints(qd, chart)
        k0 = next(w for w in net.walls if w.k == 0)
        plus, minus = lifts[f"b:{k0.id}:u"]
        # on the positive real axis the outward-positive branch is +sqrt(z)
        assert plus.sqrt_value.real > 0
        assert plus.sheet == -minus.sheet

    def test_opposite_sheets_everywhere(self):
        qd, net, chart = two_zero_chart()
        lifts = lift_basepoints(qd, chart)
        for bid, (plus, minus) in lifts.items():
            assert plus.sheet == -minus.sheet
            assert abs(plus.sqrt_value + minus.sqrt_value) < 1e-12

    def test_plus_lift_consistent_with_wall_continuation(self):
        # continue the wall-positive sheet from the seed along the wall to
        # the marked point, then up the short vertical: must match plus_sqrt
        qd, net, chart = two_zero_chart()
        wall = net.walls_of_zero(1)[0]
        traj = wall.trajectory
        mask = traj.ss <= chart.T
        path = list(traj.zs[mask])
        start = SheetPoint(
            complex(traj.zs[0]),
            +1
            if abs(traj.sqrts[0] - np.sqrt(complex(qd(traj.zs[0])))) <= abs(traj.sqrts[0] + np.sqrt(complex(qd(traj.zs[0]))))
            else -1,
            complex(traj.sqrts[0]),
        )
        final, _ = sqrt_continue(qd, path, start)
        ref = final.sqrt_value
        z_T = traj.point_at(chart.T)
        from specnet.qdiff import nearest_sqrt

        sq_T = nearest_sqrt(qd(z_T), ref)
        bu = chart.base_points[f"b:{wall.id}:u"]
        sv = chart.short_vertical(wall.id)
        upper_half = [z for z in sv.polyline if True]
        # continue from z_T to b_up along the upper half of the short vertical
        idx = int(np.argmin(np.abs(sv.polyline - z_T)))
        seg = [z_T] + list(sv.polyline[idx + 1 :])
        sheet = +1 if abs(sq_T - np.sqrt(complex(qd(z_T)))) <= abs(sq_T + np.sqrt(complex(qd(z_T)))) else -1
        fin, _ = sqrt_continue(qd, seg, SheetPoint(z_T, sheet, sq_T))
        assert abs(fin.sqrt_value - bu.plus_sqrt) < 1e-6 * (1 + abs(bu.plus_sqrt))


class TestHexLoop:
    def test_winding_numbers(self):
        qd, net, chart = two_zero_chart()
        for hl in chart.hex_loops:
            loop = hl.polyline
            own = qd.inventory.zeros[hl.zero_index]
            other = qd.inventory.zeros[1 - hl.zero_index]
            assert _winding(loop, own) == pytest.approx(1.0, abs=1e-6)
            assert _winding(loop, other) == pytest.approx(0.0, abs=1e-6)

    def test_reversed_loop_reverses_signs(self):
        qd, net, chart = toy_chart()
        hl = chart.hex_loops[0]
        fwd = crossings(net, hl.polyline)
        bwd = crossings(net, hl.polyline[::-1])
        assert [c.wall_id for c in bwd] == [c.wall_id for c in fwd][::-1]
        assert all(c.sign == -1 for c in bwd)


class TestFreePath:
    def test_endpoints_snap_to_base_points(self):
        qd, net, chart = toy_chart()
        w0 = next(w for w in net.walls if w.k == 0).id
        w1 = next(w for w in net.walls if w.k == 1).id
        arc = free_path(chart, f"b:{w0}:u", f"b:{w1}:d")
        assert arc.polyline[0] == chart.base_points[f"b:{w0}:u"].z
        assert arc.polyline[-1] == chart.base_points[f"b:{w1}:d"].z


def _winding(poly, p):
    closed = np.concatenate([poly, poly[:1]]) if poly[0] != poly[-1] else poly
    rel = closed - p
    return float(np.sum(np.angle(rel[1:] / rel[:-1])) / (2 * math.pi))
