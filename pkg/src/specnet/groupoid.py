"""Path-groupoid chart: base points flanking each wall, short vertical
generator arcs, and the hexagonal loop around each zero.

Every wall w gets a marked point at phi-arclength T from its zero and a
pair of base points b_up/b_down at vertical phi-distance eta on either
side, ordered so the short vertical from b_down to b_up crosses w with
increasing Im of the wall-positive primitive.  The hexagon alternates
short verticals with connectors that round the zero inside one chamber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ClearanceTooSmall
from .network import SpectralNetwork, crossings
from .qdiff import RationalQD, SheetPoint, canonical_sqrt, nearest_sqrt
from .trajectory import IntegrationParams, trace


@dataclass(frozen=True)
class BasePoint:
    id: str
    wall_id: int
    kind: str  # "u" | "d"
    z: complex
    plus_sqrt: complex  # wall-positive sqrt(phi) branch at z

    def lifts(self, qd: RationalQD) -> tuple[SheetPoint, SheetPoint]:
        """Ordered fibre basis: (wall-positive lift, other lift)."""
        canon = canonical_sqrt(qd(self.z))
        sheet = +1 if abs(self.plus_sqrt - canon) <= abs(self.plus_sqrt + canon) else -1
        plus = SheetPoint(self.z, sheet, self.plus_sqrt)
        minus = SheetPoint(self.z, -sheet, -self.plus_sqrt)
        return plus, minus


@dataclass(frozen=True)
class GeneratorArc:
    arc_id: str
    kind: str  # "short_vertical" | "hex_connector" | "free"
    polyline: np.ndarray
    source: str
    target: str
    wall_id: int | None = None
    zero_index: int | None = None
    leg_index: int | None = None


@dataclass(frozen=True)
class HexLoop:
    zero_index: int
    arc_ids: tuple[str, ...]  # six legs in traversal order
    polyline: np.ndarray


@dataclass(frozen=True)
class GroupoidChart:
    qd: RationalQD
    net: SpectralNetwork
    T: float
    eta: float
    base_points: dict[str, BasePoint]
    arcs: dict[str, GeneratorArc]
    hex_loops: tuple[HexLoop, ...]
    wall_order: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def connectors_of_zero(self, zero_index: int) -> list[GeneratorArc]:
        return [
            a
            for a in self.arcs.values()
            if a.kind == "hex_connector" and a.zero_index == zero_index
        ]

    def short_vertical(self, wall_id: int) -> GeneratorArc:
        return self.arcs[f"sv:{wall_id}"]

    def to_json_dict(self) -> dict:
        return {
            "base_points": [
                {
                    "id": b.id,
                    "wall": b.wall_id,
                    "kind": b.kind,
                    "z": [float(b.z.real), float(b.z.imag)],
                }
                for b in sorted(self.base_points.values(), key=lambda b: b.id)
            ],
            "hex_loops": [
                {
                    "zero": hl.zero_index,
                    "arc_ids": list(hl.arc_ids),
                    "polyline": [[float(z.real), float(z.imag)] for z in hl.polyline],
                }
                for hl in self.hex_loops
            ],
        }


def _vertical_params(eta: float, params: IntegrationParams) -> IntegrationParams:
    return replace(
        params,
        max_length=eta,
        max_step=eta / 8.0,
        rel_tol=min(params.rel_tol, 1e-11),
        abs_tol=min(params.abs_tol, 1e-13),
    )


def _vertical_arc(qd, z0: complex, sqrt_plus: complex, direction: int, eta, theta, params):
    """Vertical trajectory of phi-length eta from z0 on the wall-positive
    sheet; direction +1 increases Im of the wall-positive primitive."""
    canon = canonical_sqrt(qd(z0))
    sheet = +1 if abs(sqrt_plus - canon) <= abs(sqrt_plus + canon) else -1
    start = SheetPoint(z0, sheet, sqrt_plus)
    traj = trace(
        qd,
        start,
        direction,
        theta + math.pi / 2.0,
        _vertical_params(eta, params),
        dense_ds=eta / 8.0,
    )
    if traj.termination.kind != "max_length":
        raise ClearanceTooSmall(
            f"vertical arc from {z0:.6g} hit {traj.termination.kind} before length {eta}"
        )
    return traj


def _wall_point_and_sqrt(wall, s: float) -> tuple[complex, complex]:
    traj = wall.trajectory
    z = traj.point_at(s)
    ref = traj.sqrt_at(s)
    return z, ref


def _polyline_min_gap(a: np.ndarray, b: np.ndarray) -> float:
    best = float("inf")
    for p in a:
        seg_a = b[:-1]
        seg_d = b[1:] - b[:-1]
        dd = np.abs(seg_d) ** 2
        dd[dd == 0] = 1.0
        t = np.clip(
            ((p - seg_a).real * seg_d.real + (p - seg_a).imag * seg_d.imag) / dd, 0.0, 1.0
        )
        best = min(best, float(np.min(np.abs(seg_a + t * seg_d - p))))
    return best


def build_chart(qd: RationalQD, net: SpectralNetwork, T: float, eta: float) -> GroupoidChart:
    """Construct the groupoid chart at truncation distance T and vertical
    half-gap eta.  Raises ClearanceTooSmall when the parameters are not
    compatible with the wall geometry."""
    if not net.saddle_free:
        raise ValueError("chart construction requires a saddle-free network")
    if eta >= T / 4.0:
        raise ClearanceTooSmall(f"eta = {eta} must be < T/4 = {T / 4.0}")
    min_wall_len = min(w.trajectory.length for w in net.walls)
    if T >= min_wall_len:
        raise ClearanceTooSmall(
            f"T = {T} exceeds the shortest wall length {min_wall_len:.3g}"
        )

    # wall-to-wall clearance near the marked points
    for i, wa in enumerate(net.walls):
        seg_a = _trim_by_arclength(wa.trajectory, 0.25 * T, 2.5 * T)
        for wb in net.walls[i + 1 :]:
            seg_b = _trim_by_arclength(wb.trajectory, 0.25 * T, 2.5 * T)
            if _polyline_min_gap(seg_a, seg_b) < 4.0 * eta:
                raise ClearanceTooSmall(
                    f"walls {wa.id} and {wb.id} come within 4*eta near distance T"
                )

    params = net.params
    theta = net.theta
    base_points: dict[str, BasePoint] = {}
    arcs: dict[str, GeneratorArc] = {}
    wall_order: dict[int, tuple[int, ...]] = {}

    up_ends: dict[int, tuple[complex, complex]] = {}
    down_ends: dict[int, tuple[complex, complex]] = {}
    for wall in net.walls:
        z_T, ref = _wall_point_and_sqrt(wall, T)
        sqrt_plus = nearest_sqrt(qd(z_T), ref)
        up = _vertical_arc(qd, z_T, sqrt_plus, +1, eta, theta, params)
        down = _vertical_arc(qd, z_T, sqrt_plus, -1, eta, theta, params)
        bu = BasePoint(
            id=f"b:{wall.id}:u",
            wall_id=wall.id,
            kind="u",
            z=complex(up.zs[-1]),
            plus_sqrt=complex(up.sqrts[-1]),
        )
        bd = BasePoint(
            id=f"b:{wall.id}:d",
            wall_id=wall.id,
            kind="d",
            z=complex(down.zs[-1]),
            plus_sqrt=complex(down.sqrts[-1]),
        )
        base_points[bu.id] = bu
        base_points[bd.id] = bd
        up_ends[wall.id] = up
        down_ends[wall.id] = down
        sv_poly = np.concatenate([down.zs[::-1], up.zs[1:]])
        arcs[f"sv:{wall.id}"] = GeneratorArc(
            arc_id=f"sv:{wall.id}",
            kind="short_vertical",
            polyline=sv_poly,
            source=bd.id,
            target=bu.id,
            wall_id=wall.id,
        )

    hex_loops: list[HexLoop] = []
    for zi, zero in enumerate(qd.inventory.zeros):
        walls = sorted(net.walls_of_zero(zi), key=lambda w: w.k)
        wall_order[zi] = tuple(w.id for w in walls)
        leg_ids: list[str] = []
        loop_pieces: list[np.ndarray] = []
        for i, wall in enumerate(walls):
            nxt = walls[(i + 1) % 3]
            sv = arcs[f"sv:{wall.id}"]
            leg_ids.append(sv.arc_id)
            loop_pieces.append(sv.polyline)
            src = base_points[f"b:{wall.id}:u"]
            tgt = base_points[f"b:{nxt.id}:d"]
            conn_poly = _connector_polyline(zero, src.z, tgt.z)
            arc_id = f"cx:{zi}:{i}"
            arcs[arc_id] = GeneratorArc(
                arc_id=arc_id,
                kind="hex_connector",
                polyline=conn_poly,
                source=src.id,
                target=tgt.id,
                zero_index=zi,
                leg_index=i,
            )
            leg_ids.append(arc_id)
            loop_pieces.append(conn_poly)
        loop = np.concatenate([p if i == 0 else p[1:] for i, p in enumerate(loop_pieces)])
        hex_loops.append(HexLoop(zero_index=zi, arc_ids=tuple(leg_ids), polyline=loop))

    chart = GroupoidChart(
        qd=qd,
        net=net,
        T=float(T),
        eta=float(eta),
        base_points=base_points,
        arcs=arcs,
        hex_loops=tuple(hex_loops),
        wall_order=wall_order,
    )
    _validate_chart(chart)
    return chart


def _trim_by_arclength(traj, s_lo: float, s_hi: float) -> np.ndarray:
    mask = (traj.ss >= s_lo) & (traj.ss <= s_hi)
    pts = traj.zs[mask]
    if len(pts) < 2:
        pts = np.array([traj.point_at(s_lo), traj.point_at(s_hi)])
    return pts


def _connector_polyline(zero: complex, z_from: complex, z_to: complex) -> np.ndarray:
    """Arc rounding the zero counterclockwise from z_from to z_to, with
    radius interpolated between the endpoint radii."""
    u0, u1 = z_from - zero, z_to - zero
    r0, r1 = abs(u0), abs(u1)
    a0 = math.atan2(u0.imag, u0.real)
    a1 = math.atan2(u1.imag, u1.real)
    sweep = (a1 - a0) % (2.0 * math.pi)
    n = max(32, int(sweep / 0.04))
    ts = np.linspace(0.0, 1.0, n + 1)
    radii = r0 + (r1 - r0) * ts
    angles = a0 + sweep * ts
    return zero + radii * np.exp(1j * angles)


def _validate_chart(chart: GroupoidChart) -> None:
    net = chart.net
    for arc in chart.arcs.values():
        if arc.kind == "short_vertical":
            found = crossings(net, arc.polyline)
            if len(found) != 1 or found[0].wall_id != arc.wall_id:
                raise ClearanceTooSmall(
                    f"short vertical {arc.arc_id} crossings "
                    f"{[(c.wall_id, c.sign) for c in found]} != its own wall once"
                )
            if found[0].sign != +1:
                raise AssertionError(
                    f"short vertical {arc.arc_id} crosses with sign "
                    f"{found[0].sign}; the d->u orientation must be +1"
                )
        elif arc.kind == "hex_connector":
            found = crossings(net, arc.polyline)
            if found:
                raise ClearanceTooSmall(
                    f"hex connector {arc.arc_id} crosses walls "
                    f"{[c.wall_id for c in found]}"
                )
    for hl in chart.hex_loops:
        own_walls = set(chart.wall_order[hl.zero_index])
        found = crossings(net, _close_loop(hl.polyline))
        crossed = [c.wall_id for c in found]
        if sorted(crossed) != sorted(own_walls):
            raise ClearanceTooSmall(
                f"hex loop around zero {hl.zero_index} crosses {crossed}, "
                f"expected each of {sorted(own_walls)} once"
            )
        # contractibility in the pole-punctured plane: winding 1 around the
        # own zero, 0 around every other critical point
        zero = chart.qd.inventory.zeros[hl.zero_index]
        if round(_winding(hl.polyline, zero)) != 1:
            raise AssertionError(f"hex loop of zero {hl.zero_index} does not wind once")
        for j, other in enumerate(chart.qd.inventory.zeros):
            if j != hl.zero_index and round(_winding(hl.polyline, other)) != 0:
                raise AssertionError("hex loop winds a foreign zero")
        for pole, _ in chart.qd.inventory.finite_poles:
            if round(_winding(hl.polyline, pole)) != 0:
                raise AssertionError("hex loop winds a pole")


def _close_loop(poly: np.ndarray) -> np.ndarray:
    if abs(poly[0] - poly[-1]) > 0:
        return np.concatenate([poly, poly[:1]])
    return poly


def _winding(poly: np.ndarray, p: complex) -> float:
    closed = _close_loop(poly)
    rel = closed - p
    angles = np.angle(rel[1:] / rel[:-1])
    return float(np.sum(angles) / (2.0 * math.pi))


def lift_basepoints(qd: RationalQD, chart: GroupoidChart):
    """Ordered pair of lifts (wall-positive first) for every base point."""
    return {bid: bp.lifts(qd) for bid, bp in chart.base_points.items()}


def free_path(
    chart: GroupoidChart,
    source: str,
    target: str,
    via: list[complex] | None = None,
    arc_id: str | None = None,
) -> GeneratorArc:
    """A user path between chart base points, straight unless waypoints are
    given."""
    src = chart.base_points[source]
    tgt = chart.base_points[target]
    pts = [src.z] + ([complex(v) for v in via] if via else []) + [tgt.z]
    return GeneratorArc(
        arc_id=arc_id or f"free:{source}->{target}",
        kind="free",
        polyline=np.array(pts, dtype=complex),
        source=source,
        target=target,
    )
