"""Rank-1 cochains on the spectral cover and their rank-2 push-forward.

The input is finite: one nonzero complex value per lift of each hexagon
connector (short verticals are trivialized).  Almost-flatness demands the
product of the six lifted values around each zero be -1.  Wall factors
mu(w) follow from homotopy invariance as closed-form products, and the
hexagon of six matrices multiplies to the identity exactly when the
cochain is almost flat.

To transport along arbitrary polyline paths, the cochain is realized as a
genuine local system on the working window: every angular sector between
consecutive walls of a zero carries a radial holonomy ray, and crossing
that ray multiplies the lift tracked through the crossing by the sector's
connector value.  Wall crossings contribute the unipotent factors, and a
basis swap is inserted whenever the tracked branch of sqrt(phi) arrives
opposite to the target base point's wall-positive branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClearanceTooSmall,
    CochainConvention,
    MissingGenerator,
    UnliftablePath,
    ZeroValue,
)
from .groupoid import GeneratorArc, GroupoidChart
from .network import SpectralNetwork, _segment_intersections, crossings
from .qdiff import RationalQD, _refine_segment, canonical_sqrt, nearest_sqrt

ALMOST_FLAT_TOL = 1e-10
HEX_RESIDUAL_TOL = 1e-12
CARRIER_TILTS = (0.0, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3, 0.4, -0.4, 0.5, -0.5)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class LocalSystemCochain:
    """Values on generator-arc lifts, keyed ``"<arc_id>:+"`` / ``"<arc_id>:-"``.

    The '+' lift of an arc is the one starting on the source wall's
    positive branch of sqrt(phi).
    """

    values: dict[str, complex]

    def value(self, arc_id: str, sign: str) -> complex:
        key = f"{arc_id}:{sign}"
        if key not in self.values:
            raise MissingGenerator(f"cochain lacks a value for {key}")
        v = self.values[key]
        if v == 0:
            raise ZeroValue(f"cochain value {key} is zero")
        return complex(v)

    def has(self, arc_id: str) -> bool:
        return f"{arc_id}:+" in self.values and f"{arc_id}:-" in self.values

    def to_json_dict(self) -> dict:
        return {
            "values": {
                k: [float(v.real), float(v.imag)] for k, v in sorted(self.values.items())
            }
        }

    @staticmethod
    def trivial_with_sign(chart: GroupoidChart) -> "LocalSystemCochain":
        """All connector values 1 except one lift per zero set to -1."""
        values: dict[str, complex] = {}
        for hl in chart.hex_loops:
            for i, arc_id in enumerate(a for a in hl.arc_ids if a.startswith("cx:")):
                values[f"{arc_id}:+"] = -1.0 + 0j if i == 0 else 1.0 + 0j
                values[f"{arc_id}:-"] = 1.0 + 0j
        return LocalSystemCochain(values=values)

    @staticmethod
    def random_validated(chart: GroupoidChart, rng: np.random.Generator) -> "LocalSystemCochain":
        """Random moduli in [0.7, 1.4] and phases, with one lift per zero
        solved so the six-value product is exactly -1."""
        values: dict[str, complex] = {}
        for hl in chart.hex_loops:
            conn = [a for a in hl.arc_ids if a.startswith("cx:")]
            prod = 1.0 + 0j
            for i, arc_id in enumerate(conn):
                for sign in "+-":
                    if i == len(conn) - 1 and sign == "-":
                        continue
                    v = rng.uniform(0.7, 1.4) * np.exp(2j * math.pi * rng.uniform())
                    values[f"{arc_id}:{sign}"] = complex(v)
                    prod *= complex(v)
            values[f"{conn[-1]}:-"] = -1.0 / prod
        return LocalSystemCochain(values=values)


@dataclass(frozen=True)
class WallFactor:
    wall_id: int
    mu: complex

    def matrix(self, sign: int = +1) -> np.ndarray:
        return np.array([[1.0, sign * self.mu], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class Transport2:
    source: str
    target: str
    matrix: np.ndarray

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def to_json_dict(self) -> dict:
        m = self.matrix
        return {
            "source": self.source,
            "target": self.target,
            "matrix": [
                [[float(m[i, j].real), float(m[i, j].imag)] for j in range(2)]
                for i in range(2)
            ],
            "det": [float(self.det.real), float(self.det.imag)],
            "trace": [float(self.trace.real), float(self.trace.imag)],
        }


@dataclass(frozen=True)
class ValidationReport:
    residuals: tuple[float, ...]  # per zero: |product + 1|
    ok: bool


def _hex_connectors(chart: GroupoidChart, zero_index: int) -> list[GeneratorArc]:
    hl = chart.hex_loops[zero_index]
    return [chart.arcs[a] for a in hl.arc_ids if a.startswith("cx:")]


def _check_short_verticals(L: LocalSystemCochain, chart: GroupoidChart) -> None:
    for arc in chart.arcs.values():
        if arc.kind != "short_vertical":
            continue
        for sign in "+-":
            key = f"{arc.arc_id}:{sign}"
            if key in L.values and abs(L.values[key] - 1.0) > 1e-12:
                raise CochainConvention(
                    f"short vertical {key} must carry the trivial value 1 "
                    "(transports are trivialized along short paths)"
                )


def validate(L: LocalSystemCochain, chart: GroupoidChart, qd: RationalQD) -> ValidationReport:
    """Almost-flatness: around each zero the lifted hexagon closes into a
    single loop on the cover encircling the ramification point once, and
    its ordered value product must equal -1."""
    _check_short_verticals(L, chart)
    residuals = []
    for hl in chart.hex_loops:
        prod = 1.0 + 0j
        for arc in _hex_connectors(chart, hl.zero_index):
            prod *= L.value(arc.arc_id, "+") * L.value(arc.arc_id, "-")
        residuals.append(abs(prod + 1.0))
    return ValidationReport(
        residuals=tuple(residuals), ok=all(r < ALMOST_FLAT_TOL for r in residuals)
    )


def mu_of_wall(L: LocalSystemCochain, chart: GroupoidChart, zero_index: int) -> list[WallFactor]:
    """The three wall factors of a zero, from homotopy invariance.

    With connectors c0: w_a -> w_b, c1: w_b -> w_c, c2: w_c -> w_a (counter-
    clockwise) the solutions of the hexagon identity are the products
        mu(w_a) = - c1+ c0- c2-
        mu(w_b) = - c1- c0- c2+
        mu(w_c) = - c0+ c1- c2-
    """
    conn = _hex_connectors(chart, zero_index)
    v = {
        (i, s): L.value(conn[i].arc_id, s) for i in range(3) for s in "+-"
    }
    wall_ids = chart.wall_order[zero_index]
    mu_a = -v[(1, "+")] * v[(0, "-")] * v[(2, "-")]
    mu_b = -v[(1, "-")] * v[(0, "-")] * v[(2, "+")]
    mu_c = -v[(0, "+")] * v[(1, "-")] * v[(2, "-")]
    return [
        WallFactor(wall_ids[0], mu_a),
        WallFactor(wall_ids[1], mu_b),
        WallFactor(wall_ids[2], mu_c),
    ]


def all_wall_factors(L: LocalSystemCochain, chart: GroupoidChart) -> dict[int, WallFactor]:
    out: dict[int, WallFactor] = {}
    for hl in chart.hex_loops:
        for wf in mu_of_wall(L, chart, hl.zero_index):
            out[wf.wall_id] = wf
    return out


def connector_matrix(L: LocalSystemCochain, arc: GeneratorArc) -> np.ndarray:
    """Anti-diagonal connector transport in the wall bases."""
    return np.array(
        [
            [0.0, L.value(arc.arc_id, "-")],
            [L.value(arc.arc_id, "+"), 0.0],
        ],
        dtype=complex,
    )


def verify_hexagon(L: LocalSystemCochain, chart: GroupoidChart, zero_index: int) -> float:
    """Sup-norm residual of the six-matrix product against the identity."""
    conn = _hex_connectors(chart, zero_index)
    mus = mu_of_wall(L, chart, zero_index)
    m = np.eye(2, dtype=complex)
    for i in range(3):
        m = connector_matrix(L, conn[i]) @ mus[i].matrix() @ m
    return float(np.max(np.abs(m - np.eye(2))))


# --- carrier realization -----------------------------------------------------


@dataclass(frozen=True)
class Carrier:
    """Radial holonomy ray for one angular sector of a zero.

    ``sample_sqrt`` samples one branch of sqrt(phi) along the ray; the
    connector's '+' value applies to the lift matching that branch exactly
    when ``plus_is_ref``.
    """

    zero_index: int
    leg_index: int
    arc_id: str
    seg: tuple[complex, complex]
    sample_z: np.ndarray
    sample_sqrt: np.ndarray
    plus_is_ref: bool


class CarrierSystem:
    """Geometry-only realization data: one carrier per hexagon connector."""

    def __init__(self, qd: RationalQD, net: SpectralNetwork, chart: GroupoidChart):
        self.qd = qd
        self.net = net
        self.chart = chart
        self.carriers: list[Carrier] = []
        self._build()

    def _build(self) -> None:
        qd, net, chart = self.qd, self.net, self.chart
        r_out = 1.2 * net.params.escape_radius
        hex_polys = {
            arc.arc_id: arc.polyline
            for arc in chart.arcs.values()
            if arc.kind in ("short_vertical", "hex_connector")
        }
        for hl in chart.hex_loops:
            zi = hl.zero_index
            zero = qd.inventory.zeros[zi]
            frame = net.frames[zi]
            argc = float(np.angle(frame.c))
            for i, arc in enumerate(_hex_connectors(chart, zi)):
                k_src = next(
                    w.k for w in net.walls if w.id == chart.wall_order[zi][i]
                )
                alpha = (2.0 * net.theta + 2.0 * math.pi * k_src - argc) / 3.0
                base_angle = alpha + math.pi / 3.0
                carrier = self._try_tilts(
                    zi, i, arc, zero, base_angle, r_out, hex_polys
                )
                if carrier is None:
                    raise ClearanceTooSmall(
                        f"no admissible holonomy ray for zero {zi} sector {i}"
                    )
                self.carriers.append(carrier)

    def _try_tilts(self, zi, leg, arc, zero, base_angle, r_out, hex_polys):
        qd = self.qd
        r_in = 0.5 * self.net.params.zero_hit_radius
        critical = [p for p in qd.inventory.critical_points() if p != zero]
        for tilt in CARRIER_TILTS:
            ang = base_angle + tilt
            p0 = zero + r_in * complex(math.cos(ang), math.sin(ang))
            p1 = zero + r_out * complex(math.cos(ang), math.sin(ang))
            if any(_seg_point_dist(p0, p1, p) < 20 * r_in for p in critical):
                continue
            if not self._ray_clear(p0, p1, arc, hex_polys):
                continue
            samples = _refine_segment(qd, p0, p1, canonical_sqrt(qd(p0)))
            sample_z = np.array([z for z, _ in samples])
            sample_sqrt = np.array([s for _, s in samples])
            plus_is_ref = self._match_plus(arc, p0, p1, sample_z, sample_sqrt)
            if plus_is_ref is None:
                continue
            return Carrier(
                zero_index=zi,
                leg_index=leg,
                arc_id=arc.arc_id,
                seg=(p0, p1),
                sample_z=sample_z,
                sample_sqrt=sample_sqrt,
                plus_is_ref=plus_is_ref,
            )
        return None

    def _ray_clear(self, p0, p1, own_arc, hex_polys) -> bool:
        for arc_id, poly in hex_polys.items():
            hits = _segment_intersections(p0, p1, poly)
            if arc_id == own_arc.arc_id:
                if len(hits) != 1:
                    return False
            elif hits:
                return False
        return True

    def _match_plus(self, arc, p0, p1, sample_z, sample_sqrt):
        """Continue the connector's '+' lift from its source base point to
        the ray crossing; returns True when it matches the sampled branch.
        Also checks the connector crosses the ray counterclockwise."""
        chart, qd = self.chart, self.qd
        hits = _segment_intersections(p0, p1, arc.polyline)
        if len(hits) != 1:
            return None
        _, u, seg_idx, z_x, _ = hits[0]
        src = chart.base_points[arc.source]
        sq = complex(src.plus_sqrt)
        z_prev = complex(arc.polyline[0])
        for z_next in list(arc.polyline[1 : seg_idx + 1]) + [z_x]:
            samples = _refine_segment(qd, z_prev, complex(z_next), sq)
            sq = samples[-1][1]
            z_prev = complex(z_next)
        i = int(np.argmin(np.abs(sample_z - z_x)))
        ref = nearest_sqrt(qd(z_x), complex(sample_sqrt[i]))
        plus_is_ref = abs(sq - ref) <= abs(sq + ref)
        # orientation: the connector must cross the ray counterclockwise
        ray_dir = (p1 - p0) / abs(p1 - p0)
        a = arc.polyline[seg_idx]
        b = arc.polyline[seg_idx + 1]
        path_dir = (b - a) / abs(b - a)
        if (ray_dir.conjugate() * path_dir).imag <= 0:
            return None
        return plus_is_ref

    def ref_sqrt(self, carrier: Carrier, z: complex) -> complex:
        """The carrier's sampled branch of sqrt(phi), matched at z."""
        i = int(np.argmin(np.abs(carrier.sample_z - z)))
        return nearest_sqrt(self.qd(z), complex(carrier.sample_sqrt[i]))

    def crossings_of(self, path: np.ndarray):
        """(s_along_path, carrier, orientation) for every ray crossing."""
        out = []
        s_offset = 0.0
        for a, b in zip(path, path[1:]):
            seg_len = abs(b - a)
            if seg_len == 0:
                continue
            for carrier in self.carriers:
                p0, p1 = carrier.seg
                hits = _segment_intersections(a, b, np.array([p0, p1]))
                for t, _, _, z_x, _ in hits:
                    ray_dir = (p1 - p0) / abs(p1 - p0)
                    path_dir = (b - a) / seg_len
                    orient = +1 if (ray_dir.conjugate() * path_dir).imag > 0 else -1
                    out.append((s_offset + t * seg_len, carrier, orient, z_x))
            s_offset += seg_len
        out.sort(key=lambda e: e[0])
        return out


_CARRIER_CACHE_ATTR = "_specnet_carrier_system"


def carrier_system(qd: RationalQD, net: SpectralNetwork, chart: GroupoidChart) -> CarrierSystem:
    cached = getattr(chart, _CARRIER_CACHE_ATTR, None)
    if cached is None:
        cached = CarrierSystem(qd, net, chart)
        object.__setattr__(chart, _CARRIER_CACHE_ATTR, cached)
    return cached


def _seg_point_dist(a: complex, b: complex, p: complex) -> float:
    d = b - a
    dd = abs(d) ** 2
    if dd == 0.0:
        return abs(p - a)
    t = min(1.0, max(0.0, ((p - a).real * d.real + (p - a).imag * d.imag) / dd))
    return abs(a + t * d - p)


def _continue_sqrt(qd: RationalQD, z0: complex, sq0: complex, z1: complex) -> complex:
    if z1 == z0:
        return sq0
    return _refine_segment(qd, z0, z1, sq0)[-1][1]


def _as_polyline_and_endpoints(chart: GroupoidChart, path):
    if isinstance(path, GeneratorArc):
        return np.asarray(path.polyline, dtype=complex), path.source, path.target
    raise TypeError("transport expects a GeneratorArc (use groupoid.free_path)")


def transport(
    L: LocalSystemCochain,
    chart: GroupoidChart,
    net: SpectralNetwork,
    path: GeneratorArc,
    mus: dict[int, WallFactor],
) -> Transport2:
    """Push-forward transport along a path between chart base points.

    The matrix is the ordered product of diagonal carrier factors, wall
    unipotents (inverted at -1 crossings), and a final basis swap when the
    tracked sqrt branch arrives opposite the target's wall-positive one.
    Segments themselves carry no holonomy unless the path's own arc id has
    cochain values.
    """
    qd = chart.qd
    poly, source, target = _as_polyline_and_endpoints(chart, path)
    for z in qd.inventory.zeros:
        if _poly_point_dist(poly, z) <= net.params.zero_hit_radius:
            raise UnliftablePath("path passes a branch point")

    wall_events = [
        (c.s_along_path, "wall", c) for c in crossings(net, poly)
    ]
    cs = carrier_system(qd, net, chart)
    carrier_events = [
        (s, "carrier", (carrier, orient, z_x))
        for s, carrier, orient, z_x in cs.crossings_of(poly)
    ]
    events = sorted(wall_events + carrier_events, key=lambda e: e[0])

    src_bp = chart.base_points[source]
    tgt_bp = chart.base_points[target]

    m = np.eye(2, dtype=complex)
    # hexagon generators are realized through the carriers; only genuinely
    # free paths may carry their own segment weights
    if path.kind == "free" and L.has(path.arc_id):
        m = np.diag([L.value(path.arc_id, "+"), L.value(path.arc_id, "-")]).astype(complex)

    sq = complex(src_bp.plus_sqrt)
    z_cur = complex(poly[0])
    vertex_idx = 0
    seg_s = _cumulative_s(poly)

    for s_evt, kind, data in events:
        z_evt = _point_on_poly(poly, seg_s, s_evt)
        sq, z_cur, vertex_idx = _advance(qd, poly, seg_s, vertex_idx, z_cur, sq, s_evt)
        if kind == "wall":
            c = data
            wall = next(w for w in net.walls if w.id == c.wall_id)
            ref = complex(wall.trajectory.sqrts[c.wall_segment])
            sq_wall = nearest_sqrt(qd(z_evt), ref)
            tracked_is_plus = abs(sq - sq_wall) <= abs(sq + sq_wall)
            u = mus[c.wall_id].matrix(c.sign)
            if not tracked_is_plus:
                u = SWAP @ u @ SWAP
            m = u @ m
        else:
            carrier, orient, _ = data
            ref = cs.ref_sqrt(carrier, z_evt)
            tracked_is_ref = abs(sq - ref) <= abs(sq + ref)
            v_ref = L.value(carrier.arc_id, "+" if carrier.plus_is_ref else "-")
            v_other = L.value(carrier.arc_id, "-" if carrier.plus_is_ref else "+")
            f_tracked = v_ref if tracked_is_ref else v_other
            f_other = v_other if tracked_is_ref else v_ref
            if orient < 0:
                f_tracked, f_other = 1.0 / f_tracked, 1.0 / f_other
            m = np.diag([f_tracked, f_other]).astype(complex) @ m
        z_cur = z_evt

    sq, z_cur, vertex_idx = _advance(
        qd, poly, seg_s, vertex_idx, z_cur, sq, seg_s[-1]
    )
    tgt_plus = complex(tgt_bp.plus_sqrt)
    if abs(sq - tgt_plus) > abs(sq + tgt_plus):
        m = SWAP @ m
    return Transport2(source=source, target=target, matrix=m)


def _cumulative_s(poly: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(poly)))])


def _point_on_poly(poly: np.ndarray, seg_s: np.ndarray, s: float) -> complex:
    i = int(np.clip(np.searchsorted(seg_s, s) - 1, 0, len(poly) - 2))
    ds = seg_s[i + 1] - seg_s[i]
    t = 0.0 if ds == 0 else (s - seg_s[i]) / ds
    return complex(poly[i] * (1 - t) + poly[i + 1] * t)


def _advance(qd, poly, seg_s, vertex_idx, z_cur, sq, s_to):
    """Continue the tracked sqrt along the polyline from z_cur to the point
    at arclength s_to."""
    while vertex_idx + 1 < len(poly) and seg_s[vertex_idx + 1] <= s_to:
        z_next = complex(poly[vertex_idx + 1])
        sq = _continue_sqrt(qd, z_cur, sq, z_next)
        z_cur = z_next
        vertex_idx += 1
    z_final = _point_on_poly(poly, seg_s, s_to)
    sq = _continue_sqrt(qd, z_cur, sq, z_final)
    return sq, z_final, vertex_idx


def _poly_point_dist(poly: np.ndarray, p: complex) -> float:
    seg_a = poly[:-1]
    seg_d = poly[1:] - poly[:-1]
    dd = np.abs(seg_d) ** 2
    dd[dd == 0] = 1.0
    t = np.clip(((p - seg_a).real * seg_d.real + (p - seg_a).imag * seg_d.imag) / dd, 0.0, 1.0)
    return float(np.min(np.abs(seg_a + t * seg_d - p)))


def monodromy(
    L: LocalSystemCochain,
    chart: GroupoidChart,
    net: SpectralNetwork,
    loop: GeneratorArc,
    mus: dict[int, WallFactor],
) -> Transport2:
    """Transport around a closed path, with the determinant checked against
    the independently accumulated abelian holonomy of the lifted loop."""
    if loop.source != loop.target:
        raise ValueError("monodromy needs a closed path")
    t2 = transport(L, chart, net, loop, mus)
    det_indep = _abelian_loop_det(L, chart, net, loop)
    if abs(t2.det - det_indep) > 1e-10 * (1.0 + abs(det_indep)):
        raise AssertionError(
            f"det(monodromy) = {t2.det:.12g} disagrees with the abelian "
            f"product {det_indep:.12g}"
        )
    return t2


def _abelian_loop_det(L, chart, net, loop) -> complex:
    """Track both lifts around the loop and multiply their carrier factors;
    a final sheet swap contributes -1 (the permutation determinant)."""
    qd = chart.qd
    poly = np.asarray(loop.polyline, dtype=complex)
    cs = carrier_system(qd, net, chart)
    src = chart.base_points[loop.source]
    sq = complex(src.plus_sqrt)
    seg_s = _cumulative_s(poly)
    z_cur = complex(poly[0])
    vertex_idx = 0
    acc = 1.0 + 0j
    for s_evt, carrier, orient, z_x in cs.crossings_of(poly):
        sq, z_cur, vertex_idx = _advance(qd, poly, seg_s, vertex_idx, z_cur, sq, s_evt)
        v_plus = L.value(carrier.arc_id, "+")
        v_minus = L.value(carrier.arc_id, "-")
        pair = v_plus * v_minus
        acc *= pair if orient > 0 else 1.0 / pair
    sq, _, _ = _advance(qd, poly, seg_s, vertex_idx, z_cur, sq, seg_s[-1])
    if abs(sq - src.plus_sqrt) > abs(sq + src.plus_sqrt):
        acc = -acc
    if loop.kind == "free" and L.has(loop.arc_id):
        acc *= L.value(loop.arc_id, "+") * L.value(loop.arc_id, "-")
    return complex(acc)


@dataclass(frozen=True)
class WPairReport:
    max_short_path_deviation: float
    max_connector_deviation: float
    max_chamber_offdiagonal: float
    ok: bool


def verify_w_pair(
    L: LocalSystemCochain,
    chart: GroupoidChart,
    net: SpectralNetwork,
    mus: dict[int, WallFactor],
    tol: float = 1e-12,
) -> WPairReport:
    """Structural checks of the push-forward: short verticals transport by
    the stored unipotent, connectors by the anti-diagonal of their values,
    and small in-chamber loops by the identity."""
    max_sv = 0.0
    for arc in chart.arcs.values():
        if arc.kind != "short_vertical":
            continue
        t2 = transport(L, chart, net, arc, mus)
        expect = mus[arc.wall_id].matrix()
        max_sv = max(max_sv, float(np.max(np.abs(t2.matrix - expect))))

    max_conn = 0.0
    for arc in chart.arcs.values():
        if arc.kind != "hex_connector":
            continue
        t2 = transport(L, chart, net, arc, mus)
        expect = connector_matrix(L, arc)
        max_conn = max(max_conn, float(np.max(np.abs(t2.matrix - expect))))

    max_off = 0.0
    for bid, bp in chart.base_points.items():
        wall = next(w for w in net.walls if w.id == bp.wall_id)
        z_T = wall.trajectory.point_at(chart.T)
        away = (bp.z - z_T) / abs(bp.z - z_T)
        d = chart.eta / 3.0
        tri = GeneratorArc(
            arc_id=f"tri:{bid}",
            kind="free",
            polyline=np.array(
                [bp.z, bp.z + d * away, bp.z + d * away * (1 + 0.5j), bp.z],
                dtype=complex,
            ),
            source=bid,
            target=bid,
        )
        t2 = transport(L, chart, net, tri, mus)
        dev = np.abs(t2.matrix - np.eye(2))
        max_off = max(max_off, float(np.max(dev)))

    ok = max_sv < tol and max_conn < tol and max_off < tol
    return WPairReport(
        max_short_path_deviation=max_sv,
        max_connector_deviation=max_conn,
        max_chamber_offdiagonal=max_off,
        ok=ok,
    )


def apply_wall_gauge(
    L: LocalSystemCochain,
    chart: GroupoidChart,
    gauges: dict[int, tuple[complex, complex]],
) -> LocalSystemCochain:
    """Coboundary rescaling with one invertible scalar per lifted wall slot
    (constant along each short vertical, so short paths stay trivialized).

    A connector's '+' lift starts on the source wall's positive slot and
    arrives on the target wall's negative slot, so
        v+ -> g_tgt[1] v+ / g_src[0],   v- -> g_tgt[0] v- / g_src[1].
    """
    values = dict(L.values)
    for arc in chart.arcs.values():
        if arc.kind != "hex_connector":
            continue
        src_wall = chart.base_points[arc.source].wall_id
        tgt_wall = chart.base_points[arc.target].wall_id
        gs = gauges.get(src_wall, (1.0 + 0j, 1.0 + 0j))
        gt = gauges.get(tgt_wall, (1.0 + 0j, 1.0 + 0j))
        values[f"{arc.arc_id}:+"] = gt[1] * L.value(arc.arc_id, "+") / gs[0]
        values[f"{arc.arc_id}:-"] = gt[0] * L.value(arc.arc_id, "-") / gs[1]
    return LocalSystemCochain(values=values)
