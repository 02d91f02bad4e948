"""Spectral network assembly: walls, sheet labels, saddles, crossings.

Walls are traced outward from every zero; each wall is labelled "+-" or
"-+" by comparing its outward-positive sheet against the per-zero branch
cut convention (cut opposite wall 0).  A network is saddle-free when no
wall terminates on a zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EndpointOnWall,
    NoSaddleFreePhaseFound,
    NotComplete,
    NotGMN,
    SaddleAmbiguity,
    TangentialCrossing,
)
from .qdiff import (
    RationalQD,
    ZeroFrame,
    local_zero_frame,
    nearest_sqrt,
    plus_label_sqrt,
)
from .trajectory import IntegrationParams, Trajectory, trace_wall

GENERIC_PHASE_STEP = 1e-3
TANGENT_ANGLE_TOL = 1e-3


@dataclass(frozen=True)
class Wall:
    """One separating trajectory, oriented outward from its zero.

    ``label`` is "-+" when the outward-positive sheet of sqrt(phi) along
    the wall coincides with the '+' branch of the parent zero's cut
    convention, "+-" otherwise.  ``saddle_partner`` = (zero index hit,
    partner wall id) when the wall terminates on another zero.
    """

    id: int
    parent_zero: int
    k: int
    trajectory: Trajectory
    label: str
    saddle_partner: tuple[int, int] | None = None

    @property
    def points(self) -> np.ndarray:
        return self.trajectory.zs

    def to_json_dict(self) -> dict:
        d = {
            "id": self.id,
            "parent_zero": self.parent_zero,
            "k": self.k,
            "label": self.label,
            "points": [[float(z.real), float(z.imag)] for z in self.trajectory.zs],
            "termination": self.trajectory.termination.kind,
            "saddle_partner": list(self.saddle_partner) if self.saddle_partner else None,
        }
        return d


@dataclass(frozen=True)
class SpectralNetwork:
    theta: float
    qd: RationalQD
    params: IntegrationParams
    walls: tuple[Wall, ...]
    frames: tuple[ZeroFrame, ...]
    branch_cuts: tuple[float, ...]  # per-zero cut angle at this phase
    saddle_free: bool

    def walls_of_zero(self, zero_index: int) -> list[Wall]:
        return [w for w in self.walls if w.parent_zero == zero_index]

    def to_json_dict(self) -> dict:
        return {
            "theta": float(self.theta),
            "walls": [w.to_json_dict() for w in self.walls],
            "saddle_free": bool(self.saddle_free),
            "branch_cuts": [float(a) for a in self.branch_cuts],
        }


@dataclass(frozen=True)
class Crossing:
    wall_id: int
    s_along_path: float
    sign: int
    z: complex
    wall_segment: int


def _wall_label(qd, frame, traj: Trajectory, cut_angle: float) -> str:
    """Compare the wall's tracked (outward-positive) sheet at the seed with
    the '+' branch of the zero's cut convention at this phase."""
    z0 = complex(traj.zs[0])
    plus = plus_label_sqrt(frame, qd, z0, cut_angle=cut_angle)
    tracked = complex(traj.sqrts[0])
    on_plus = abs(tracked - plus) <= abs(tracked + plus)
    return "-+" if on_plus else "+-"


def _min_distance_to_point(zs: np.ndarray, p: complex) -> float:
    seg_a = zs[:-1]
    seg_d = zs[1:] - zs[:-1]
    dd = np.abs(seg_d) ** 2
    dd[dd == 0] = 1.0
    t = np.clip(((p - seg_a).real * seg_d.real + (p - seg_a).imag * seg_d.imag) / dd, 0.0, 1.0)
    return float(np.min(np.abs(seg_a + t * seg_d - p)))


def build(
    qd: RationalQD,
    theta: float,
    params: IntegrationParams,
    dense_ds: float | None = None,
    _saddle_scan: bool = True,
) -> SpectralNetwork:
    """Assemble the phase-theta spectral network of a complete GMN
    differential: three walls per zero, labelled, with saddle flags."""
    if not qd.inventory.is_gmn:
        raise NotGMN("spectral networks need at least one pole and one zero")
    if not qd.inventory.complete:
        raise NotComplete("order-1 poles are not supported")

    zeros = qd.inventory.zeros
    frames = tuple(local_zero_frame(qd, z) for z in zeros)
    cuts = tuple(
        float(np.mod((2.0 * theta - np.angle(fr.c)) / 3.0 + np.pi, 2.0 * np.pi))
        for fr in frames
    )
    walls: list[Wall] = []
    trajs: list[Trajectory] = []
    for zi in range(len(zeros)):
        for k in range(3):
            trajs.append(trace_wall(qd, zi, k, theta, params, dense_ds=dense_ds))

    hit_radius = params.zero_hit_radius
    for wid, traj in enumerate(trajs):
        zi, k = traj.parent_zero, traj.wall_k
        partner = None
        if traj.termination.kind == "zero_hit":
            hit_index = traj.termination.index
            z_end = complex(traj.zs[-1])
            close = [
                j
                for j, z in enumerate(zeros)
                if abs(z_end - z) <= 2.0 * hit_radius and j != zi
            ]
            if len(close) > 1:
                raise SaddleAmbiguity(
                    f"wall {wid} ends within 2x zero_hit_radius of zeroes {close}"
                )
            partner = (hit_index, -1)  # partner wall id resolved below
        elif _saddle_scan:
            # near-saddle gray zone: an approach within [1, 2] x hit radius
            # is neither a clean hit nor clean miss
            for j, z in enumerate(zeros):
                if j == zi:
                    continue
                d = _min_distance_to_point(traj.zs, z)
                if hit_radius < d <= 2.0 * hit_radius:
                    raise SaddleAmbiguity(
                        f"wall {wid} passes {d:.3g} from zero {j}: inside the "
                        "ambiguity band [1, 2] x zero_hit_radius"
                    )
        label = _wall_label(qd, frames[zi], traj, cuts[zi])
        walls.append(Wall(id=wid, parent_zero=zi, k=k, trajectory=traj, label=label, saddle_partner=partner))

    # resolve partner wall ids: the other zero's wall whose seed direction
    # matches the reversed incoming tangent
    resolved: list[Wall] = []
    for w in walls:
        if w.saddle_partner is None:
            resolved.append(w)
            continue
        hit_index, _ = w.saddle_partner
        z_end = complex(w.trajectory.zs[-1])
        tangent = z_end - complex(w.trajectory.zs[-2])
        incoming = math.atan2(-tangent.imag, -tangent.real)
        frame = frames[hit_index]
        argc = float(np.angle(frame.c))
        best_k, best_diff = 0, float("inf")
        for k2 in range(3):
            alpha = (2.0 * theta + 2.0 * math.pi * k2 - argc) / 3.0
            diff = abs((incoming - alpha + math.pi) % (2.0 * math.pi) - math.pi)
            if diff < best_diff:
                best_k, best_diff = k2, diff
        partner_id = next(
            w2.id for w2 in walls if w2.parent_zero == hit_index and w2.k == best_k
        )
        resolved.append(
            Wall(
                id=w.id,
                parent_zero=w.parent_zero,
                k=w.k,
                trajectory=w.trajectory,
                label=w.label,
                saddle_partner=(hit_index, partner_id),
            )
        )
    walls = resolved

    # label consistency: exactly one -+ wall per zero
    for zi in range(len(zeros)):
        labels = [w.label for w in walls if w.parent_zero == zi]
        if labels.count("-+") != 1:
            raise AssertionError(
                f"zero {zi}: wall labels {labels} violate the one -+ rule"
            )

    saddle_free = all(w.saddle_partner is None for w in walls)
    return SpectralNetwork(
        theta=float(theta),
        qd=qd,
        params=params,
        walls=tuple(walls),
        frames=frames,
        branch_cuts=cuts,
        saddle_free=saddle_free,
    )


def generic_phase(qd: RationalQD, theta0: float, params: IntegrationParams) -> float:
    """Smallest |theta - theta0| on the grid theta0 + j * 1e-3 whose network
    is saddle-free.  Capped at pi/2 away from theta0."""
    j = 0
    while abs(j) * GENERIC_PHASE_STEP <= math.pi / 2.0 + 1e-12:
        for jj in ([0] if j == 0 else [j, -j]):
            theta = theta0 + jj * GENERIC_PHASE_STEP
            try:
                net = build(qd, theta, params)
            except SaddleAmbiguity:
                continue
            if net.saddle_free:
                return float(theta)
        j += 1
    raise NoSaddleFreePhaseFound(
        f"no saddle-free phase within pi/2 of {theta0} at grid step {GENERIC_PHASE_STEP}"
    )


def _segment_intersections(p0, p1, qs: np.ndarray):
    """Intersections of segment [p0, p1] with the polyline ``qs``.

    Returns a list of (t_path, u_wall, wall_segment_index, point,
    cos_angle) with t, u in [0, 1] on the respective segments.
    """
    d = p1 - p0
    a = qs[:-1]
    b = qs[1:]
    e = b - a
    denom = d.real * e.imag - d.imag * e.real
    out = []
    w = a - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w.real * e.imag - w.imag * e.real) / denom
        u = (w.real * d.imag - w.imag * d.real) / denom
    # epsilon-shifted half-open windows: a crossing that lands exactly on a
    # shared vertex (t or u == 0/1 to roundoff) still counts exactly once
    eps = 1e-12
    valid = (
        np.isfinite(t)
        & np.isfinite(u)
        & (t >= -eps)
        & (t < 1.0 - eps)
        & (u >= -eps)
        & (u < 1.0 - eps)
    )
    for idx in np.nonzero(valid)[0]:
        pt = p0 + t[idx] * d
        sin_angle = abs(denom[idx]) / (abs(d) * abs(e[idx]) + 1e-300)
        out.append((float(t[idx]), float(u[idx]), int(idx), complex(pt), float(sin_angle)))
    return out


def crossings(net: SpectralNetwork, path) -> list[Crossing]:
    """Ordered wall crossings of a polyline path.

    The sign is +1 when Im of the running integral of the wall-positive
    sqrt(phi) increases through the crossing (the path passes from below
    the wall to above it), -1 otherwise.
    """
    path = [complex(v) for v in path]
    if len(path) < 2:
        raise ValueError("path needs at least two vertices")

    # endpoints must be clearly off the network
    for endpoint in (path[0], path[-1]):
        tol = 1e-8 * (1.0 + abs(endpoint))
        for wall in net.walls:
            if _min_distance_to_point(wall.trajectory.zs, endpoint) <= tol:
                raise EndpointOnWall(f"path endpoint {endpoint:.6g} lies on wall {wall.id}")

    hit_radius = net.params.zero_hit_radius
    for z in net.qd.inventory.zeros:
        if _min_distance_to_point(np.array(path), z) <= hit_radius:
            raise ValueError("path passes inside zero_hit_radius of a zero")

    found: list[Crossing] = []
    s_offset = 0.0
    for p0, p1 in zip(path, path[1:]):
        seg_len = abs(p1 - p0)
        if seg_len == 0:
            continue
        for wall in net.walls:
            for t, u, seg_idx, pt, sin_angle in _segment_intersections(
                p0, p1, wall.trajectory.zs
            ):
                if sin_angle < TANGENT_ANGLE_TOL:
                    raise TangentialCrossing(
                        f"path crosses wall {wall.id} at angle {sin_angle:.2e} rad"
                    )
                # wall-positive sqrt at the crossing, matched from the
                # tracked value at the segment's start vertex
                ref = complex(wall.trajectory.sqrts[seg_idx])
                sq_plus = nearest_sqrt(net.qd(pt), ref)
                direction = (p1 - p0) / seg_len
                sign = +1 if (sq_plus * direction).imag > 0 else -1
                found.append(
                    Crossing(
                        wall_id=wall.id,
                        s_along_path=s_offset + t * seg_len,
                        sign=sign,
                        z=pt,
                        wall_segment=seg_idx,
                    )
                )
        s_offset += seg_len
    found.sort(key=lambda c: c.s_along_path)
    return found
