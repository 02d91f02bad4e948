"""Saddle classes, their charges, real-exactness, and sheet ordering.

A saddle of phase theta joining two zeroes contributes the class charge
2 e^{-i theta} l where l is its phi-length (both lifts contribute).
Saddles are found by sweeping the phase over a grid, watching the signed
miss distance of every wall past every other zero, and bisecting each
sign change down to 1e-10 in phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotASaddle, OnVerticalNetwork, RealExactnessRequired
from .network import SpectralNetwork
from .qdiff import RationalQD, SheetPoint, nearest_sqrt, phi_length, sqrt_continue
from .trajectory import IntegrationParams, Trajectory, trace_wall

PHASE_GRID = 720
PHASE_BISECT_TOL = 1e-10
REAL_EXACT_TOL = 1e-6
CHARGE_IM_TOL = 1e-9
W_DIFF_FLOOR = 1e-8
CROSS_CHECK_TOL = 1e-7
SINGULAR_OFFSET = 1e-10


@dataclass(frozen=True)
class SaddleClass:
    """A saddle trajectory class: endpoints, phase in [0, pi), phi-length,
    and the charge representative in the closed upper half-plane."""

    endpoints: tuple[int, int]
    phase: float
    length: float
    charge: complex

    def validate(self) -> None:
        if abs(abs(self.charge) - 2.0 * self.length) > 1e-6 * (1.0 + abs(self.charge)):
            raise AssertionError("|charge| must equal twice the phi-length")
        want = (-self.phase) % math.pi
        got = math.atan2(self.charge.imag, self.charge.real) % math.pi
        if abs((got - want + math.pi / 2) % math.pi - math.pi / 2) > 1e-6:
            raise AssertionError("arg(charge) must equal -phase mod pi")

    def to_json_dict(self) -> dict:
        return {
            "endpoints": list(self.endpoints),
            "phase": float(self.phase),
            "length": float(self.length),
            "charge": [float(self.charge.real), float(self.charge.imag)],
        }


@dataclass(frozen=True)
class SheetOrdering:
    """Lift ordering at z for a real-exact differential: the plus sheet has
    the larger value of the flat-structure primitive W."""

    z: complex
    plus_sheet: int
    w_diff: float


def _normalize_charge(raw: complex) -> complex:
    """Representative in the closed upper half-plane union the positive reals."""
    if raw.imag < -1e-15 or (abs(raw.imag) <= 1e-15 and raw.real < 0):
        return -raw
    return raw


def saddle_charge(qd: RationalQD, saddle: Trajectory) -> SaddleClass:
    """Charge of a saddle trajectory produced by trace_wall.

    The length is recomputed by quadrature along the polyline including
    both zero endpoints, so the seed/hit gaps do not bias the charge.
    """
    if saddle.termination.kind != "zero_hit" or saddle.parent_zero is None:
        raise NotASaddle("the trajectory does not join two zeroes")
    z_from = qd.inventory.zeros[saddle.parent_zero]
    z_to = qd.inventory.zeros[saddle.termination.index]
    path = [z_from] + [complex(z) for z in saddle.zs] + [z_to]
    length = phi_length(qd, path, allow_singular_endpoints=True)
    theta = saddle.phase
    raw = 2.0 * complex(math.cos(-theta), math.sin(-theta)) * length
    charge = _normalize_charge(raw)
    pair = tuple(sorted((saddle.parent_zero, saddle.termination.index)))
    cls = SaddleClass(
        endpoints=pair, phase=float(theta % math.pi), length=float(length), charge=charge
    )
    cls.validate()
    return cls


def _sweep_params(qd: RationalQD, params: IntegrationParams) -> IntegrationParams:
    """Event geometry for the phase sweep: the window only needs to contain
    the inter-zero geometry, and speed matters more than dense accuracy."""
    zmax = max((abs(z) for z in qd.inventory.zeros), default=1.0)
    radius = max(5.0, 2.0 * zmax + 2.0)
    length_cap = 4.0 * radius * max(1.0, radius / 4.0)
    return replace(
        params,
        escape_radius=radius,
        max_length=length_cap,
        rel_tol=max(params.rel_tol, 1e-7),
        step_scale_cap=0.2,
    )


def _signed_miss(traj: Trajectory, target: complex) -> tuple[float, float]:
    """(signed miss distance, arclength at closest approach) of a trajectory
    past a target point.  The sign is the side: positive when the target
    lies to the left of the oriented trajectory."""
    zs, ss = traj.zs, traj.ss
    seg_a = zs[:-1]
    seg_d = zs[1:] - zs[:-1]
    dd = np.abs(seg_d) ** 2
    dd[dd == 0] = 1.0
    t = np.clip(
        ((target - seg_a).real * seg_d.real + (target - seg_a).imag * seg_d.imag) / dd,
        0.0,
        1.0,
    )
    proj = seg_a + t * seg_d
    dists = np.abs(proj - target)
    i = int(np.argmin(dists))
    tangent = seg_d[i]
    cross = tangent.real * (target - proj[i]).imag - tangent.imag * (target - proj[i]).real
    sign = 1.0 if cross >= 0 else -1.0
    s_at = float(ss[i] + t[i] * (ss[i + 1] - ss[i]))
    return float(sign * dists[i]), s_at


def _wall_miss(qd, zi, k, theta, params, target_index):
    traj = trace_wall(qd, zi, k, theta, params)
    if traj.termination.kind == "zero_hit" and traj.termination.index == target_index:
        return 0.0, traj
    target = qd.inventory.zeros[target_index]
    miss, _ = _signed_miss(traj, target)
    return miss, traj


def standard_saddles(
    qd: RationalQD,
    params: IntegrationParams,
    phase_grid: int = PHASE_GRID,
) -> list[SaddleClass]:
    """Sweep ``phase_grid`` phases over [0, pi), detect walls that change
    side past another zero, and bisect each candidate to 1e-10 in phase."""
    zeros = qd.inventory.zeros
    n = len(zeros)
    if n < 2:
        return []
    sweep = _sweep_params(qd, params)
    capture = 0.45 * qd.min_critical_separation()

    prev: dict[tuple, tuple[float, float]] = {}
    candidates: list[tuple[int, int, int, float, float]] = []
    for j in range(phase_grid):
        theta = math.pi * j / phase_grid
        for zi in range(n):
            for k in range(3):
                traj = trace_wall(qd, zi, k, theta, sweep)
                for tj in range(n):
                    if tj == zi:
                        continue
                    if (
                        traj.termination.kind == "zero_hit"
                        and traj.termination.index == tj
                    ):
                        miss = 0.0
                    else:
                        miss, _ = _signed_miss(traj, zeros[tj])
                    key = (zi, k, tj)
                    if key in prev:
                        m0, th0 = prev[key]
                        near = min(abs(m0), abs(miss)) < capture
                        flipped = m0 == 0.0 or miss == 0.0 or m0 * miss < 0.0
                        if near and flipped:
                            candidates.append((zi, k, tj, th0, theta))
                    prev[key] = (miss, theta)

    classes: list[SaddleClass] = []
    for zi, k, tj, th_lo, th_hi in candidates:
        saddle = _refine_saddle(qd, zi, k, tj, th_lo, th_hi, sweep)
        if saddle is None:
            continue
        if not any(_same_class(saddle, c) for c in classes):
            classes.append(saddle)
    classes.sort(key=lambda c: (c.phase, c.endpoints))
    return classes


def _same_class(a: SaddleClass, b: SaddleClass) -> bool:
    return a.endpoints == b.endpoints and abs(a.phase - b.phase) < 1e-7


def _refine_saddle(qd, zi, k, tj, th_lo, th_hi, sweep) -> SaddleClass | None:
    """Two-stage bisection on the signed miss: the coarse sweep params take
    the bracket to 1e-6, then tight tolerances finish to 1e-10 so the
    refined phase is integration-accurate.

    The tight scan shrinks the seed offset (its O(offset^2) model error
    would bias the phase at 1e-7) and uses a tiny capture radius so a
    premature zero hit cannot stall the bisection; only the final trace
    re-enables a forgiving capture radius.
    """
    tight_scan = replace(
        sweep,
        rel_tol=1e-12,
        abs_tol=1e-14,
        step_scale_cap=0.05,
        seed_offset=1e-4,
        zero_hit_radius=1e-8,
    )
    tight_final = replace(tight_scan, zero_hit_radius=1e-6)

    def miss_at(theta, prm):
        return _wall_miss(qd, zi, k, theta, prm, tj)[0]

    def bisect(lo, hi, m_lo, m_hi, prm, tol):
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            m_mid = miss_at(mid, prm)
            if m_mid == 0.0:
                return mid, mid
            if m_lo * m_mid <= 0.0:
                hi, m_hi = mid, m_mid
            else:
                lo, m_lo = mid, m_mid
        return lo, hi

    m_lo = miss_at(th_lo, sweep)
    m_hi = miss_at(th_hi, sweep)
    if m_lo == 0.0:
        th_lo, th_hi = th_lo, th_lo
    elif m_hi == 0.0:
        th_lo = th_hi
    elif m_lo * m_hi > 0.0:
        return None
    else:
        th_lo, th_hi = bisect(th_lo, th_hi, m_lo, m_hi, sweep, 1e-6)

    pad = max(2.0 * (th_hi - th_lo), 2e-6)
    lo, hi = th_lo - pad, th_hi + pad
    m_lo, m_hi = miss_at(lo, tight_scan), miss_at(hi, tight_scan)
    if m_lo == 0.0:
        th_lo = th_hi = lo
    elif m_hi == 0.0:
        th_lo = th_hi = hi
    elif m_lo * m_hi < 0.0:
        th_lo, th_hi = bisect(lo, hi, m_lo, m_hi, tight_scan, PHASE_BISECT_TOL)
    else:
        return None

    theta_star = 0.5 * (th_lo + th_hi)
    final = trace_wall(qd, zi, k, theta_star, tight_final)
    if final.termination.kind != "zero_hit" or final.termination.index != tj:
        return None
    return saddle_charge(qd, final)


def is_real_exact(
    qd: RationalQD, params: IntegrationParams, phase_grid: int = PHASE_GRID
) -> tuple[bool, list[float]]:
    """All detected saddle classes must have purely imaginary charge.

    Returns (verdict, per-class residuals |Re Z| / |Z|); vacuously true
    when there are no saddles.
    """
    classes = standard_saddles(qd, params, phase_grid=phase_grid)
    residuals = [abs(c.charge.real) / abs(c.charge) for c in classes]
    return all(r < REAL_EXACT_TOL for r in residuals), residuals


def _detour_path(qd: RationalQD, z_from: complex, z_to: complex) -> list[complex]:
    """Straight segment, bent at the midpoint if it grazes a critical point."""
    others = [p for p in qd.inventory.critical_points() if p not in (z_from, z_to)]
    path = [z_from, z_to]
    for _ in range(8):
        clear = True
        for p in others:
            d = _seg_dist(path, p)
            if d < 0.05 * (1.0 + abs(p)):
                clear = False
                break
        if clear:
            return path
        mid = 0.5 * (z_from + z_to)
        normal = 1j * (z_to - z_from) / abs(z_to - z_from)
        offset = 0.15 * (1.0 + abs(mid)) * (len(path) - 1)
        path = [z_from, mid + offset * normal, z_to]
    return path


def _seg_dist(path, p):
    best = float("inf")
    for a, b in zip(path, path[1:]):
        d = b - a
        dd = abs(d) ** 2
        if dd == 0:
            continue
        t = min(1.0, max(0.0, ((p - a).real * d.real + (p - a).imag * d.imag) / dd))
        best = min(best, abs(a + t * d - p))
    return best


def _w_integral(qd: RationalQD, zero: complex, z: complex) -> complex:
    """int sqrt(phi) dz from a zero to z on a fixed, continued sheet.

    The singular end is started a hair off the zero; the dropped piece is
    O(offset^{3/2}) ~ 1e-15.
    """
    path = _detour_path(qd, zero, z)
    direction = (path[1] - zero) / abs(path[1] - zero)
    start_z = zero + SINGULAR_OFFSET * direction
    start = SheetPoint.at(qd, start_z, +1)
    _, integral = sqrt_continue(
        qd, [start_z] + path[1:], start, allow_singular_endpoints=True
    )
    return integral


def w_diff(qd: RationalQD, net: SpectralNetwork, z: complex) -> SheetOrdering:
    """W(z^+) - W(z^-) = 2 |Re int sqrt(phi) dz| from a boundary zero.

    Requires a theta = 0 network and real-exactness; the value is
    cross-checked against a second zero when one exists (path independence
    holds exactly only in the real-exact case).
    """
    if abs(net.theta) > 1e-12:
        raise ValueError("w_diff needs the horizontal network (theta = 0)")
    z = complex(z)
    zeros = sorted(qd.inventory.zeros, key=lambda b: abs(b - z))
    if abs(z - zeros[0]) < 10 * net.params.zero_hit_radius:
        raise ValueError("z sits on a zero of phi")

    integral = _w_integral(qd, zeros[0], z)
    w = 2.0 * abs(integral.real)

    scale = 1.0 + abs(integral)
    if w < W_DIFF_FLOOR * scale:
        raise OnVerticalNetwork(
            f"|W(z+) - W(z-)| = {w:.3g} at z = {z:.6g}: on the vertical network"
        )

    if len(zeros) > 1:
        other = 2.0 * abs(_w_integral(qd, zeros[1], z).real)
        if abs(other - w) > CROSS_CHECK_TOL * (1.0 + w):
            raise RealExactnessRequired(
                f"w_diff from two zeroes disagrees ({w:.9g} vs {other:.9g}): "
                "the differential is not real-exact"
            )

    # the plus sheet is the one with the positive signed integral
    sheet_at_z = _continued_sheet(qd, zeros[0], z)
    plus = sheet_at_z if integral.real > 0 else -sheet_at_z
    return SheetOrdering(z=z, plus_sheet=plus, w_diff=float(w))


def _continued_sheet(qd: RationalQD, zero: complex, z: complex) -> int:
    path = _detour_path(qd, zero, z)
    direction = (path[1] - zero) / abs(path[1] - zero)
    start_z = zero + SINGULAR_OFFSET * direction
    start = SheetPoint.at(qd, start_z, +1)
    final, _ = sqrt_continue(qd, [start_z] + path[1:], start, allow_singular_endpoints=True)
    return final.sheet
