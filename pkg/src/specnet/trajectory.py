"""Phase-theta trajectory integration with sheet tracking and events.

The trajectory field is dz/ds = direction * e^{i theta} / sqrt(phi(z)) with
sqrt(phi) continued along the solution, so s is phi-arclength and the GMN
condition Im(e^{-2 i theta} phi (dz/ds)^2) = 0 holds identically.  The
stepper is an embedded Dormand-Prince 5(4) pair with quartic dense output;
events (escape, zero hit, pole capture, length cap) are located by
bisection on the dense interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateLiftPair, StepUnderflow
from .qdiff import RationalQD, SheetPoint, canonical_sqrt, local_zero_frame, nearest_sqrt

STEP_FLOOR = 1e-14
EVENT_S_TOL = 1e-10

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# y5 - y4 error weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense-output weights (Hairer DOPRI5)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)


@dataclass(frozen=True)
class IntegrationParams:
    """Tolerances and event radii for trajectory integration.

    All lengths are phi-arclength except the radii, which are Euclidean in
    the z-chart.  ``pole_hit_radius`` has no principled default; its
    sensitivity is reported by the verification suite rather than resolved.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 1.0
    max_length: float = 50.0
    escape_radius: float = 100.0
    zero_hit_radius: float = 1e-4
    pole_hit_radius: float = 1e-3
    seed_offset: float = 1e-3
    # Cap h <= step_scale_cap * |sqrt(phi)| * (distance to nearest critical
    # point).  Keeps the dense-interpolant derivative accurate near seeds,
    # where the field varies on the scale of the arclength itself; loosen
    # for bulk phase sweeps that only need event positions.
    step_scale_cap: float = 0.012

    def validated(self, qd: RationalQD | None = None) -> "IntegrationParams":
        for name in (
            "rel_tol",
            "abs_tol",
            "max_step",
            "max_length",
            "escape_radius",
            "zero_hit_radius",
            "pole_hit_radius",
            "seed_offset",
            "step_scale_cap",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.zero_hit_radius < self.seed_offset:
            raise ValueError("zero_hit_radius must be < seed_offset")
        if qd is not None:
            sep = qd.min_critical_separation()
            if math.isfinite(sep) and self.seed_offset >= sep / 4:
                raise ValueError("seed_offset must be < min critical separation / 4")
        return self


@dataclass(frozen=True)
class Termination:
    kind: str  # escape | zero_hit | pole_capture | max_length
    index: int | None = None


_PRECEDENCE = {"zero_hit": 0, "pole_capture": 1, "escape": 2, "max_length": 3}


@dataclass(frozen=True)
class Trajectory:
    """An arclength-parametrized polyline solution of the trajectory field.

    ``sqrts[i]`` is the tracked sqrt(phi) branch at ``zs[i]``; the
    accumulated integral of sqrt(phi) dz up to ``ss[i]`` equals
    ``direction * e^{i phase} * ss[i]`` identically in this parametrization.
    """

    zs: np.ndarray
    ss: np.ndarray
    sqrts: np.ndarray
    phase: float
    direction: int
    termination: Termination
    max_unit_speed_residual: float
    max_gmn_residual: float
    parent_zero: int | None = None
    wall_k: int | None = None

    @property
    def sheets(self) -> np.ndarray:
        canon = np.array([canonical_sqrt(v) for v in self.sqrts_squared()])
        return np.where(np.abs(self.sqrts - canon) <= np.abs(self.sqrts + canon), 1, -1)

    def sqrts_squared(self) -> np.ndarray:
        return self.sqrts**2

    @property
    def length(self) -> float:
        return float(self.ss[-1])

    def integrals(self) -> np.ndarray:
        return self.direction * np.exp(1j * self.phase) * self.ss

    def point_at(self, s: float) -> complex:
        """Linear interpolation of the stored polyline at arclength s."""
        s = float(np.clip(s, self.ss[0], self.ss[-1]))
        i = int(np.searchsorted(self.ss, s))
        if i <= 0:
            return complex(self.zs[0])
        if i >= len(self.ss):
            return complex(self.zs[-1])
        s0, s1 = self.ss[i - 1], self.ss[i]
        t = 0.0 if s1 == s0 else (s - s0) / (s1 - s0)
        return complex(self.zs[i - 1] * (1 - t) + self.zs[i] * t)

    def sqrt_at(self, s: float) -> complex:
        """Tracked sqrt reference at arclength s (left stored neighbour);
        callers re-match against phi at their exact point."""
        i = int(np.clip(np.searchsorted(self.ss, s), 1, len(self.ss) - 1))
        return complex(self.sqrts[i - 1])

    def to_json_dict(self) -> dict:
        integ = self.integrals()[-1]
        return {
            "points": [[float(z.real), float(z.imag)] for z in self.zs],
            "s": [float(s) for s in self.ss],
            "sheet": [int(x) for x in self.sheets],
            "termination": self.termination.kind
            + ("" if self.termination.index is None else f":{self.termination.index}"),
            "integral": [float(integ.real), float(integ.imag)],
        }


class _FastPhi:
    """Scalar Horner evaluation of P/Q, cheap enough for RHS duty."""

    def __init__(self, qd: RationalQD):
        self.p = tuple(complex(c) for c in qd.numerator[::-1])
        self.q = tuple(complex(c) for c in qd.denominator[::-1])

    def __call__(self, z: complex) -> complex:
        pv = 0j
        for c in self.p:
            pv = pv * z + c
        qv = 0j
        for c in self.q:
            qv = qv * z + c
        return pv / qv


class _DenseSegment:
    """Quartic dense output for one accepted DP54 step."""

    def __init__(self, s0, h, y0, y1, ks):
        dy = y1 - y0
        self.s0, self.h = s0, h
        self.r1 = y0
        self.r2 = dy
        self.r3 = h * ks[0] - dy
        self.r4 = dy - h * ks[6] - self.r3
        self.r5 = h * sum(d * k for d, k in zip(_D, ks))

    def eval(self, s: float) -> complex:
        t = (s - self.s0) / self.h
        t1 = 1.0 - t
        return self.r1 + t * (self.r2 + t1 * (self.r3 + t * (self.r4 + t1 * self.r5)))

    def deriv(self, s: float) -> complex:
        t = (s - self.s0) / self.h
        t1 = 1.0 - t
        c = self.r4 + t1 * self.r5
        b = self.r3 + t * c
        db = c + t * (-self.r5)
        da = -b + t1 * db
        a = self.r2 + t1 * b
        return (a + t * da) / self.h


class _SheetField:
    """dz/ds = direction e^{i theta} / sqrt(phi), sqrt tracked by continuity."""

    def __init__(self, qd: RationalQD, theta: float, direction: int):
        self.phi = _FastPhi(qd)
        self.coef = direction * complex(math.cos(theta), math.sin(theta))

    def __call__(self, z: complex, ref: complex):
        s = nearest_sqrt(self.phi(z), ref)
        # ambiguity guard: tracked root must be clearly closer than its mirror
        if abs(s - ref) > 0.85 * abs(s + ref):
            return None, s
        return self.coef / s, s


class _FlowField:
    """dz/dt = -e^{i theta} conj(W1' - W2') / |phi| with W1' - W2' = 2 sqrt."""

    def __init__(self, qd: RationalQD, theta: float):
        self.phi = _FastPhi(qd)
        self.coef = -complex(math.cos(theta), math.sin(theta))

    def __call__(self, z: complex, ref: complex):
        phi = self.phi(z)
        s = nearest_sqrt(phi, ref)
        if abs(s - ref) > 0.85 * abs(s + ref):
            return None, s
        return self.coef * (2.0 * s).conjugate() / abs(phi), s


def _event_functions(qd: RationalQD, params: IntegrationParams):
    events = []
    for i, zero in enumerate(qd.inventory.zeros):
        events.append(("zero_hit", i, lambda z, s, zero=zero: params.zero_hit_radius - abs(z - zero)))
    for j, (pole, _) in enumerate(qd.inventory.finite_poles):
        events.append(
            ("pole_capture", j, lambda z, s, pole=pole: params.pole_hit_radius - abs(z - pole))
        )
    events.append(("escape", None, lambda z, s: abs(z) - params.escape_radius))
    events.append(("max_length", None, lambda z, s: s - params.max_length))
    return events


def _integrate(field, z0: complex, sqrt0: complex, qd, theta, params, dense_ds=None):
    """Run the DP54 loop.  Returns (zs, ss, sqrts, termination, res_us, res_gmn)."""
    events = _event_functions(qd, params)
    exclude_initial = {
        (kind, idx)
        for kind, idx, g in events
        if kind in ("zero_hit", "pole_capture") and g(z0, 0.0) >= 0.0
    }

    zs, ss, sqrts = [z0], [0.0], [sqrt0]
    s, z, ref = 0.0, z0, sqrt0
    f0, ref = field(z, ref)
    if f0 is None:
        raise StepUnderflow("field ambiguous at the start point")
    h = min(params.max_step, 1e-3)
    phi_eval = field.phi
    critical = qd.inventory.critical_points()
    # the cap relaxes with coarse tolerances: it is part of the same
    # accuracy budget the embedded error controller enforces
    scale_cap = max(params.step_scale_cap, 0.5 * params.rel_tol**0.2)
    res_us = 0.0
    res_gmn = 0.0
    termination = None
    ks = [0j] * 7

    while termination is None:
        if h < STEP_FLOOR:
            raise StepUnderflow(f"step underflow at s = {s:.6g}, z = {z:.6g}")
        h = min(h, params.max_step)
        if critical:
            dmin = min(abs(z - p) for p in critical)
            h = min(h, max(scale_cap * abs(ref) * dmin, 1e-13))

        # unrolled Dormand-Prince stages (generator overhead dominates here)
        k1 = f0
        f2, stage_sqrt = field(z + h * (0.2 * k1), ref)
        if f2 is None:
            h *= 0.5
            continue
        f3, stage_sqrt = field(z + h * (0.075 * k1 + 0.225 * f2), ref)
        if f3 is None:
            h *= 0.5
            continue
        f4, stage_sqrt = field(
            z + h * ((44 / 45) * k1 + (-56 / 15) * f2 + (32 / 9) * f3), ref
        )
        if f4 is None:
            h *= 0.5
            continue
        f5, stage_sqrt = field(
            z
            + h
            * (
                (19372 / 6561) * k1
                + (-25360 / 2187) * f2
                + (64448 / 6561) * f3
                + (-212 / 729) * f4
            ),
            ref,
        )
        if f5 is None:
            h *= 0.5
            continue
        f6, stage_sqrt = field(
            z
            + h
            * (
                (9017 / 3168) * k1
                + (-355 / 33) * f2
                + (46732 / 5247) * f3
                + (49 / 176) * f4
                + (-5103 / 18656) * f5
            ),
            ref,
        )
        if f6 is None:
            h *= 0.5
            continue
        y1 = z + h * (
            (35 / 384) * k1
            + (500 / 1113) * f3
            + (125 / 192) * f4
            + (-2187 / 6784) * f5
            + (11 / 84) * f6
        )
        f7, stage_sqrt = field(y1, ref)
        if f7 is None:
            h *= 0.5
            continue
        ks[0], ks[1], ks[2], ks[3], ks[4], ks[5], ks[6] = k1, f2, f3, f4, f5, f6, f7
        err_vec = h * (
            (71 / 57600) * k1
            + (-71 / 16695) * f3
            + (71 / 1920) * f4
            + (-17253 / 339200) * f5
            + (22 / 525) * f6
            + (-1 / 40) * f7
        )
        scale = params.abs_tol + params.rel_tol * max(abs(z), abs(y1))
        err = abs(err_vec) / scale
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** (-0.2))
            continue

        seg = _DenseSegment(s, h, z, y1, ks)
        s1 = s + h

        # residual monitors at the step midpoint, from the dense interpolant
        zm = seg.eval(s + 0.5 * h)
        dzm = seg.deriv(s + 0.5 * h)
        sq_m = nearest_sqrt(phi_eval(zm), ref)
        res_us = max(res_us, abs(abs(sq_m * dzm / _speed_norm(field)) - 1.0))
        res_gmn = max(
            res_gmn,
            abs((complex(math.cos(theta), -math.sin(theta)) * sq_m * dzm).imag)
            / _speed_norm(field),
        )

        # event scan over the step: endpoint plus interior dense samples
        hit = None
        samples = [s + fr * h for fr in (0.25, 0.5, 0.75, 1.0)]
        for kind, idx, g in events:
            if (kind, idx) in exclude_initial:
                if g(seg.eval(s1), s1) < 0.0:
                    exclude_initial.discard((kind, idx))
                continue
            lo, glo = s, g(z, s)
            s_evt = None
            for sv in samples:
                gv = g(seg.eval(sv), sv)
                if gv >= 0.0:
                    s_evt = _bisect_event(g, seg, lo, sv)
                    break
                lo, glo = sv, gv
            if s_evt is not None and (hit is None or _event_beats(kind, s_evt, hit)):
                hit = (kind, idx, s_evt)

        # FSAL: stage 7 already evaluated the field at y1
        f1, ref_next = f7, stage_sqrt

        if hit is not None:
            kind, idx, s_evt = hit
            z_evt = seg.eval(s_evt)
            _emit(zs, ss, sqrts, seg, phi_eval, ref, s, s_evt, dense_ds)
            zs.append(z_evt)
            ss.append(s_evt)
            sqrts.append(nearest_sqrt(phi_eval(z_evt), ref))
            termination = Termination(kind, idx)
            break

        _emit(zs, ss, sqrts, seg, phi_eval, ref, s, s1, dense_ds)
        zs.append(y1)
        ss.append(s1)
        sqrts.append(ref_next)

        z, s, ref, f0 = y1, s1, ref_next, f1
        h *= min(5.0, max(0.2, 0.9 * (err + 1e-16) ** (-0.2)))

    return (
        np.array(zs, dtype=complex),
        np.array(ss, dtype=float),
        np.array(sqrts, dtype=complex),
        termination,
        res_us,
        res_gmn,
    )


def _speed_norm(field) -> float:
    # |sqrt(phi) dz/ds| equals 1 for the trajectory field, 2 for flow lines
    return 2.0 if isinstance(field, _FlowField) else 1.0


def _event_beats(kind: str, s_evt: float, current) -> bool:
    ckind, _, cs = current
    if s_evt < cs - EVENT_S_TOL:
        return True
    if s_evt > cs + EVENT_S_TOL:
        return False
    return _PRECEDENCE[kind] < _PRECEDENCE[ckind]


def _bisect_event(g, seg, lo: float, hi: float) -> float:
    glo = g(seg.eval(lo), lo)
    if glo >= 0.0:
        return lo
    while hi - lo > EVENT_S_TOL:
        mid = 0.5 * (lo + hi)
        if g(seg.eval(mid), mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def _emit(zs, ss, sqrts, seg, phi_eval, ref, s_from, s_to, dense_ds):
    """Append interior dense samples so stored spacing stays <= dense_ds."""
    if dense_ds is None or s_to - s_from <= dense_ds:
        return
    n = int(math.ceil((s_to - s_from) / dense_ds))
    prev = ref
    for i in range(1, n):
        sv = s_from + (s_to - s_from) * i / n
        zv = seg.eval(sv)
        sq = nearest_sqrt(phi_eval(zv), prev)
        zs.append(zv)
        ss.append(sv)
        sqrts.append(sq)
        prev = sq


def trace(
    qd: RationalQD,
    start: SheetPoint,
    direction_sign: int,
    theta: float,
    params: IntegrationParams,
    dense_ds: float | None = None,
) -> Trajectory:
    """Integrate the phase-theta trajectory through ``start`` until an event.

    Event precedence when several fire in one step: zero hit beats pole
    capture beats escape beats the length cap.
    """
    params = params.validated()
    if direction_sign not in (+1, -1):
        raise ValueError("direction_sign must be +1 or -1")
    start.validate(qd)
    for p in qd.inventory.critical_points():
        if abs(start.z - p) <= params.zero_hit_radius:
            raise ValueError("start point is inside the zero_hit_radius of a critical point")

    field = _SheetField(qd, theta, direction_sign)
    zs, ss, sqrts, term, res_us, res_gmn = _integrate(
        field, complex(start.z), complex(start.sqrt_value), qd, theta, params, dense_ds
    )
    return Trajectory(
        zs=zs,
        ss=ss,
        sqrts=sqrts,
        phase=float(theta),
        direction=direction_sign,
        termination=term,
        max_unit_speed_residual=res_us,
        max_gmn_residual=res_gmn,
    )


def seed_wall(qd: RationalQD, zero_index: int, k: int, theta: float, params: IntegrationParams):
    """Seed point and outward sheet for wall (zero, k) at phase theta.

    The seed sits at ``seed_offset`` along the exact asymptotic angle
    (2 theta + 2 pi k - arg c)/3; the sheet is the one whose outward
    integral satisfies e^{-i theta} int sqrt(phi) dz > 0.
    """
    zero = qd.inventory.zeros[zero_index]
    frame = local_zero_frame(qd, zero)
    argc = float(np.angle(frame.c))
    alpha = (2.0 * theta + 2.0 * math.pi * k - argc) / 3.0
    z0 = zero + params.seed_offset * complex(math.cos(alpha), math.sin(alpha))
    # outward-positive sheet: arg sqrt(phi) ~ theta - alpha
    phi0 = qd(z0)
    target = abs(canonical_sqrt(phi0)) * complex(
        math.cos(theta - alpha), math.sin(theta - alpha)
    )
    sq = nearest_sqrt(phi0, target)
    sheet = +1 if abs(sq - canonical_sqrt(phi0)) <= abs(sq + canonical_sqrt(phi0)) else -1
    return SheetPoint(complex(z0), sheet, complex(sq)), frame


def trace_wall(
    qd: RationalQD,
    zero_index: int,
    k: int,
    theta: float,
    params: IntegrationParams,
    dense_ds: float | None = None,
) -> Trajectory:
    """Trace wall k of the given zero outward."""
    params = params.validated(qd)
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    start, _ = seed_wall(qd, zero_index, k, theta, params)
    traj = trace(qd, start, +1, theta, params, dense_ds=dense_ds)
    return replace(traj, parent_zero=zero_index, wall_k=k)


def flowline(
    qd: RationalQD,
    start: complex,
    lift_pair: tuple[int, int],
    theta: float,
    params: IntegrationParams,
    dense_ds: float | None = None,
) -> np.ndarray:
    """Integrate the holomorphic flow line through ``start`` for the ordered
    lift pair; returns the polyline of vertices.

    The field is -e^{i theta} conj(sqrt(phi)_1 - sqrt(phi)_2)/|phi|, driven
    by the difference of the two lift primitives; equal lifts are rejected.
    """
    params = params.validated()
    s1, s2 = lift_pair
    if s1 == s2:
        raise DegenerateLiftPair("flow line requires two distinct lifts")
    if s1 not in (1, -1) or s2 not in (1, -1):
        raise ValueError("lift signs must be +1 or -1")
    z0 = complex(start)
    for p in qd.inventory.critical_points():
        if abs(z0 - p) <= params.zero_hit_radius:
            raise ValueError("start point is inside the zero_hit_radius of a critical point")
    sqrt0 = s1 * canonical_sqrt(qd(z0))
    field = _FlowField(qd, theta)
    zs, _, _, _, _, _ = _integrate(field, z0, sqrt0, qd, theta, params, dense_ds)
    return zs


def horizontal_through(
    qd: RationalQD,
    z: complex,
    theta: float,
    params: IntegrationParams,
    dense_ds: float | None = None,
) -> tuple[Trajectory, Trajectory]:
    """The two halves of the maximal phase-theta trajectory through z, on
    the principal sheet."""
    start = SheetPoint.at(qd, complex(z), +1)
    fwd = trace(qd, start, +1, theta, params, dense_ds=dense_ds)
    bwd = trace(qd, start, -1, theta, params, dense_ds=dense_ds)
    return fwd, bwd
