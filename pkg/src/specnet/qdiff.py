"""Rational quadratic differentials phi = (P/Q) dz^2 on the Riemann sphere.

Locates and classifies critical points, evaluates phi, and performs
analytic continuation of sqrt(phi) along polyline paths, which is the
primitive every higher module is built on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npoly
from scipy.integrate import quad

from .errors import (
    CommonFactor,
    DegenerateZero,
    NonSimpleZero,
    PathTooCloseToCriticalPoint,
    PoleEvaluation,
    RootFindingFailure,
    SubdivisionCapExceeded,
)

# Clustering tolerance is CLUSTER_TOL_BASE * (1 + max root magnitude).
CLUSTER_TOL_BASE = 1e-8
NEWTON_MAX_ITER = 50
ROOT_RESIDUAL_REL = 1e-12
# Consecutive sqrt samples along a continuation path must differ by less
# than this relative amount, else the segment is subdivided.
SQRT_STEP_REL = 0.5
SUBDIVISION_CAP = 1 << 16
QUAD_REL_TOL = 1e-10
SHEET_CONSISTENCY_REL = 1e-10
DEFAULT_SAFETY_RADIUS = 1e-7


def canonical_sqrt(w: complex) -> complex:
    """Principal square root: Re >= 0, and Im > 0 on the negative real axis."""
    return complex(np.sqrt(complex(w)))


def _poly_trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    if c.size == 0:
        raise ValueError("empty coefficient list")
    scale = np.max(np.abs(c))
    if scale == 0.0:
        raise ValueError("identically zero polynomial")
    k = c.size - 1
    while k > 0 and abs(c[k]) <= 1e-14 * scale:
        k -= 1
    return c[: k + 1].copy()


def _newton_polish(coeffs: np.ndarray, z0: complex) -> complex:
    dcoeffs = npoly.polyder(coeffs)
    z = z0
    for _ in range(NEWTON_MAX_ITER):
        p = npoly.polyval(z, coeffs)
        dp = npoly.polyval(z, dcoeffs)
        if dp == 0:
            break
        step = p / dp
        z = z - step
        if abs(step) <= 1e-16 * (1.0 + abs(z)):
            break
    return complex(z)


def _residual_scale(coeffs: np.ndarray, z: complex) -> float:
    powers = np.abs(z) ** np.arange(len(coeffs))
    return float(np.sum(np.abs(coeffs) * powers)) + float(np.abs(coeffs).max())


def _cluster(points: list[complex], tol: float) -> list[list[complex]]:
    clusters: list[list[complex]] = []
    for p in sorted(points, key=lambda w: (w.real, w.imag)):
        for cl in clusters:
            if abs(p - cl[0]) <= tol:
                cl.append(p)
                break
        else:
            clusters.append([p])
    return clusters


@dataclass(frozen=True)
class CriticalInventory:
    """Zeroes and poles of a rational quadratic differential.

    ``pole_at_infinity`` is the pole order at z = infinity computed in the
    w = 1/z chart (deg P - deg Q + 4); ``None`` when infinity is a regular
    point or a zero.
    """

    zeros: tuple[complex, ...]
    finite_poles: tuple[tuple[complex, int], ...]
    pole_at_infinity: int | None
    has_pole: bool
    has_finite_critical_point: bool
    complete: bool

    @property
    def is_gmn(self) -> bool:
        return self.has_pole and self.has_finite_critical_point

    def critical_points(self) -> list[complex]:
        """All finite critical points (zeros and poles)."""
        return list(self.zeros) + [p for p, _ in self.finite_poles]


@dataclass(frozen=True)
class RationalQD:
    """phi = (P/Q) dz^2 with ascending-degree coefficient arrays."""

    numerator: np.ndarray
    denominator: np.ndarray
    inventory: CriticalInventory = field(compare=False)

    def __call__(self, z: complex) -> complex:
        return evaluate(self, z)

    def phi_prime(self, z: complex) -> complex:
        """d(P/Q)/dz at a non-pole point."""
        p = npoly.polyval(z, self.numerator)
        dp = npoly.polyval(z, npoly.polyder(self.numerator))
        q = npoly.polyval(z, self.denominator)
        dq = npoly.polyval(z, npoly.polyder(self.denominator)) if len(self.denominator) > 1 else 0.0
        return complex((dp * q - p * dq) / (q * q))

    def min_critical_separation(self) -> float:
        pts = self.inventory.critical_points()
        if len(pts) < 2:
            return float("inf")
        return min(
            abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1 :]
        )


@dataclass(frozen=True)
class SheetPoint:
    """A point of the spectral double cover: base point plus sqrt(phi) branch.

    ``sheet`` is +1 when ``sqrt_value`` equals the principal square root of
    phi(z), -1 for the opposite branch.
    """

    z: complex
    sheet: int
    sqrt_value: complex

    @staticmethod
    def at(qd: RationalQD, z: complex, sheet: int = +1) -> "SheetPoint":
        if sheet not in (+1, -1):
            raise ValueError("sheet must be +1 or -1")
        value = sheet * canonical_sqrt(evaluate(qd, z))
        return SheetPoint(complex(z), sheet, value)

    def validate(self, qd: RationalQD) -> None:
        phi = evaluate(qd, self.z)
        if abs(self.sqrt_value**2 - phi) > SHEET_CONSISTENCY_REL * (1.0 + abs(phi)):
            raise ValueError("sqrt_value is not a square root of phi(z)")


def construct(numerator, denominator) -> RationalQD:
    """Build and validate a rational quadratic differential.

    Raises NonSimpleZero for clustered numerator roots and CommonFactor when
    P and Q share a root.  GMN / completeness violations are recorded as
    flags on the inventory, not raised here; operations that require those
    properties raise on use.
    """
    p = _poly_trim(numerator)
    q = _poly_trim(denominator)

    zeros = find_zeros_raw(p) if len(p) > 1 else []
    qroots = find_zeros_raw(q, allow_multiple=True) if len(q) > 1 else []

    all_mags = [abs(r) for r in zeros + qroots]
    tol = CLUSTER_TOL_BASE * (1.0 + (max(all_mags) if all_mags else 0.0))

    for r in zeros:
        for s in qroots:
            if abs(r - s) <= tol:
                raise CommonFactor(
                    f"numerator and denominator share a root near {r:.6g}"
                )

    zero_clusters = _cluster(zeros, tol)
    for cl in zero_clusters:
        if len(cl) > 1:
            raise NonSimpleZero(
                f"numerator root near {cl[0]:.6g} has multiplicity {len(cl)}"
            )
    zeros = [cl[0] for cl in zero_clusters]

    pole_clusters = _cluster(qroots, tol)
    finite_poles = tuple(
        (float(np.mean(np.real(cl))) + 1j * float(np.mean(np.imag(cl))), len(cl))
        for cl in pole_clusters
    )

    # Order at infinity via w = 1/z: phi(1/w) w^-4 dw^2.
    inf_order = (len(p) - 1) - (len(q) - 1) + 4
    pole_at_infinity = inf_order if inf_order >= 1 else None

    has_pole = bool(finite_poles) or pole_at_infinity is not None
    has_fcp = len(zeros) > 0
    complete = all(order >= 2 for _, order in finite_poles) and (
        pole_at_infinity is None or pole_at_infinity >= 2
    )

    inventory = CriticalInventory(
        zeros=tuple(sorted(zeros, key=lambda w: (w.real, w.imag))),
        finite_poles=finite_poles,
        pole_at_infinity=pole_at_infinity,
        has_pole=has_pole,
        has_finite_critical_point=has_fcp,
        complete=complete,
    )
    return RationalQD(numerator=p, denominator=q, inventory=inventory)


def evaluate(qd: RationalQD, z: complex) -> complex:
    """phi(z) = P(z)/Q(z); raises PoleEvaluation near a root of Q."""
    qv = npoly.polyval(z, qd.denominator)
    scale = _residual_scale(qd.denominator, z)
    if abs(qv) <= 1e-14 * scale:
        raise PoleEvaluation(f"phi evaluated at a pole: z = {z:.6g}")
    return complex(npoly.polyval(z, qd.numerator) / qv)


def find_zeros_raw(coeffs: np.ndarray, allow_multiple: bool = False) -> list[complex]:
    """Companion-matrix roots of an ascending-coefficient polynomial,
    polished by Newton iteration.  Certifies residual and (unless
    ``allow_multiple``) pairwise separation."""
    coeffs = _poly_trim(coeffs)
    if len(coeffs) == 1:
        return []
    roots = [complex(r) for r in npoly.polyroots(coeffs)]
    polished = []
    for r in roots:
        z = _newton_polish(coeffs, r)
        if abs(npoly.polyval(z, coeffs)) > ROOT_RESIDUAL_REL * _residual_scale(coeffs, z):
            # Multiple roots defeat plain Newton; keep the companion value for
            # the multiplicity report, fail only for the simple-root path.
            if not allow_multiple:
                raise RootFindingFailure(
                    f"Newton polish stalled at z = {z:.6g}, residual too large"
                )
            z = r
        polished.append(z)
    return polished


def find_zeros(qd: RationalQD) -> list[complex]:
    """Zeroes of phi.  Already validated at construction; recomputed and
    re-certified here so the operation is usable standalone."""
    if len(qd.numerator) == 1:
        return []
    zeros = find_zeros_raw(qd.numerator)
    tol = CLUSTER_TOL_BASE * (1.0 + max(abs(r) for r in zeros))
    for i, a in enumerate(zeros):
        for b in zeros[i + 1 :]:
            if abs(a - b) <= tol:
                raise NonSimpleZero(f"roots {a:.6g} and {b:.6g} cluster")
    return sorted(zeros, key=lambda w: (w.real, w.imag))


def nearest_sqrt(phi_value: complex, reference: complex) -> complex:
    """The square root of ``phi_value`` closer to ``reference``."""
    s = canonical_sqrt(phi_value)
    return s if abs(s - reference) <= abs(s + reference) else -s


def _segment_critical_distance(z0: complex, z1: complex, pts: list[complex]) -> float:
    """Min distance from segment [z0, z1] to any of ``pts``."""
    if not pts:
        return float("inf")
    d = z1 - z0
    dd = abs(d) ** 2
    best = float("inf")
    for p in pts:
        if dd == 0.0:
            best = min(best, abs(p - z0))
            continue
        t = ((p - z0).real * d.real + (p - z0).imag * d.imag) / dd
        t = min(1.0, max(0.0, t))
        best = min(best, abs(z0 + t * d - p))
    return best


def _check_path_clearance(
    qd: RationalQD,
    path: list[complex],
    safety_radius: float,
    skip_endpoint_zero: bool = False,
) -> None:
    pts = qd.inventory.critical_points()
    for i in range(len(path) - 1):
        z0, z1 = path[i], path[i + 1]
        check_pts = pts
        if skip_endpoint_zero and (i == 0 or i == len(path) - 2):
            ends = []
            if i == 0:
                ends.append(path[0])
            if i == len(path) - 2:
                ends.append(path[-1])
            check_pts = [
                p for p in pts if all(abs(p - e) > safety_radius for e in ends)
            ]
            # Interior of an end segment may still approach a *different*
            # critical point; those are kept in check_pts above.
        d = _segment_critical_distance(z0, z1, check_pts)
        if d <= safety_radius:
            raise PathTooCloseToCriticalPoint(
                f"segment {i} passes within {d:.3g} of a critical point"
            )


def _refine_segment(qd: RationalQD, z0: complex, z1: complex, sqrt0: complex):
    """Subdivide [z0, z1] until consecutive tracked sqrt values vary slowly.

    Returns the ordered list of (z, sqrt) samples including both endpoints.
    """
    samples = [(z0, sqrt0)]
    budget = [SUBDIVISION_CAP]

    def recurse(a: complex, sa: complex, b: complex) -> complex:
        sb = nearest_sqrt(evaluate(qd, b), sa)
        small = abs(sb - sa) < SQRT_STEP_REL * max(abs(sa), abs(sb))
        if small or abs(b - a) < 1e-15 * (1.0 + abs(a)):
            samples.append((b, sb))
            return sb
        budget[0] -= 1
        if budget[0] <= 0:
            raise SubdivisionCapExceeded(
                "sqrt variation not tamed within the subdivision cap"
            )
        mid = 0.5 * (a + b)
        sm = recurse(a, sa, mid)
        return recurse(mid, sm, b)

    recurse(z0, sqrt0, z1)
    return samples


def _quad_complex(f, a: float, b: float, rel_tol: float = QUAD_REL_TOL):
    re, _ = quad(lambda t: f(t).real, a, b, epsabs=1e-14, epsrel=rel_tol, limit=200)
    im, _ = quad(lambda t: f(t).imag, a, b, epsabs=1e-14, epsrel=rel_tol, limit=200)
    return complex(re, im)


def sqrt_continue(
    qd: RationalQD,
    path,
    initial: SheetPoint,
    safety_radius: float = DEFAULT_SAFETY_RADIUS,
    allow_singular_endpoints: bool = False,
):
    """Continue sqrt(phi) along a polyline, accumulating int sqrt(phi) dz.

    The sheet is chosen at every sample by continuity (nearest square
    root); each polyline segment is auto-subdivided until the tracked
    values vary slowly, then integrated by adaptive Gauss-Kronrod to
    relative tolerance 1e-10.

    Returns ``(final_sheet_point, integral)``.
    """
    path = [complex(v) for v in path]
    if len(path) < 2:
        raise ValueError("path needs at least two vertices")
    if abs(initial.z - path[0]) > 1e-12 * (1.0 + abs(path[0])):
        raise ValueError("initial.z must coincide with the first path vertex")
    initial.validate(qd)
    _check_path_clearance(
        qd, path, safety_radius, skip_endpoint_zero=allow_singular_endpoints
    )

    integral = 0.0 + 0.0j
    current = initial.sqrt_value
    z_cur = path[0]
    for z_next in path[1:]:
        if z_next == z_cur:
            continue
        samples = _refine_segment(qd, z_cur, z_next, current)
        for (a, sa), (b, sb) in zip(samples, samples[1:]):
            dz = b - a

            def integrand(t, a=a, dz=dz, sa=sa, sb=sb):
                ref = sa + t * (sb - sa)
                return nearest_sqrt(evaluate(qd, a + t * dz), ref) * dz

            integral += _quad_complex(integrand, 0.0, 1.0)
        current = samples[-1][1]
        z_cur = z_next

    sheet = +1 if abs(current - canonical_sqrt(evaluate(qd, z_cur))) <= abs(
        current + canonical_sqrt(evaluate(qd, z_cur))
    ) else -1
    final = SheetPoint(z_cur, sheet, current)
    return final, integral


def phi_length(
    qd: RationalQD,
    path,
    safety_radius: float = DEFAULT_SAFETY_RADIUS,
    allow_singular_endpoints: bool = False,
) -> float:
    """Length of a polyline in the |phi| |dz|^2 metric.

    Endpoints may sit at zeroes of phi when ``allow_singular_endpoints``:
    the integrand |sqrt(phi)| ~ r^(1/2) stays integrable there.
    """
    path = [complex(v) for v in path]
    if len(path) < 2:
        raise ValueError("path needs at least two vertices")
    _check_path_clearance(
        qd, path, safety_radius, skip_endpoint_zero=allow_singular_endpoints
    )
    total = 0.0
    for a, b in zip(path, path[1:]):
        if b == a:
            continue
        dz = b - a

        def integrand(t, a=a, dz=dz):
            return abs(canonical_sqrt(evaluate(qd, a + t * dz))) * abs(dz)

        val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=QUAD_REL_TOL, limit=200)
        total += val
    return float(total)


@dataclass(frozen=True)
class ZeroFrame:
    """Local data at a simple zero: leading coefficient, horizontal wall
    angles, and the branch-cut direction (opposite wall 0)."""

    zero: complex
    c: complex
    wall_angles: tuple[float, float, float]
    branch_cut_angle: float


def local_zero_frame(qd: RationalQD, zero: complex) -> ZeroFrame:
    """Frame at a validated simple zero: phi ~ c (z - zero) with c != 0.

    Wall angles are the theta = 0 asymptotic directions
    (2 pi k - arg c) / 3, k = 0, 1, 2, normalized to [0, 2 pi).
    """
    c = qd.phi_prime(zero)
    scale = max(abs(x) for x in qd.numerator)
    if abs(c) <= 1e-12 * (1.0 + scale):
        raise DegenerateZero(f"|phi'({zero:.6g})| = {abs(c):.3g}")
    argc = float(np.angle(c))
    angles = tuple(
        float(np.mod((2.0 * np.pi * k - argc) / 3.0, 2.0 * np.pi)) for k in range(3)
    )
    cut = float(np.mod(angles[0] + np.pi, 2.0 * np.pi))
    return ZeroFrame(zero=complex(zero), c=complex(c), wall_angles=angles, branch_cut_angle=cut)


def wall_angle(frame: ZeroFrame, k: int, theta: float) -> float:
    """Asymptotic seed angle of wall k at phase theta:
    (2 theta + 2 pi k - arg c) / 3."""
    argc = float(np.angle(frame.c))
    return float(np.mod((2.0 * theta + 2.0 * np.pi * k - argc) / 3.0, 2.0 * np.pi))


def plus_label_sqrt(
    frame: ZeroFrame, qd: RationalQD, z: complex, cut_angle: float | None = None
) -> complex:
    """The '+'-labelled branch of sqrt(phi) at a point near the zero.

    Labels follow the branch cut opposite wall 0: writing z - zero =
    r e^{i psi} with psi taken in the window (cut - 2 pi, cut), the
    +-branch has argument ~ (arg c + psi) / 2.  At phase theta the cut
    rotates with wall 0; pass the rotated angle via ``cut_angle``.
    """
    u = z - frame.zero
    psi = float(np.angle(u))
    cut = frame.branch_cut_angle if cut_angle is None else cut_angle
    # place psi in (cut - 2*pi, cut)
    while psi >= cut:
        psi -= 2.0 * np.pi
    while psi < cut - 2.0 * np.pi:
        psi += 2.0 * np.pi
    target_arg = (float(np.angle(frame.c)) + psi) / 2.0
    phi = evaluate(qd, z)
    s = canonical_sqrt(phi)
    ref = abs(s) * np.exp(1j * target_arg)
    return s if abs(s - ref) <= abs(s + ref) else -s
