"""Integral curves and flows of derivations.

The derivation's component tuple is read as an ambient vector field
V = sum_i b_i d/dx_i, integrated by an adaptive Runge-Kutta 5(4) pair
with dense output, and the curve is restricted to the connected
component of the membership preimage containing t = 0. Exit times are
located by a sign-change scan over the dense output followed by
bisection; grazing contacts below the scan resolution can be missed,
which the dense membership audit at resolution ``dt_check`` mitigates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import RK45

from . import expr
from .expr import DomainError, Expr
from .derivation import Derivation, CheckReport, apply as derivation_apply
from .dspace import EmbeddedSpace, RestrictedFunction, SpaceError

_EXIT_SCAN_SUBDIVISIONS = 16

REASON_MEMBERSHIP = "left_membership"
REASON_HORIZON = "horizon_reached"
REASON_BLOWUP = "blow_up"
REASON_DOMAIN = "domain_error"


class FlowError(Exception):
    pass


class NonMemberSeedError(FlowError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Central numeric configuration for integration and event location."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    event_tol: float = 1e-10
    dt_check: float | None = None  # membership audit grid; default horizon/1e4
    horizon: float = 100.0
    blow_up_norm: float = 1e8
    max_step: float | None = None  # default horizon/100
    project_equalities: bool = False

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "event_tol", "horizon", "blow_up_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def effective_dt_check(self) -> float:
        return self.dt_check if self.dt_check is not None else self.horizon / 1e4

    @property
    def effective_max_step(self) -> float:
        return self.max_step if self.max_step is not None else self.horizon / 100.0


@dataclass(frozen=True)
class AmbientVectorField:
    """The derivation's components read as a vector field on a
    neighborhood of M in R^n."""

    dimension: int
    components: tuple[Expr, ...]

    @classmethod
    def from_derivation(cls, v: Derivation) -> "AmbientVectorField":
        return cls(v.space.ambient_dim, v.components)

    def __call__(self, y: Sequence[float]) -> np.ndarray:
        return np.array([expr.compiled(b)(y) for b in self.components])


class AmbientTrajectory:
    """Dense one-sided trajectory in internal time tau >= 0; for
    direction -1 it represents t = -tau."""

    def __init__(self, direction: int, y0: np.ndarray):
        self.direction = direction
        self.y0 = np.asarray(y0, dtype=float)
        self.segments: list = []  # scipy DenseOutput, increasing tau
        self.t_end = 0.0
        self.end_reason = REASON_HORIZON

    def value(self, tau: float) -> np.ndarray:
        if tau == 0.0 or not self.segments:
            return self.y0.copy()
        tau = min(tau, self.t_end)
        for seg in self.segments:
            if tau <= seg.t:
                return np.asarray(seg(tau), dtype=float)
        return np.asarray(self.segments[-1](self.t_end), dtype=float)


def integrate_ambient(
    V: AmbientVectorField,
    p: Sequence[float],
    direction: int,
    tol: Tolerances,
) -> AmbientTrajectory:
    """Adaptive RK5(4) trajectory of dy/dtau = direction * V(y) from p,
    with per-step dense output, up to horizon, blow-up, or a domain
    error in the field evaluation."""
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    y0 = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise FlowError("seed point is not finite")
    V(y0)  # immediate domain error at the seed propagates

    def rhs(_t, y):
        return direction * V(y)

    traj = AmbientTrajectory(direction, y0)
    solver = RK45(
        rhs, 0.0, y0, t_bound=tol.horizon,
        rtol=tol.rel_tol, atol=tol.abs_tol, max_step=tol.effective_max_step,
    )
    while solver.status == "running":
        try:
            solver.step()
        except DomainError:
            traj.end_reason = REASON_DOMAIN
            return traj
        if solver.status == "failed":
            traj.end_reason = REASON_DOMAIN
            return traj
        seg = solver.dense_output()
        traj.segments.append(seg)
        traj.t_end = solver.t
        if np.linalg.norm(solver.y) > tol.blow_up_norm:
            traj.t_end = _bisect_norm_crossing(seg, tol)
            traj.end_reason = REASON_BLOWUP
            return traj
    traj.end_reason = REASON_HORIZON
    return traj


def _bisect_norm_crossing(seg, tol: Tolerances) -> float:
    lo, hi = seg.t_old, seg.t
    while hi - lo > tol.event_tol:
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(seg(mid)) > tol.blow_up_norm:
            hi = mid
        else:
            lo = mid
    return lo


# ---------------------------------------------------------------------------
# Membership exit detection


def _violation(space: EmbeddedSpace, y: np.ndarray) -> bool:
    """Strict exit predicate: an inequality is positive or an equality
    leaves its tolerance band (band needed: integrator drift makes |g|
    slightly nonzero immediately). Domain errors count as exits."""
    try:
        for g in space.equalities:
            if abs(expr.compiled(g)(y)) > space.tol_eq:
                return True
        for h in space.inequalities:
            if expr.compiled(h)(y) > 0.0:
                return True
    except DomainError:
        return True
    return False


def _find_exit(
    space: EmbeddedSpace, traj: AmbientTrajectory, tol: Tolerances
) -> float | None:
    """First internal time tau at which the trajectory violates a
    constraint, localized by bisection to event_tol; None if it never
    does within the computed trajectory."""
    last_good = 0.0
    for seg in traj.segments:
        tau = _scan_segment(space, traj, seg, last_good, tol)
        if tau is not None:
            return tau
        last_good = seg.t
    return None


def _scan_segment(space, traj, seg, last_good, tol: Tolerances) -> float | None:
    span = seg.t - seg.t_old
    for k in range(1, _EXIT_SCAN_SUBDIVISIONS + 1):
        tau = seg.t_old + span * k / _EXIT_SCAN_SUBDIVISIONS
        if _violation(space, traj.value(tau)):
            lo, hi = last_good, tau
            while hi - lo > tol.event_tol:
                mid = 0.5 * (lo + hi)
                if _violation(space, traj.value(mid)):
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        last_good = tau
    return None


# ---------------------------------------------------------------------------
# Integral curves


@dataclass(frozen=True)
class MembershipAudit:
    ok: bool
    points_checked: int
    worst_t: float | None = None
    reason: str = ""


@dataclass(frozen=True)
class IntegralCurve:
    """Restriction of the ambient trajectory to the connected component
    of the membership preimage containing t = 0."""

    seed: np.ndarray
    space: EmbeddedSpace
    t_min: float
    t_max: float
    reason_backward: str
    reason_forward: str
    forward: AmbientTrajectory
    backward: AmbientTrajectory
    audit: MembershipAudit

    @property
    def interval(self) -> tuple[float, float]:
        return (self.t_min, self.t_max)

    @property
    def is_point(self) -> bool:
        return self.t_max - self.t_min == 0.0

    def __call__(self, t: float) -> np.ndarray:
        slack = 1e-12 * (1.0 + abs(self.t_min) + abs(self.t_max))
        if t < self.t_min - slack or t > self.t_max + slack:
            raise FlowError(
                f"time {t} outside the curve's interval [{self.t_min}, {self.t_max}]"
            )
        if t == 0.0:
            return self.seed.copy()
        return self.forward.value(t) if t > 0 else self.backward.value(-t)

    def sample_times(self, count: int) -> np.ndarray:
        if self.is_point:
            return np.array([0.0])
        return np.linspace(self.t_min, self.t_max, count)


def maximal_curve(v: Derivation, p: Sequence[float], tol: Tolerances | None = None) -> IntegralCurve:
    """Unique maximal integral curve of v through p: integrate the
    ambient field both ways, cut at the first constraint exit in each
    direction (bisected to event_tol), and audit membership on a dense
    grid over the resulting interval."""
    tol = tol or Tolerances()
    space = v.space
    p = np.asarray(p, dtype=float)
    ok, reason = space.membership(p, diagnostics=True)
    if not ok:
        raise NonMemberSeedError(f"seed {p.tolist()} is not a member: {reason}")
    V = AmbientVectorField.from_derivation(v)

    ends: dict[int, tuple[float, str, AmbientTrajectory]] = {}
    for direction in (+1, -1):
        traj, tau_exit = _integrate_until_exit(V, space, p, direction, tol)
        if tau_exit is not None:
            ends[direction] = (direction * tau_exit, REASON_MEMBERSHIP, traj)
        else:
            ends[direction] = (direction * traj.t_end, traj.end_reason, traj)

    t_max, reason_fwd, fwd = ends[+1]
    t_min, reason_bwd, bwd = ends[-1]
    # outward boundary seed: both exits collapse onto t = 0. Tangential
    # exits can only be localized to sqrt(machine eps) by evaluating the
    # constraint in doubles, so the collapse window allows that slack.
    point_tol = max(tol.event_tol, 4.0 * math.sqrt(np.finfo(float).eps))
    if reason_fwd == REASON_MEMBERSHIP and reason_bwd == REASON_MEMBERSHIP:
        if t_max <= point_tol and -t_min <= point_tol:
            t_min = t_max = 0.0
    audit = _membership_audit(space, p, fwd, bwd, t_min, t_max, tol)
    return IntegralCurve(
        seed=p, space=space, t_min=t_min, t_max=t_max,
        reason_backward=reason_bwd, reason_forward=reason_fwd,
        forward=fwd, backward=bwd, audit=audit,
    )


def _integrate_until_exit(
    V: AmbientVectorField,
    space: EmbeddedSpace,
    p: np.ndarray,
    direction: int,
    tol: Tolerances,
) -> tuple[AmbientTrajectory, float | None]:
    """Integrate one time direction, scanning each dense segment for a
    constraint exit as it is produced and stopping at the first one.
    With ``project_equalities`` the integrator is restarted from the
    Newton-projected state after every accepted step."""
    y0 = np.asarray(p, dtype=float)
    V(y0)
    project = bool(tol.project_equalities and space.equalities)
    grads = (
        [[expr.diff(g, i) for i in range(space.ambient_dim)] for g in space.equalities]
        if project
        else None
    )

    def rhs(_t, y):
        return direction * V(y)

    def make_solver(t, y):
        return RK45(
            rhs, t, y, t_bound=tol.horizon,
            rtol=tol.rel_tol, atol=tol.abs_tol, max_step=tol.effective_max_step,
        )

    traj = AmbientTrajectory(direction, y0)
    solver = make_solver(0.0, y0)
    last_good = 0.0
    while solver.status == "running":
        try:
            solver.step()
        except DomainError:
            traj.end_reason = REASON_DOMAIN
            return traj, None
        if solver.status == "failed":
            traj.end_reason = REASON_DOMAIN
            return traj, None
        seg = solver.dense_output()
        traj.segments.append(seg)
        traj.t_end = solver.t
        tau_exit = _scan_segment(space, traj, seg, last_good, tol)
        if tau_exit is not None:
            return traj, tau_exit
        last_good = seg.t
        if np.linalg.norm(solver.y) > tol.blow_up_norm:
            traj.t_end = _bisect_norm_crossing(seg, tol)
            traj.end_reason = REASON_BLOWUP
            return traj, None
        if project:
            y_proj = space._project(solver.y, grads)
            if y_proj is not None and not np.array_equal(y_proj, solver.y):
                solver = make_solver(solver.t, y_proj)
    traj.end_reason = REASON_HORIZON
    return traj, None


def _membership_audit(
    space: EmbeddedSpace,
    seed: np.ndarray,
    fwd: AmbientTrajectory,
    bwd: AmbientTrajectory,
    t_min: float,
    t_max: float,
    tol: Tolerances,
) -> MembershipAudit:
    width = t_max - t_min
    if width == 0.0:
        return MembershipAudit(ok=True, points_checked=1)
    n = int(min(max(math.ceil(width / tol.effective_dt_check), 3), 2001))
    for t in np.linspace(t_min, t_max, n):
        y = seed if t == 0.0 else (fwd.value(t) if t > 0 else bwd.value(-t))
        ok, reason = space.membership(y, diagnostics=True)
        if not ok:
            return MembershipAudit(False, n, float(t), reason)
    return MembershipAudit(ok=True, points_checked=n)


# ---------------------------------------------------------------------------
# Flows


@dataclass(frozen=True)
class FlowResult:
    """Per-seed maximal curves; the realized flow domain is the union of
    {seed} x [t_min, t_max] over successful seeds."""

    curves: tuple[IntegralCurve | None, ...]
    errors: dict[int, str]

    def phi(self, seed_index: int, t: float) -> np.ndarray:
        curve = self.curves[seed_index]
        if curve is None:
            raise FlowError(f"seed {seed_index} failed: {self.errors[seed_index]}")
        return curve(t)

    def domain(self) -> list[dict]:
        records = []
        for i, curve in enumerate(self.curves):
            if curve is None:
                records.append({"seed_index": i, "error": self.errors[i]})
            else:
                records.append({
                    "seed_index": i,
                    "seed": [float(x) for x in curve.seed],
                    "t_min": curve.t_min,
                    "t_max": curve.t_max,
                    "end_reasons": {
                        "backward": curve.reason_backward,
                        "forward": curve.reason_forward,
                    },
                })
        return records


def flow(
    v: Derivation, seeds: Sequence[Sequence[float]], tol: Tolerances | None = None
) -> FlowResult:
    """One maximal curve per seed; per-seed failures are collected in
    the result instead of aborting the batch."""
    tol = tol or Tolerances()
    curves: list[IntegralCurve | None] = []
    errors: dict[int, str] = {}
    for i, p in enumerate(seeds):
        try:
            curves.append(maximal_curve(v, p, tol))
        except (FlowError, SpaceError, DomainError) as err:
            curves.append(None)
            errors[i] = str(err)
    return FlowResult(tuple(curves), errors)


# ---------------------------------------------------------------------------
# Checks


def curve_residual_check(
    curve: IntegralCurve,
    v: Derivation,
    f: RestrictedFunction,
    grid: int = 50,
    tol: float = 1e-4,
) -> CheckReport:
    """Defining property of integral curves: the finite-difference time
    derivative of f(curve(t)) must match v(f)(curve(t)) on an interior
    grid. Single-point curves pass vacuously."""
    if f.space != v.space:
        raise SpaceError("curve_residual_check requires a shared space")
    vf = derivation_apply(v, f)
    width = curve.t_max - curve.t_min
    if width == 0.0:
        return CheckReport("curve_residual", "PASS", 0.0, None, 0, 0,
                           {"note": "single-point curve"})
    h = min(1e-6, width / 100.0)
    worst, worst_t = 0.0, None
    checked = 0
    for t in np.linspace(curve.t_min + 2 * h, curve.t_max - 2 * h, grid):
        fd = (f(curve(t + h)) - f(curve(t - h))) / (2.0 * h)
        r = abs(fd - vf(curve(t)))
        checked += 1
        if r > worst:
            worst, worst_t = r, float(t)
    return CheckReport(
        "curve_residual", "PASS" if worst <= tol else "FAIL", worst,
        None, checked, 0, {"worst_t": worst_t},
    )


def translation_check(
    v: Derivation,
    p: Sequence[float],
    s: float,
    tol_res: float = 1e-6,
    tol_shift: float = 1e-7,
    grid: int = 21,
    tolerances: Tolerances | None = None,
) -> CheckReport:
    """Semigroup property: Phi(Phi(p,s), t) = Phi(p, s+t) on a grid of
    admissible t, and the shifted curve's interval equals I_p - s at
    every non-horizon endpoint (horizon-truncated endpoints carry no
    maximality claim and are excluded)."""
    tolerances = tolerances or Tolerances()
    base = maximal_curve(v, p, tolerances)
    if not (base.t_min <= s <= base.t_max):
        raise FlowError(f"shift {s} outside the curve's interval {base.interval}")
    q = base(s)
    shifted = maximal_curve(v, q, tolerances)

    worst = 0.0
    checked = 0
    lo = max(shifted.t_min, base.t_min - s)
    hi = min(shifted.t_max, base.t_max - s)
    for t in np.linspace(lo, hi, grid):
        r = float(np.max(np.abs(shifted(t) - base(s + t))))
        checked += 1
        worst = max(worst, r)

    shift_err = 0.0
    if shifted.reason_forward != REASON_HORIZON and base.reason_forward != REASON_HORIZON:
        shift_err = max(shift_err, abs(shifted.t_max - (base.t_max - s)))
    if shifted.reason_backward != REASON_HORIZON and base.reason_backward != REASON_HORIZON:
        shift_err = max(shift_err, abs(shifted.t_min - (base.t_min - s)))

    ok = worst <= tol_res and shift_err <= tol_shift
    return CheckReport(
        "translation", "PASS" if ok else "FAIL", worst,
        [float(x) for x in q], checked, 0,
        {"interval_shift_error": shift_err, "shift": s},
    )
