"""Derivations of the induced structure on an embedded space.

A derivation is specified by its ambient component tuple (b_1,...,b_n):
applied to a restricted function f it yields sum_i (d_i f) * b_i. The
module provides the algebraic identity checkers (Leibniz, chain rule,
inverse rule), Hadamard decompositions by Gauss-Legendre quadrature,
the tangency gate for equality constraints, and the evaluation-point
verification that algebraic derivations respect smooth composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import expr
from .expr import Expr
from .dspace import EmbeddedSpace, RestrictedFunction, SpaceError

DEFAULT_QUADRATURE_ORDER = 32


@dataclass(frozen=True)
class CheckReport:
    check: str
    status: str  # PASS | WARN | FAIL
    max_residual: float
    worst_point: list[float] | None
    samples: int
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "max_residual": self.max_residual,
            "worst_point": self.worst_point,
            "samples": self.samples,
            "seed": self.seed,
            **({"details": self.details} if self.details else {}),
        }


@dataclass(frozen=True)
class Derivation:
    """Derivation given by ambient components b_i with b_i|M = v(x_i|M)."""

    space: EmbeddedSpace
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.space.ambient_dim:
            raise SpaceError(
                f"{len(self.components)} components for ambient dimension "
                f"{self.space.ambient_dim}"
            )
        for b in self.components:
            if b.max_coord >= self.space.ambient_dim:
                raise SpaceError(f"component {b} exceeds ambient dimension")
        object.__setattr__(self, "_tangency_cache", {})

    @classmethod
    def from_strings(cls, space: EmbeddedSpace, components: Sequence[str]) -> "Derivation":
        return cls(space, tuple(expr.parse(s) for s in components))

    def component_values(self, p: Sequence[float]) -> np.ndarray:
        return np.array([expr.evaluate(b, p) for b in self.components])


def apply(v: Derivation, f: RestrictedFunction) -> RestrictedFunction:
    """v applied to f: the restricted function sum_i (d_i f) * b_i."""
    if f.space != v.space:
        raise SpaceError("derivation and function live on different spaces")
    total = expr.ZERO
    for i, b in enumerate(v.components):
        total = expr.add(total, expr.mul(expr.diff(f.ambient, i), b))
    return RestrictedFunction(total, v.space)


# ---------------------------------------------------------------------------
# Identity checkers


def _sampled_residual(
    space: EmbeddedSpace,
    residual_at: Callable[[np.ndarray], float],
    samples: int,
    seed: int,
) -> tuple[float, list[float] | None]:
    worst, worst_p = 0.0, None
    for p in space.sample(samples, seed):
        r = abs(residual_at(p))
        if r > worst:
            worst, worst_p = r, [float(x) for x in p]
    return worst, worst_p


def leibniz_check(
    v: Derivation,
    f: RestrictedFunction,
    g: RestrictedFunction,
    samples: int = 100,
    seed: int = 0,
    tol: float = 1e-12,
) -> CheckReport:
    """Residual of v(fg) - (v(f) g + f v(g)) over sampled points."""
    if f.space != v.space or g.space != v.space:
        raise SpaceError("leibniz_check requires a shared space")
    fg = RestrictedFunction(expr.mul(f.ambient, g.ambient), v.space)
    lhs = apply(v, fg)
    vf, vg = apply(v, f), apply(v, g)

    def residual(p):
        return lhs(p) - (vf(p) * g(p) + f(p) * vg(p))

    worst, worst_p = _sampled_residual(v.space, residual, samples, seed)
    return CheckReport(
        "leibniz", "PASS" if worst <= tol else "FAIL", worst, worst_p, samples, seed
    )


def chain_rule_check(
    v: Derivation,
    outer: Expr,
    inner: Sequence[RestrictedFunction],
    samples: int = 100,
    seed: int = 0,
    tol: float = 1e-10,
) -> CheckReport:
    """Residual of v(outer(f_1..f_k)) - sum_j (d_j outer)(f) * v(f_j)."""
    k = outer.max_coord + 1
    if k > len(inner):
        raise SpaceError(
            f"outer uses {k} slots but only {len(inner)} inner functions given"
        )
    for f in inner:
        if f.space != v.space:
            raise SpaceError("chain_rule_check requires a shared space")
    inners = [f.ambient for f in inner]
    composed = RestrictedFunction(expr.substitute(outer, inners), v.space)
    lhs = apply(v, composed)
    partials = [
        RestrictedFunction(expr.substitute(expr.diff(outer, j), inners), v.space)
        for j in range(len(inner))
    ]
    vfs = [apply(v, f) for f in inner]

    def residual(p):
        rhs = sum(partials[j](p) * vfs[j](p) for j in range(len(inner)))
        return lhs(p) - rhs

    worst, worst_p = _sampled_residual(v.space, residual, samples, seed)
    return CheckReport(
        "chain_rule", "PASS" if worst <= tol else "FAIL", worst, worst_p, samples, seed
    )


def inverse_rule_check(
    v: Derivation,
    a: RestrictedFunction,
    samples: int = 100,
    seed: int = 0,
    tol: float = 1e-12,
    vanish_floor: float = 1e-6,
) -> CheckReport:
    """Residual of v(1/a) + (1/a)^2 v(a) where a is invertible."""
    if a.space != v.space:
        raise SpaceError("inverse_rule_check requires a shared space")
    inv = RestrictedFunction(expr.div(expr.ONE, a.ambient), v.space)
    lhs = apply(v, inv)
    va = apply(v, a)
    points = v.space.sample(samples, seed)
    for p in points:
        if abs(a(p)) <= vanish_floor:
            raise SpaceError(
                f"inverse_rule_check precondition failed: |a| <= {vanish_floor} "
                f"at sampled point {list(map(float, p))}"
            )
    worst, worst_p = 0.0, None
    for p in points:
        r = abs(lhs(p) + va(p) / a(p) ** 2)
        if r > worst:
            worst, worst_p = r, [float(x) for x in p]
    return CheckReport(
        "inverse_rule", "PASS" if worst <= tol else "FAIL", worst, worst_p, samples, seed
    )


# ---------------------------------------------------------------------------
# Hadamard decomposition


@lru_cache(maxsize=None)
def _gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return (nodes + 1.0) / 2.0, weights / 2.0


@dataclass(frozen=True)
class HadamardDecomposition:
    """First-order decomposition f(y) - f(b) = sum_j (y_j - b_j) g_j(y)
    with g_j(y) the line integral of d_j f from b to y, evaluated by
    fixed-order Gauss-Legendre quadrature."""

    f: Expr
    base_point: tuple[float, ...]
    order: int
    _grads: tuple[Expr, ...]

    def component(self, j: int, y: Sequence[float]) -> float:
        nodes, weights = _gauss_legendre_01(self.order)
        b = np.asarray(self.base_point)
        y = np.asarray(y, dtype=float)
        grad = expr.compiled(self._grads[j])
        total = 0.0
        for t, w in zip(nodes, weights):
            total += w * grad(t * y + (1.0 - t) * b)
        return total

    def reconstruct(self, y: Sequence[float]) -> float:
        """f(b) + sum_j (y_j - b_j) g_j(y); equals f(y) up to quadrature error."""
        b = np.asarray(self.base_point)
        y = np.asarray(y, dtype=float)
        total = expr.evaluate(self.f, b)
        for j in range(len(b)):
            total += (y[j] - b[j]) * self.component(j, y)
        return total


def hadamard_decompose(
    f: Expr,
    b: Sequence[float],
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER,
) -> HadamardDecomposition:
    k = f.max_coord + 1
    b = tuple(float(x) for x in b)
    if len(b) < k:
        raise SpaceError(f"base point of length {len(b)} for {k}-variable function")
    grads = tuple(expr.diff(f, j) for j in range(len(b)))
    return HadamardDecomposition(f, b, quadrature_order, grads)


# ---------------------------------------------------------------------------
# Tangency gate


def tangency_check(
    v: Derivation,
    samples: int = 200,
    seed: int = 0,
    tol: float = 1e-9,
) -> CheckReport:
    """Well-definedness gate: for each equality constraint g the field
    must satisfy sum_i b_i d_i g = 0 on M. Inequality constraints impose
    no condition. Failing the gate yields WARN, not FAIL: on spaces with
    boundary a derivation may legitimately exit through the boundary."""
    key = (samples, seed, tol)
    cache = v._tangency_cache  # populated once per parameter set
    if key in cache:
        return cache[key]
    if not v.space.equalities:
        report = CheckReport("tangency", "PASS", 0.0, None, samples, seed,
                             {"note": "no equality constraints"})
        cache[key] = report
        return report
    directional = [
        _directional_derivative(g, v.components) for g in v.space.equalities
    ]

    fns = [expr.compiled(d) for d in directional]

    def residual(p):
        return max(abs(fn(p)) for fn in fns)

    worst, worst_p = _sampled_residual(v.space, residual, samples, seed)
    report = CheckReport(
        "tangency", "PASS" if worst <= tol else "WARN", worst, worst_p, samples, seed
    )
    cache[key] = report
    return report


def _directional_derivative(g: Expr, components: Sequence[Expr]) -> Expr:
    total = expr.ZERO
    for i, b in enumerate(components):
        total = expr.add(total, expr.mul(b, expr.diff(g, i)))
    return total


# ---------------------------------------------------------------------------
# Evaluation-point verification (algebraic derivation => smooth chain rule)


def point_determined_check(
    v: Derivation,
    outer: Expr,
    inner: Sequence[RestrictedFunction],
    eval_points: Sequence[Sequence[float]],
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER,
    tol: float = 1e-8,
) -> CheckReport:
    """At each evaluation point p, compare the direct value of
    v(outer(f_1..f_k)) with the Hadamard-route value
    sum_j v(f_j)(p) * g_j(f(p)), where the g_j come from the Hadamard
    decomposition of ``outer`` at the base point f(p). The right side
    uses only Leibniz, linearity, and the vanishing of f_j - f_j(p) at
    p; agreement certifies the smooth chain rule at that point."""
    for f in inner:
        if f.space != v.space:
            raise SpaceError("point_determined_check requires a shared space")
    inners = [f.ambient for f in inner]
    composed = RestrictedFunction(expr.substitute(outer, inners), v.space)
    lhs = apply(v, composed)
    vfs = [apply(v, f) for f in inner]
    worst, worst_p = 0.0, None
    for p in eval_points:
        ok, reason = v.space.membership(p, diagnostics=True)
        if not ok:
            raise SpaceError(f"evaluation point {list(p)} is not a member: {reason}")
        b = [f(p) for f in inner]
        decomp = hadamard_decompose(outer, b, quadrature_order)
        rhs = sum(
            vfs[j](p) * decomp.component(j, b) for j in range(len(inner))
        )
        r = abs(lhs(p) - rhs)
        if r > worst:
            worst, worst_p = r, [float(x) for x in p]
    return CheckReport(
        "point_determined",
        "PASS" if worst <= tol else "FAIL",
        worst,
        worst_p,
        len(eval_points),
        0,
    )
