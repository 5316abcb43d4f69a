"""Embedded differential spaces M in R^n.

A space is cut out by finitely many equality constraints {g = 0} and
inequality constraints {h <= 0}, with tolerances and an axis-aligned
sampling box. Membership is decided within tolerance bands; point
sampling is rejection sampling, refined by damped Newton projection
when equality constraints are present. Equality of restricted
functions is a sampled, probabilistic test and is documented as such.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr
from .expr import Expr, DomainError

DEFAULT_TOL_INEQ = 1e-9
DEFAULT_TOL_EQ = 1e-7

_NEWTON_MAX_ITER = 25
_NEWTON_TOL = 1e-10
_SAMPLE_BUDGET_PER_POINT = 2000
_SAMPLE_RATE_FLOOR = 1e-4


class SpaceError(Exception):
    pass


class SamplingExhaustedError(SpaceError):
    """Rejection sampling fell below the acceptance-rate floor."""


@dataclass(frozen=True)
class EmbeddedSpace:
    """Subset of R^n given by equality and inequality constraints.

    ``equalities`` are expressions g with M subset of {g = 0};
    ``inequalities`` are expressions h with M subset of {h <= 0}.
    """

    ambient_dim: int
    equalities: tuple[Expr, ...] = ()
    inequalities: tuple[Expr, ...] = ()
    sample_box: tuple[tuple[float, float], ...] = ()
    tol_eq: float = DEFAULT_TOL_EQ
    tol_ineq: float = DEFAULT_TOL_INEQ

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise SpaceError("ambient dimension must be >= 1")
        for g in self.equalities + self.inequalities:
            if g.max_coord >= self.ambient_dim:
                raise SpaceError(
                    f"constraint {g} uses coordinate x{g.max_coord} "
                    f"but ambient dimension is {self.ambient_dim}"
                )
        box = self.sample_box or tuple((-1.0, 1.0) for _ in range(self.ambient_dim))
        object.__setattr__(self, "sample_box", tuple((float(a), float(b)) for a, b in box))
        if len(self.sample_box) != self.ambient_dim:
            raise SpaceError("sample_box must have one interval per coordinate")
        for lo, hi in self.sample_box:
            if not hi > lo:
                raise SpaceError("sample_box must have positive volume")

    # -- membership --------------------------------------------------------

    def membership(self, p: Sequence[float], diagnostics: bool = False):
        """True iff all constraints hold within tolerance at ``p``.

        A domain error while evaluating a constraint counts as
        non-membership; with ``diagnostics=True`` returns
        ``(ok, reason)`` instead of a bare bool.
        """
        if len(p) != self.ambient_dim:
            raise SpaceError(
                f"point of length {len(p)} in space of dimension {self.ambient_dim}"
            )
        ok, reason = True, ""
        try:
            for g in self.equalities:
                if abs(expr.compiled(g)(p)) > self.tol_eq:
                    ok, reason = False, f"equality violated: {g}"
                    break
            if ok:
                for h in self.inequalities:
                    if expr.compiled(h)(p) > self.tol_ineq:
                        ok, reason = False, f"inequality violated: {h}"
                        break
        except DomainError as err:
            ok, reason = False, f"domain error: {err}"
        return (ok, reason) if diagnostics else ok

    # -- sampling ----------------------------------------------------------

    def sample(self, count: int, seed: int) -> list[np.ndarray]:
        """Deterministic seeded list of up to ``count`` membership points.

        Box rejection sampling; with equality constraints each candidate
        is first projected onto {g = 0} by damped Newton iteration using
        the Moore-Penrose step, then re-checked.
        """
        if count < 1:
            raise SpaceError("count must be >= 1")
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in self.sample_box])
        hi = np.array([b for _, b in self.sample_box])
        grads = [
            [expr.diff(g, i) for i in range(self.ambient_dim)] for g in self.equalities
        ]
        accepted: list[np.ndarray] = []
        budget = _SAMPLE_BUDGET_PER_POINT * count
        tried = 0
        while len(accepted) < count and tried < budget:
            tried += 1
            p = rng.uniform(lo, hi)
            if self.equalities:
                p = self._project(p, grads)
                if p is None:
                    continue
            if self.membership(p):
                accepted.append(np.asarray(p, dtype=float))
        if len(accepted) < count:
            rate = len(accepted) / tried if tried else 0.0
            if rate < _SAMPLE_RATE_FLOOR:
                raise SamplingExhaustedError(
                    f"accepted {len(accepted)}/{count} points after {tried} "
                    f"candidates (rate {rate:.2e})"
                )
        return accepted

    def _project(self, p: np.ndarray, grads) -> np.ndarray | None:
        eq_fns = [expr.compiled(g) for g in self.equalities]
        grad_fns = [[expr.compiled(d) for d in row] for row in grads]
        x = np.asarray(p, dtype=float)
        try:
            res = np.array([g(x) for g in eq_fns])
        except DomainError:
            return None
        for _ in range(_NEWTON_MAX_ITER):
            if np.max(np.abs(res)) <= _NEWTON_TOL:
                return x
            try:
                jac = np.array([[d(x) for d in row] for row in grad_fns])
                step, *_ = np.linalg.lstsq(jac, res, rcond=None)
            except (DomainError, np.linalg.LinAlgError):
                return None
            lam = 1.0
            improved = False
            while lam >= 1.0 / 64.0:
                xn = x - lam * step
                try:
                    rn = np.array([g(xn) for g in eq_fns])
                except DomainError:
                    lam /= 2.0
                    continue
                if np.max(np.abs(rn)) < np.max(np.abs(res)):
                    x, res = xn, rn
                    improved = True
                    break
                lam /= 2.0
            if not improved:
                return None
        return x if np.max(np.abs(res)) <= _NEWTON_TOL else None

    # -- derived spaces ----------------------------------------------------

    def product(self, other: "EmbeddedSpace") -> "EmbeddedSpace":
        """Product space in R^(n_a + n_b); ``other``'s constraints get
        their coordinates shifted past this space's."""
        na = self.ambient_dim
        shift = [expr.Coord(i + na) for i in range(other.ambient_dim)]
        return EmbeddedSpace(
            ambient_dim=na + other.ambient_dim,
            equalities=self.equalities
            + tuple(expr.substitute(g, shift) for g in other.equalities),
            inequalities=self.inequalities
            + tuple(expr.substitute(h, shift) for h in other.inequalities),
            sample_box=self.sample_box + other.sample_box,
            tol_eq=max(self.tol_eq, other.tol_eq),
            tol_ineq=max(self.tol_ineq, other.tol_ineq),
        )

    def subspace(
        self,
        extra_eq: Sequence[Expr] = (),
        extra_ineq: Sequence[Expr] = (),
    ) -> "EmbeddedSpace":
        """Cut this space down by additional constraints."""
        return EmbeddedSpace(
            ambient_dim=self.ambient_dim,
            equalities=self.equalities + tuple(extra_eq),
            inequalities=self.inequalities + tuple(extra_ineq),
            sample_box=self.sample_box,
            tol_eq=self.tol_eq,
            tol_ineq=self.tol_ineq,
        )

    def restrict(self, ambient: Expr | str) -> "RestrictedFunction":
        if isinstance(ambient, str):
            ambient = expr.parse(ambient)
        return RestrictedFunction(ambient, self)


@dataclass(frozen=True)
class RestrictedFunction:
    """An ambient expression regarded as a structure function on a space."""

    ambient: Expr
    space: EmbeddedSpace

    def __post_init__(self):
        if self.ambient.max_coord >= self.space.ambient_dim:
            raise SpaceError(
                f"{self.ambient} uses coordinate x{self.ambient.max_coord} "
                f"but the space has ambient dimension {self.space.ambient_dim}"
            )

    def __call__(self, p: Sequence[float]) -> float:
        return expr.compiled(self.ambient)(p)


def restricted_eq(
    f: RestrictedFunction,
    g: RestrictedFunction,
    samples: int = 200,
    seed: int = 0,
    tol: float = 1e-9,
) -> bool:
    """Sampled equality of structure functions: |f - g| <= tol at every
    sampled membership point. Probabilistic, not a decision procedure."""
    if f.space is not g.space and f.space != g.space:
        raise SpaceError("restricted functions live on different spaces")
    for p in f.space.sample(samples, seed):
        if abs(f(p) - g(p)) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Bump functions


def bump(center: Sequence[float], r_inner: float, r_outer: float) -> Expr:
    """Smooth expression equal to 1 on the ball of radius ``r_inner``
    about ``center``, 0 outside radius ``r_outer``, and in (0, 1)
    between; built from the exp(-1/t) transition applied to |p - c|^2."""
    if not (0.0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    center = [float(c) for c in center]
    t = expr.ZERO
    for i, c in enumerate(center):
        d = expr.sub(expr.Coord(i), expr.const(c))
        t = expr.add(t, expr.mul(d, d))
    width = r_outer**2 - r_inner**2
    u_out = expr.div(expr.sub(expr.const(r_outer**2), t), expr.const(width))
    u_in = expr.div(expr.sub(t, expr.const(r_inner**2)), expr.const(width))
    q_out = expr.call("cutexp", u_out)
    q_in = expr.call("cutexp", u_in)
    return expr.div(q_out, expr.add(q_out, q_in))


# ---------------------------------------------------------------------------
# Space spec files (JSON; TOML via tomllib)


def space_from_dict(data: dict) -> EmbeddedSpace:
    tol = data.get("tol_membership")
    return EmbeddedSpace(
        ambient_dim=int(data["ambient_dim"]),
        equalities=tuple(expr.parse(s) for s in data.get("equalities", [])),
        inequalities=tuple(expr.parse(s) for s in data.get("inequalities", [])),
        sample_box=tuple(tuple(iv) for iv in data.get("sample_box", [])),
        tol_eq=float(data.get("tol_eq", tol if tol is not None else DEFAULT_TOL_EQ)),
        tol_ineq=float(
            data.get("tol_ineq", tol if tol is not None else DEFAULT_TOL_INEQ)
        ),
    )


def load_space_file(path: str | Path) -> tuple[EmbeddedSpace, dict]:
    """Load a space spec file (JSON or TOML). Returns the space and the
    raw dict so callers can pick up extra fields (derivation, seeds...)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return space_from_dict(data), data
