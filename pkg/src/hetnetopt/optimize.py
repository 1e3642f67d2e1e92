"""Utility-maximizing association (and spectrum partition) for each link/spectrum regime."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import analytic
from .exceptions import NoConvergence
from .model import (
    AssociationVector,
    Link,
    NetworkModel,
    Scheme,
    SpectrumAllocation,
    Tier,
    validate,
)

CLAMP = 1e-9
GRAD_TOL = 1e-7
MAX_ITER = 10_000
N_STARTS = 32


class Solver(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    NUMERICAL_LOCAL = "numerical_local"


@dataclass(frozen=True)
class OptimizationResult:
    a_star: AssociationVector
    eta_star: tuple[float, ...] | None
    b_star: tuple[float, ...]
    utility: float
    solver: Solver
    starts_used: int
    converged: bool = True
    local_optima: int = 1
    inactive: tuple[bool, ...] = ()
    nu: float | None = None


def waterfill_nu(coeffs: Sequence[float], weights: Sequence[float], tol: float = 1e-12) -> float:
    """Water level nu with sum_k max(c_k - nu, 0) w_k == 1.

    Bisection on the bracket ``[min c - 1/sum w - 1, max c]`` fixes the active
    set; the level is then solved exactly on that set.
    """
    c = np.asarray(coeffs, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("water-filling weights must be positive")

    def total(nu):
        return float(np.sum(np.maximum(c - nu, 0.0) * w))

    lo = float(c.min() - 1.0 / w.sum() - 1.0)
    hi = float(c.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = total(mid)
        if abs(s - 1.0) < tol:
            lo = hi = mid
            break
        if s > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    nu = 0.5 * (lo + hi)
    active = c > nu
    if not active.any():
        active = c == c.max()
    polished = float((np.sum(c[active] * w[active]) - 1.0) / np.sum(w[active]))
    # keep the polish only if it reproduces the same active set
    if np.array_equal(c > polished, active) or abs(total(polished) - 1.0) <= abs(total(nu) - 1.0):
        nu = polished
    return nu


def _orthogonal_weights(link: Link, model: NetworkModel, tiers: Sequence[Tier]) -> np.ndarray:
    _, _, tau, _ = analytic.tier_arrays(tiers)
    if link is Link.DOWNLINK:
        return (model.alpha - 2.0) / (4.0 * tau)
    omega = analytic.special_fns(model.alpha, model.epsilon).omega
    return 1.0 / (16.0 * tau * omega)


def _biases_for(model, tiers, a: np.ndarray) -> tuple[tuple[float, ...], tuple[bool, ...]]:
    inactive = tuple(bool(v <= CLAMP * (1 + 1e-6)) for v in a)
    idx = [k for k, off in enumerate(inactive) if not off]
    if len(idx) == len(a):
        return analytic.bias_from_assoc(model, tiers, a), inactive
    sub = analytic.bias_from_assoc(model, [tiers[k] for k in idx], a[idx] / a[idx].sum())
    b = [0.0] * len(a)
    for k, v in zip(idx, sub):
        b[k] = v
    return tuple(b), inactive


def optimize_orthogonal(link: Link, model: NetworkModel, tiers: Sequence[Tier]) -> OptimizationResult:
    """Closed-form optimum under orthogonal spectrum: water-filled association, eta = A."""
    link = Link(link)
    model, tiers = validate(model.with_link(link), tiers)
    c = analytic.rate_coefficients(model, tiers)
    w = _orthogonal_weights(link, model, tiers)
    nu = waterfill_nu(c, w)
    a = np.maximum(c - nu, 0.0) * w
    a = a / a.sum()
    av = AssociationVector(tuple(a))
    inactive = tuple(bool(v == 0.0) for v in a)
    idx = [k for k in range(len(a)) if not inactive[k]]
    sub = analytic.bias_from_assoc(model, [tiers[k] for k in idx], a[idx])
    b = [0.0] * len(a)
    for k, v in zip(idx, sub):
        b[k] = v
    eta = tuple(av.a)
    u = analytic.mean_utility(link, SpectrumAllocation.orthogonal(eta), model, tiers, av)
    return OptimizationResult(
        a_star=av,
        eta_star=eta,
        b_star=tuple(b),
        utility=u,
        solver=Solver.CLOSED_FORM,
        starts_used=0,
        inactive=inactive,
        nu=nu,
    )


def _project(v: np.ndarray, floor: float = CLAMP) -> np.ndarray:
    """Euclidean projection onto {x >= floor, sum x = 1}."""
    k = len(v)
    mass = 1.0 - k * floor
    y = v - floor
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - mass
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(y - theta, 0.0) + floor


def distance_based_assoc(tiers: Sequence[Tier]) -> np.ndarray:
    lam = np.array([t.lambda_k for t in tiers], dtype=float)
    return lam / lam.sum()


def closed_form_shared_applies(link: Link, model: NetworkModel, tiers: Sequence[Tier]) -> bool:
    """Uplink, equal SIR targets, and eps*alpha == 2 or >= 4."""
    if Link(link) is not Link.UPLINK:
        return False
    taus = [t.tau_k for t in tiers]
    if not all(math.isclose(t, taus[0], rel_tol=1e-12) for t in taus):
        return False
    ea = model.epsilon * model.alpha
    return math.isclose(ea, 2.0, rel_tol=1e-12) or ea >= 4.0 - 1e-12


class SharedObjective:
    """Shared-spectrum utility as a function of the association vector, with gradient."""

    def __init__(self, link: Link, model: NetworkModel, tiers: Sequence[Tier]):
        self.c = analytic.rate_coefficients(model, tiers)
        self.pen = analytic.penalty_form(link, Scheme.SHARED, model, tiers)

    def value(self, a: np.ndarray) -> float:
        return float(np.sum(a * (self.c - np.log(a)))) + self.pen.value(a)

    def gradient(self, a: np.ndarray) -> np.ndarray:
        return self.c - np.log(a) - 1.0 + self.pen.gradient(a)


@dataclass
class _Run:
    a: np.ndarray
    f: float
    converged: bool
    iterations: int


def projected_gradient_ascent(
    obj: SharedObjective,
    a0: np.ndarray,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    floor: float = CLAMP,
) -> _Run:
    """Projected gradient ascent with Barzilai-Borwein trial steps and Armijo backtracking."""
    def pg_norm(x, gx):
        return float(np.linalg.norm(x - _project(x + gx, floor)))

    a = _project(np.asarray(a0, dtype=float), floor)
    f = obj.value(a)
    g = obj.gradient(a)
    step = 1.0
    for it in range(max_iter):
        norm = pg_norm(a, g)
        if norm < tol:
            return _Run(a, f, True, it)
        roundoff = 64.0 * np.finfo(float).eps * max(1.0, abs(f))
        t = step
        while True:
            a_new = _project(a + t * g, floor)
            f_new = obj.value(a_new)
            g_new = None
            if np.isfinite(f_new):
                gain = float(g @ (a_new - a))
                if f_new >= f + 1e-4 * gain:
                    break
                if gain <= roundoff and abs(f_new - f) <= roundoff:
                    # objective changes are below its resolution; judge by stationarity
                    g_new = obj.gradient(a_new)
                    if pg_norm(a_new, g_new) < norm:
                        break
            t *= 0.5
            if t < 1e-30:
                return _Run(a, f, False, it)
        if g_new is None:
            g_new = obj.gradient(a_new)
        s = a_new - a
        y = g_new - g
        sy = float(s @ y)
        step = float(s @ s) / -sy if sy < 0 else min(2.0 * t, 1e12)
        step = min(max(step, 1e-12), 1e12)
        a, f, g = a_new, f_new, g_new
    pg = a - _project(a + g, floor)
    return _Run(a, f, bool(np.linalg.norm(pg) < tol), max_iter)


def _starts(k: int, n: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = [np.full(k, 1.0 / k)]
    out.extend(rng.dirichlet(np.ones(k), size=n - 1))
    return out


def _count_distinct(points: list[np.ndarray], tol: float = 1e-5) -> int:
    reps: list[np.ndarray] = []
    for p in points:
        if not any(np.max(np.abs(p - r)) < tol for r in reps):
            reps.append(p)
    return len(reps)


def optimize_shared(
    link: Link,
    model: NetworkModel,
    tiers: Sequence[Tier],
    *,
    n_starts: int = N_STARTS,
    seed: int = 0,
    force_numerical: bool = False,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> OptimizationResult:
    """Best local maximizer of the shared-spectrum utility over the association simplex.

    Uses the distance-based closed form where it is provably optimal (uplink,
    equal SIR targets, eps*alpha == 2 or >= 4) unless ``force_numerical``.
    Otherwise runs multi-start projected gradient ascent; if no start converges
    a :class:`NoConvergence` warning is issued and the best iterate returned.
    """
    link = Link(link)
    model, tiers = validate(model.with_link(link), tiers)
    k = len(tiers)
    shared = SpectrumAllocation.shared()
    if k == 1:
        a = np.ones(1)
        u = analytic.mean_utility(link, shared, model, tiers, a)
        return OptimizationResult(AssociationVector((1.0,)), None, (1.0,), u, Solver.CLOSED_FORM, 0,
                                  inactive=(False,))
    if not force_numerical and closed_form_shared_applies(link, model, tiers):
        a = distance_based_assoc(tiers)
        av = AssociationVector(tuple(a))
        u = analytic.mean_utility(link, shared, model, tiers, av)
        b = analytic.bias_from_assoc(model, tiers, a)
        return OptimizationResult(av, None, b, u, Solver.CLOSED_FORM, 0, inactive=(False,) * k)

    obj = SharedObjective(link, model, tiers)
    runs = [projected_gradient_ascent(obj, s, tol=tol, max_iter=max_iter) for s in _starts(k, n_starts, seed)]
    pool = [r for r in runs if r.converged] or runs
    best_f = max(r.f for r in pool)
    near = [r for r in pool if r.f >= best_f - 1e-12 * max(1.0, abs(best_f))]
    centre = np.full(k, 1.0 / k)
    best = min(near, key=lambda r: float(np.sum((r.a - centre) ** 2)))
    converged = any(r.converged for r in runs)
    if not converged:
        warnings.warn(
            f"no start reached projected-gradient norm < {tol:g} in {max_iter} iterations",
            NoConvergence,
            stacklevel=2,
        )
    a = best.a / best.a.sum()
    av = AssociationVector(tuple(a))
    b, inactive = _biases_for(model, tiers, a)
    return OptimizationResult(
        a_star=av,
        eta_star=None,
        b_star=b,
        utility=analytic.mean_utility(link, shared, model, tiers, av),
        solver=Solver.NUMERICAL_LOCAL,
        starts_used=len(runs),
        converged=converged,
        local_optima=_count_distinct([r.a for r in runs if r.converged]) if converged else 0,
        inactive=inactive,
    )


def optimize(link: Link, scheme: Scheme, model: NetworkModel, tiers: Sequence[Tier], **kw) -> OptimizationResult:
    if Scheme(scheme) is Scheme.ORTHOGONAL:
        return optimize_orthogonal(link, model, tiers)
    return optimize_shared(link, model, tiers, **kw)
