"""Closed-form stochastic-geometry expressions for the mean proportionally fair utility.

Everything here is a pure function of its arguments. Association-dependent
quantities take the association vector ``A`` as the free parameter; when it is
omitted it is computed from the tiers' biases with :func:`assoc_prob`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateAssociation, DomainError
from .model import (
    AssociationVector,
    Link,
    NetworkModel,
    Scheme,
    SpectrumAllocation,
    Tier,
    check_power_control,
)

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Shape of the gamma approximation to the normalized Voronoi cell area.
CELL_SHAPE = 3.5


def _lanczos_sum(z: float) -> float:
    a = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        a += _LANCZOS_COEF[i] / (z + i)
    return a


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments (Lanczos, ~15 significant digits)."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"gamma_fn is defined here for finite x > 0, got {x!r}")
    if x < 0.5:
        # reflection keeps accuracy for arguments close to zero
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    # split the power so the intermediate does not overflow before the result does
    half = t ** (0.5 * (z + 0.5))
    return math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * _lanczos_sum(z)


def log_gamma_fn(x: float) -> float:
    """Natural log of :func:`gamma_fn`, usable where the value itself overflows."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"log_gamma_fn is defined here for finite x > 0, got {x!r}")
    if x < 0.5:
        return math.log(math.pi) - math.log(math.sin(math.pi * x)) - log_gamma_fn(1.0 - x)
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(_lanczos_sum(z))


@dataclass(frozen=True)
class SpecialFnValues:
    xi: float
    upsilon: float
    omega: float


def special_fns(alpha: float, epsilon: float) -> SpecialFnValues:
    """Uplink interference and signal-moment constants for fractional power control.

    ``xi`` is the normalized mean-interference integral, ``upsilon`` the
    normalized moment of the inverse serving-link gain, and ``omega`` their
    product. Raises InfeasiblePowerControl outside the feasible epsilon range.
    """
    check_power_control(alpha, epsilon)
    # (4 - alpha + eps*alpha)/2 loses less to cancellation than 2 + (eps - 1)alpha/2
    arg = (4.0 - alpha + epsilon * alpha) / 2.0
    # a feasible epsilon can still round onto the boundary, where xi diverges
    xi = gamma_fn(arg) / (2.0 * (alpha - 2.0)) if arg > 0 else math.inf
    upsilon = gamma_fn(1.0 + (1.0 - epsilon) * alpha / 2.0) / 2.0
    return SpecialFnValues(xi=xi, upsilon=upsilon, omega=xi * upsilon)


def tier_arrays(tiers: Sequence[Tier]):
    lam = np.array([t.lambda_k for t in tiers], dtype=float)
    p = np.array([t.p_k for t in tiers], dtype=float)
    tau = np.array([t.tau_k for t in tiers], dtype=float)
    b = np.array([t.b_k for t in tiers], dtype=float)
    return lam, p, tau, b


def assoc_prob(model: NetworkModel, tiers: Sequence[Tier]) -> AssociationVector:
    lam, p, _, b = tier_arrays(tiers)
    logw = np.log(lam) + (2.0 / model.alpha) * (np.log(p) + np.log(b))
    w = np.exp(logw - logw.max())
    return AssociationVector(tuple(w / w.sum()))


def _as_array(A, model, tiers) -> np.ndarray:
    if A is None:
        A = assoc_prob(model, tiers)
    return np.asarray(tuple(A), dtype=float)


def bias_from_assoc(model: NetworkModel, tiers: Sequence[Tier], A) -> tuple[float, ...]:
    """Invert the association map: biases that produce ``A``, scaled so the largest is 1.

    The last tier is the reference before normalization.
    """
    a = np.asarray(tuple(A), dtype=float)
    if len(a) != len(tiers):
        raise ValueError(f"association has {len(a)} entries for {len(tiers)} tiers")
    if np.any(a <= 0):
        raise DegenerateAssociation(f"bias undefined for zero association probability: {a.tolist()}")
    lam, p, _, _ = tier_arrays(tiers)
    # log B_k = (alpha/2) log(lam_K A_k / (lam_k A_K)) + log(P_K / P_k)
    logb = 0.5 * model.alpha * (np.log(lam[-1]) + np.log(a) - np.log(lam) - np.log(a[-1]))
    logb += np.log(p[-1]) - np.log(p)
    logb -= logb.max()
    return tuple(float(v) for v in np.exp(logb))


def serving_distance_pdf(k: int, model: NetworkModel, tiers: Sequence[Tier], A, r):
    """Density of the distance from a tier-k user to its serving base station."""
    a = _as_array(A, model, tiers)
    s = tiers[k].lambda_k / a[k]
    r = np.asarray(r, dtype=float)
    out = 2.0 * np.pi * r * s * np.exp(-np.pi * r * r * s)
    return float(out) if out.ndim == 0 else out


def serving_distance_cdf(k: int, model: NetworkModel, tiers: Sequence[Tier], A, r):
    a = _as_array(A, model, tiers)
    s = tiers[k].lambda_k / a[k]
    r = np.asarray(r, dtype=float)
    out = -np.expm1(-np.pi * r * r * s)
    return float(out) if out.ndim == 0 else out


def _scheme(allocation) -> Scheme:
    if isinstance(allocation, SpectrumAllocation):
        return allocation.scheme
    return Scheme(allocation)


def mean_log_coverage(
    link: Link,
    allocation,
    k: int,
    model: NetworkModel,
    tiers: Sequence[Tier],
    A=None,
) -> float:
    """Mean log coverage probability of a typical tier-k user.

    ``allocation`` may be a :class:`SpectrumAllocation` or a :class:`Scheme`.
    Relative biases are expressed through ``A`` via
    ``A_j/A_k = (lam_j/lam_k) (P_j B_j / (P_k B_k))^(2/alpha)``.
    """
    link = Link(link)
    scheme = _scheme(allocation)
    alpha = model.alpha
    a = _as_array(A, model, tiers)
    lam, p, tau, _ = tier_arrays(tiers)
    if link is Link.DOWNLINK:
        if scheme is Scheme.ORTHOGONAL:
            return float(-2.0 * tau[k] * a[k] / (alpha - 2.0))
        with np.errstate(divide="ignore"):
            # inverse relative bias B_k / B_j
            inv_bhat = (p / p[k]) * (lam / lam[k]) ** (alpha / 2.0) * (a / a[k]) ** (-alpha / 2.0)
        return float(-2.0 * tau[k] / (alpha - 2.0) * np.sum(a * inv_bhat))
    omega = special_fns(alpha, model.epsilon).omega
    if scheme is Scheme.ORTHOGONAL:
        return float(-8.0 * tau[k] * omega * a[k])
    e = model.epsilon * alpha / 2.0 - 1.0
    # (P_jk B_jk)^(eps - 2/alpha) == ((lam_k/lam_j) (A_j/A_k))^(eps*alpha/2 - 1)
    with np.errstate(divide="ignore"):
        terms = a * (lam[k] / lam) ** e * (a / a[k]) ** e
    return float(-8.0 * tau[k] * omega * np.sum(terms))


@dataclass(frozen=True)
class PenaltyForm:
    """Coverage part of the utility as ``-kappa * sum_ij M_ij A_i^p A_j^q``.

    For orthogonal spectrum ``M`` is diagonal and ``p + q = 2``.
    """

    kappa: float
    m: np.ndarray
    p: float
    q: float

    def value(self, a: np.ndarray) -> float:
        ap = _safe_pow(a, self.p)
        aq = _safe_pow(a, self.q)
        with np.errstate(invalid="ignore"):
            rows = ap * (self.m @ aq)
        rows = np.where(ap == 0.0, 0.0, rows)
        return float(-self.kappa * np.sum(rows))

    def gradient(self, a: np.ndarray) -> np.ndarray:
        ap = _safe_pow(a, self.p)
        aq = _safe_pow(a, self.q)
        g = self.p * _safe_pow(a, self.p - 1.0) * (self.m @ aq)
        g = g + self.q * _safe_pow(a, self.q - 1.0) * (self.m.T @ ap)
        return -self.kappa * g


def _safe_pow(a: np.ndarray, e: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.power(a, e)


def penalty_form(link: Link, scheme, model: NetworkModel, tiers: Sequence[Tier]) -> PenaltyForm:
    link = Link(link)
    scheme = _scheme(scheme)
    alpha = model.alpha
    lam, p, tau, _ = tier_arrays(tiers)
    if link is Link.DOWNLINK:
        kappa = 2.0 / (alpha - 2.0)
    else:
        kappa = 8.0 * special_fns(alpha, model.epsilon).omega
    if scheme is Scheme.ORTHOGONAL:
        return PenaltyForm(kappa, np.diag(tau), 1.0, 1.0)
    if link is Link.DOWNLINK:
        m = tau[:, None] * (p[None, :] / p[:, None]) * (lam[None, :] / lam[:, None]) ** (alpha / 2.0)
        return PenaltyForm(kappa, m, 1.0 + alpha / 2.0, 1.0 - alpha / 2.0)
    h = model.epsilon * alpha / 2.0
    m = tau[:, None] * (lam[:, None] / lam[None, :]) ** (h - 1.0)
    return PenaltyForm(kappa, m, 2.0 - h, h)


def rate_coefficients(model: NetworkModel, tiers: Sequence[Tier]) -> np.ndarray:
    """log(W lam_k log(1+tau_k) / lam_u) for every tier."""
    lam, _, tau, _ = tier_arrays(tiers)
    return np.log(model.bandwidth_w * lam * np.log1p(tau) / model.lambda_u)


def mean_user_spectrum(
    k: int,
    w_k: float,
    model: NetworkModel,
    tiers: Sequence[Tier],
    A=None,
    mode: str = "bound",
) -> float:
    """Mean spectrum per tier-k user in Hz, either the upper bound or the cell-size model value."""
    a = _as_array(A, model, tiers)
    inv_rho = tiers[k].lambda_k / (a[k] * model.lambda_u)
    if mode == "bound":
        return float(w_k * inv_rho)
    if mode == "exact":
        rho = 1.0 / inv_rho
        return float(w_k * inv_rho * -math.expm1(-CELL_SHAPE * math.log1p(rho / CELL_SHAPE)))
    raise ValueError(f"mode must be 'bound' or 'exact', got {mode!r}")


def user_count_pmf(n: int, rho: float, conditioned: bool = False) -> float:
    """PMF of the user count of a cell with mean load ``rho``.

    With ``conditioned=True`` this is the count of *other* users in the cell of
    a typical user.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a non-negative integer, got {n!r}")
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho!r}")
    c = CELL_SHAPE
    shape = c + 1.0 if conditioned else c
    logp = (
        c * math.log(c)
        + log_gamma_fn(n + shape)
        - log_gamma_fn(c)
        - log_gamma_fn(n + 1.0)
        + n * math.log(rho)
        - (n + shape) * math.log(rho + c)
    )
    return math.exp(logp)


def expected_inverse_load(rho: float, tail_tol: float = 1e-12) -> float:
    """E[1/(N+1)] for the conditioned user count, summed term by term.

    Stops once a geometric bound on the remaining tail drops below ``tail_tol``.
    """
    terms = []
    n = 0
    pmf = user_count_pmf(0, rho, conditioned=True)
    ratio_limit = rho / (rho + CELL_SHAPE)
    while True:
        terms.append(pmf / (n + 1))
        ratio = (n + CELL_SHAPE + 1.0) / (n + 1.0) * ratio_limit
        nxt = pmf * ratio
        if ratio < 1.0 and nxt / (1.0 - ratio) < tail_tol:
            break
        pmf = nxt
        n += 1
    return math.fsum(terms)


def mean_utility(
    link: Link,
    allocation: SpectrumAllocation,
    model: NetworkModel,
    tiers: Sequence[Tier],
    A=None,
) -> float:
    """Mean proportionally fair utility of the typical user (nats, log of nats/s).

    Zero association entries contribute their continuous limit.
    """
    a = _as_array(A, model, tiers)
    frac = np.asarray(allocation.fractions(len(tiers)), dtype=float)
    c = rate_coefficients(model, tiers)
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = a * (c + np.log(frac) - np.log(a))
    spec = np.where(a == 0.0, 0.0, spec)
    penalty = penalty_form(link, allocation.scheme, model, tiers).value(a)
    return float(np.sum(spec) + penalty)
