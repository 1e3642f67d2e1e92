"""Domain types for a K-tier heterogeneous network and their validation.

Powers are linear watts throughout; dB/dBm only appear at the scenario-file
boundary (see :mod:`hetnetopt.scenario`).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from .exceptions import (
    InfeasiblePowerControl,
    InvalidAllocation,
    NonPhysicalParameter,
    PathLossTooSmall,
)

SIMPLEX_TOL = 1e-9


class Link(str, enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"


class Scheme(str, enum.Enum):
    SHARED = "shared"
    ORTHOGONAL = "orthogonal"


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x == 0:
        return -math.inf
    return 10.0 * math.log10(x)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return linear_to_db(p_w) + 30.0


@dataclass(frozen=True)
class NetworkModel:
    """Global network parameters.

    Attributes:
        alpha: path-loss exponent, must exceed 2.
        lambda_u: user intensity (users per unit area).
        bandwidth_w: total bandwidth in Hz.
        subcarriers: number of frequency resource blocks.
        p_u: uplink transmit power before power control, watts.
        epsilon: fractional power-control factor in [0, 1].
        link: which direction is analysed.
    """

    alpha: float
    lambda_u: float
    bandwidth_w: float = 20e6
    subcarriers: int = 2048
    p_u: float = 0.1
    epsilon: float = 1.0
    link: Link = Link.DOWNLINK

    def with_link(self, link: Link) -> "NetworkModel":
        return _replace(self, link=Link(link))


@dataclass(frozen=True)
class Tier:
    """One tier of base stations: intensity, power, target SIR and bias (all linear)."""

    lambda_k: float
    p_k: float
    tau_k: float
    b_k: float = 1.0


def _replace(obj, **changes):
    return dataclasses.replace(obj, **changes)


def _normalize(values: Sequence[float], name: str, strict: bool) -> tuple[float, ...]:
    vals = [float(v) for v in values]
    if not vals:
        raise InvalidAllocation(f"{name}: empty vector")
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise InvalidAllocation(f"{name}: entries must be finite and non-negative, got {vals}")
    if strict and any(v == 0 for v in vals):
        raise InvalidAllocation(f"{name}: entries must be strictly positive, got {vals}")
    total = math.fsum(vals)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise InvalidAllocation(f"{name}: entries sum to {total!r}, expected 1 within {SIMPLEX_TOL}")
    return tuple(v / total for v in vals)


@dataclass(frozen=True)
class AssociationVector:
    """Per-tier association probabilities on the probability simplex.

    Zero entries are admitted so that water-filling solutions with inactive
    tiers can be represented; :func:`hetnetopt.analytic.bias_from_assoc`
    rejects them.
    """

    a: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", _normalize(self.a, "association", strict=False))

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "AssociationVector":
        total = math.fsum(weights)
        return cls(tuple(w / total for w in weights))

    def __len__(self):
        return len(self.a)

    def __getitem__(self, k):
        return self.a[k]

    def __iter__(self):
        return iter(self.a)


@dataclass(frozen=True)
class SpectrumAllocation:
    scheme: Scheme = Scheme.SHARED
    eta: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.scheme is Scheme.ORTHOGONAL:
            if self.eta is None:
                raise InvalidAllocation("orthogonal allocation requires eta")
            object.__setattr__(self, "eta", _normalize(self.eta, "eta", strict=False))
        elif self.eta is not None:
            raise InvalidAllocation("shared allocation takes no eta")

    @classmethod
    def shared(cls) -> "SpectrumAllocation":
        return cls(Scheme.SHARED)

    @classmethod
    def orthogonal(cls, eta: Sequence[float]) -> "SpectrumAllocation":
        return cls(Scheme.ORTHOGONAL, tuple(eta))

    def fractions(self, n_tiers: int) -> tuple[float, ...]:
        """Fraction of the total band each tier may use (all ones when shared)."""
        if self.scheme is Scheme.SHARED:
            return (1.0,) * n_tiers
        if len(self.eta) != n_tiers:
            raise InvalidAllocation(f"eta has {len(self.eta)} entries for {n_tiers} tiers")
        return self.eta


def epsilon_lower_bound(alpha: float) -> float:
    """Power-control factors must strictly exceed this for finite uplink interference."""
    return 1.0 - 4.0 / alpha


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise NonPhysicalParameter(f"{name} must be finite and > 0, got {value!r}")


def validate(model: NetworkModel, tiers: Sequence[Tier]) -> tuple[NetworkModel, tuple[Tier, ...]]:
    """Check every parameter constraint and return the scenario unchanged.

    Raises:
        PathLossTooSmall: alpha <= 2.
        NonPhysicalParameter: a non-positive intensity, power, SIR target or bias.
        InfeasiblePowerControl: uplink epsilon outside [0, 1] or not above 1 - 4/alpha.
    """
    if not math.isfinite(model.alpha) or model.alpha <= 2:
        raise PathLossTooSmall(f"path-loss exponent must exceed 2, got {model.alpha!r}")
    _positive("lambda_u", model.lambda_u)
    _positive("bandwidth_w", model.bandwidth_w)
    _positive("p_u", model.p_u)
    if int(model.subcarriers) != model.subcarriers or model.subcarriers < 1:
        raise NonPhysicalParameter(f"subcarriers must be an integer >= 1, got {model.subcarriers!r}")
    tiers = tuple(tiers)
    if not tiers:
        raise NonPhysicalParameter("at least one tier is required")
    for k, t in enumerate(tiers):
        _positive(f"tiers[{k}].lambda_k", t.lambda_k)
        _positive(f"tiers[{k}].p_k", t.p_k)
        _positive(f"tiers[{k}].tau_k", t.tau_k)
        _positive(f"tiers[{k}].b_k", t.b_k)
    if Link(model.link) is Link.UPLINK:
        check_power_control(model.alpha, model.epsilon)
    return model, tiers


def check_power_control(alpha: float, epsilon: float) -> None:
    if not (0.0 <= epsilon <= 1.0):
        raise InfeasiblePowerControl(f"epsilon must lie in [0, 1], got {epsilon!r}")
    bound = epsilon_lower_bound(alpha)
    if not epsilon > bound:
        raise InfeasiblePowerControl(
            f"epsilon={epsilon!r} must exceed 1 - 4/alpha = {bound!r} for alpha={alpha!r}"
        )


def with_biases(tiers: Sequence[Tier], biases: Sequence[float]) -> tuple[Tier, ...]:
    if len(biases) != len(tiers):
        raise ValueError("one bias per tier required")
    return tuple(_replace(t, b_k=float(b)) for t, b in zip(tiers, biases))
