"""YAML scenario files: parsing, dB conversion, and sweep-path resolution."""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import analytic
from .exceptions import UnknownParameterPath, ValidationError
from .model import (
    Link,
    NetworkModel,
    Scheme,
    SpectrumAllocation,
    Tier,
    db_to_linear,
    dbm_to_watts,
    validate,
)
from .simulate import Window

DEFAULT_SNAPSHOTS = 2000
FULL_SCALE_SNAPSHOTS = 50_000

_NETWORK_KEYS = {"alpha", "lambda_u", "bandwidth_hz", "subcarriers", "p_u_dbm", "epsilon", "link"}
_TIER_KEYS = {"lambda_rel", "lambda_abs", "p_dbm", "tau_db", "tau", "bias_db"}
_ALLOC_KEYS = {"scheme", "eta"}
_SIM_KEYS = {"snapshots", "slots", "seed", "sim_radius", "eval_radius", "fading"}
_SWEEP_KEYS = {"parameter", "from", "to", "steps", "log_scale", "units", "simulate", "couple_association"}


class ScenarioError(ValidationError):
    """Malformed or incomplete scenario file."""


@dataclass(frozen=True)
class SimulationSpec:
    snapshots: int = DEFAULT_SNAPSHOTS
    slots: int = 20
    seed: int = 0
    window: Window | None = None
    fading: str = "conditional"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int = 1
    log_scale: bool = False
    units: str = "native"
    simulate: bool = False
    couple_association: bool = False

    def values(self) -> np.ndarray:
        if self.steps < 1:
            raise ScenarioError("sweep.steps must be >= 1")
        if self.steps == 1:
            return np.array([self.start], dtype=float)
        if self.log_scale:
            if self.start <= 0 or self.stop <= 0:
                raise ScenarioError("log-scale sweeps need positive bounds")
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Scenario:
    model: NetworkModel
    tiers: tuple[Tier, ...]
    allocation: SpectrumAllocation
    simulation: SimulationSpec
    sweep: SweepSpec | None
    raw: dict

    @property
    def link(self) -> Link:
        return Link(self.model.link)


def _check_keys(block: dict, allowed: set, where: str) -> None:
    extra = set(block) - allowed
    if extra:
        raise ScenarioError(f"unknown keys in {where}: {sorted(extra)}")


def _req(block: dict, key: str, where: str):
    if key not in block or block[key] is None:
        raise ScenarioError(f"{where}.{key} is required")
    return block[key]


def parse(raw: dict) -> Scenario:
    """Build and validate a scenario from its decoded YAML mapping."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    net = raw.get("network") or {}
    _check_keys(net, _NETWORK_KEYS, "network")
    try:
        model = NetworkModel(
            alpha=float(_req(net, "alpha", "network")),
            lambda_u=float(_req(net, "lambda_u", "network")),
            bandwidth_w=float(net.get("bandwidth_hz", 20e6)),
            subcarriers=int(net.get("subcarriers", 2048)),
            p_u=dbm_to_watts(float(net.get("p_u_dbm", 20.0))),
            epsilon=float(net.get("epsilon", 1.0)),
            link=Link(str(net.get("link", "downlink")).lower()),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"network block: {exc}") from exc

    tier_blocks = raw.get("tiers")
    if not tier_blocks:
        raise ScenarioError("at least one entry under 'tiers' is required")
    tiers = []
    for k, tb in enumerate(tier_blocks):
        where = f"tiers[{k}]"
        _check_keys(tb, _TIER_KEYS, where)
        if "lambda_abs" in tb:
            lam = float(tb["lambda_abs"])
        elif "lambda_rel" in tb:
            lam = float(tb["lambda_rel"]) * model.lambda_u
        else:
            raise ScenarioError(f"{where} needs lambda_rel or lambda_abs")
        if "tau" in tb:
            tau = float(tb["tau"])
        else:
            tau = db_to_linear(float(_req(tb, "tau_db", where)))
        tiers.append(
            Tier(
                lambda_k=lam,
                p_k=dbm_to_watts(float(_req(tb, "p_dbm", where))),
                tau_k=tau,
                b_k=db_to_linear(float(tb.get("bias_db", 0.0))),
            )
        )
    model, tiers = validate(model, tiers)

    ab = raw.get("allocation") or {"scheme": "shared"}
    _check_keys(ab, _ALLOC_KEYS, "allocation")
    scheme = Scheme(str(ab.get("scheme", "shared")).lower())
    if scheme is Scheme.SHARED:
        allocation = SpectrumAllocation.shared()
    else:
        eta = ab.get("eta")
        if eta is None:
            # default partition: match the association the biases produce
            eta = analytic.assoc_prob(model, tiers).a
        if len(eta) != len(tiers):
            raise ScenarioError(f"allocation.eta has {len(eta)} entries for {len(tiers)} tiers")
        allocation = SpectrumAllocation.orthogonal([float(v) for v in eta])

    sb = raw.get("simulation") or {}
    _check_keys(sb, _SIM_KEYS, "simulation")
    window = None
    if sb.get("sim_radius") is not None:
        r = float(sb["sim_radius"])
        window = Window(r, float(sb.get("eval_radius") or r / 2))
    fading = str(sb.get("fading", "conditional"))
    if fading not in ("conditional", "explicit"):
        raise ScenarioError(f"simulation.fading must be 'conditional' or 'explicit', got {fading!r}")
    simulation = SimulationSpec(
        snapshots=int(sb.get("snapshots", DEFAULT_SNAPSHOTS)),
        slots=int(sb.get("slots", 20)),
        seed=int(sb.get("seed", 0)),
        window=window,
        fading=fading,
    )

    sweep = None
    if raw.get("sweep"):
        sw = raw["sweep"]
        _check_keys(sw, _SWEEP_KEYS, "sweep")
        sweep = SweepSpec(
            parameter=str(_req(sw, "parameter", "sweep")),
            start=float(_req(sw, "from", "sweep")),
            stop=float(sw.get("to", sw["from"])),
            steps=int(sw.get("steps", 1)),
            log_scale=bool(sw.get("log_scale", False)),
            units=str(sw.get("units", "native")),
            simulate=bool(sw.get("simulate", False)),
            couple_association=bool(sw.get("couple_association", False)),
        )
        resolve_path(raw, sweep.parameter)
    return Scenario(model, tiers, allocation, simulation, sweep, raw)


def load(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return parse(raw)


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?")
_LEAF_KEYS = {"network": _NETWORK_KEYS, "tiers": _TIER_KEYS, "allocation": _ALLOC_KEYS, "simulation": _SIM_KEYS}


def resolve_path(raw: dict, path: str) -> tuple[Any, Any]:
    """Return (container, key) addressed by a path such as ``tiers[0].bias_db``.

    Raises UnknownParameterPath if a segment does not exist or names an
    unsupported field.
    """
    parts = path.split(".")
    node: Any = raw
    for n, part in enumerate(parts):
        m = _TOKEN.fullmatch(part)
        if not m:
            raise UnknownParameterPath(path)
        name, index = m.group(1), m.group(2)
        last = n == len(parts) - 1
        if n == 0 and name not in _LEAF_KEYS:
            raise UnknownParameterPath(path)
        if n > 0:
            block = parts[0].split("[")[0]
            if name not in _LEAF_KEYS[block]:
                raise UnknownParameterPath(path)
        if not isinstance(node, dict):
            raise UnknownParameterPath(path)
        if last and index is None:
            return node, name
        if name not in node:
            if last and name == "eta":
                return node, (name, int(index))
            raise UnknownParameterPath(path)
        child = node[name]
        if index is not None:
            if not isinstance(child, list) or int(index) >= len(child):
                raise UnknownParameterPath(path)
            if last:
                return child, int(index)
            child = child[int(index)]
        elif last:
            return node, name
        node = child
    raise UnknownParameterPath(path)


def with_value(scenario: Scenario, value: float) -> Scenario:
    """Copy of ``scenario`` with the sweep parameter set to ``value``."""
    sweep = scenario.sweep
    raw = copy.deepcopy(scenario.raw)
    raw.pop("sweep", None)
    path = sweep.parameter
    if sweep.units == "subcarriers":
        value = value / scenario.model.subcarriers
    container, key = resolve_path(raw, path)
    if isinstance(key, tuple):  # eta not yet present in the file
        name, idx = key
        container[name] = list(scenario.allocation.fractions(len(scenario.tiers)))
        container, key = container[name], idx
    container[key] = value
    if path.startswith("allocation.eta"):
        eta = [float(v) for v in raw["allocation"]["eta"]]
        rest = [j for j in range(len(eta)) if j != key]
        others = sum(eta[j] for j in rest)
        for j in rest:
            eta[j] = (1.0 - value) * (eta[j] / others if others > 0 else 1.0 / len(rest))
        raw["allocation"]["eta"] = eta
        if sweep.couple_association:
            base = parse(raw)
            biases = analytic.bias_from_assoc(base.model, base.tiers, eta)
            for tb, b in zip(raw["tiers"], biases):
                tb["bias_db"] = 10.0 * math.log10(b)
    return parse(raw)
