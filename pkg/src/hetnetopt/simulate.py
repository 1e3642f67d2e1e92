"""Monte Carlo validation: PPP topologies, biased association, round-robin scheduling, Rayleigh fading.

Per-subcarrier coverage is evaluated in one of two equivalent ways:

``fading="conditional"`` (default)
    Given the topology and the schedule, fading is i.i.d. per link, subcarrier
    and slot, so the coverage indicator of a subcarrier-slot is Bernoulli with
    probability ``prod_j 1 / (1 + tau x_j)`` (``x_j`` the mean interferer-to-signal
    ratios). Indicators are drawn from that probability.
``fading="explicit"``
    Every fading coefficient is drawn and the SIR compared with the target.
    Exponentially more random numbers; meant for small checks.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import analytic
from .exceptions import EmptyEvaluationRegion, InvalidAllocation
from .model import Link, NetworkModel, Scheme, SpectrumAllocation, Tier, validate

Z95 = 1.959963984540054
MAX_RESAMPLES = 1000


@dataclass(frozen=True)
class Window:
    """Simulation disk and the inner disk in which users are measured."""

    sim_radius: float
    eval_radius: float

    def __post_init__(self):
        if not (0 < self.eval_radius <= self.sim_radius / 2):
            raise ValueError(
                f"need 0 < eval_radius <= sim_radius/2, got {self.eval_radius!r}, {self.sim_radius!r}"
            )

    @classmethod
    def for_tiers(cls, tiers: Sequence[Tier], min_bs: float = 30.0) -> "Window":
        """Smallest disk holding ``min_bs`` expected base stations of the sparsest tier."""
        lam_min = min(t.lambda_k for t in tiers)
        r = math.sqrt(min_bs / (math.pi * lam_min))
        return cls(r, r / 2)


@dataclass(frozen=True)
class Assignment:
    tier: np.ndarray
    bs: np.ndarray
    distance: np.ndarray


@dataclass(frozen=True, eq=False)
class Snapshot:
    bs_positions: tuple[np.ndarray, ...]
    user_positions: np.ndarray
    assignment: Assignment
    rng_seed: object = None

    def eval_mask(self, window: Window) -> np.ndarray:
        return np.hypot(self.user_positions[:, 0], self.user_positions[:, 1]) <= window.eval_radius

    def same_as(self, other: "Snapshot") -> bool:
        if len(self.bs_positions) != len(other.bs_positions):
            return False
        return (
            all(np.array_equal(a, b) for a, b in zip(self.bs_positions, other.bs_positions))
            and np.array_equal(self.user_positions, other.user_positions)
            and np.array_equal(self.assignment.tier, other.assignment.tier)
            and np.array_equal(self.assignment.bs, other.assignment.bs)
        )


def _disk_points(rng: np.random.Generator, intensity: float, radius: float) -> np.ndarray:
    n = rng.poisson(intensity * math.pi * radius * radius)
    r = radius * np.sqrt(rng.random(n))
    th = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(th), r * np.sin(th)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, (tuple, list)):
        seed = np.random.SeedSequence([int(s) for s in seed])
    return np.random.default_rng(seed)


def associate_points(
    bs_positions: Sequence[np.ndarray], points: np.ndarray, alpha: float, tiers: Sequence[Tier]
) -> Assignment:
    """Map each point to the base station with the largest biased received power.

    Ties go to the shorter distance, then to the lower tier index.
    """
    n = len(points)
    k = len(tiers)
    score = np.full((k, n), -np.inf)
    dist = np.full((k, n), np.inf)
    idx = np.zeros((k, n), dtype=np.int64)
    for t, pos in enumerate(bs_positions):
        if len(pos) == 0 or n == 0:
            continue
        d, i = cKDTree(pos).query(points)
        dist[t] = d
        idx[t] = i
        with np.errstate(divide="ignore"):
            score[t] = math.log(tiers[t].p_k * tiers[t].b_k) - alpha * np.log(d)
    best = score.max(axis=0)
    cand = score == best
    dmask = np.where(cand, dist, np.inf)
    cand &= dmask == dmask.min(axis=0)
    tier = np.argmax(cand, axis=0)
    cols = np.arange(n)
    return Assignment(tier=tier, bs=idx[tier, cols], distance=dist[tier, cols])


def associate(snapshot: Snapshot, model: NetworkModel, tiers: Sequence[Tier]) -> Assignment:
    return associate_points(snapshot.bs_positions, snapshot.user_positions, model.alpha, tiers)


def sample_topology(
    model: NetworkModel,
    tiers: Sequence[Tier],
    window: Window,
    seed,
    *,
    with_users: bool = True,
) -> Snapshot:
    """Draw one realization of every tier's PPP and of the user PPP inside the window.

    ``seed`` is an int or a tuple of ints (spawn key). Raises
    EmptyEvaluationRegion when no base station lands in the window or, with
    users, no user lands in the evaluation disk.
    """
    rng = _rng(seed)
    bs = tuple(_disk_points(rng, t.lambda_k, window.sim_radius) for t in tiers)
    if sum(len(b) for b in bs) == 0:
        raise EmptyEvaluationRegion(f"no base station in window (seed {seed!r})")
    users = _disk_points(rng, model.lambda_u, window.sim_radius) if with_users else np.zeros((0, 2))
    if with_users and not np.any(np.hypot(users[:, 0], users[:, 1]) <= window.eval_radius):
        raise EmptyEvaluationRegion(f"no user inside eval_radius (seed {seed!r})")
    assignment = associate_points(bs, users, model.alpha, tiers)
    return Snapshot(bs, users, assignment, seed)


def typical_user_samples(
    model: NetworkModel,
    tiers: Sequence[Tier],
    window: Window,
    n_snapshots: int,
    seed=0,
) -> tuple[np.ndarray, np.ndarray]:
    """Serving tier and distance of a user at the window centre, one per independent topology.

    Only distances to the origin matter, so each tier's points are drawn as
    radii and reduced to the nearest one, vectorized over topologies.
    Topologies without any base station are redrawn.
    """
    rng = _rng(seed)
    alpha = model.alpha
    tier_out = np.empty(n_snapshots, dtype=np.int64)
    dist_out = np.empty(n_snapshots)
    todo = np.arange(n_snapshots)
    for _ in range(MAX_RESAMPLES):
        n = len(todo)
        if n == 0:
            break
        score = np.full((len(tiers), n), -np.inf)
        dist = np.full((len(tiers), n), np.inf)
        for t, tier in enumerate(tiers):
            counts = rng.poisson(tier.lambda_k * math.pi * window.sim_radius**2, size=n)
            r = window.sim_radius * np.sqrt(rng.random(int(counts.sum())))
            has = counts > 0
            starts = np.concatenate(([0], np.cumsum(counts)[:-1]))[has]
            if len(r):
                dist[t, has] = np.minimum.reduceat(r, starts)
            with np.errstate(divide="ignore"):
                score[t] = math.log(tier.p_k * tier.b_k) - alpha * np.log(dist[t])
        best = score.max(axis=0)
        cand = score == best
        dmask = np.where(cand, dist, np.inf)
        cand &= dmask == dmask.min(axis=0)
        tier_idx = np.argmax(cand, axis=0)
        d = dist[tier_idx, np.arange(n)]
        ok = np.isfinite(d)
        tier_out[todo[ok]] = tier_idx[ok]
        dist_out[todo[ok]] = d[ok]
        todo = todo[~ok]
    if len(todo):
        raise EmptyEvaluationRegion(f"{MAX_RESAMPLES} consecutive empty topologies")
    return tier_out, dist_out


def downlink_length_bound_holds(snapshot: Snapshot, model: NetworkModel, tiers: Sequence[Tier]) -> bool:
    """Every non-serving BS of tier j lies beyond r * (P_j B_j / (P_k B_k))^(1/alpha)."""
    asg = snapshot.assignment
    users = snapshot.user_positions
    pb = np.array([t.p_k * t.b_k for t in tiers])
    for j, pos in enumerate(snapshot.bs_positions):
        if len(pos) == 0:
            continue
        d = np.hypot(users[:, None, 0] - pos[None, :, 0], users[:, None, 1] - pos[None, :, 1])
        limit = asg.distance * (pb[j] / pb[asg.tier]) ** (1.0 / model.alpha)
        serving = (asg.tier[:, None] == j) & (asg.bs[:, None] == np.arange(len(pos))[None, :])
        bad = (d <= limit[:, None] * (1 - 1e-12)) & ~serving
        if bad.any():
            return False
    return True


def subcarrier_blocks(allocation: SpectrumAllocation, n_tiers: int, subcarriers: int):
    """(offset, size) of the subcarrier range each tier transmits on.

    Orthogonal blocks are contiguous, sized by largest-remainder rounding of
    ``eta_k * subcarriers`` so that they partition the band exactly.
    """
    if allocation.scheme is Scheme.SHARED:
        return np.zeros(n_tiers, dtype=np.int64), np.full(n_tiers, subcarriers, dtype=np.int64)
    eta = np.asarray(allocation.fractions(n_tiers), dtype=float)
    if abs(eta.sum() - 1.0) > 1e-9:
        raise InvalidAllocation(f"eta sums to {eta.sum()!r}")
    raw = eta * subcarriers
    sizes = np.floor(raw).astype(np.int64)
    short = subcarriers - int(sizes.sum())
    order = sorted(range(n_tiers), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[:short]:
        sizes[k] += 1
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    return offsets, sizes


def allocated_counts(rank: np.ndarray, n_cell: np.ndarray, block: np.ndarray, n_slots: int) -> np.ndarray:
    """Subcarrier-slots owned by each user.

    In slot ``t`` local subcarrier ``i`` of a cell with ``n`` users belongs to
    the user of rank ``(i + t) mod n``.
    """
    t = np.arange(n_slots)[None, :]
    n = n_cell[:, None]
    m = block[:, None]
    r = (rank[:, None] - t) % n
    per_slot = np.where(r < m, (m - 1 - r) // n + 1, 0)
    return per_slot.sum(axis=1)


def uplink_received_power(model: NetworkModel, distance):
    """Serving-link received power before fading under fractional power control."""
    return model.p_u * np.power(distance, (model.epsilon - 1.0) * model.alpha)


@dataclass
class SnapshotResult:
    tier: np.ndarray
    rate: np.ndarray
    covered: np.ndarray
    allocated: np.ndarray
    cond_logc: np.ndarray
    distance: np.ndarray
    resampled: int = 0


def _cells(snap: Snapshot, n_tiers: int):
    sizes = np.array([len(p) for p in snap.bs_positions], dtype=np.int64)
    first = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    cell = first[snap.assignment.tier] + snap.assignment.bs
    n_cells = int(sizes.sum())
    order = np.lexsort((np.arange(len(cell)), cell))
    n_cell = np.bincount(cell, minlength=n_cells)
    start = np.concatenate(([0], np.cumsum(n_cell)[:-1]))
    rank = np.empty(len(cell), dtype=np.int64)
    rank[order] = np.arange(len(cell)) - start[cell[order]]
    cell_tier = np.repeat(np.arange(n_tiers), sizes)
    all_bs = np.concatenate(snap.bs_positions) if n_cells else np.zeros((0, 2))
    return cell, rank, n_cell, start, order, cell_tier, all_bs


def _co_channel(offsets, sizes) -> np.ndarray:
    lo = offsets[:, None]
    hi = (offsets + sizes)[:, None]
    return (np.maximum(lo, lo.T) < np.minimum(hi, hi.T))


def _downlink(model, tiers, snap, ev, cell, cell_tier, all_bs, cochan, fading, alloc, rng):
    alpha = model.alpha
    users = snap.user_positions[ev]
    p = np.array([t.p_k for t in tiers])
    tau = np.array([t.tau_k for t in tiers])[cell_tier[cell[ev]]]
    d = np.hypot(users[:, None, 0] - all_bs[None, :, 0], users[:, None, 1] - all_bs[None, :, 1])
    logpow = np.log(p[cell_tier])[None, :] - alpha * np.log(d)
    serv = cell[ev]
    rows = np.arange(len(users))
    x = np.exp(logpow - logpow[rows, serv][:, None])
    mask = cochan[cell_tier[serv]][:, cell_tier]
    mask[rows, serv] = False
    x = np.where(mask, x, 0.0)
    cond = -tau * x.sum(axis=1)
    if fading == "conditional":
        p_cov = np.exp(-np.log1p(tau[:, None] * x).sum(axis=1))
        covered = rng.binomial(alloc, p_cov)
        return covered, cond
    covered = np.zeros(len(users), dtype=np.int64)
    cond_e = np.zeros(len(users))
    for u in range(len(users)):
        xs = x[u, mask[u]]
        n = int(alloc[u])
        if n == 0:
            continue
        g0 = rng.exponential(size=n)
        gi = rng.exponential(size=(n, len(xs)))
        interf = gi @ xs
        covered[u] = int(np.count_nonzero(g0 > tau[u] * interf))
        cond_e[u] = -tau[u] * interf.mean()
    return covered, cond_e


def _uplink(model, tiers, snap, ev, cell, rank, n_cell, start, order, cell_tier, all_bs, offsets, sizes,
            n_slots, fading, rng):
    alpha, eps = model.alpha, model.epsilon
    asg = snap.assignment
    users = snap.user_positions
    n_users = len(users)
    tau_t = np.array([t.tau_k for t in tiers])
    rx = np.unique(cell[ev])
    rx_tier = cell_tier[rx]
    # power from every user (at its controlled transmit power) into each receiving BS
    dxy = np.hypot(users[:, None, 0] - all_bs[None, rx, 0], users[:, None, 1] - all_bs[None, rx, 1])
    g = model.p_u * np.exp(eps * alpha * np.log(asg.distance))[:, None] * dxy ** (-alpha)
    g = np.vstack((g, np.zeros((1, len(rx)))))
    sig = np.append(uplink_received_power(model, asg.distance), np.inf)
    members = order
    busy = np.flatnonzero(n_cell > 0)
    c_off = offsets[cell_tier[busy]]
    c_size = sizes[cell_tier[busy]]
    c_start = start[busy]
    c_n = n_cell[busy]
    pos_in_busy = np.searchsorted(busy, rx)
    tau_rx = tau_t[rx_tier]
    n_sc = int(model.subcarriers)
    alloc = np.zeros(n_users + 1)
    covered = np.zeros(n_users + 1)
    cond = np.zeros(n_users + 1)
    chunk = max(1, int(4_000_000 // max(1, len(busy) * len(rx))))
    cols = np.arange(len(rx))
    for t in range(n_slots):
        for s0 in range(0, n_sc, chunk):
            s = np.arange(s0, min(n_sc, s0 + chunk))[:, None]
            i = s - c_off[None, :]
            on = (i >= 0) & (i < c_size[None, :])
            slot_idx = c_start[None, :] + (np.where(on, i, 0) + t) % c_n[None, :]
            sched = np.where(on, members[slot_idx], n_users)
            tgt = sched[:, pos_in_busy]
            gg = g[sched]
            gg[:, pos_in_busy, cols] = 0.0
            x = gg / sig[tgt][:, None, :]
            if fading == "conditional":
                p_cov = np.exp(-np.log1p(tau_rx[None, None, :] * x).sum(axis=1))
                hit = rng.random(p_cov.shape) < p_cov
                c_val = -tau_rx[None, :] * x.sum(axis=1)
            else:
                fad = rng.exponential(size=x.shape)
                interf = (x * fad).sum(axis=1)
                hit = rng.exponential(size=interf.shape) > tau_rx[None, :] * interf
                c_val = -tau_rx[None, :] * interf
            valid = tgt < n_users
            tv = tgt[valid]
            alloc += np.bincount(tv, minlength=n_users + 1)
            covered += np.bincount(tv, weights=hit[valid].astype(float), minlength=n_users + 1)
            cond += np.bincount(tv, weights=c_val[valid], minlength=n_users + 1)
    a = alloc[:n_users][ev]
    with np.errstate(invalid="ignore", divide="ignore"):
        cm = np.where(a > 0, cond[:n_users][ev] / a, np.nan)
    return covered[:n_users][ev].astype(np.int64), cm, a.astype(np.int64)


def simulate_snapshot(
    model: NetworkModel,
    tiers: Sequence[Tier],
    allocation: SpectrumAllocation,
    window: Window,
    n_slots: int,
    seed,
    fading: str = "conditional",
) -> SnapshotResult:
    """Per-user outcomes for the users inside the evaluation disk of one topology."""
    if fading not in ("conditional", "explicit"):
        raise ValueError(f"fading must be 'conditional' or 'explicit', got {fading!r}")
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    resampled = 0
    for attempt in range(MAX_RESAMPLES):
        try:
            snap = sample_topology(model, tiers, window, base + (attempt,))
            break
        except EmptyEvaluationRegion:
            resampled += 1
    else:
        raise EmptyEvaluationRegion(f"{MAX_RESAMPLES} consecutive empty topologies")
    rng = np.random.default_rng(np.random.SeedSequence(list(base) + [attempt, 1]))
    k = len(tiers)
    offsets, sizes = subcarrier_blocks(allocation, k, int(model.subcarriers))
    cell, rank, n_cell, start, order, cell_tier, all_bs = _cells(snap, k)
    ev = snap.eval_mask(window)
    tier_ev = snap.assignment.tier[ev]
    block = sizes[tier_ev]
    alloc = allocated_counts(rank[ev], n_cell[cell[ev]], block, n_slots)
    if Link(model.link) is Link.DOWNLINK:
        cochan = _co_channel(offsets, sizes)
        covered, cond = _downlink(model, tiers, snap, ev, cell, cell_tier, all_bs, cochan, fading, alloc, rng)
    else:
        covered, cond, alloc_ul = _uplink(model, tiers, snap, ev, cell, rank, n_cell, start, order, cell_tier,
                                          all_bs, offsets, sizes, n_slots, fading, rng)
        assert np.array_equal(alloc_ul, alloc)
    tau = np.array([t.tau_k for t in tiers])[tier_ev]
    rate = (model.bandwidth_w / model.subcarriers) * np.log1p(tau) * covered / n_slots
    cond = np.where(alloc > 0, cond, np.nan)
    return SnapshotResult(
        tier=tier_ev.astype(np.int64),
        rate=rate,
        covered=covered.astype(np.int64),
        allocated=alloc.astype(np.int64),
        cond_logc=cond,
        distance=snap.assignment.distance[ev],
        resampled=resampled,
    )


@dataclass(frozen=True)
class CampaignMetrics:
    """Aggregates over all measured users of a campaign.

    Rates are in nats/s. ``empirical_elogc`` is the per-tier mean of the log of
    each user's covered fraction of allocated subcarrier-slots (users with no
    covered slot excluded); ``empirical_elogc_conditional`` is the per-tier
    mean of ``-tau * I / S`` averaged over each user's subcarrier-slots, i.e.
    the log coverage probability taken over serving-link fading only.
    """

    mean_rate: float
    p5_rate: float
    mean_finite_utility: float
    zero_rate_fraction: float
    empirical_assoc: tuple[float, ...]
    empirical_elogc: tuple[float, ...]
    empirical_elogc_conditional: tuple[float, ...]
    ci_halfwidths: dict = field(default_factory=dict)
    n_users: int = 0
    n_snapshots: int = 0
    resampled: int = 0


def _ratio_ci(y: np.ndarray, n: np.ndarray) -> float:
    """95% half-width of sum(y)/sum(n) treating snapshots as i.i.d. clusters."""
    keep = n > 0
    y, n = y[keep], n[keep]
    m = len(n)
    if m < 2 or n.sum() == 0:
        return math.nan
    est = y.sum() / n.sum()
    resid = y - est * n
    var = np.sum(resid**2) / (m * (m - 1)) / np.mean(n) ** 2
    return float(Z95 * math.sqrt(var))


def _quantile_ci(sorted_rates: np.ndarray, q: float) -> float:
    n = len(sorted_rates)
    if n < 2:
        return math.nan
    half = Z95 * math.sqrt(q * (1 - q) / n)
    lo = sorted_rates[max(0, int(math.floor((q - half) * n)))]
    hi = sorted_rates[min(n - 1, int(math.ceil((q + half) * n)))]
    return float((hi - lo) / 2)


def aggregate(results: Sequence[SnapshotResult], n_tiers: int) -> CampaignMetrics:
    tier = np.concatenate([r.tier for r in results])
    rate = np.concatenate([r.rate for r in results])
    covered = np.concatenate([r.covered for r in results])
    alloc = np.concatenate([r.allocated for r in results])
    cond = np.concatenate([r.cond_logc for r in results])
    sizes = np.array([len(r.tier) for r in results])
    snap_id = np.repeat(np.arange(len(results)), sizes)
    nsnap = len(results)

    def per_snap(values, mask=None):
        w = values if mask is None else np.where(mask, values, 0.0)
        return np.bincount(snap_id, weights=w, minlength=nsnap)

    def counts(mask):
        return np.bincount(snap_id, weights=mask.astype(float), minlength=nsnap)

    ones = np.ones_like(rate)
    positive = rate > 0
    with np.errstate(divide="ignore"):
        logr = np.where(positive, np.log(np.where(positive, rate, 1.0)), 0.0)
    finite_cov = covered > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = np.where(finite_cov, np.log(np.where(finite_cov, covered, 1) / np.maximum(alloc, 1)), 0.0)

    ci = {
        "mean_rate": _ratio_ci(per_snap(rate), per_snap(ones)),
        "mean_finite_utility": _ratio_ci(per_snap(logr, positive), counts(positive)),
        "zero_rate_fraction": _ratio_ci(counts(~positive), per_snap(ones)),
    }
    srt = np.sort(rate)
    ci["p5_rate"] = _quantile_ci(srt, 0.05)
    assoc, elogc, econd = [], [], []
    total = len(rate)
    for k in range(n_tiers):
        in_k = tier == k
        assoc.append(float(np.count_nonzero(in_k) / total))
        ci[f"empirical_assoc[{k}]"] = _ratio_ci(counts(in_k), per_snap(ones))
        sel = in_k & finite_cov
        elogc.append(float(np.mean(logc[sel])) if sel.any() else math.nan)
        ci[f"empirical_elogc[{k}]"] = _ratio_ci(per_snap(logc, sel), counts(sel))
        selc = in_k & np.isfinite(cond)
        econd.append(float(np.mean(cond[selc])) if selc.any() else math.nan)
        ci[f"empirical_elogc_conditional[{k}]"] = _ratio_ci(
            per_snap(np.where(selc, cond, 0.0)), counts(selc)
        )
    return CampaignMetrics(
        mean_rate=float(np.mean(rate)),
        p5_rate=float(np.percentile(rate, 5)),
        mean_finite_utility=float(np.mean(logr[positive])) if positive.any() else math.nan,
        zero_rate_fraction=float(np.count_nonzero(~positive) / total),
        empirical_assoc=tuple(assoc),
        empirical_elogc=tuple(elogc),
        empirical_elogc_conditional=tuple(econd),
        ci_halfwidths=ci,
        n_users=int(total),
        n_snapshots=nsnap,
        resampled=int(sum(r.resampled for r in results)),
    )


def _run_chunk(args):
    model, tiers, allocation, window, n_slots, seed, indices, fading = args
    return [simulate_snapshot(model, tiers, allocation, window, n_slots, (seed, i), fading) for i in indices]


def run_campaign(
    model: NetworkModel,
    tiers: Sequence[Tier],
    allocation: SpectrumAllocation,
    window: Window | None = None,
    n_snapshots: int = 2000,
    n_slots: int = 20,
    seed: int = 0,
    *,
    fading: str = "conditional",
    threads: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> CampaignMetrics:
    """Simulate ``n_snapshots`` independent topologies and aggregate user metrics.

    Snapshot ``i`` draws from the seed sequence ``(seed, i, attempt)``, so the
    result depends only on ``(seed, n_snapshots)``, not on ``threads``.
    """
    model, tiers = validate(model, tiers)
    if allocation.scheme is Scheme.ORTHOGONAL and len(allocation.eta) != len(tiers):
        raise InvalidAllocation(f"eta has {len(allocation.eta)} entries for {len(tiers)} tiers")
    window = window or Window.for_tiers(tiers)
    chunk = max(1, min(50, n_snapshots // max(1, 4 * threads)))
    jobs = [
        (model, tiers, allocation, window, n_slots, seed, range(i, min(n_snapshots, i + chunk)), fading)
        for i in range(0, n_snapshots, chunk)
    ]
    results: list[SnapshotResult] = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_run_chunk, jobs):
                results.extend(part)
                if progress:
                    progress(len(results), n_snapshots)
    else:
        for job in jobs:
            results.extend(_run_chunk(job))
            if progress:
                progress(len(results), n_snapshots)
    return aggregate(results, len(tiers))


def stderr_progress(done: int, total: int) -> None:
    print(f"\rsnapshots {done}/{total}", end="" if done < total else "\n", file=sys.stderr, flush=True)
