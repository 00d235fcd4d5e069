"""Snapshot Monte Carlo estimators for coverage, rate and association.

One trial samples every tier's PPP inside the scenario window, resolves
LOS states and shadowing, selects the serving station under the policy,
draws fades and evaluates the SIR/SINR seen by the probe user at the
origin.  Trials are quasi-static (one fading draw each).

Randomness is counter-based (Philox).  ``run_trial`` owns one stream per
(seed, trial index) and is bit-reproducible in isolation.  The estimators
vectorize across fixed-size batches of trials; each batch derives its own
stream from (seed, batch index), so estimates are reproducible for a given
seed and do not depend on the worker count (batch boundaries never move,
and reductions run in trial order).

When the scenario blocks NLOS mmWave links, the mmWave tier is sampled
directly from its LOS-thinned radial law (NLOS points carry no signal and
no interference, so they are never materialized); the thinned process has
finite total mass, which keeps the cost bounded as the window grows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .association import AssociationPolicy
from .model import BandTag, FadingConvention, MetricEstimate, Scenario, validate_scenario

_NO_TIER = -1
_BATCH = 512


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one snapshot trial."""

    serving_tier: Optional[int]
    sinr: Optional[float]
    covered: bool
    rate_nats: float


def _invert_thinned_radii(u: np.ndarray, c: float, radius: float) -> np.ndarray:
    """Solve (1 - exp(-c r)(1 + c r))/c^2 = u for r by vectorized Newton."""
    r = np.sqrt(2.0 * u)
    for _ in range(40):
        f = (1.0 - np.exp(-c * r) * (1.0 + c * r)) / (c * c) - u
        fp = r * np.exp(-c * r)
        step = f / np.maximum(fp, 1e-300)
        r = np.clip(r - step, 0.0, radius)
        if np.max(np.abs(step)) < 1e-9:
            break
    return r


class _TrialEnv:
    """Precomputed per-scenario arrays consumed by the samplers."""

    def __init__(self, s: Scenario, policy: AssociationPolicy):
        s = validate_scenario(s)
        self.s = s
        omega, expo = policy.resolve(s)
        n = s.num_tiers
        self.n_tiers = n
        self.radius = s.window_radius_m
        self.log_floor = math.log(s.assoc_floor_w())
        self.c_block = s.blockage.rate_per_m
        self.log_omega = np.log(omega)
        self.expo = expo
        self.lam = np.array([t.intensity_per_m2 for t in s.tiers])
        self.power = np.array([t.power_w for t in s.tiers])
        self.antennas = np.array([t.tx_antennas for t in s.tiers], dtype=np.int64)
        self.alpha_los = np.array([s.pathloss_for(t).alpha_los for t in s.tiers])
        self.alpha_nlos = np.array([s.pathloss_for(t).alpha_nlos for t in s.tiers])
        self.sigma_los = math.sqrt(2.0) * np.array([t.los_shadow_rho for t in s.tiers])
        self.sigma_nlos = math.sqrt(2.0) * np.array([t.nlos_shadow_rho for t in s.tiers])
        self.nu = np.array([s.band_for(t).intercept for t in s.tiers])
        self.bw = np.array([s.band_for(t).bandwidth_hz for t in s.tiers])
        self.is_mm = np.array([t.band == BandTag.MMWAVE for t in s.tiers])
        self.m_index = s.mmwave_index
        self.noise_mm = s.mmwave_band.noise_power_w
        self.blocked = s.mmwave_nlos_blocked
        self.chi2 = s.uhf_fading_convention == FadingConvention.CHI2_2T
        if self.c_block > 0:
            c, r = self.c_block, self.radius
            self._j_window = (1.0 - math.exp(-c * r) * (1.0 + c * r)) / (c * c)
        else:
            self._j_window = 0.5 * self.radius**2

    def rng_for(self, seed: int, index: int) -> np.random.Generator:
        key = np.array(
            [seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def _tier_thinned(self, k: int) -> bool:
        return bool(self.is_mm[k]) and self.blocked and self.c_block > 0

    def sample_batch(self, rng: np.random.Generator, n_trials: int):
        """Sample all tiers for a batch; tier-major concatenated arrays.

        Returns (trial_id, tier, r, is_los, log_shadow, blocks) where
        blocks lists (tier, offset, per-trial counts) so that per-trial
        segment reductions can run without sorting.  The draw order per
        tier is counts, radii, LOS flags, shadows, fixed for determinism.
        """
        tid_parts: List[np.ndarray] = []
        tier_parts: List[np.ndarray] = []
        r_parts: List[np.ndarray] = []
        los_parts: List[np.ndarray] = []
        logg_parts: List[np.ndarray] = []
        blocks: List[Tuple[int, int, np.ndarray]] = []
        offset = 0
        for k in range(self.n_tiers):
            thinned = self._tier_thinned(k)
            if thinned:
                mean = 2.0 * math.pi * self.lam[k] * self._j_window
            else:
                mean = self.lam[k] * math.pi * self.radius**2
            counts = rng.poisson(mean, n_trials) if mean > 0 else np.zeros(n_trials, dtype=np.int64)
            total = int(counts.sum())
            if total == 0:
                continue
            u = rng.random(total)
            if thinned:
                r = _invert_thinned_radii(u * self._j_window, self.c_block, self.radius)
                flags = np.ones(total, dtype=bool)
            else:
                r = self.radius * np.sqrt(u)
                if self.c_block > 0:
                    flags = rng.random(total) < np.exp(-self.c_block * r)
                else:
                    flags = np.ones(total, dtype=bool)
            r = np.maximum(r, 1e-6)  # probability-zero near-field guard
            sigma = np.where(flags, self.sigma_los[k], self.sigma_nlos[k])
            logg = sigma * rng.standard_normal(total)
            tid_parts.append(np.repeat(np.arange(n_trials, dtype=np.int64), counts))
            tier_parts.append(np.full(total, k, dtype=np.int64))
            r_parts.append(r)
            los_parts.append(flags)
            logg_parts.append(logg)
            blocks.append((k, offset, counts))
            offset += total
        if not tid_parts:
            empty = np.empty(0)
            return (
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.int64),
                empty,
                np.empty(0, dtype=bool),
                empty,
                blocks,
            )
        return (
            np.concatenate(tid_parts),
            np.concatenate(tier_parts),
            np.concatenate(r_parts),
            np.concatenate(los_parts),
            np.concatenate(logg_parts),
            blocks,
        )

    def _metrics(self, tier, r, los, logg):
        alpha = np.where(los, self.alpha_los[tier], self.alpha_nlos[tier])
        with np.errstate(divide="ignore"):
            metric = self.expo[tier] * (
                self.log_omega[tier]
                + logg
                - np.log(self.nu[tier])
                - alpha * np.log(r)
                - self.log_floor
            )
        return metric, alpha

    def _serving_index(self, tid, tier, r, metric, blocks, n_trials):
        """Per-trial argmax with (distance, tier) tie-break; -1 on a hole.

        Works in O(points): each tier block is already trial-ordered, so a
        segment maximum-reduce yields per-(trial, tier) champions; only the
        champions (plus exact-tie duplicates) enter the small final sort.
        """
        serving = np.full(n_trials, -1, dtype=np.int64)
        if not tid.size:
            return serving
        cand: List[np.ndarray] = []
        for k, off, counts in blocks:
            total = int(counts.sum())
            m = metric[off : off + total]
            nonzero = counts > 0
            starts_all = np.zeros(n_trials, dtype=np.int64)
            starts_all[1:] = np.cumsum(counts)[:-1]
            seg_max = np.full(n_trials, -np.inf)
            seg_max[nonzero] = np.maximum.reduceat(m, starts_all[nonzero])
            hit = np.flatnonzero(m == np.repeat(seg_max, counts))
            cand.append(hit + off)
        idx = np.concatenate(cand)
        order = np.lexsort((tier[idx], r[idx], -metric[idx], tid[idx]))
        idx = idx[order]
        uniq, firsts = np.unique(tid[idx], return_index=True)
        serving[uniq] = idx[firsts]
        return serving

    def run_batch(self, rng: np.random.Generator, n_trials: int, theta: float):
        """Vectorized trials; returns (tier, covered, rate, sinr) arrays."""
        tid, tier, r, los, logg, blocks = self.sample_batch(rng, n_trials)
        metric, alpha = self._metrics(tier, r, los, logg)
        serving = self._serving_index(tid, tier, r, metric, blocks, n_trials)
        has = serving >= 0
        idx = serving[has]

        serv_tier = np.full(n_trials, _NO_TIER, dtype=np.int64)
        serv_tier[has] = tier[idx]
        shape = np.where(serv_tier >= 0, self.antennas[np.maximum(serv_tier, 0)], 1)
        gam = rng.standard_gamma(shape)
        if self.chi2:
            gam = 2.0 * gam
        exp_serv = rng.exponential(1.0, n_trials)
        h_all = rng.exponential(1.0, tid.size)

        serv_is_mm = np.zeros(n_trials, dtype=bool)
        serv_is_mm[has] = self.is_mm[tier[idx]]
        fade = np.where(
            serv_is_mm,
            np.where(serv_tier >= 0, self.antennas[np.maximum(serv_tier, 0)], 1) * exp_serv,
            gam,
        )

        signal = np.zeros(n_trials)
        g_serv = np.exp(logg[idx])
        signal[has] = (
            self.power[tier[idx]]
            * fade[has]
            * g_serv
            / (self.nu[tier[idx]] * r[idx] ** alpha[idx])
        )

        # in-band interference, serving point excluded
        in_band = np.zeros(tid.size, dtype=bool)
        if tid.size:
            in_band = self.is_mm[tier] == serv_is_mm[tid]
            in_band &= has[tid]
            in_band[idx] = False
        contrib = np.zeros(tid.size)
        if tid.size:
            sel = in_band
            contrib[sel] = (
                self.power[tier[sel]]
                * h_all[sel]
                * np.exp(logg[sel])
                / (self.nu[tier[sel]] * r[sel] ** alpha[sel])
            )
        interference = np.bincount(tid[in_band], weights=contrib[in_band], minlength=n_trials)
        denom = interference + np.where(serv_is_mm, self.noise_mm, 0.0)

        with np.errstate(divide="ignore", invalid="ignore"):
            sinr = np.where(has, np.where(denom > 0, signal / denom, np.inf), np.nan)
        covered = np.where(has, sinr >= theta, False)
        bw = np.where(serv_tier >= 0, self.bw[np.maximum(serv_tier, 0)], 0.0)
        rate = np.where(has, bw * np.log1p(np.minimum(sinr, 1e300)), 0.0)
        rate = np.where(np.isinf(sinr) & has, np.inf, rate)
        return serv_tier, covered.astype(bool), rate, sinr

    def best_metric_batch(self, rng: np.random.Generator, n_trials: int) -> np.ndarray:
        tid, tier, r, los, logg, blocks = self.sample_batch(rng, n_trials)
        metric, _ = self._metrics(tier, r, los, logg)
        out = np.full(n_trials, -np.inf)
        for k, off, counts in blocks:
            total = int(counts.sum())
            m = metric[off : off + total]
            nonzero = counts > 0
            starts_all = np.zeros(n_trials, dtype=np.int64)
            starts_all[1:] = np.cumsum(counts)[:-1]
            seg = np.full(n_trials, -np.inf)
            seg[nonzero] = np.maximum.reduceat(m, starts_all[nonzero])
            out = np.maximum(out, seg)
        return out

    def selection_batch(self, rng: np.random.Generator, n_trials: int):
        tid, tier, r, los, logg, blocks = self.sample_batch(rng, n_trials)
        metric, _ = self._metrics(tier, r, los, logg)
        serving = self._serving_index(tid, tier, r, metric, blocks, n_trials)
        has = serving >= 0
        tiers = np.full(n_trials, _NO_TIER, dtype=np.int64)
        dists = np.full(n_trials, np.nan)
        tiers[has] = tier[serving[has]]
        dists[has] = r[serving[has]]
        return tiers, dists

    # ------------------------------------------------------------------
    # single-trial path (per-trial stream contract)
    # ------------------------------------------------------------------

    def run_one(self, rng: np.random.Generator, theta: float) -> TrialResult:
        serv_tier, covered, rate, sinr = self.run_batch(rng, 1, theta)
        if serv_tier[0] == _NO_TIER:
            return TrialResult(None, None, False, 0.0)
        return TrialResult(
            int(serv_tier[0]), float(sinr[0]), bool(covered[0]), float(rate[0])
        )


def run_trial(
    s: Scenario,
    policy: AssociationPolicy,
    theta: float,
    seed: int,
    trial_index: int,
) -> TrialResult:
    """Run one fully deterministic trial: same (seed, index), same result."""
    env = _TrialEnv(s, policy)
    return env.run_one(env.rng_for(seed, trial_index), theta)


def _batch_bounds(trials: int) -> List[Tuple[int, int, int]]:
    """Fixed (batch_index, start, stop) partition of the trial range."""
    out = []
    n_batches = (trials + _BATCH - 1) // _BATCH
    for b in range(n_batches):
        lo = b * _BATCH
        hi = min(trials, lo + _BATCH)
        out.append((b, lo, hi))
    return out


def _chunk_job(args):
    s, policy, theta, seed, batches, mode = args
    env = _TrialEnv(s, policy)
    outs = []
    for b, lo, hi in batches:
        rng = env.rng_for(seed, b)
        if mode == "trial":
            outs.append((lo, env.run_batch(rng, hi - lo, theta)))
        elif mode == "best":
            outs.append((lo, env.best_metric_batch(rng, hi - lo)))
        else:
            outs.append((lo, env.selection_batch(rng, hi - lo)))
    return outs


def _run_batches(s, policy, theta, trials, seed, workers, mode):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    batches = _batch_bounds(trials)
    if workers <= 1:
        results = _chunk_job((s, policy, theta, seed, batches, mode))
    else:
        groups: List[List[Tuple[int, int, int]]] = [[] for _ in range(workers)]
        for i, b in enumerate(batches):
            groups[i % workers].append(b)
        jobs = [(s, policy, theta, seed, g, mode) for g in groups if g]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_chunk_job, jobs):
                results.extend(part)
    results.sort(key=lambda t: t[0])
    return results


def _run_all(s, policy, theta, trials, seed, workers):
    """Per-trial (tier, covered, rate) arrays, identical for any worker count."""
    tier = np.full(trials, _NO_TIER, dtype=np.int64)
    covered = np.zeros(trials, dtype=bool)
    rate = np.zeros(trials)
    for lo, (t_c, c_c, r_c, _) in _run_batches(s, policy, theta, trials, seed, workers, "trial"):
        tier[lo : lo + len(t_c)] = t_c
        covered[lo : lo + len(c_c)] = c_c
        rate[lo : lo + len(r_c)] = r_c
    return tier, covered, rate


def estimate_coverage(
    s: Scenario,
    policy: AssociationPolicy,
    theta: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> MetricEstimate:
    """Coverage probability with its binomial standard error."""
    _, covered, _ = _run_all(s, policy, theta, trials, seed, workers)
    p = float(np.count_nonzero(covered)) / trials
    se = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return MetricEstimate(value=p, error=se, count=trials)


@dataclass(frozen=True)
class RateEstimate:
    """Mean rate estimate with the per-tier conditional breakdown."""

    total: MetricEstimate
    per_tier: Tuple[MetricEstimate, ...]
    hole_fraction: float


def estimate_rate(
    s: Scenario,
    policy: AssociationPolicy,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RateEstimate:
    """Mean link rate (nats/sec); holes contribute zero rate."""
    tier, _, rate = _run_all(s, policy, 1.0, trials, seed, workers)
    mean = float(np.sum(rate)) / trials
    se = float(np.std(rate, ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    per: List[MetricEstimate] = []
    n_tiers = validate_scenario(s).num_tiers
    for m in range(n_tiers):
        mask = tier == m
        n_m = int(np.count_nonzero(mask))
        if n_m == 0:
            per.append(MetricEstimate(0.0, 0.0, 0))
            continue
        vals = rate[mask]
        m_se = float(np.std(vals, ddof=1)) / math.sqrt(n_m) if n_m > 1 else 0.0
        per.append(MetricEstimate(float(np.mean(vals)), m_se, n_m))
    hole = float(np.count_nonzero(tier == _NO_TIER)) / trials
    return RateEstimate(MetricEstimate(mean, se, trials), tuple(per), hole)


def estimate_assoc_prob(
    s: Scenario,
    policy: AssociationPolicy,
    trials: int,
    seed: int,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Per-tier association frequencies, their standard errors, hole rate.

    Frequencies plus the hole fraction sum to one exactly.
    """
    tier, _, _ = _run_all(s, policy, 1.0, trials, seed, workers)
    n_tiers = validate_scenario(s).num_tiers
    freqs = np.array(
        [float(np.count_nonzero(tier == m)) / trials for m in range(n_tiers)]
    )
    ses = np.sqrt(np.maximum(freqs * (1.0 - freqs), 0.0) / trials)
    hole = float(np.count_nonzero(tier == _NO_TIER)) / trials
    return freqs, ses, hole


def empirical_best_assoc_cdf(
    s: Scenario,
    policy: AssociationPolicy,
    probes: Sequence[float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of the best association gain at the probe levels.

    Gains beyond the window are never observed, so the empirical CDF at
    very small probes is floored by the window truncation.
    """
    probes = np.asarray(list(probes), dtype=float)
    if np.any(probes <= 0):
        raise ValueError("probes must be positive")
    best = np.empty(trials)
    for lo, vals in _run_batches(s, policy, 0.0, trials, seed, workers, "best"):
        best[lo : lo + len(vals)] = vals
    log_probes = np.log(probes)
    fracs = np.array([float(np.count_nonzero(best <= lp)) / trials for lp in log_probes])
    ses = np.sqrt(np.maximum(fracs * (1.0 - fracs), 0.0) / trials)
    return fracs, ses


def serving_selection(
    s: Scenario,
    policy: AssociationPolicy,
    trials: int,
    seed: int,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Serving (tier, distance) per trial; distance is NaN on a hole.

    Two policies compared under the same seed see identical realizations,
    so equal distances mean identical serving stations.
    """
    tiers = np.empty(trials, dtype=np.int64)
    dists = np.empty(trials)
    for lo, (t_c, d_c) in _run_batches(s, policy, 0.0, trials, seed, workers, "select"):
        tiers[lo : lo + len(t_c)] = t_c
        dists[lo : lo + len(d_c)] = d_c
    return tiers, dists
