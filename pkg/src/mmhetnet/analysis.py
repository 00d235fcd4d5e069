"""Analytical engine: association statistics, coverage probability, link rate.

Everything is evaluated in a dimensionless domain.  Each station is mapped
to its equivalent distance D = (r / r_ref) * (omega * G)^(-1/alpha), the
distance at which an unshadowed unit-bias station would offer the same
association gain.  Under a policy with per-tier exponents e_k the serving
station is (approximately) the point minimizing D^(e_k) over the union of
per-tier inhomogeneous Poisson processes; LOS and NLOS stations of a tier
form separate sub-processes whose intensities carry the blockage law.

Coverage splits per serving tier:

    p_cov(theta) = sum_m phi_m * cov_m(theta)

where phi_m are exact tier association probabilities (computed in the
metric domain from the per-tier gain-exceedance areas) and cov_m is a
tier-conditional coverage kernel.  For a UHF tier with T antennas the
kernel enters through the derivative sum

    cov_m = sum_{n<T} ((-v)^n / n!) d^n B_m / dv^n  at v = theta / c_fade,

the Gamma-fading expansion of the conditional interference Laplace
transform B_m; the mmWave tier uses cov_M = B_M(theta / T_M) with the
thermal-noise factor folded into B_M.  The link rate is assembled from the
same kernels through the Shannon-transform identity

    E[ln(1 + X/Y)] = int_0^inf (1/s) [1 - L_X(s)] L_Y(s) ds,

so C_m = W * int (1/s) [1 - (1 + c_fade*s)^(-T)] B_m(s) ds for UHF tiers
and C_M = W * int T/(1+s*T) B_M(s) ds for the mmWave tier.

Two levels of blockage handling are available for the kernels: the
factorized form pulls shadowing moments out of the blockage factor
(matching ``equivalent_intensity``), while the exact mix keeps the
shadow-dependent blockage argument under a Gauss-Hermite expectation.
The exact mix is the default; it tracks the Monte Carlo engine noticeably
better under heavy shadowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import hyp2f1

from .association import AssociationPolicy, PolicyKind
from .model import BandTag, DomainError, Scenario, validate_scenario
from .numerics import NonConvergence, QuadSpec, integrate_semiinfinite, nth_derivative

_EXP_CLIP = 700.0


def _j_ramp(a, y):
    """int_0^y r*exp(-a*r) dr, stable for small a*y; a >= 0."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    ay = a * y
    small = ay < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (1.0 - np.exp(-np.minimum(ay, _EXP_CLIP)) * (1.0 + ay)) / np.where(a > 0, a, 1.0) ** 2
    ays = np.minimum(ay, 1.0)  # series only selected for tiny ay
    series = 0.5 * y * y * (1.0 - 2.0 * ays / 3.0 + 0.25 * ays * ays)
    return np.where(small, series, exact)


def _power_overlap(zeta, alpha: float, u0=1.0):
    """int_{u0}^inf u / (1 + u^alpha / zeta) du for alpha > 2, zeta >= 0."""
    scalar = np.ndim(zeta) == 0 and np.ndim(u0) == 0
    z_in, u_lo = np.broadcast_arrays(
        np.atleast_1d(np.asarray(zeta, dtype=float)),
        np.atleast_1d(np.asarray(u0, dtype=float)),
    )
    p = alpha / 2.0
    full = math.pi / (p * math.sin(math.pi / p))
    out = np.zeros(z_in.shape)
    pos = (z_in > 0) & np.isfinite(u_lo)
    if np.any(pos):
        z = z_in[pos] ** (1.0 / p)
        with np.errstate(over="ignore"):
            w = u_lo[pos] ** 2 / z
        w = np.minimum(w, 1e290)
        finite = w * hyp2f1(1.0, 1.0 / p, 1.0 + 1.0 / p, -(w**p))
        out[pos] = 0.5 * z * np.maximum(full - finite, 0.0)
    return float(out[0]) if scalar else out


@dataclass
class _SubProcess:
    """Gauss-Hermite representation of one LOS or NLOS sub-process.

    In the equivalent-distance domain the sub-process of tier k has
    intensity lam_hat * sum_i coef[i] * blk_i(r) where blk_i is
    exp(-b*scale[i]*r) for LOS and 1 - exp(-b*scale[i]*r) for NLOS.
    ``psi`` is the constant part of the sub-process gain law
    psi * G * (r/r_ref)^-alpha (the NLOS law keeps the physical penalty
    r_ref^(alpha_los - alpha_nlos) relative to LOS).
    """

    coef: np.ndarray
    scale: np.ndarray
    alpha: float
    is_los: bool
    psi: float


class AnalysisContext:
    """Scenario, policy and quadrature state shared by the analytical ops."""

    def __init__(
        self,
        scenario: Scenario,
        policy: AssociationPolicy,
        quad: QuadSpec = QuadSpec(),
        *,
        gh_nodes: int = 16,
        laguerre_nodes: int = 48,
        outer_panels: int = 30,
        panel_nodes: int = 10,
        rate_grid_points: int = 64,
        exact_blockage_mix: bool = True,
    ):
        self.scenario = validate_scenario(scenario)
        self.policy = policy
        self.quad = quad
        quad.check()
        self.gh_nodes = int(gh_nodes)
        self.laguerre_nodes = int(laguerre_nodes)
        self.outer_panels = int(outer_panels)
        self.panel_nodes = int(panel_nodes)
        self.rate_grid_points = int(rate_grid_points)
        self.exact_blockage_mix = bool(exact_blockage_mix)

        s = self.scenario
        self.r0 = s.assoc_ref_distance_m
        self.omega, self.expo = policy.resolve(s)
        self.m_index = s.mmwave_index
        self.lam_hat = np.array([t.intensity_per_m2 * self.r0**2 for t in s.tiers])
        self.blockage_rate = s.blockage.rate_per_m * self.r0  # per unit of r0
        self.powers = np.array([t.power_w for t in s.tiers])
        self.antennas = np.array([t.tx_antennas for t in s.tiers], dtype=int)
        self.alpha_los = np.array([s.pathloss_for(t).alpha_los for t in s.tiers])
        self.alpha_nlos = np.array([s.pathloss_for(t).alpha_nlos for t in s.tiers])
        self.rho_los = np.array([t.los_shadow_rho for t in s.tiers])
        self.rho_nlos = np.array([t.nlos_shadow_rho for t in s.tiers])
        self.nus = np.array([s.band_for(t).intercept for t in s.tiers])
        self.floor = s.assoc_floor_w()
        self.window_hat = s.window_radius_m / self.r0
        # per-tier gain-law constants of the floor-referenced association
        # signal, bias*G/(nu r^alpha floor) = psi * G * (r/r0)^-alpha;
        # an overflowing normalization means the sub-process is invisible
        with np.errstate(over="ignore"):
            self.psi_los = self.omega / (self.floor * self.nus * self.r0**self.alpha_los)
            self.psi_nlos = self.omega / (self.floor * self.nus * self.r0**self.alpha_nlos)

        gh_x, gh_w = np.polynomial.hermite.hermgauss(self.gh_nodes)
        self._gh = (gh_x, gh_w / math.sqrt(math.pi))
        la_x, la_w = np.polynomial.laguerre.laggauss(self.laguerre_nodes)
        self._laguerre = (la_x, la_w)

        self._subs: List[List[_SubProcess]] = [self._build_subs(k) for k in range(s.num_tiers)]
        self._grid_cache: dict = {}
        self._kernel_cache: dict = {}
        self._phi_cache: Optional[Tuple[np.ndarray, float]] = None
        self._rate_interp_cache: dict = {}

    # ------------------------------------------------------------------
    # sub-process construction
    # ------------------------------------------------------------------

    def _nlos_visible(self, k: int) -> bool:
        return not (k == self.m_index and self.scenario.mmwave_nlos_blocked)

    def _gh_gains(self, rho: float) -> Tuple[np.ndarray, np.ndarray]:
        """Gains and weights representing ln G ~ Normal(0, 2 rho^2)."""
        if rho == 0.0:
            return np.ones(1), np.ones(1)
        x, w = self._gh
        return np.exp(2.0 * rho * x), w.copy()

    def _build_subs(self, k: int) -> List[_SubProcess]:
        out: List[_SubProcess] = []
        for is_los, alpha, rho, psi in (
            (True, self.alpha_los[k], self.rho_los[k], self.psi_los[k]),
            (False, self.alpha_nlos[k], self.rho_nlos[k], self.psi_nlos[k]),
        ):
            if not is_los and not self._nlos_visible(k):
                continue
            if self.exact_blockage_mix:
                gains, weights = self._gh_gains(rho)
                coef = weights * (psi * gains) ** (2.0 / alpha)
                scale = (psi * gains) ** (1.0 / alpha)
            else:
                coef = np.array([psi ** (2.0 / alpha) * math.exp(4.0 * rho**2 / alpha**2)])
                scale = np.array([psi ** (1.0 / alpha)])
            out.append(
                _SubProcess(coef=coef, scale=scale, alpha=alpha, is_los=is_los, psi=psi)
            )
        return out

    # ------------------------------------------------------------------
    # equivalent-distance void and density
    # ------------------------------------------------------------------

    def _sub_void(self, k: int, sub: _SubProcess, y: np.ndarray) -> np.ndarray:
        """2*pi int_0^y (sub-process intensity) r dr, window-truncated."""
        b = self.blockage_rate
        acc = np.zeros_like(y)
        for c, sc in zip(sub.coef, sub.scale):
            ycap = np.minimum(y, self.window_hat / sc)
            j = _j_ramp(b * sc, ycap)
            acc += c * j if sub.is_los else c * (0.5 * ycap * ycap - j)
        return 2.0 * math.pi * self.lam_hat[k] * acc

    def _void_total(self, m: int, alpha_serving: float, x: np.ndarray) -> np.ndarray:
        """Stronger-gain void measure for a serving (m, alpha) point at x.

        A sub-process point beats the serving gain x^-alpha_serving (under
        the policy exponents) iff its equivalent distance is below
        x^(alpha_serving e_m / (alpha_sub e_k)), so the survival factor of
        the serving point voids each sub-process up to that boundary; this
        is the exact best-gain law expressed in the equivalent domain.
        """
        logx = np.log(np.maximum(x, 1e-300))
        total = np.zeros_like(x)
        for k in range(self.scenario.num_tiers):
            for sub in self._subs[k]:
                power = alpha_serving * self.expo[m] / (sub.alpha * self.expo[k])
                # the upper clip keeps y*y finite; the void is already
                # astronomically past the survival cut there
                y = np.exp(np.clip(power * logx, -_EXP_CLIP, 340.0))
                total += self._sub_void(k, sub, y)
        return total

    def _sub_density(self, sub: _SubProcess, x: np.ndarray) -> np.ndarray:
        """Equivalent-domain density factor of one sub-process at x."""
        b = self.blockage_rate
        acc = np.zeros_like(x)
        for c, sc in zip(sub.coef, sub.scale):
            blk = np.exp(-np.minimum(b * sc * x, _EXP_CLIP)) * (x * sc < self.window_hat)
            acc += c * blk if sub.is_los else c * (1.0 - blk) * (x * sc < self.window_hat)
        return acc

    # ------------------------------------------------------------------
    # interference kernel
    # ------------------------------------------------------------------

    def _interf_exp_decay(
        self, kappa: np.ndarray, zeta: np.ndarray, alpha: float, u0: np.ndarray
    ) -> np.ndarray:
        """int_{u0}^inf exp(-kappa u) u / (1 + u^alpha/zeta) du, kappa >= 0.

        ``zeta`` and ``u0`` may vary with the outer point."""
        zeta = np.broadcast_to(np.asarray(zeta, dtype=float), kappa.shape)
        u0 = np.broadcast_to(np.asarray(u0, dtype=float), kappa.shape)
        w, wt = self._laguerre
        kap = np.maximum(kappa, 1e-300)
        u = u0[..., None] + w[None, :] / kap[..., None]
        with np.errstate(over="ignore", divide="ignore"):
            frac = u / (1.0 + u**alpha / zeta[..., None])
        vals = (np.where(np.isfinite(frac), frac, 0.0) * wt[None, :]).sum(axis=-1)
        out = np.exp(-np.minimum(kap * u0, _EXP_CLIP)) / kap * vals
        special = (kappa <= 0.0) | (zeta <= 0.0)
        if np.any(special):
            out = np.where(kappa <= 0.0, _power_overlap(zeta, alpha, u0), out)
            out = np.where(zeta <= 0.0, 0.0, out)
        return out

    def _interference_measure(
        self,
        m: int,
        x: np.ndarray,
        theta: float,
        psi_serving: float,
        alpha_serving: float,
    ) -> np.ndarray:
        """PGFL exponent of the in-band interference, serving tier m at x.

        Interferers of the tier-k sub-process with exponent alpha are the
        points with weaker association gain, i.e. equivalent distance
        beyond d = x^(alpha_serving e_m/(alpha e_k)), out to the window.
        A point at equivalent distance r contributes the factor
        1/(1 + (r/x)^alpha / zeta(x)) with

            zeta(x) = theta * (P_k psi_serving)/(P_m psi_sub)
                      * (r0 x)^(alpha_serving - alpha),

        the exact signal-to-interferer coupling of the equivalent-distance
        model (the shadow gains cancel inside the mapping).
        """
        if theta <= 0.0:
            return np.zeros_like(x)
        band = self.scenario.tiers[m].band
        in_band = [
            k for k, t in enumerate(self.scenario.tiers) if t.band == band
        ]
        b = self.blockage_rate
        logx = np.log(np.maximum(x, 1e-300))
        total = np.zeros_like(x)
        for k in in_band:
            acc = np.zeros_like(x)
            for sub in self._subs[k]:
                ratio = theta * psi_serving * self.powers[k] / (self.powers[m] * sub.psi)
                with np.errstate(over="ignore"):
                    zeta = ratio * (self.r0 * x) ** (alpha_serving - sub.alpha)
                zeta = np.minimum(zeta, 1e280)
                power = alpha_serving * self.expo[m] / (sub.alpha * self.expo[k])
                d_lo = np.exp(np.clip(power * logx, -_EXP_CLIP, 340.0))
                for c, sc in zip(sub.coef, sub.scale):
                    u_lo = np.maximum(d_lo / x, 1e-280)
                    u_hi = self.window_hat / (sc * x)
                    live = u_lo < u_hi
                    kappa = b * sc * x
                    i_main = self._interf_exp_decay(kappa, zeta, sub.alpha, u_lo)
                    i_cut = self._interf_exp_decay(kappa, zeta, sub.alpha, np.maximum(u_hi, u_lo))
                    seg = np.where(live, i_main - i_cut, 0.0)
                    if sub.is_los:
                        acc += c * seg
                    else:
                        over = np.where(
                            live,
                            _power_overlap(zeta, sub.alpha, u_lo)
                            - _power_overlap(zeta, sub.alpha, np.maximum(u_hi, u_lo)),
                            0.0,
                        )
                        acc += c * (over - seg)
            total += self.lam_hat[k] * x * x * acc
        return 2.0 * math.pi * total

    # ------------------------------------------------------------------
    # outer grid
    # ------------------------------------------------------------------

    def _bisect_log(self, fn: Callable[[float], float], target: float, lo: float, hi: float) -> float:
        """Log-domain bisection of a nondecreasing fn to fn(x) = target."""
        flo, fhi = fn(math.exp(lo)), fn(math.exp(hi))
        if fhi <= target:
            return hi
        if flo >= target:
            return lo
        for _ in range(96):
            mid = 0.5 * (lo + hi)
            if fn(math.exp(mid)) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _outer_grid(self, m: int, alpha_serving: float) -> Tuple[np.ndarray, np.ndarray]:
        """Fixed log-spaced Gauss-Legendre grid covering the serving mass."""
        key = (m, float(alpha_serving))
        if key in self._grid_cache:
            return self._grid_cache[key]

        def void_scalar(x: float) -> float:
            return float(self._void_total(m, alpha_serving, np.array([x]))[0])

        b = self.blockage_rate
        smin = min(
            (float(np.min(sub.scale)) for sub in self._subs[m] if sub.is_los),
            default=1.0,
        )

        def kill_scalar(x: float) -> float:
            # density of a purely LOS tier dies by blockage even if the
            # void measure saturates below the cut
            return void_scalar(x) + (b * smin * x if not self._nlos_visible(m) else 0.0)

        t_lo = self._bisect_log(void_scalar, 1e-5, -36.0, 26.0)
        t_hi = self._bisect_log(kill_scalar, 60.0, t_lo, 60.0)
        # no serving candidate exists past the window
        sub_scales = [
            float(np.min(sub.scale)) for sub in self._subs[m] if sub.alpha == alpha_serving
        ]
        if sub_scales:
            t_hi = min(t_hi, math.log(self.window_hat / min(sub_scales)) + 1e-9)
        if t_hi - t_lo < 1.0:
            t_lo, t_hi = t_lo - 1.0, t_hi + 1.0
        edges = np.linspace(t_lo, t_hi, self.outer_panels + 1)
        gl_x, gl_w = np.polynomial.legendre.leggauss(self.panel_nodes)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        t_nodes = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
        t_weights = (half[:, None] * gl_w[None, :]).ravel()
        x_nodes = np.exp(t_nodes)
        weights = t_weights * x_nodes  # dx = x dt
        self._grid_cache[key] = (x_nodes, weights)
        return x_nodes, weights

    # ------------------------------------------------------------------
    # conditional coverage kernels
    # ------------------------------------------------------------------

    def coverage_kernel(self, theta: float, m: int) -> float:
        """Conditional Laplace kernel B_m(theta) for serving tier m.

        For UHF tiers this is E[exp(-theta * Y_m)] with Y_m the normalized
        interference-times-path-loss variable; for the mmWave tier the
        thermal-noise factor is included.  B_m(0) = 1.
        """
        key = (m, float(theta))
        if key in self._kernel_cache:
            return self._kernel_cache[key]
        is_mm = m == self.m_index
        ext_power = self.scenario.mmwave_band.noise_power_w if is_mm else 0.0
        num = 0.0
        den = 0.0
        for sub in self._subs[m]:
            x, w = self._outer_grid(m, sub.alpha)
            void = self._void_total(m, sub.alpha, x)
            surv = np.exp(-np.minimum(void, _EXP_CLIP))
            dens = self._sub_density(sub, x)
            base = 2.0 * math.pi * x * self.lam_hat[m] * dens * surv
            interf = self._interference_measure(m, x, theta, sub.psi, sub.alpha)
            kern = np.exp(-np.minimum(interf, _EXP_CLIP))
            if ext_power > 0.0 and theta > 0.0:
                # constant external (thermal) power against the serving
                # signal P_m fade floor / (omega_m x^alpha)
                coup = theta * self.omega[m] * ext_power / (self.powers[m] * self.floor)
                noise = np.exp(-np.minimum(coup * x**sub.alpha, _EXP_CLIP))
            else:
                noise = 1.0
            num += float(np.dot(w, base * kern * noise))
            den += float(np.dot(w, base))
        value = num / den if den > 0 else 0.0
        self._kernel_cache[key] = value
        return value

    # ------------------------------------------------------------------
    # metric-domain association statistics
    # ------------------------------------------------------------------

    def _metric_levels(
        self, k: int, logz: np.ndarray, alpha: float, rho: float, psi: float
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Equivalent radii l(G) at metric level z, per Gauss-Hermite gain."""
        gains, weights = self._gh_gains(rho)
        logl = (
            math.log(psi) + np.log(gains)[None, :] - logz[:, None] / self.expo[k]
        ) / alpha
        return np.exp(np.clip(logl, -_EXP_CLIP, 85.0)), weights

    def _gain_area_log(self, logz: np.ndarray, m: int) -> np.ndarray:
        """gain_area evaluated at log gain levels (stable for huge levels).

        The radial measure is truncated at the scenario window, matching
        the simulated geometry; under heavy shadowing the infinite-plane
        measure receives visible mass from implausibly distant stations.
        """
        b = self.blockage_rate
        rcap = self.window_hat
        l_los, w_los = self._metric_levels(
            m, logz, self.alpha_los[m], self.rho_los[m], self.psi_los[m]
        )
        l_los = np.minimum(l_los, rcap)
        area = 2.0 * (_j_ramp(b, l_los) * w_los[None, :]).sum(axis=1)
        if self._nlos_visible(m):
            l_n, w_n = self._metric_levels(
                m, logz, self.alpha_nlos[m], self.rho_nlos[m], self.psi_nlos[m]
            )
            l_n = np.minimum(l_n, rcap)
            area -= 2.0 * (_j_ramp(b, l_n) * w_n[None, :]).sum(axis=1)
            area += ((l_n**2) * w_n[None, :]).sum(axis=1)
        return area

    def gain_area(self, x, m: int) -> np.ndarray:
        """Mean disc measure (per pi) of tier-m stations with gain above x.

        The best-gain CDF is exp(-pi * sum_m lambda_hat_m * gain_area(x, m)).
        """
        z = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(z <= 0):
            raise DomainError("gain level must be positive")
        area = self._gain_area_log(np.log(z), m)
        return area if np.ndim(x) else float(area[0])

    def _gain_area_slope(self, logz: np.ndarray, m: int) -> np.ndarray:
        """-z * d(gain_area)/dz at log levels, the best-gain density factor."""
        b = self.blockage_rate
        e = self.expo[m]
        rcap = self.window_hat
        l_los, w_los = self._metric_levels(
            m, logz, self.alpha_los[m], self.rho_los[m], self.psi_los[m]
        )
        blk = np.exp(-np.minimum(b * l_los, _EXP_CLIP)) * (l_los < rcap)
        out = ((l_los**2) * blk * w_los[None, :]).sum(axis=1) * (2.0 / (e * self.alpha_los[m]))
        if self._nlos_visible(m):
            l_n, w_n = self._metric_levels(
                m, logz, self.alpha_nlos[m], self.rho_nlos[m], self.psi_nlos[m]
            )
            blk_n = np.exp(-np.minimum(b * l_n, _EXP_CLIP))
            out += ((l_n**2) * (1.0 - blk_n) * (l_n < rcap) * w_n[None, :]).sum(axis=1) * (
                2.0 / (e * self.alpha_nlos[m])
            )
        return out

    def tier_assoc_probs(self) -> Tuple[np.ndarray, float]:
        """Exact tier association probabilities and the hole probability.

        phi_m integrates the best-gain density of tier m against the
        survival of all other tiers in the metric (log) domain; the hole
        probability is the CDF mass at gain level 0+ (nonzero only when a
        blocked mmWave tier is alone in the scenario).
        """
        if self._phi_cache is not None:
            return self._phi_cache
        n = self.scenario.num_tiers

        def total_area_exponent(t: float) -> float:
            logz = np.array([t])
            return sum(
                math.pi * self.lam_hat[k] * float(self._gain_area_log(logz, k)[0])
                for k in range(n)
            )

        lo, hi = -1400.0, 1400.0
        f_lo = total_area_exponent(lo)
        center = lo
        if f_lo >= 1.0:
            for _ in range(96):
                mid = 0.5 * (lo + hi)
                if total_area_exponent(mid) > 1.0:
                    lo = mid
                else:
                    hi = mid
            center = 0.5 * (lo + hi)

        def integrand(t_arr: np.ndarray, m: int) -> np.ndarray:
            logz = np.clip(t_arr, -1400.0, 1400.0)
            expo = np.zeros_like(logz)
            for k in range(n):
                expo += math.pi * self.lam_hat[k] * self._gain_area_log(logz, k)
            slope = self._gain_area_slope(logz, m)
            return math.pi * self.lam_hat[m] * slope * np.exp(-np.minimum(expo, _EXP_CLIP))

        # the window cut leaves integrable kinks in the density; probability
        # masses only need absolute accuracy well under the 1e-4 invariant
        from dataclasses import replace as _replace

        quad = _replace(self.quad, abs_tol=max(self.quad.abs_tol, 1e-8))
        phis = np.zeros(n)
        count = 0
        for m in range(n):
            right = integrate_semiinfinite(
                lambda tau, m=m: float(integrand(np.array([center + tau]), m)[0]), quad
            )
            left = integrate_semiinfinite(
                lambda tau, m=m: float(integrand(np.array([center - tau]), m)[0]), quad
            )
            phis[m] = right.value + left.value
            count += right.count + left.count
        hole = math.exp(-min(total_area_exponent(-1400.0), _EXP_CLIP))
        self._phi_cache = (phis, hole)
        return phis, hole


# ----------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------


def gain_area(x, m: int, ctx: AnalysisContext):
    """Per-tier gain-exceedance disc measure (CDF exponent), see context."""
    return ctx.gain_area(x, m)


def best_assoc_cdf(x, ctx: AnalysisContext):
    """CDF of the best association gain over all stations."""
    z = np.atleast_1d(np.asarray(x, dtype=float))
    expo = np.zeros_like(z)
    for k in range(ctx.scenario.num_tiers):
        expo += math.pi * ctx.lam_hat[k] * ctx.gain_area(z, k)
    out = np.exp(-np.minimum(expo, _EXP_CLIP))
    return out if np.ndim(x) else float(out[0])


def tier_assoc_prob(m: int, ctx: AnalysisContext) -> float:
    """Probability that the serving station belongs to tier m."""
    phis, _ = ctx.tier_assoc_probs()
    return float(phis[m])


def hole_probability(ctx: AnalysisContext) -> float:
    """Probability that no admissible association candidate exists."""
    _, hole = ctx.tier_assoc_probs()
    return hole


def serving_distance_cdf(x, ctx: AnalysisContext):
    """CDF of the serving-link distance, deterministic-shadowing case.

    Requires every shadowing rho to be zero.  The composition pairs the
    LOS law of tier k with the LOS law of the serving tier m (and NLOS
    with NLOS); a blocked mmWave tier contributes its LOS part only.
    """
    s = ctx.scenario
    if np.any(ctx.rho_los != 0.0) or np.any(ctx.rho_nlos != 0.0):
        raise DomainError("serving_distance_cdf needs deterministic shadowing (rho = 0)")
    xs = np.atleast_1d(np.asarray(x, dtype=float)) / ctx.r0
    phis, _ = ctx.tier_assoc_probs()
    b = ctx.blockage_rate
    n = s.num_tiers
    out = np.ones_like(xs)
    surv_sum = np.zeros_like(xs)
    with np.errstate(divide="ignore"):
        logx = np.where(xs > 0, np.log(np.maximum(xs, 1e-300)), -np.inf)
    for m in range(n):
        expo_total = np.zeros_like(xs)
        for k in range(n):
            area = np.zeros_like(xs)
            # LOS-serving metric composed with tier-k laws
            ratio = ctx.expo[m] / ctx.expo[k]
            log_psi_m = ratio * (math.log(ctx.psi_los[m]) - ctx.alpha_los[m] * logx)
            l_los = np.exp(
                np.clip(
                    (math.log(ctx.psi_los[k]) - log_psi_m) / ctx.alpha_los[k],
                    -_EXP_CLIP,
                    85.0,
                )
            )
            area += 2.0 * _j_ramp(b, l_los)
            if ctx._nlos_visible(k):
                if ctx._nlos_visible(m):
                    log_psi_mn = ratio * (math.log(ctx.psi_nlos[m]) - ctx.alpha_nlos[m] * logx)
                else:
                    log_psi_mn = log_psi_m
                l_n = np.exp(
                    np.clip(
                        (math.log(ctx.psi_nlos[k]) - log_psi_mn) / ctx.alpha_nlos[k],
                        -_EXP_CLIP,
                        85.0,
                    )
                )
                area += -2.0 * _j_ramp(b, l_n) + l_n**2
            expo_total += math.pi * ctx.lam_hat[k] * area
        surv_sum += phis[m] * np.exp(-np.minimum(expo_total, _EXP_CLIP))
    out = 1.0 - surv_sum
    out = np.where(xs <= 0, 0.0, out)
    return out if np.ndim(x) else float(out[0])


def equivalent_intensity(k: int, q: float, s_arg: float, r: float, ctx: AnalysisContext) -> float:
    """Distance-domain intensity of the tier-k equivalent process.

    Factorized (shadow-moment) form, physical units: at suppression
    parameters (q, s) and range r meters,

        lam_k * omega^(2/a_los) * e^(4 rho_los^2/a_los^2) * e^(-eta beta r)
              / (q^a_los * s * omega/P + 1)
      + lam_k * omega^(2/a_nl)  * e^(4 rho_nl^2/a_nl^2) * (1 - e^(-eta beta r))
              / (q^a_nl * s * omega/P + 1).
    """
    sc = ctx.scenario
    tier = sc.tiers[k]
    omega = float(ctx.omega[k])
    blk = math.exp(-sc.blockage.rate_per_m * r)
    out = 0.0
    for alpha, rho, weight in (
        (ctx.alpha_los[k], ctx.rho_los[k], blk),
        (ctx.alpha_nlos[k], ctx.rho_nlos[k], 1.0 - blk),
    ):
        w = omega ** (2.0 / alpha) * math.exp(4.0 * rho**2 / alpha**2)
        denom = q**alpha * s_arg * omega / tier.power_w + 1.0
        out += tier.intensity_per_m2 * w * weight / denom
    return out


def _fade_scale(ctx: AnalysisContext) -> float:
    from .model import FadingConvention

    return 2.0 if ctx.scenario.uhf_fading_convention == FadingConvention.CHI2_2T else 1.0


def _uhf_coverage_term(ctx: AnalysisContext, m: int, theta: float, kernel: Callable[[float], float]) -> float:
    """Gamma-fading derivative sum of a UHF kernel at threshold theta."""
    t_m = int(ctx.antennas[m])
    v = theta / _fade_scale(ctx)
    total = 0.0
    for n in range(t_m):
        d = nth_derivative(kernel, v, n)
        total += (-v) ** n / math.factorial(n) * d
    return total


def coverage_kernel(theta: float, m: int, ctx: AnalysisContext) -> float:
    """Tier-conditional interference Laplace kernel B_m(theta)."""
    if theta < 0:
        raise DomainError("theta must be nonnegative")
    return ctx.coverage_kernel(theta, m)


def coverage_probability(theta: float, ctx: AnalysisContext) -> float:
    """Network coverage probability P[SIR or SINR >= theta]."""
    if theta <= 0:
        raise DomainError("theta must be positive")
    phis, _ = ctx.tier_assoc_probs()
    total = 0.0
    for m in range(ctx.scenario.num_tiers):
        if phis[m] <= 1e-250:
            continue
        if m == ctx.m_index:
            cov = ctx.coverage_kernel(theta / ctx.antennas[m], m)
        else:
            cov = _uhf_coverage_term(ctx, m, theta, lambda v, m=m: ctx.coverage_kernel(v, m))
        total += phis[m] * cov
    return total


@dataclass(frozen=True)
class RateResult:
    """Mean link rate in nats/sec with the per-tier conditional split."""

    total: float
    per_tier: Tuple[float, ...]


def _rate_from_kernel(
    ctx: AnalysisContext,
    kernel: Callable[[float], float],
    t_antennas: int,
    is_mmwave: bool,
    bandwidth: float,
) -> float:
    """Shannon-transform rate integral over a cached log-grid kernel."""
    from scipy.interpolate import PchipInterpolator

    s_lo, s_hi = 1e-6, 1e6
    grid_t = np.linspace(math.log(s_lo), math.log(s_hi), ctx.rate_grid_points)
    vals = np.array([kernel(math.exp(t)) for t in grid_t])
    vals = np.clip(vals, 0.0, 1.0)
    interp = PchipInterpolator(grid_t, vals, extrapolate=False)
    fine_t = np.linspace(math.log(s_lo), math.log(s_hi), 4001)
    bvals = interp(fine_t)
    svals = np.exp(fine_t)
    if is_mmwave:
        weight = t_antennas * svals / (1.0 + svals * t_antennas)
        left_tail = t_antennas * s_lo * vals[0]
    else:
        c = _fade_scale(ctx)
        weight = 1.0 - (1.0 + c * svals) ** (-t_antennas)
        left_tail = c * t_antennas * s_lo * vals[0]
    integral = float(np.trapezoid(weight * bvals, fine_t)) + left_tail
    return bandwidth * integral


def link_rate(ctx: AnalysisContext) -> RateResult:
    """Mean downlink rate (nats/sec) and the per-tier conditional rates."""
    s = ctx.scenario
    phis, _ = ctx.tier_assoc_probs()
    per_tier: List[float] = []
    total = 0.0
    for m in range(s.num_tiers):
        is_mm = m == ctx.m_index
        bw = s.band_for(s.tiers[m]).bandwidth_hz
        if phis[m] <= 1e-250:
            per_tier.append(0.0)
            continue
        c_m = _rate_from_kernel(
            ctx,
            lambda v, m=m: ctx.coverage_kernel(v, m),
            int(ctx.antennas[m]),
            is_mm,
            bw,
        )
        per_tier.append(c_m)
        total += phis[m] * c_m
    return RateResult(total=total, per_tier=tuple(per_tier))


# ----------------------------------------------------------------------
# unified single-exponent UHF path
# ----------------------------------------------------------------------


class UnifiedContext:
    """Closed-form path under the single-exponent UHF channel.

    All UHF tiers share one exponent alpha_mu and one shadowing spread;
    the mmWave tier is LOS inside a ball of radius d_los and invisible
    beyond it (its equivalent intensity is thinned by the LOS probability
    at d_los).  Every tier then has a constant equivalent-domain
    intensity, which collapses the coverage kernels to one-dimensional
    forms (a closed bracket for UHF tiers under equal policy exponents).
    """

    def __init__(self, ctx: AnalysisContext):
        s = ctx.scenario
        if s.unified_uhf is None:
            raise DomainError("scenario has no unified_uhf parameters")
        self.ctx = ctx
        u = s.unified_uhf
        self.alpha_mu = u.alpha_mu
        n = s.num_tiers
        self.c = np.zeros(n)
        self.alpha_eff = np.zeros(n)
        for k in range(n):
            if k == ctx.m_index:
                a = ctx.alpha_los[k]
                rho = ctx.rho_los[k]
                psi = ctx.psi_los[k]
                thin = math.exp(-ctx.blockage_rate * (u.d_los_m / ctx.r0))
            else:
                a = u.alpha_mu
                rho = u.rho_mu
                psi = ctx.omega[k] / (ctx.floor * ctx.nus[k] * ctx.r0**a)
                thin = 1.0
            self.c[k] = (
                ctx.lam_hat[k] * psi ** (2.0 / a) * math.exp(4.0 * rho**2 / a**2) * thin
            )
            self.alpha_eff[k] = a

    def tier_probs(self) -> np.ndarray:
        ctx = self.ctx
        n = ctx.scenario.num_tiers
        if np.all(ctx.expo == ctx.expo[0]):
            return self.c / self.c.sum()
        phis = np.zeros(n)
        for m in range(n):
            x, w = self._grid(m)
            surv = np.exp(-np.minimum(self._void(m, x), _EXP_CLIP))
            phis[m] = float(np.dot(w, 2.0 * math.pi * x * self.c[m] * surv))
        return phis

    def _void(self, m: int, x: np.ndarray) -> np.ndarray:
        ctx = self.ctx
        logx = np.log(np.maximum(x, 1e-300))
        total = np.zeros_like(x)
        for k in range(ctx.scenario.num_tiers):
            y = np.exp(np.clip((ctx.expo[m] / ctx.expo[k]) * logx, -_EXP_CLIP, 340.0))
            total += math.pi * self.c[k] * y * y
        return total

    def _grid(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        def void_scalar(x: float) -> float:
            return float(self._void(m, np.array([x]))[0])

        ctx = self.ctx
        t_lo = ctx._bisect_log(void_scalar, 1e-5, -36.0, 26.0)
        t_hi = ctx._bisect_log(void_scalar, 60.0, t_lo, 60.0)
        edges = np.linspace(t_lo - 1.0, t_hi + 1.0, ctx.outer_panels + 1)
        gl_x, gl_w = np.polynomial.legendre.leggauss(ctx.panel_nodes)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        t_nodes = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
        t_weights = (half[:, None] * gl_w[None, :]).ravel()
        x_nodes = np.exp(t_nodes)
        return x_nodes, t_weights * x_nodes

    def kernel_uhf(self, theta: float, m: int) -> float:
        ctx = self.ctx
        if theta <= 0.0:
            return 1.0
        interf = 0.0
        for k in range(ctx.scenario.num_tiers):
            if k == ctx.m_index:
                continue
            zeta = theta * ctx.omega[m] * ctx.powers[k] / (ctx.powers[m] * ctx.omega[k])
            interf += self.c[k] * 2.0 * _power_overlap(zeta, self.alpha_mu)
        if np.all(ctx.expo == ctx.expo[0]):
            lam_c = self.c.sum()
            return float(lam_c / (lam_c + interf))
        x, w = self._grid(m)
        surv = np.exp(-np.minimum(self._void(m, x) + math.pi * interf * x * x, _EXP_CLIP))
        num = float(np.dot(w, 2.0 * math.pi * x * self.c[m] * surv))
        den_surv = np.exp(-np.minimum(self._void(m, x), _EXP_CLIP))
        den = float(np.dot(w, 2.0 * math.pi * x * self.c[m] * den_surv))
        return num / den

    def kernel_mmwave(self, theta: float) -> float:
        ctx = self.ctx
        m = ctx.m_index
        if theta <= 0.0:
            return 1.0
        a = self.alpha_eff[m]
        interf = self.c[m] * 2.0 * _power_overlap(theta, a)
        x, w = self._grid(m)
        noise = np.exp(
            -np.minimum(
                theta
                * ctx.omega[m]
                * ctx.scenario.mmwave_band.noise_power_w
                / (ctx.powers[m] * ctx.floor)
                * x**a,
                _EXP_CLIP,
            )
        )
        surv = np.exp(-np.minimum(self._void(m, x) + math.pi * interf * x * x, _EXP_CLIP))
        num = float(np.dot(w, 2.0 * math.pi * x * self.c[m] * surv * noise))
        den_surv = np.exp(-np.minimum(self._void(m, x), _EXP_CLIP))
        den = float(np.dot(w, 2.0 * math.pi * x * self.c[m] * den_surv))
        return num / den


def unified_phi(ctx: AnalysisContext) -> np.ndarray:
    """Tier association probabilities under the unified UHF channel."""
    return UnifiedContext(ctx).tier_probs()


def unified_b_m(theta: float, m: int, ctx: AnalysisContext) -> float:
    """Unified-channel UHF coverage kernel (closed bracket form)."""
    if m == ctx.m_index:
        raise DomainError("unified_b_m is for UHF tiers; use unified_b_M")
    return UnifiedContext(ctx).kernel_uhf(theta, m)


def unified_b_M(theta: float, ctx: AnalysisContext) -> float:
    """Unified-channel mmWave coverage kernel (single integral)."""
    return UnifiedContext(ctx).kernel_mmwave(theta)


def unified_coverage(theta: float, ctx: AnalysisContext) -> float:
    """Coverage probability evaluated on the unified analytical path."""
    if theta <= 0:
        raise DomainError("theta must be positive")
    uni = UnifiedContext(ctx)
    phis = uni.tier_probs()
    total = 0.0
    for m in range(ctx.scenario.num_tiers):
        if phis[m] <= 1e-250:
            continue
        if m == ctx.m_index:
            cov = uni.kernel_mmwave(theta / ctx.antennas[m])
        else:
            cov = _uhf_coverage_term(ctx, m, theta, lambda v, m=m: uni.kernel_uhf(v, m))
        total += phis[m] * cov
    return total


def unified_link_rate(ctx: AnalysisContext) -> RateResult:
    """Link rate evaluated on the unified analytical path."""
    s = ctx.scenario
    uni = UnifiedContext(ctx)
    phis = uni.tier_probs()
    per_tier: List[float] = []
    total = 0.0
    for m in range(s.num_tiers):
        is_mm = m == ctx.m_index
        bw = s.band_for(s.tiers[m]).bandwidth_hz
        if phis[m] <= 1e-250:
            per_tier.append(0.0)
            continue
        if is_mm:
            kern = uni.kernel_mmwave
        else:
            kern = lambda v, m=m: uni.kernel_uhf(v, m)
        c_m = _rate_from_kernel(ctx, kern, int(ctx.antennas[m]), is_mm, bw)
        per_tier.append(c_m)
        total += phis[m] * c_m
    return RateResult(total=total, per_tier=tuple(per_tier))


# ----------------------------------------------------------------------
# named-policy wrappers
# ----------------------------------------------------------------------


def _require_kind(ctx: AnalysisContext, kind: PolicyKind) -> None:
    if ctx.policy.kind != kind:
        raise DomainError(f"context policy must be {kind.value}")


def coa_coverage(theta: float, ctx: AnalysisContext) -> float:
    """Coverage under the coverage-optimal association (bias = power)."""
    _require_kind(ctx, PolicyKind.COA)
    return coverage_probability(theta, ctx)


def coa_rate(ctx: AnalysisContext) -> RateResult:
    _require_kind(ctx, PolicyKind.COA)
    return link_rate(ctx)


def roa_coverage(theta: float, ctx: AnalysisContext) -> float:
    """Coverage under the rate-optimal association (bandwidth exponents)."""
    _require_kind(ctx, PolicyKind.ROA)
    return coverage_probability(theta, ctx)


def roa_rate(ctx: AnalysisContext) -> RateResult:
    _require_kind(ctx, PolicyKind.ROA)
    return link_rate(ctx)
