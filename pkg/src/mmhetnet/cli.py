"""Command-line front end: config loading, sweeps, validation, CSV output.

Subcommands:

* ``coverage``: coverage probability over a sweep, per engine and policy.
* ``rate``: link rate over a sweep, with per-tier breakdown columns.
* ``assoc``: tier association probabilities (analysis vs Monte Carlo).
* ``cdf``: best-association-gain CDF at probe levels.
* ``validate``: analysis-vs-simulation comparison report with PASS/FAIL.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 numerical
non-convergence.  Every run echoes the fully resolved scenario as CSV
comment lines so results are self-describing.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from . import analysis, montecarlo
from .association import AssociationPolicy
from .model import (
    BandParams,
    BandTag,
    BlockageParams,
    DomainError,
    FadingConvention,
    PathLossParams,
    Scenario,
    TierConfig,
    UnifiedUhfParams,
    default_noise_power,
    shadow_rho_from_db,
    validate_scenario,
)
from .numerics import NonConvergence, QuadSpec

EXIT_OK = 0
EXIT_VALIDATION_FAIL = 1
EXIT_CONFIG_ERROR = 2
EXIT_NONCONVERGENCE = 3


@dataclass
class SweepSpec:
    """One swept scenario key with the metrics/engines/policies to run."""

    key: str
    values: List[float]
    theta: float = 1.0
    policies: Tuple[str, ...] = ("coa", "roa")
    engines: Tuple[str, ...] = ("analysis", "mc")

    def check(self) -> None:
        if not self.values or any(v <= 0 for v in self.values):
            raise DomainError("sweep values must be non-empty and positive")


@dataclass
class RunConfig:
    scenario: Scenario
    sweep: Optional[SweepSpec]
    trials: int = 100_000
    rate_trials: int = 200_000
    seed: int = 1
    workers: int = 1
    quad: QuadSpec = QuadSpec()
    gua_biases: Optional[Tuple[float, ...]] = None
    coverage_tol: float = 0.03
    rate_rel_tol: float = 0.10


def _tier_from_table(tbl: dict) -> TierConfig:
    band = BandTag(tbl.get("band", "uhf"))
    if "los_shadow_db" in tbl:
        rho_l = shadow_rho_from_db(float(tbl["los_shadow_db"]))
    else:
        rho_l = float(tbl.get("los_shadow_rho", 0.0))
    if "nlos_shadow_db" in tbl:
        rho_n = shadow_rho_from_db(float(tbl["nlos_shadow_db"]))
    else:
        rho_n = float(tbl.get("nlos_shadow_rho", rho_l))
    return TierConfig(
        intensity_per_m2=float(tbl["intensity_per_m2"]),
        power_w=float(tbl["power_w"]),
        tx_antennas=int(tbl.get("tx_antennas", 1)),
        assoc_bias=float(tbl.get("assoc_bias", tbl["power_w"])),
        los_shadow_rho=rho_l,
        nlos_shadow_rho=rho_n,
        band=band,
    )


def load_config(path: str) -> RunConfig:
    """Parse a TOML run configuration into a validated scenario + knobs."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)

    bands = raw.get("bands", {})
    uhf_bw = float(bands.get("uhf_bandwidth_hz", 1e8))
    mm_bw = float(bands.get("mmwave_bandwidth_hz", 1e9))
    uhf_band = BandParams(
        BandTag.UHF,
        uhf_bw,
        float(bands.get("uhf_intercept", 7018.39)),
        0.0,
    )
    if "mmwave_noise_power_w" in bands:
        noise = float(bands["mmwave_noise_power_w"])
    else:
        noise = default_noise_power(mm_bw, float(bands.get("mmwave_noise_figure_db", 10.0)))
    mm_band = BandParams(
        BandTag.MMWAVE,
        mm_bw,
        float(bands.get("mmwave_intercept", 9.35e6)),
        noise,
    )

    blk = raw.get("blockage", {})
    blockage = BlockageParams(
        intensity_per_m2=float(blk.get("intensity_per_m2", 0.0)),
        eta_m=float(blk.get("eta_m", 60.0 / math.pi)),
    )

    pl = raw.get("pathloss", {})
    pl_uhf = pl.get("uhf", {"alpha_los": 2.1, "alpha_nlos": 3.4})
    pl_mm = pl.get("mmwave", {"alpha_los": 2.1, "alpha_nlos": 6.75})
    uhf_pl = PathLossParams(float(pl_uhf["alpha_los"]), float(pl_uhf["alpha_nlos"]))
    mm_pl = PathLossParams(float(pl_mm["alpha_los"]), float(pl_mm["alpha_nlos"]))

    tier_tbl = raw.get("tier", {})
    if not tier_tbl:
        raise DomainError("config must define at least one [tier.N] section")
    tiers = tuple(_tier_from_table(tier_tbl[k]) for k in sorted(tier_tbl, key=int))

    sc = raw.get("scenario", {})
    unified = None
    if "unified_uhf" in raw:
        u = raw["unified_uhf"]
        if "rho_mu_db" in u:
            rho_mu = shadow_rho_from_db(float(u["rho_mu_db"]))
        else:
            rho_mu = float(u.get("rho_mu", 0.0))
        d_los = float(u.get("d_los_m", math.sqrt(2.0) / max(blockage.rate_per_m, 1e-12)))
        unified = UnifiedUhfParams(float(u["alpha_mu"]), rho_mu, d_los)

    scenario = Scenario(
        tiers=tiers,
        uhf_band=uhf_band,
        mmwave_band=mm_band,
        blockage=blockage,
        uhf_pathloss=uhf_pl,
        mmwave_pathloss=mm_pl,
        mmwave_nlos_blocked=bool(sc.get("mmwave_nlos_blocked", True)),
        unified_uhf=unified,
        window_radius_m=float(sc.get("window_radius_m", 15000.0)),
        uhf_fading_convention=FadingConvention(sc.get("uhf_fading_convention", "chi2_2t")),
        assoc_ref_distance_m=float(sc.get("assoc_ref_distance_m", 1000.0)),
    )
    scenario = validate_scenario(scenario)

    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        sweep = SweepSpec(
            key=str(sw.get("key", "tier_last.intensity_ratio_to_blockage")),
            values=[float(v) for v in sw["values"]],
            theta=float(sw.get("theta", 1.0)),
            policies=tuple(sw.get("policies", ["coa", "roa"])),
            engines=tuple(sw.get("engines", ["analysis", "mc"])),
        )
        sweep.check()

    mc = raw.get("mc", {})
    quad_tbl = raw.get("quad", {})
    quad = QuadSpec(
        rel_tol=float(quad_tbl.get("rel_tol", 1e-7)),
        abs_tol=float(quad_tbl.get("abs_tol", 1e-10)),
        max_evals=int(quad_tbl.get("max_evals", 200_000)),
    )
    gua = raw.get("policy", {}).get("gua_biases")
    val = raw.get("validate", {})
    return RunConfig(
        scenario=scenario,
        sweep=sweep,
        trials=int(mc.get("trials", 100_000)),
        rate_trials=int(mc.get("rate_trials", 200_000)),
        seed=int(mc.get("seed", 1)),
        workers=int(mc.get("workers", 1)),
        quad=quad,
        gua_biases=tuple(float(b) for b in gua) if gua else None,
        coverage_tol=float(val.get("coverage_tol", 0.03)),
        rate_rel_tol=float(val.get("rate_rel_tol", 0.10)),
    )


def apply_sweep_value(s: Scenario, key: str, value: float) -> Scenario:
    """Return a scenario with one swept key replaced.

    Supported keys: ``tier<i>.intensity_per_m2``, ``tier<i>.power_w``,
    ``tier<i>.assoc_bias``, ``tier<i>.intensity_ratio_to_blockage`` (sets
    the tier intensity to value * blockage intensity; ``tier_last`` aliases
    the mmWave tier), ``blockage.intensity_per_m2`` and ``theta`` (handled
    by the caller).
    """
    parts = key.split(".")
    if len(parts) != 2:
        raise DomainError(f"sweep key not resolvable: {key}")
    target, field = parts
    if target == "blockage":
        if field != "intensity_per_m2":
            raise DomainError(f"sweep key not resolvable: {key}")
        return dataclasses.replace(s, blockage=dataclasses.replace(s.blockage, intensity_per_m2=value))
    if not target.startswith("tier"):
        raise DomainError(f"sweep key not resolvable: {key}")
    suffix = target[4:]
    if suffix == "_last":
        idx = s.mmwave_index
    else:
        idx = int(suffix) - 1
        if idx < 0 or idx >= s.num_tiers:
            raise DomainError(f"sweep tier out of range: {key}")
    tier = s.tiers[idx]
    if field == "intensity_ratio_to_blockage":
        new_tier = dataclasses.replace(
            tier, intensity_per_m2=value * s.blockage.intensity_per_m2
        )
    elif field in ("intensity_per_m2", "power_w", "assoc_bias"):
        new_tier = dataclasses.replace(tier, **{field: value})
    else:
        raise DomainError(f"sweep key not resolvable: {key}")
    tiers = list(s.tiers)
    tiers[idx] = new_tier
    return validate_scenario(dataclasses.replace(s, tiers=tuple(tiers)))


def _policy(name: str, cfg: RunConfig) -> AssociationPolicy:
    return AssociationPolicy.by_name(name, biases=cfg.gua_biases)


def _scenario_header(s: Scenario, out: TextIO) -> None:
    out.write("# resolved scenario\n")
    for i, t in enumerate(s.tiers):
        out.write(
            f"# tier{i + 1}: band={t.band.value} intensity_per_m2={t.intensity_per_m2:.6g} "
            f"power_w={t.power_w:.6g} tx_antennas={t.tx_antennas} assoc_bias={t.assoc_bias:.6g} "
            f"los_shadow_rho={t.los_shadow_rho:.6g} nlos_shadow_rho={t.nlos_shadow_rho:.6g}\n"
        )
    out.write(
        f"# bands: uhf_bw={s.uhf_band.bandwidth_hz:.6g} mm_bw={s.mmwave_band.bandwidth_hz:.6g} "
        f"uhf_nu={s.uhf_band.intercept:.6g} mm_nu={s.mmwave_band.intercept:.6g} "
        f"mm_noise_w={s.mmwave_band.noise_power_w:.6g}\n"
    )
    out.write(
        f"# blockage: beta={s.blockage.intensity_per_m2:.6g} eta_m={s.blockage.eta_m:.6g}; "
        f"pathloss uhf=({s.uhf_pathloss.alpha_los},{s.uhf_pathloss.alpha_nlos}) "
        f"mm=({s.mmwave_pathloss.alpha_los},{s.mmwave_pathloss.alpha_nlos})\n"
    )
    out.write(
        f"# window_radius_m={s.window_radius_m:.6g} mmwave_nlos_blocked={s.mmwave_nlos_blocked} "
        f"uhf_fading={s.uhf_fading_convention.value} assoc_ref_distance_m={s.assoc_ref_distance_m:.6g}\n"
    )


def _sweep_points(cfg: RunConfig) -> List[Tuple[float, Scenario]]:
    if cfg.sweep is None:
        return [(float("nan"), cfg.scenario)]
    return [(v, apply_sweep_value(cfg.scenario, cfg.sweep.key, v)) for v in cfg.sweep.values]


def _open_out(path: Optional[str]) -> TextIO:
    return open(path, "w", newline="") if path else sys.stdout


def cmd_coverage(cfg: RunConfig, args, out: TextIO) -> int:
    theta = args.theta if args.theta is not None else (cfg.sweep.theta if cfg.sweep else 1.0)
    engines = [args.engine] if args.engine != "both" else ["analysis", "mc"]
    policies = [args.policy] if args.policy else list(cfg.sweep.policies if cfg.sweep else ("coa",))
    sweep_key = cfg.sweep.key if cfg.sweep else "none"
    _scenario_header(cfg.scenario, out)
    writer = csv.writer(out)
    writer.writerow(["sweep_key", "sweep_value", "policy", "engine", "theta", "value", "error", "n"])
    rows = []
    for value, scen in _sweep_points(cfg):
        for pol_name in policies:
            pol = _policy(pol_name, cfg)
            for engine in engines:
                if engine == "analysis":
                    ctx = analysis.AnalysisContext(scen, pol, cfg.quad)
                    v = analysis.coverage_probability(theta, ctx)
                    rows.append((sweep_key, value, pol_name, "analysis", theta, v, 0.0, 0))
                else:
                    est = montecarlo.estimate_coverage(
                        scen, pol, theta, args.trials or cfg.trials, args.seed or cfg.seed,
                        workers=args.threads or cfg.workers,
                    )
                    rows.append(
                        (sweep_key, value, pol_name, "mc", theta, est.value, est.error, est.count)
                    )
    for row in sorted(rows, key=lambda r: (str(r[0]), r[1] if r[1] == r[1] else 0.0, r[2], r[3])):
        writer.writerow([_fmt(c) for c in row])
    return EXIT_OK


def cmd_rate(cfg: RunConfig, args, out: TextIO) -> int:
    engines = [args.engine] if args.engine != "both" else ["analysis", "mc"]
    policies = [args.policy] if args.policy else list(cfg.sweep.policies if cfg.sweep else ("coa",))
    sweep_key = cfg.sweep.key if cfg.sweep else "none"
    n_tiers = cfg.scenario.num_tiers
    _scenario_header(cfg.scenario, out)
    writer = csv.writer(out)
    tier_cols = [f"tier{i + 1}_rate" for i in range(n_tiers)]
    writer.writerow(
        ["sweep_key", "sweep_value", "policy", "engine", "rate_nats_per_sec", "error", "n"]
        + tier_cols
    )
    rows = []
    for value, scen in _sweep_points(cfg):
        for pol_name in policies:
            pol = _policy(pol_name, cfg)
            for engine in engines:
                if engine == "analysis":
                    ctx = analysis.AnalysisContext(scen, pol, cfg.quad)
                    rr = analysis.link_rate(ctx)
                    rows.append(
                        (sweep_key, value, pol_name, "analysis", rr.total, 0.0, 0) + rr.per_tier
                    )
                else:
                    est = montecarlo.estimate_rate(
                        scen, pol, args.trials or cfg.rate_trials, args.seed or cfg.seed,
                        workers=args.threads or cfg.workers,
                    )
                    rows.append(
                        (sweep_key, value, pol_name, "mc", est.total.value, est.total.error,
                         est.total.count) + tuple(p.value for p in est.per_tier)
                    )
    for row in sorted(rows, key=lambda r: (str(r[0]), r[1] if r[1] == r[1] else 0.0, r[2], r[3])):
        writer.writerow([_fmt(c) for c in row])
    return EXIT_OK


def cmd_assoc(cfg: RunConfig, args, out: TextIO) -> int:
    engines = [args.engine] if args.engine != "both" else ["analysis", "mc"]
    policies = [args.policy] if args.policy else list(cfg.sweep.policies if cfg.sweep else ("coa",))
    sweep_key = cfg.sweep.key if cfg.sweep else "none"
    _scenario_header(cfg.scenario, out)
    writer = csv.writer(out)
    writer.writerow(
        ["sweep_key", "sweep_value", "policy", "engine", "tier", "value", "error", "n"]
    )
    rows = []
    for value, scen in _sweep_points(cfg):
        for pol_name in policies:
            pol = _policy(pol_name, cfg)
            for engine in engines:
                if engine == "analysis":
                    ctx = analysis.AnalysisContext(scen, pol, cfg.quad)
                    phis, hole = ctx.tier_assoc_probs()
                    for m, p in enumerate(phis):
                        rows.append((sweep_key, value, pol_name, "analysis", m + 1, p, 0.0, 0))
                    rows.append((sweep_key, value, pol_name, "analysis", "hole", hole, 0.0, 0))
                else:
                    trials = args.trials or cfg.trials
                    freqs, ses, hole = montecarlo.estimate_assoc_prob(
                        scen, pol, trials, args.seed or cfg.seed,
                        workers=args.threads or cfg.workers,
                    )
                    for m, (p, se) in enumerate(zip(freqs, ses)):
                        rows.append((sweep_key, value, pol_name, "mc", m + 1, p, se, trials))
                    rows.append((sweep_key, value, pol_name, "mc", "hole", hole, 0.0, trials))
    for row in rows:
        writer.writerow([_fmt(c) for c in row])
    return EXIT_OK


def cmd_cdf(cfg: RunConfig, args, out: TextIO) -> int:
    pol_name = args.policy or "coa"
    pol = _policy(pol_name, cfg)
    scen = cfg.scenario
    ctx = analysis.AnalysisContext(scen, pol, cfg.quad)
    if args.probes:
        probes = [float(p) for p in args.probes.split(",")]
    else:
        # probe the analytic quantiles 0.1 .. 0.9
        qs = np.linspace(0.1, 0.9, 5)
        probes = [_cdf_quantile(ctx, q) for q in qs]
    engines = [args.engine] if args.engine != "both" else ["analysis", "mc"]
    _scenario_header(scen, out)
    writer = csv.writer(out)
    writer.writerow(["policy", "engine", "probe", "value", "error", "n"])
    if "analysis" in engines:
        vals = analysis.best_assoc_cdf(np.array(probes), ctx)
        for p, v in zip(probes, np.atleast_1d(vals)):
            writer.writerow([pol_name, "analysis", _fmt(p), _fmt(float(v)), 0.0, 0])
    if "mc" in engines:
        trials = args.trials or cfg.trials
        fracs, ses = montecarlo.empirical_best_assoc_cdf(
            scen, pol, probes, trials, args.seed or cfg.seed, workers=args.threads or cfg.workers
        )
        for p, v, se in zip(probes, fracs, ses):
            writer.writerow([pol_name, "mc", _fmt(p), _fmt(float(v)), _fmt(float(se)), trials])
    return EXIT_OK


def _cdf_quantile(ctx: analysis.AnalysisContext, q: float) -> float:
    """Invert the analytic best-gain CDF at probability q by bisection."""
    lo, hi = -600.0, 600.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if analysis.best_assoc_cdf(math.exp(mid), ctx) < q:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def cmd_validate(cfg: RunConfig, args, out: TextIO) -> int:
    theta = args.theta if args.theta is not None else (cfg.sweep.theta if cfg.sweep else 1.0)
    policies = [args.policy] if args.policy else list(cfg.sweep.policies if cfg.sweep else ("coa",))
    trials = args.trials or cfg.trials
    sweep_key = cfg.sweep.key if cfg.sweep else "none"
    _scenario_header(cfg.scenario, out)
    writer = csv.writer(out)
    writer.writerow(
        ["sweep_key", "sweep_value", "policy", "metric", "theta",
         "analysis", "mc", "mc_se", "gap", "tolerance", "status"]
    )
    all_pass = True
    gaps = []
    for value, scen in _sweep_points(cfg):
        for pol_name in policies:
            pol = _policy(pol_name, cfg)
            ctx = analysis.AnalysisContext(scen, pol, cfg.quad)
            a_cov = analysis.coverage_probability(theta, ctx)
            m_cov = montecarlo.estimate_coverage(
                scen, pol, theta, trials, args.seed or cfg.seed,
                workers=args.threads or cfg.workers,
            )
            gap = abs(a_cov - m_cov.value)
            tol = cfg.coverage_tol + 3.0 * m_cov.error
            ok = gap <= tol
            all_pass &= ok
            gaps.append(gap)
            writer.writerow(
                [sweep_key, _fmt(value), pol_name, "coverage", _fmt(theta), _fmt(a_cov),
                 _fmt(m_cov.value), _fmt(m_cov.error), _fmt(gap), _fmt(tol),
                 "PASS" if ok else "FAIL"]
            )
    if gaps:
        out.write(f"# mean_abs_gap={np.mean(gaps):.5f} max_abs_gap={np.max(gaps):.5f}\n")
    return EXIT_OK if all_pass else EXIT_VALIDATION_FAIL


def _fmt(v) -> str:
    if isinstance(v, float):
        if v != v:
            return ""
        return f"{v:.8g}"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmhetnet",
        description="Coverage/rate analysis and simulation for mmWave heterogeneous networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("coverage", cmd_coverage),
        ("rate", cmd_rate),
        ("assoc", cmd_assoc),
        ("cdf", cmd_cdf),
        ("validate", cmd_validate),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--policy", choices=["coa", "roa", "gua"], default=None)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--engine", choices=["analysis", "mc", "both"], default="both")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
        if name == "cdf":
            p.add_argument("--probes", default=None, help="comma-separated gain levels")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (DomainError, KeyError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out = None
    try:
        out = _open_out(args.out)
        return args.func(cfg, args, out)
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NonConvergence as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    finally:
        if out is not None and out is not sys.stdout:
            out.close()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
