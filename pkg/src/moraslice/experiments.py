"""Figure-reproduction drivers: each returns (columns, rows) for one CSV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from moraslice import analysis
from moraslice.config import ScenarioConfig

NAMES = tuple(f"fig{k}" for k in range(1, 10))


@dataclass(frozen=True)
class Scale:
    name: str
    rings: int
    densities: tuple
    operators: tuple
    duration_s: float
    download_duration_s: float
    seeds: int
    replications: int
    scaling_users: tuple


DESK = Scale("desk", 1, (5, 10), (2, 3, 4), 30.0, 120.0, 20, 50, (50, 100, 200, 400))
PAPER = Scale("paper", 2, (5, 10, 15), (2, 3, 4, 5, 6), 300.0, 600.0, 20, 100,
              (100, 200, 400, 800, 1600))
SCALES = {"desk": DESK, "paper": PAPER}

# rough single-core cost of one replay per user-second, used for estimates only
_REPLAY_COST_S = 2.5e-4


def base_config(scale: Scale, seed: int, base: ScenarioConfig | None = None) -> ScenarioConfig:
    base = base or ScenarioConfig()
    return base.replace(seed=seed, rings=scale.rings, density=10.0, num_operators=3,
                        duration_s=scale.duration_s)


def estimate_seconds(name: str, scale: Scale) -> float:
    """Order-of-magnitude single-core runtime of an experiment."""
    sectors = 3 * (1 + 3 * scale.rings * (scale.rings + 1))
    users = sectors * max(scale.densities)
    replay = _REPLAY_COST_S * users * scale.duration_s
    combos = len(scale.densities) * len(scale.operators)
    per = {
        "fig1": 8 * scale.seeds,
        "fig2": 5 * scale.seeds * 2,
        "fig3": 2 * scale.replications * combos / scale.duration_s,
        "fig4": 2 * 14 * scale.seeds * combos,
        "fig5": 0.0,
        "fig6": 3 * scale.seeds * combos,
        "fig7": 2 * scale.seeds * combos * scale.download_duration_s / scale.duration_s,
        "fig8": 0.0,
        "fig9": 2 * 14 * scale.seeds * 5 * 2,
    }[name]
    return per * replay + 5.0


def fig1(scale, seed, workers, base=None):
    cfg = base_config(scale, seed, base)
    m_values = (0, 1, 2, 3, 4, 5)
    samples = analysis.normalized_utility_gain(cfg, m_values, analysis.seed_list(cfg, scale.seeds),
                                               workers)
    rows = analysis.summarize_gains(samples, m_values)
    degenerate = sum(s.degenerate for s in samples)
    return ("m", "G_W", "ci95", "seeds", "degenerate"), [r + (degenerate,) for r in rows]


def fig2(scale, seed, workers, base=None):
    policies = ("sinr_ss", "dg_ss", "gllg", "dg")
    rows = []
    for rings in range(scale.rings + 1):
        cfg = base_config(scale, seed, base).replace(rings=rings)
        per_seed = analysis.policy_utilities(cfg, policies, analysis.seed_list(cfg, scale.seeds),
                                             workers)
        for k, p in enumerate(policies):
            mean, ci = analysis.mean_ci([s[k] for s in per_seed])
            rows.append((cfg.n_sectors, cfg.density, p, mean, ci))
    # brute-forceable sub-instances: one site, two users per sector
    small = base_config(scale, seed, base).replace(rings=0, density=2.0, num_operators=2,
                                                   session_mean_s=0.0)
    pols = ("dg", "gllg", "brute")
    per_seed = analysis.policy_utilities(small, pols, analysis.seed_list(small, scale.seeds),
                                         workers)
    for k, p in enumerate(pols):
        mean, ci = analysis.mean_ci([s[k] for s in per_seed])
        rows.append((small.n_sectors, small.density, p, mean, ci))
    return ("sectors", "density", "policy", "W", "ci95"), rows


def fig3(scale, seed, workers, base=None):
    rows = []
    for n_op in (2, 4):
        for dens in (5, 10):
            cfg = base_config(scale, seed, base).replace(num_operators=n_op, density=float(dens))
            for k, g in enumerate(analysis.operator_gain_distribution(
                    cfg, scale.replications, workers)):
                rows.append((n_op, dens, k, g))
    return ("operators", "density", "sample", "gain"), rows


def fig4(scale, seed, workers, base=None):
    rows = []
    for dens in scale.densities:
        for n_op in scale.operators:
            cfg = base_config(scale, seed, base).replace(num_operators=n_op, density=float(dens))
            seeds = analysis.seed_list(cfg, scale.seeds)
            for baseline in ("sinr_ss", "dg_ss"):
                res = analysis.capacity_savings_measured(cfg, baseline, seeds=seeds)
                rows.append((n_op, dens, baseline, res.delta_measured, res.delta_theoretical))
    return ("operators", "density", "baseline", "delta", "delta_eq8"), rows


def fig5(scale, seed, workers, base=None):
    n_st = 20
    rows = []
    for share in (0.2, 0.5, 0.8):
        for per_b in (2, 5, 10):
            res = analysis.homogeneous_savings(n_st, per_b * n_st, share, draws=20000, seed=seed)
            rows.append((share, per_b, res.delta_measured, res.delta_theoretical))
    return ("s_o", "n_o_per_b", "delta_measured", "delta_eq8"), rows


def fig6(scale, seed, workers, base=None):
    policies = ("sinr_ss", "dg_ss", "gllg")
    rows = []
    for dens in scale.densities:
        for n_op in scale.operators:
            cfg = base_config(scale, seed, base).replace(num_operators=n_op, density=float(dens))
            pct = analysis.throughput_percentiles(cfg, policies,
                                                  analysis.seed_list(cfg, scale.seeds),
                                                  workers=workers)
            for p in policies:
                rows.append((n_op, dens, p) + tuple(v / 1e6 for v in pct[p]))
    return ("operators", "density", "policy", "p5_mbps", "p25_mbps", "p50_mbps",
            "p75_mbps", "p95_mbps"), rows


def fig7(scale, seed, workers, base=None):
    sizes_mb = (4, 16, 64)
    rows = []
    for dens in scale.densities:
        for n_op in scale.operators:
            cfg = base_config(scale, seed, base).replace(
                num_operators=n_op, density=float(dens), duration_s=scale.download_duration_s)
            gains = analysis.download_time_gain(cfg, [s * 1e6 for s in sizes_mb],
                                                analysis.seed_list(cfg, scale.seeds), workers)
            for s in sizes_mb:
                rows.append((n_op, dens, s, gains[s * 1e6]))
    return ("operators", "density", "file_mb", "G_D"), rows


def fig8(scale, seed, workers, base=None):
    cfg = (base or ScenarioConfig()).replace(num_operators=4)
    rows = []
    for n in scale.scaling_users:
        t = analysis.event_timings(n, seed=seed, rings=scale.rings, config=cfg)
        rows.append((t["users"], t["gllg_median_s"] * 1e3, t["dg_sweep_s"] * 1e3))
    return ("users", "gllg_event_median_ms", "dg_sweep_ms"), rows


def fig9(scale, seed, workers, base=None):
    rows = []
    for shared in (True, False):
        for theta in (0.0, 0.25, 0.5, 0.75, 1.0):
            cfg = base_config(scale, seed, base).replace(
                mobility_model="hotspot", hotspot_concentration=theta, hotspot_shared=shared)
            res = analysis.capacity_savings_measured(cfg, "dg_ss",
                                                     seeds=analysis.seed_list(cfg, scale.seeds))
            rows.append((theta, int(shared), res.delta_measured))
    return ("theta", "shared_pattern", "delta"), rows


DRIVERS = {name: globals()[name] for name in NAMES}


def run_experiment(name: str, scale: str = "desk", seed: int = 1, workers: int = 1,
                   seeds: int | None = None, base: ScenarioConfig | None = None):
    if name not in DRIVERS:
        raise ValueError(f"unknown experiment {name!r}")
    sc = SCALES[scale]
    if seeds is not None:
        sc = Scale(**{**sc.__dict__, "seeds": seeds, "replications": seeds})
    return DRIVERS[name](sc, seed, workers, base)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % float(v)
    return str(v)
