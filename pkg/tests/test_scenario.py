import itertools
import math

import numpy as np
import pytest

from moraslice.config import ScenarioConfig
from moraslice.events import Join, Leave, Move
from moraslice.scenario import (
    build_layout,
    generate_events,
    hotspot_positions,
    rwp_start,
    rwp_step,
    session_plans,
)


@pytest.mark.parametrize("rings, sectors", [(0, 3), (1, 21), (2, 57)])
def test_layout_sector_counts(rings, sectors):
    lay = build_layout(rings)
    assert lay.n_sectors == sectors == 3 * lay.n_sites


@pytest.mark.parametrize("rings", [1, 2])
def test_layout_nearest_distance_is_isd(rings):
    lay = build_layout(rings, isd_m=250.0)
    xy = lay.site_xy
    d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    assert np.allclose(d.min(axis=1), 250.0, atol=1e-6)


def test_layout_bounds_cover_sites():
    lay = build_layout(1)
    xmin, xmax, ymin, ymax = lay.bounds
    assert xmin == pytest.approx(lay.site_xy[:, 0].min() - 100)
    assert ymax == pytest.approx(lay.site_xy[:, 1].max() + 100)


def test_hotspot_zero_concentration_is_uniform():
    bounds = (0.0, 100.0, 0.0, 100.0)
    pos = hotspot_positions(20000, [[10.0, 10.0]], 0.0, 5.0, bounds,
                            np.random.default_rng(1))
    counts, _, _ = np.histogram2d(pos[:, 0], pos[:, 1], bins=4, range=[[0, 100], [0, 100]])
    assert np.allclose(counts / 20000, 1 / 16, atol=0.01)


def test_hotspot_full_concentration_stays_close():
    c = np.array([[300.0, 200.0]])
    pos = hotspot_positions(5000, c, 1.0, 10.0, (0, 1000, 0, 1000), np.random.default_rng(2))
    assert np.all(np.hypot(*(pos - c).T) <= 30.0)


def test_rwp_zero_speed_stays_put():
    rng = np.random.default_rng(0)
    bounds = (0, 100, 0, 100)
    w = rwp_start([20.0, 30.0], bounds, (0.0, 0.0), rng)
    for _ in range(10):
        rwp_step(w, 1.0, bounds, (0.0, 0.0), 0.0, rng)
    assert w.position.tolist() == [20.0, 30.0]


def test_rwp_covers_the_area():
    lay = build_layout(1)
    b = lay.bounds
    rng = np.random.default_rng(7)
    w = rwp_start([0.0, 0.0], b, (0.5, 1.5), rng)
    nx = math.ceil((b[1] - b[0]) / 50)
    ny = math.ceil((b[3] - b[2]) / 50)
    occ = np.zeros((nx, ny), dtype=int)
    for _ in range(100_000):
        rwp_step(w, 10.0, b, (0.5, 1.5), 0.0, rng)
        i = min(int((w.position[0] - b[0]) // 50), nx - 1)
        j = min(int((w.position[1] - b[2]) // 50), ny - 1)
        occ[i, j] += 1
    assert np.all(occ > 0)


def test_rwp_deterministic_and_in_bounds():
    b = (0, 300, 0, 200)

    def walk(seed):
        rng = np.random.default_rng(seed)
        w = rwp_start([1.0, 1.0], b, (0.5, 1.5), rng)
        out = []
        for _ in range(500):
            out.append(rwp_step(w, 3.0, b, (0.5, 1.5), 2.0, rng).position.copy())
        return np.array(out)

    a = walk(5)
    assert np.array_equal(a, walk(5))
    assert np.all((a[:, 0] >= 0) & (a[:, 0] <= 300) & (a[:, 1] >= 0) & (a[:, 1] <= 200))


def test_no_churn_gives_only_moves_after_the_start():
    cfg = ScenarioConfig(rings=0, density=4, duration_s=5, session_mean_s=0.0)
    ev = generate_events(cfg)
    joins = [e for e in ev if isinstance(e, Join)]
    assert len(joins) == sum(cfg.users_per_operator())
    assert all(e.time == 0.0 for e in joins)
    assert not any(isinstance(e, Leave) for e in ev)
    assert sum(isinstance(e, Move) for e in ev) == len(joins) * 5


def test_population_follows_littles_law():
    cfg = ScenarioConfig(rings=1, density=10, duration_s=6000, snapshot_s=50,
                         mobility_model="static", session_mean_s=60.0)
    ev = generate_events(cfg)
    ev.validate()
    op = {e.user: e.operator for e in ev if isinstance(e, Join)}
    grid = np.arange(600.0, 6000.0, 1.0)
    for o, n_o in enumerate(cfg.users_per_operator()):
        changes = [(e.time, 1 if isinstance(e, Join) else -1) for e in ev
                   if not isinstance(e, Move) and op[e.user] == o]
        t = np.array([c[0] for c in changes])
        n = np.cumsum([c[1] for c in changes])
        pop = n[np.searchsorted(t, grid, side="right") - 1]
        assert pop.min() >= 0
        assert pop.mean() == pytest.approx(n_o, rel=0.05)
        assert n_o == round(cfg.density * 21 * cfg.shares[o])


def test_event_stream_is_reproducible():
    cfg = ScenarioConfig(rings=0, density=5, duration_s=20)
    a, b = generate_events(cfg, 11), generate_events(cfg, 11)
    assert a == b
    assert a != generate_events(cfg, 12)
    a.validate()


def test_session_ids_follow_join_time():
    cfg = ScenarioConfig(rings=0, density=5, duration_s=100, session_mean_s=10)
    plans = session_plans(cfg, 3)
    assert [p.user for p in plans] == list(range(len(plans)))
    assert all(a.join <= b.join for a, b in itertools.pairwise(plans))
    assert all(p.leave > p.join for p in plans)


def test_hotspot_users_cluster():
    base = dict(rings=1, density=10, duration_s=0, mobility_model="hotspot",
                hotspot_count=1, hotspot_radius_m=20.0)
    spread = []
    for theta in (0.0, 1.0):
        ev = generate_events(ScenarioConfig(hotspot_concentration=theta, **base))
        xy = np.array([e.position for e in ev if isinstance(e, Join)])
        spread.append(np.std(xy, axis=0).mean())
    assert spread[1] < 0.3 * spread[0]
