import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from moraslice import channel
from moraslice.channel import (
    MCS,
    SHANNON,
    RadioParams,
    Shadowing,
    achievable_rate,
    build_rate_matrix,
    load_mcs_table,
    path_loss_db,
    sinr,
    sinr_matrix,
)
from moraslice.scenario import build_layout, uniform_positions


def test_path_loss_reference_points():
    assert path_loss_db(100.0) == pytest.approx(36.7 * 2 + 22.7 + 26 * math.log10(2.5))
    assert path_loss_db(100.0) == pytest.approx(106.45, abs=0.01)
    assert path_loss_db(10.0) == pytest.approx(69.75, abs=0.01)


@given(st.floats(3.0, 5000.0))
def test_path_loss_doubling(d):
    assert path_loss_db(2 * d) - path_loss_db(d) == pytest.approx(36.7 * math.log10(2))


def test_path_loss_floor():
    assert path_loss_db(0.0) == path_loss_db(channel.D_MIN_M)


def test_sinr_single_station_at_noise_level():
    assert sinr([1.0], 0, 2.0, 2.0) == pytest.approx(1.0)


def test_sinr_two_equal_stations():
    assert sinr([1.0, 1.0], 0, 1.0, 1e-12) == pytest.approx(1.0, rel=1e-9)


def test_sinr_matches_summation(rng):
    g = rng.uniform(1e-12, 1e-9, 5)
    p = rng.uniform(1, 40, 5)
    for b in range(5):
        interf = sum(p[k] * g[k] for k in range(5) if k != b)
        assert sinr(g, b, p, 1e-11) == pytest.approx(p[b] * g[b] / (interf + 1e-11), rel=1e-12)


@given(st.floats(1e-3, 1e3))
def test_sinr_scale_invariance(k):
    rx = np.random.default_rng(1).uniform(1e-10, 1e-6, (4, 6))
    assert np.allclose(sinr_matrix(rx * k, 1e-9 * k), sinr_matrix(rx, 1e-9), rtol=1e-12)


def test_shannon_rates():
    p = RadioParams(bandwidth_hz=1e7)
    assert achievable_rate(1.0, p) == pytest.approx(1e7)
    assert achievable_rate(0.0, p) == 0.0
    assert achievable_rate(15.0, p) == pytest.approx(4e7)
    s = np.linspace(0, 100, 1001)
    assert np.all(np.diff(achievable_rate(s, p)) > 0)


def test_mcs_is_a_step_below_shannon():
    s = 10 ** (np.linspace(-15, 35, 5001) / 10)
    mcs = achievable_rate(s, mode=MCS)
    assert np.all(mcs >= 0)
    assert np.all(np.diff(mcs) >= 0)
    assert np.all(mcs <= achievable_rate(s, mode=SHANNON))
    assert achievable_rate(0.0, mode=MCS) == 0.0
    assert len(np.unique(mcs)) == 16


def test_mcs_table_shape():
    t = load_mcs_table()
    assert t.sinr_db.size == 15
    assert t.sinr_db[0] == pytest.approx(-6.7) and t.sinr_db[-1] == pytest.approx(22.7)


def test_mcs_table_rejects_bad_rows(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("0 5.0\n")  # 5 bits/s/Hz at 0 dB beats Shannon
    with pytest.raises(ValueError):
        load_mcs_table(p)


def test_shadowing_statistics():
    sh = Shadowing(seed=3, sigma_db=8.0)
    draws = sh.sample(range(1000), 0.0, 100).ravel()
    assert draws.size >= 100_000
    assert abs(draws.mean()) < 0.2
    assert draws.std() == pytest.approx(8.0, rel=0.05)


def test_shadowing_redraw_period():
    sh = Shadowing(seed=3, sigma_db=8.0, update_s=1.0)
    a = sh.sample([4], 0.2, 5)
    assert np.array_equal(a, sh.sample([4], 0.9, 5))
    assert not np.array_equal(a, sh.sample([4], 1.0, 5))
    # a user's row does not depend on who else is sampled
    assert np.array_equal(a, sh.sample([7, 4], 0.2, 5)[1:])


def test_user_near_site_prefers_facing_sector():
    lay = build_layout(1)
    site = 3
    ang = math.radians(150.0)
    pos = lay.site_xy[site] + 20.0 * np.array([math.cos(ang), math.sin(ang)])
    rr = build_rate_matrix(lay, pos[None, :])
    assert int(np.argmax(rr.rates[0])) == 3 * site + 1


def test_rate_matrix_deterministic():
    lay = build_layout(1)
    pos = uniform_positions(30, lay.bounds, np.random.default_rng(2))
    sh = Shadowing(seed=9)
    a = build_rate_matrix(lay, pos, shadow_db=sh.sample(range(30), 4.0, lay.n_sectors))
    b = build_rate_matrix(lay, pos, shadow_db=sh.sample(range(30), 4.0, lay.n_sectors))
    assert np.array_equal(a.rates, b.rates)


def test_shannon_and_mcs_medians_comparable():
    lay = build_layout(1)
    pos = uniform_positions(2000, lay.bounds, np.random.default_rng(4))
    shadow = Shadowing(seed=4).sample(range(2000), 0.0, lay.n_sectors)
    best_sh = build_rate_matrix(lay, pos, shadow_db=shadow).rates.max(axis=1)
    best_mcs = build_rate_matrix(lay, pos, shadow_db=shadow, mode=MCS).rates.max(axis=1)
    ratio = np.median(best_sh) / np.median(best_mcs)
    assert 0.5 <= ratio <= 2.0


def test_fading_only_affects_mcs_selection():
    lay = build_layout(0)
    pos = np.array([[50.0, 20.0]])
    fad = channel.rayleigh_gains(1, [0], 0, lay.n_sectors)
    plain = build_rate_matrix(lay, pos, mode=MCS)
    faded = build_rate_matrix(lay, pos, mode=MCS, fading=fad)
    assert np.array_equal(plain.sinr, faded.sinr)
    shannon = build_rate_matrix(lay, pos, fading=fad)
    assert np.array_equal(shannon.rates, build_rate_matrix(lay, pos).rates)


def test_radio_params_validation():
    with pytest.raises(ValueError):
        RadioParams(bandwidth_hz=0)
    with pytest.raises(ValueError):
        achievable_rate(1.0, mode="magic")
