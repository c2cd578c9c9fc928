"""Palais-Smale family synthesis: construction, ledger, separation, trends."""

import numpy as np
import pytest

from fracbubbles.bubbles import quintic_cutoff
from fracbubbles.errors import ConfigError, ParameterError
from fracbubbles.grid import (Field, HalfSpaceGrid, norm_w, sample_bubble_extension,
                              trace_mass_crit, zero_field)
from fracbubbles.synthesis import (BubbleConfig, BubblePlacement, config_from_dict,
                                   energy_ledger, run_schedule, separation,
                                   synthesize)


@pytest.fixture(scope="module")
def grid1(p1_quarter):
    return HalfSpaceGrid(params=p1_quarter, L=8.0, N=512, Y=4.0, M=48, kind="full")


def cfg_with(p, g, placements, **kw):
    return BubbleConfig(params=p, grid=g, placements=placements, **kw)


def test_empty_config_returns_background(p1_quarter, grid1, rng):
    bg = Field(grid1, rng.normal(size=(grid1.N, grid1.M + 1)))
    cfg = cfg_with(p1_quarter, grid1, [], background=bg)
    out = synthesize(cfg, 1)
    np.testing.assert_array_equal(out.samples, bg.samples)


def test_single_bubble_equals_extension_inside_cutoff(p1_quarter, grid1,
                                                      table1_quarter):
    cfg = cfg_with(p1_quarter, grid1,
                   [BubblePlacement(center=0.0, mu_schedule=(1.0,), r0=1.0,
                                    lam_ref=0.5)])
    out = synthesize(cfg, 1, table=table1_quarter)
    ext = sample_bubble_extension(grid1, cfg.bubble_at(cfg.placements[0], 1),
                                  table1_quarter)
    rho = np.sqrt(grid1.x[:, None] ** 2 + grid1.y[None, :] ** 2)
    inside = rho <= 1.0  # cutoff identically one here
    np.testing.assert_allclose(out.samples[inside], ext.samples[inside], rtol=1e-12)
    outside = rho >= 2.0
    assert np.abs(out.samples[outside]).max() == 0.0


def test_two_far_bubbles_mass_additivity(p1_quarter, grid1, table1_quarter):
    mk = lambda c: BubblePlacement(center=c, mu_schedule=(1.0,), r0=1.0, lam_ref=0.5)
    both = synthesize(cfg_with(p1_quarter, grid1, [mk(-4.0), mk(4.0)]), 1,
                      table=table1_quarter)
    single = synthesize(cfg_with(p1_quarter, grid1, [mk(-4.0)]), 1,
                        table=table1_quarter)
    m_both = trace_mass_crit(both)
    m_single = trace_mass_crit(single)
    assert m_both == pytest.approx(2.0 * m_single, rel=0.03)


def test_synthesized_traces_nonnegative(p1_quarter, grid1, table1_quarter):
    mk = lambda c: BubblePlacement(center=c, mu_schedule=(1.0, 0.5), r0=1.0,
                                   lam_ref=0.5)
    cfg = cfg_with(p1_quarter, grid1, [mk(-4.0), mk(4.0)])
    for alpha in (1, 2):
        out = synthesize(cfg, alpha, table=table1_quarter)
        assert np.all(out.samples >= 0.0)


def test_scale_grid_violation_raises(p1_quarter, grid1):
    cfg = cfg_with(p1_quarter, grid1,
                   [BubblePlacement(center=0.0, mu_schedule=(0.01,), r0=1.0)])
    with pytest.raises(ParameterError):
        synthesize(cfg, 1)


def test_config_invariants():
    p = __import__("fracbubbles.params", fromlist=["FracParams"]).FracParams.create(1, 0.25)
    g = HalfSpaceGrid(params=p, L=8.0, N=256, Y=4.0, M=24, kind="full")
    with pytest.raises(ConfigError):  # schedule must decrease
        BubblePlacement(center=0.0, mu_schedule=(0.5, 0.5), r0=1.0)
    with pytest.raises(ConfigError):  # cutoff too large for the box
        BubbleConfig(params=p, grid=g, placements=[
            BubblePlacement(center=0.0, mu_schedule=(1.0,), r0=3.0)])
    with pytest.raises(ConfigError):  # unequal schedule lengths
        BubbleConfig(params=p, grid=g, placements=[
            BubblePlacement(center=-4.0, mu_schedule=(1.0, 0.5), r0=1.0),
            BubblePlacement(center=4.0, mu_schedule=(1.0,), r0=1.0)])


def test_separation_matrix_properties(p1_quarter, grid1):
    mus = (1.0, 0.5)
    cfg = cfg_with(p1_quarter, grid1,
                   [BubblePlacement(center=-4.0, mu_schedule=mus, r0=1.0),
                    BubblePlacement(center=4.0, mu_schedule=mus, r0=1.0)])
    s1 = separation(cfg, 1)
    assert s1.shape == (2, 2)
    np.testing.assert_array_equal(s1, s1.T)
    assert s1[0, 0] == 2.0
    # equal scales μ at distance d: entry = 2 + d^2/mu^2
    assert s1[0, 1] == pytest.approx(2.0 + 64.0 / 1.0)
    s2 = separation(cfg, 2)
    assert s2[0, 1] > s1[0, 1]
    single = cfg_with(p1_quarter, grid1,
                      [BubblePlacement(center=0.0, mu_schedule=(1.0,), r0=1.0)])
    with pytest.raises(ParameterError):
        separation(single, 1)


def test_ledger_m0_zero_defect(p1_quarter, grid1):
    cfg = cfg_with(p1_quarter, grid1, [], q_mode="zero")
    row = energy_ledger(cfg, 1)
    assert row.i_total == 0.0
    assert row.defect == 0.0
    assert row.residual == 0.0
    assert np.isnan(row.min_separation)


def test_ledger_m1_defect_decreases(p1_quarter, grid1, table1_quarter):
    # at desk scale the cutoff-gradient term dominates the single-bubble
    # defect (order E*, decaying like mu^((n-2g)/2)); the assertable property
    # is the monotone decrease along the schedule, not a small absolute value
    cfg = cfg_with(p1_quarter, grid1,
                   [BubblePlacement(center=0.0, mu_schedule=(1.0, 0.5, 0.25),
                                    r0=1.0, lam_ref=1.05)])
    rows = run_schedule(cfg, table=table1_quarter)
    defects = [abs(r.defect) for r in rows]
    assert defects[2] < defects[1] < defects[0]


def test_ledger_m2_defect_trend(p1_quarter, grid1, table1_quarter):
    mus = (1.0, 0.5, 0.25, 0.125)
    cfg = cfg_with(p1_quarter, grid1,
                   [BubblePlacement(center=-4.0, mu_schedule=mus, r0=1.0,
                                    lam_ref=1.05),
                    BubblePlacement(center=4.0, mu_schedule=mus, r0=1.0,
                                    lam_ref=1.05)])
    rows = run_schedule(cfg, table=table1_quarter)
    defects = [abs(r.defect) for r in rows]
    # without a potential schedule the cutoff term decays like mu^((n-2g)/2),
    # monotone but slower than halving over an 8x schedule; the halving bound
    # of the acceptance criterion holds for the shipped config (Q included)
    assert all(b < a for a, b in zip(defects, defects[1:]))
    assert defects[-1] <= 0.7 * defects[0]
    residuals = [r.residual for r in rows]
    assert all(b < a for a, b in zip(residuals, residuals[1:]))


def test_shipped_config_parses_and_validates():
    from fracbubbles.acceptance import shipped_config_json
    cfg = config_from_dict(shipped_config_json("ps_m2_n1"))
    assert cfg.m == 2
    assert cfg.n_steps == 4
    assert cfg.q_trace(1) is not None
    assert np.max(np.abs(cfg.q_trace(2))) == pytest.approx(
        np.max(np.abs(cfg.q_trace(1))) / 2.0)
    assert cfg.q_inf() is not None and np.all(cfg.q_inf() == 0.0)


def test_synthesized_norms_uniformly_bounded(table1_quarter):
    from fracbubbles.acceptance import shipped_ps_config
    cfg = shipped_ps_config()
    rows, fields = run_schedule(cfg, table=table1_quarter, keep_fields=True)
    norms = [norm_w(f) for f in fields]
    assert max(norms) < 10.0 * norms[0] + 10.0
    assert all(np.isfinite(r.i_total) and np.isfinite(r.residual) for r in rows)


def test_run_schedule_threaded_matches_sequential(table1_quarter):
    from fracbubbles.acceptance import shipped_ps_config
    cfg = shipped_ps_config()
    seq = run_schedule(cfg, table=table1_quarter)
    par = run_schedule(cfg, table=table1_quarter, threads=2)
    for a, b in zip(seq, par):
        assert a == b


def test_config_from_dict_errors():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"n": 1, "gamma": 0.25})
    assert "grid" in str(exc.value)
    with pytest.raises(ConfigError):
        config_from_dict({"n": 1, "gamma": 0.25,
                          "grid": {"L": 8.0, "N": 256, "Y": 4.0, "M": 24},
                          "Q": {"mode": "bogus"}})
