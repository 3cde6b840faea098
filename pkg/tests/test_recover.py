"""Rank-one recovery: closed-form single-user optima, eigen extraction,
power-control LP, randomization determinism, and the feasibility audit."""

import numpy as np

from green_cran import conic, lift, model, recover

from test_model import small_cfg
from test_lift import lifted_from_bf, single_user_cfg


def _solve_tp(cfg, ch, tol=1e-8, iters=200_000):
    layout = lift.SelectorLayout.build(cfg)
    prob = lift.build_transmit_power_min(tuple(range(cfg.num_rrhs)),
                                         tuple(range(cfg.num_users)),
                                         cfg, ch)
    sol = conic.solve(prob, conic.SolverSettings(tol=tol, max_iters=iters))
    assert sol.status == "Optimal"
    return lift.extract_lifted(sol.x, layout), layout


def test_rank_ratio_basics():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    Q1 = np.outer(v, v.conj())
    assert recover.rank_ratio(Q1) < 1e-12
    assert np.isclose(recover.rank_ratio(np.eye(3, dtype=complex)), 1.0)
    assert recover.rank_ratio(np.zeros((2, 2), dtype=complex)) == 0.0


def test_extract_rank_one_inverts_outer_product():
    rng = np.random.default_rng(1)
    for _ in range(25):
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        got = recover.extract_rank_one(np.outer(v, v.conj()))
        # equality holds only up to a global phase; compare lifts
        assert np.allclose(np.outer(got, got.conj()),
                           np.outer(v, v.conj()), atol=1e-9)
        # canonical phase: first significant entry is real nonnegative
        nz = np.flatnonzero(np.abs(got) > 1e-9)
        assert got[nz[0]].imag == 0.0 and got[nz[0]].real >= 0.0


def test_single_user_closed_form_recovery():
    # K=1: SDR is tight and the optimum is gamma sigma^2 / ||h||^2
    cfg = single_user_cfg()
    for seed in range(50):
        ch = model.generate_channel(cfg, seed=seed)
        lifted, layout = _solve_tp(cfg, ch)
        assert max(recover.rank_ratio(Q) for Q in lifted.Q) <= 1e-6
        bf, rep = recover.gaussian_randomize(lifted, cfg, ch, layout)
        assert bf is not None and rep.method == "RankOneExact"
        expect = cfg.target_sinr[0] / float(np.sum(np.abs(ch.h[0]) ** 2))
        assert np.isclose(rep.objective, expect, rtol=1e-4)
        assert model.qos_margin(ch, bf, 0, cfg) <= recover.QOS_MARGIN_TOL


def test_recovered_beamformer_passes_audit():
    cfg = small_cfg(sinr_db=0.0)
    for seed in range(8):
        ch = model.generate_channel(cfg, seed=seed)
        lifted, layout = _solve_tp(cfg, ch, tol=1e-9)
        bf, rep = recover.gaussian_randomize(lifted, cfg, ch, layout,
                                             seed=seed)
        assert bf is not None
        for k in range(cfg.num_users):
            assert model.qos_margin(ch, bf, k, cfg) <= recover.QOS_MARGIN_TOL
        for l in range(cfg.num_rrhs):
            p = float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
            assert p <= cfg.max_tx_power[l] * (1 + recover.POWER_CAP_SLACK)


def test_randomized_path_and_determinism():
    # an artificial rank bump forces the Gaussian randomization branch
    cfg = small_cfg(sinr_db=0.0)
    ch = model.generate_channel(cfg, seed=3)
    lifted, layout = _solve_tp(cfg, ch)
    n = layout.num_antennas
    bumped = lift.LiftedVars(
        Q=tuple(Q + 1e-3 * float(np.real(np.trace(Q))) * np.eye(n)
                for Q in lifted.Q),
        group_ids=lifted.group_ids)
    assert max(recover.rank_ratio(Q) for Q in bumped.Q) > recover.RANK_ONE_TOL
    bf1, rep1 = recover.gaussian_randomize(bumped, cfg, ch, layout,
                                           count=30, seed=7)
    bf2, rep2 = recover.gaussian_randomize(bumped, cfg, ch, layout,
                                           count=30, seed=7)
    assert rep1.method == "Randomized" and bf1 is not None
    assert np.array_equal(bf1.v, bf2.v)
    assert rep1.objective == rep2.objective
    assert rep1.candidates_tried == rep2.candidates_tried
    for k in range(cfg.num_users):
        assert model.qos_margin(ch, bf1, k, cfg) <= recover.QOS_MARGIN_TOL


def test_power_control_lp_single_user():
    cfg = single_user_cfg()
    ch = model.generate_channel(cfg, seed=0)
    d = ch.h[0] / np.linalg.norm(ch.h[0])  # matched filter direction
    p = recover.power_control_lp(d[None, :], cfg, ch)
    expect = cfg.target_sinr[0] / float(np.sum(np.abs(ch.h[0]) ** 2))
    assert p is not None
    assert np.isclose(p[0], expect, rtol=1e-6, atol=1e-8)


def test_power_control_lp_infeasible():
    cfg = single_user_cfg(sinr_db=30.0, power=1e-4)
    ch = model.generate_channel(cfg, seed=0)
    d = ch.h[0] / np.linalg.norm(ch.h[0])
    assert recover.power_control_lp(d[None, :], cfg, ch) is None


def test_failure_reports_infinite_objective():
    # a lifted point violating the targets by a wide margin cannot be
    # repaired into feasibility under tiny power caps
    cfg = single_user_cfg(sinr_db=30.0, power=1e-4)
    ch = model.generate_channel(cfg, seed=1)
    bf = model.Beamformer(v=1e-3 * np.ones((1, cfg.total_antennas),
                                           dtype=complex))
    lifted = lifted_from_bf(bf, cfg)
    got, rep = recover.gaussian_randomize(lifted, cfg, ch)
    assert got is None
    assert rep.objective == np.inf
