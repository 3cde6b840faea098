"""Rank-one beamformer recovery from lifted SDP solutions.

When the relaxation is tight (second eigenvalue negligible) the principal
eigenpair is the exact solution. Otherwise candidate directions are drawn
from the Gaussian distribution induced by each Q_m and scaled by a
multigroup power-control LP, keeping the best feasible tuple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import conic
from .lift import LiftedVars, SelectorLayout
from .model import Beamformer, Channel, NetworkConfig, rng_stream

RANK_ONE_TOL = 1e-6
QOS_MARGIN_TOL = 1e-6
POWER_CAP_SLACK = 1e-8


@dataclass(frozen=True)
class RecoveryReport:
    method: str  # RankOneExact | Randomized
    rank_ratios: tuple
    candidates_tried: int
    objective: float  # total transmit power of the returned beamformer
    margins: tuple  # QoS margins of the admitted users, target order


def rank_ratio(Q: np.ndarray) -> float:
    """Tightness measure lambda_2 / lambda_1 of a Hermitian PSD matrix."""
    lam = np.linalg.eigvalsh(Q)
    top = lam[-1]
    if top <= 0.0:
        return 0.0
    second = max(float(lam[-2]), 0.0) if lam.size > 1 else 0.0
    return second / float(top)


def extract_rank_one(Q: np.ndarray) -> np.ndarray:
    """Principal component sqrt(lambda_1) u_1 with a canonical phase."""
    lam, U = np.linalg.eigh(Q)
    top = float(lam[-1])
    if top <= 0.0:
        return np.zeros(Q.shape[0], dtype=complex)
    v = np.sqrt(top) * U[:, -1]
    nz = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
    if nz.size:
        v = v * np.exp(-1j * np.angle(v[nz[0]]))
        v[nz[0]] = abs(v[nz[0]])  # kill roundoff imaginary residue
    return v


def _direction_gains(directions: np.ndarray, h: np.ndarray) -> np.ndarray:
    # a[k, m] = |h_k^H w_m|^2 over the reduced antenna space
    return np.abs(h.conj() @ directions.T) ** 2


def power_control_lp(directions: np.ndarray, cfg: NetworkConfig, ch: Channel,
                     layout: SelectorLayout | None = None,
                     settings: conic.SolverSettings | None = None
                     ) -> np.ndarray | None:
    """Optimal group powers for fixed unit beamforming directions.

    Minimizes sum_m p_m subject to the QoS targets of the admitted users
    and the per-RRH transmit power limits. Solved with a simplex/IPM
    backend (HiGHS): the recovered beamformer must meet tight margin and
    cap tolerances, beyond what a first-order method delivers cheaply.
    Returns None when no power allocation meets the targets. `settings`
    is accepted for interface symmetry and ignored.
    """
    del settings
    if layout is None:
        layout = SelectorLayout.build(cfg)
    directions = np.atleast_2d(np.asarray(directions))
    M = len(layout.group_ids)
    if directions.shape != (M, layout.num_antennas):
        raise ValueError("one direction per retained group is required")
    h = ch.restrict(cfg, layout.active_rrhs)[list(layout.admitted_users)]
    gains = _direction_gains(directions, h)

    # boundary instances (QoS and caps simultaneously tight) become
    # infeasible under any extraction noise; allow half of the audited
    # margin and cap slack so such instances stay recoverable
    rows, rhs = [], []
    for row_k, k in enumerate(layout.admitted_users):
        slot = layout.group_slot(cfg.group_of(k))
        gamma = cfg.target_sinr[k]
        vals = gamma * gains[row_k].copy()
        vals[slot] = -gains[row_k, slot]
        rows.append(vals)
        rhs.append(-gamma * cfg.noise_sigma[k] ** 2 + 0.5 * QOS_MARGIN_TOL)
    pos = 0
    for l in layout.active_rrhs:
        nl = cfg.antennas[l]
        blk = directions[:, pos:pos + nl]
        rows.append(np.sum(np.abs(blk) ** 2, axis=1))
        rhs.append(cfg.max_tx_power[l] * (1.0 + 0.5 * POWER_CAP_SLACK))
        pos += nl
    res = linprog(np.ones(M), A_ub=np.vstack(rows), b_ub=np.array(rhs),
                  bounds=(0.0, None), method="highs")
    if not res.success:
        return None
    return np.clip(res.x, 0.0, None)


def _uplift(v_reduced: np.ndarray, cfg: NetworkConfig,
            layout: SelectorLayout) -> Beamformer:
    """Embed reduced-space per-group vectors into a full-size beamformer."""
    v = np.zeros((cfg.num_groups, cfg.total_antennas), dtype=complex)
    cols = []
    for l in layout.active_rrhs:
        off = cfg.antenna_offsets[l]
        cols.extend(range(off, off + cfg.antennas[l]))
    for slot, m in enumerate(layout.group_ids):
        v[m, cols] = v_reduced[slot]
    return Beamformer(v=v)


def _audit(bf: Beamformer, cfg: NetworkConfig, ch: Channel,
           layout: SelectorLayout):
    """QoS margins of admitted users and per-RRH powers."""
    from .model import qos_margin
    margins = np.array([qos_margin(ch, bf, k, cfg)
                        for k in layout.admitted_users])
    powers = np.array([np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2)
                       for l in range(cfg.num_rrhs)])
    return margins, powers


def _polish_scale(bf: Beamformer, cfg: NetworkConfig, ch: Channel,
                  layout: SelectorLayout) -> Beamformer | None:
    """Smallest uniform amplitude rescale meeting every QoS target.

    Scaling every v_m by sqrt(c) with c >= 1 raises each SINR since the
    noise term stays fixed; the required c has a closed form per user.
    Returns None if some user cannot be fixed or a cap would be exceeded.
    """
    c_req = 1.0
    for k in layout.admitted_users:
        m = cfg.group_of(k)
        g = np.abs(ch.h[k].conj() @ bf.v.T) ** 2
        signal = float(g[m])
        interf = float(g.sum() - g[m])
        gamma = cfg.target_sinr[k]
        denom = signal - gamma * interf
        if denom <= 0.0:
            return None
        c_req = max(c_req, gamma * cfg.noise_sigma[k] ** 2 / denom)
    c = c_req * (1.0 + 1e-9)
    for l in range(cfg.num_rrhs):
        used = float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
        if c * used > cfg.max_tx_power[l] * (1.0 + POWER_CAP_SLACK):
            return None
    return Beamformer(v=np.sqrt(c) * bf.v)


def _repower(v_reduced, cfg, ch, layout, settings):
    """Re-optimize group powers along the given directions via the LP."""
    norms = np.linalg.norm(v_reduced, axis=1)
    if np.any(norms <= 0.0):
        return None
    dirs = v_reduced / norms[:, None]
    p = power_control_lp(dirs, cfg, ch, layout, settings)
    if p is None:
        return None
    return dirs * np.sqrt(p)[:, None]


def _cap_guard(bf: Beamformer, cfg: NetworkConfig) -> Beamformer:
    """Uniformly shrink the beamformer if solver roundoff breached a cap."""
    worst = 1.0
    for l in range(cfg.num_rrhs):
        used = float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
        if used > cfg.max_tx_power[l]:
            worst = max(worst, used / cfg.max_tx_power[l])
    if worst == 1.0:
        return bf
    return Beamformer(v=bf.v / np.sqrt(worst))


def _finalize(v_reduced, cfg, ch, layout, method, ratios, tried,
              settings=None):
    bf = _uplift(v_reduced, cfg, layout)
    margins, _ = _audit(bf, cfg, ch, layout)
    if margins.size and margins.max() > 0.0:
        # prefer redistributing power across groups; a uniform upscale
        # can hit per-RRH caps on power-tight instances
        repowered = _repower(v_reduced, cfg, ch, layout, settings)
        if repowered is not None:
            bf = _uplift(repowered, cfg, layout)
            margins, _ = _audit(bf, cfg, ch, layout)
        if margins.max() > 0.0:
            polished = _polish_scale(bf, cfg, ch, layout)
            if polished is not None:
                bf = polished
                margins, _ = _audit(bf, cfg, ch, layout)
    bf = _cap_guard(bf, cfg)
    margins, powers = _audit(bf, cfg, ch, layout)
    caps_ok = all(powers[l] <= cfg.max_tx_power[l] * (1.0 + POWER_CAP_SLACK)
                  for l in range(cfg.num_rrhs))
    if (margins.size and margins.max() > QOS_MARGIN_TOL) or not caps_ok:
        return None, RecoveryReport(method, ratios, tried, np.inf,
                                    tuple(margins))
    obj = float(np.sum(np.abs(bf.v) ** 2))
    return bf, RecoveryReport(method, ratios, tried, obj, tuple(margins))


def gaussian_randomize(lifted: LiftedVars, cfg: NetworkConfig, ch: Channel,
                       layout: SelectorLayout | None = None,
                       count: int = 50, seed: int = 0,
                       settings: conic.SolverSettings | None = None
                       ) -> tuple[Beamformer | None, RecoveryReport]:
    """Beamformer recovery from lifted matrices (tight or randomized).

    With every rank ratio below RANK_ONE_TOL the principal eigenpairs are
    returned directly. Otherwise `count` candidate direction tuples are
    drawn (the j-th sample of every group forms tuple j), each scaled by
    power_control_lp, and the feasible tuple of least transmit power
    wins; one retry at 4x count before reporting failure. Deterministic
    in (inputs, seed, count).
    """
    if layout is None:
        layout = SelectorLayout.build(cfg)
    ratios = tuple(rank_ratio(Q) for Q in lifted.Q)
    if not ratios or max(ratios) <= RANK_ONE_TOL:
        v_red = np.array([extract_rank_one(Q) for Q in lifted.Q])
        return _finalize(v_red, cfg, ch, layout, "RankOneExact", ratios, 0,
                         settings)

    rng = rng_stream(seed, "gaussian-randomize")
    n = layout.num_antennas
    factors = []
    for Q in lifted.Q:
        tr = float(np.real(np.trace(Q)))
        if tr <= 0.0:
            return None, RecoveryReport("Randomized", ratios, 0, np.inf, ())
        shift = 1e-12 * tr / n
        try:
            factors.append(np.linalg.cholesky(Q + shift * np.eye(n)))
        except np.linalg.LinAlgError:
            # solver roundoff can leave eigenvalues below the fixed shift
            lam_min = float(np.linalg.eigvalsh(Q)[0])
            shift = max(shift, 1.01 * abs(lam_min)) + 1e-15 * tr / n
            factors.append(np.linalg.cholesky(Q + shift * np.eye(n)))

    tried = 0
    best = None  # (objective, candidate index, scaled directions)
    for batch in (count, 4 * count):
        for m, Lf in enumerate(factors):
            w = (rng.standard_normal((batch, n))
                 + 1j * rng.standard_normal((batch, n))) / np.sqrt(2.0)
            cand = w @ Lf.T  # row j is Lf @ w_j, covariance Lf Lf^H = Q
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            if m == 0:
                cands = np.empty((len(factors), batch, n), dtype=complex)
            cands[m] = cand
        for j in range(batch):
            dirs = cands[:, j]
            p = power_control_lp(dirs, cfg, ch, layout, settings)
            tried += 1
            if p is None:
                continue
            obj = float(p.sum())
            if best is None or obj < best[0]:
                best = (obj, j, dirs * np.sqrt(p)[:, None])
        if best is not None:
            break
    if best is None:
        return None, RecoveryReport("Randomized", ratios, tried, np.inf, ())
    return _finalize(best[2], cfg, ch, layout, "Randomized", ratios, tried,
                     settings)
