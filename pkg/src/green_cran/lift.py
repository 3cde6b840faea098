"""SDR-lifted convex subproblems in standard cone form.

Every Hermitian matrix variable Q_m (complex N_A x N_A, N_A the number of
antennas of the active RRHs) is carried as the scaled symmetric
vectorization of its real embedding [[Re Q, -Im Q], [Im Q, Re Q]]
(side 2*N_A). Trace functionals obey

    Tr(B Q) = 0.5 * <svec(embed(B)), svec(embed(Q))>,

so every constraint stays linear in the real decision vector. The block
structure is not enforced inside the solver; the structured average of
any real solution is feasible and objective-preserving because all data
matrices carry the embedding structure.

Decision-variable layout (library contract): the svec blocks of the M_A
retained groups in ascending group index, followed by any scalar epigraph
variables in the order documented by each builder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .conic import (
    ConicProblem,
    NonNegCone,
    PsdCone,
    hermitian_embed,
    hermitian_recover,
    smat,
    svec,
    svec_dim,
)
from .model import Channel, NetworkConfig

__all__ = [
    "LiftedVars",
    "SelectorLayout",
    "lkm",
    "build_weighted_power_sdp",
    "build_admission_sdp",
    "build_feasibility",
    "build_transmit_power_min",
    "build_linf_iterate",
    "extract_lifted",
    "group_powers",
]


@dataclass(frozen=True)
class LiftedVars:
    """Hermitian PSD matrices Q_m, one per retained multicast group."""
    Q: tuple                 # complex (N_A, N_A) arrays
    group_ids: tuple         # original group index per entry

    def __post_init__(self):
        for Qm in self.Q:
            scale = max(1.0, float(np.abs(Qm).max()) if Qm.size else 1.0)
            if np.abs(Qm - Qm.conj().T).max(initial=0.0) > 1e-12 * scale:
                raise ValueError("lifted variable is not Hermitian")


@dataclass(frozen=True)
class SelectorLayout:
    """Index bookkeeping for an (optionally size-reduced) lifted problem."""
    cfg: NetworkConfig
    active_rrhs: tuple       # ascending RRH indices
    admitted_users: tuple    # ascending user indices
    group_ids: tuple         # retained groups (those with admitted users)

    @staticmethod
    def build(cfg: NetworkConfig, active_rrhs=None, admitted_users=None):
        active = tuple(sorted(active_rrhs)) if active_rrhs is not None \
            else tuple(range(cfg.num_rrhs))
        admitted = tuple(sorted(admitted_users)) if admitted_users is not None \
            else tuple(range(cfg.num_users))
        groups = tuple(m for m, g in enumerate(cfg.groups)
                       if set(g) & set(admitted))
        return SelectorLayout(cfg, active, admitted, groups)

    @property
    def num_antennas(self) -> int:
        return sum(self.cfg.antennas[l] for l in self.active_rrhs)

    @property
    def num_groups(self) -> int:
        return len(self.group_ids)

    @property
    def antenna_ranges(self) -> tuple:
        """(start, stop) of each active RRH inside the reduced antenna index."""
        out, pos = [], 0
        for l in self.active_rrhs:
            out.append((pos, pos + self.cfg.antennas[l]))
            pos += self.cfg.antennas[l]
        return tuple(out)

    @property
    def svec_size(self) -> int:
        return svec_dim(2 * self.num_antennas)

    @property
    def num_matrix_vars(self) -> int:
        return self.num_groups * self.svec_size

    def group_slot(self, group_id: int) -> int:
        return self.group_ids.index(group_id)

    def channel_rows(self, ch: Channel) -> np.ndarray:
        return ch.restrict(self.cfg, self.active_rrhs)

    # -- trace functionals ------------------------------------------------
    def theta_coeffs(self, hk: np.ndarray) -> np.ndarray:
        """Row a with a . svec(emb(Q)) = Tr(h h^H Q)."""
        theta = np.outer(hk, hk.conj())
        return 0.5 * svec(hermitian_embed(theta))

    def power_coeffs(self, active_pos: int) -> np.ndarray:
        """Row a with a . svec(emb(Q)) = Tr(C_l Q) for the RRH at position
        ``active_pos`` of the active set."""
        na = self.num_antennas
        start, stop = self.antenna_ranges[active_pos]
        out = np.zeros(self.svec_size)
        iu, ju = np.triu_indices(2 * na)
        diag_idx = np.flatnonzero(iu == ju)
        for i in range(start, stop):
            out[diag_idx[i]] = 0.5
            out[diag_idx[na + i]] = 0.5
        return out


def lkm(Q: LiftedVars, ch: Channel, k: int, cfg: NetworkConfig,
        layout: SelectorLayout | None = None) -> float:
    """Lifted QoS margin gamma_k (sum_{i != m} Tr(Theta_k Q_i) + sigma^2)
    - Tr(Theta_k Q_m)."""
    layout = layout or SelectorLayout.build(cfg)
    hk = layout.channel_rows(ch)[k]
    m = cfg.group_of(k)
    if m not in Q.group_ids:
        raise ValueError(f"group of user {k} absent from the lifted variables")
    traces = np.array([np.real(hk.conj() @ Qm @ hk) for Qm in Q.Q])
    slot = Q.group_ids.index(m)
    interf = float(traces.sum() - traces[slot])
    return float(cfg.target_sinr[k] * (interf + cfg.noise_sigma[k] ** 2)
                 - traces[slot])


class _Assembler:
    """Accumulates nonneg rows, then PSD blocks, into a ConicProblem."""

    def __init__(self, num_vars: int):
        self.n = num_vars
        self.rows_i: list[int] = []
        self.rows_j: list[int] = []
        self.rows_v: list[float] = []
        self.b: list[float] = []
        self.cones: list = []
        self._nonneg = 0

    def nonneg_row(self, cols, vals, b):
        """Append one row of b - Ax >= 0."""
        r = len(self.b)
        for j, v in zip(cols, vals):
            if v != 0.0:
                self.rows_i.append(r)
                self.rows_j.append(int(j))
                self.rows_v.append(float(v))
        self.b.append(float(b))
        self._nonneg += 1

    def close_nonneg(self):
        if self._nonneg:
            self.cones.append(NonNegCone(self._nonneg))
        self._nonneg = 0

    def psd_identity_block(self, start: int, size: int, side: int):
        """PSD block with slack equal to the variable block itself."""
        r = len(self.b)
        for t in range(size):
            self.rows_i.append(r + t)
            self.rows_j.append(start + t)
            self.rows_v.append(-1.0)
            self.b.append(0.0)
        self.cones.append(PsdCone(side))

    def psd_block(self, entries, b_vals, side: int):
        """General PSD block; ``entries`` is a list per slack component of
        (col, coeff) pairs entering with a minus sign (s = b - Ax)."""
        r = len(self.b)
        for t, (pairs, bv) in enumerate(zip(entries, b_vals)):
            for j, v in pairs:
                if v != 0.0:
                    self.rows_i.append(r + t)
                    self.rows_j.append(int(j))
                    self.rows_v.append(float(v))
            self.b.append(float(bv))
        self.cones.append(PsdCone(side))

    def finish(self, c: np.ndarray) -> ConicProblem:
        m = len(self.b)
        A = sp.coo_matrix(
            (self.rows_v, (self.rows_i, self.rows_j)), shape=(m, self.n)
        ).tocsc()
        return ConicProblem(c=c, A=A, b=np.asarray(self.b), cones=self.cones)


def _qos_rows(asm: _Assembler, layout: SelectorLayout, ch: Channel,
              slack_col_of=None, slack_coeff_of=None):
    """Nonneg rows -L_{k,m}(Q) (+ coeff_k x_k) >= 0 for every admitted user."""
    cfg = layout.cfg
    hrows = layout.channel_rows(ch)
    sv = layout.svec_size
    for k in layout.admitted_users:
        m = cfg.group_of(k)
        slot = layout.group_slot(m)
        a = layout.theta_coeffs(hrows[k])
        gamma = cfg.target_sinr[k]
        cols, vals = [], []
        for s in range(layout.num_groups):
            coeff = -1.0 if s == slot else gamma
            base = s * sv
            cols.extend(range(base, base + sv))
            vals.extend(coeff * a)
        b = -gamma * cfg.noise_sigma[k] ** 2
        if slack_col_of is not None:
            coeff = 1.0 if slack_coeff_of is None else slack_coeff_of(k)
            cols.append(slack_col_of(k))
            vals.append(-coeff)
        asm.nonneg_row(cols, vals, b)


def _power_rows(asm: _Assembler, layout: SelectorLayout):
    """Per-RRH transmit power constraints sum_m Tr(C_lm Q_m) <= P_l."""
    sv = layout.svec_size
    for pos, l in enumerate(layout.active_rrhs):
        a = layout.power_coeffs(pos)
        cols, vals = [], []
        for s in range(layout.num_groups):
            base = s * sv
            cols.extend(range(base, base + sv))
            vals.extend(a)
        asm.nonneg_row(cols, vals, layout.cfg.max_tx_power[l])


def _matrix_psd_blocks(asm: _Assembler, layout: SelectorLayout):
    sv = layout.svec_size
    side = 2 * layout.num_antennas
    for s in range(layout.num_groups):
        asm.psd_identity_block(s * sv, sv, side)


def _objective_from_rrh_weights(layout: SelectorLayout, weights) -> np.ndarray:
    sv = layout.svec_size
    c = np.zeros(layout.num_matrix_vars)
    for pos, l in enumerate(layout.active_rrhs):
        a = layout.power_coeffs(pos)
        for s in range(layout.num_groups):
            c[s * sv:(s + 1) * sv] += weights[l] * a
    return c


def build_weighted_power_sdp(omega, cfg: NetworkConfig, ch: Channel,
                             layout: SelectorLayout | None = None
                             ) -> ConicProblem:
    """Weighted group-power SDP iterate: minimize sum_l omega_l sum_m
    Tr(C_lm Q_m) over the lifted QoS and per-RRH power constraints."""
    if layout is None:
        layout = SelectorLayout.build(cfg)
    elif layout.cfg != cfg:
        raise ValueError("layout was built from a different config")
    if any(w <= 0 for w in (omega[l] for l in layout.active_rrhs)):
        raise ValueError("weights must be positive")
    asm = _Assembler(layout.num_matrix_vars)
    _qos_rows(asm, layout, ch)
    _power_rows(asm, layout)
    asm.close_nonneg()
    _matrix_psd_blocks(asm, layout)
    return asm.finish(_objective_from_rrh_weights(layout, omega))


def build_transmit_power_min(active_rrhs, admitted_users, cfg: NetworkConfig,
                             ch: Channel) -> ConicProblem:
    """Size-reduced transmit power minimization: weights 1/eta_l on the
    active set, QoS constraints only for admitted users."""
    layout = SelectorLayout.build(cfg, active_rrhs, admitted_users)
    inv_eta = [1.0 / e for e in cfg.drain_inefficiency]
    asm = _Assembler(layout.num_matrix_vars)
    _qos_rows(asm, layout, ch)
    _power_rows(asm, layout)
    asm.close_nonneg()
    _matrix_psd_blocks(asm, layout)
    return asm.finish(_objective_from_rrh_weights(layout, inv_eta))


def build_feasibility(active_rrhs, admitted_users, cfg: NetworkConfig,
                      ch: Channel) -> ConicProblem:
    """Feasibility program (zero objective) over the reduced topology.

    An empty admitted set is trivially feasible; a marker one-variable
    problem is returned so callers can still solve uniformly.
    """
    admitted = tuple(sorted(admitted_users))
    if not admitted:
        asm = _Assembler(1)
        asm.nonneg_row([0], [-1.0], 0.0)  # s = x >= 0, always feasible
        asm.close_nonneg()
        return asm.finish(np.zeros(1))
    if not tuple(active_rrhs):
        # no antennas left: QoS with positive noise cannot be met
        asm = _Assembler(1)
        asm.nonneg_row([0], [0.0], -1.0)  # s = -1, infeasible by construction
        asm.close_nonneg()
        return asm.finish(np.zeros(1))
    layout = SelectorLayout.build(cfg, active_rrhs, admitted)
    asm = _Assembler(layout.num_matrix_vars)
    _qos_rows(asm, layout, ch)
    _power_rows(asm, layout)
    asm.close_nonneg()
    _matrix_psd_blocks(asm, layout)
    return asm.finish(np.zeros(layout.num_matrix_vars))


def admission_slack_scales(cfg: NetworkConfig) -> np.ndarray:
    """Per-user normalization gamma_k sigma_k^2 for the admission slacks."""
    return np.array([g * s ** 2
                     for g, s in zip(cfg.target_sinr, cfg.noise_sigma)])


def admission_slacks(x: np.ndarray, cfg: NetworkConfig,
                     admitted_users=None) -> np.ndarray:
    """Physical QoS slacks from an admission-SDP solution vector.

    Returned in ascending order of the admitted user indices (all users
    when admitted_users is None).
    """
    admitted = tuple(sorted(admitted_users)) if admitted_users is not None \
        else tuple(range(cfg.num_users))
    layout = SelectorLayout.build(cfg, None, admitted)
    nmat = layout.num_matrix_vars
    xt = np.clip(x[nmat:nmat + len(admitted)], 0.0, None)
    return xt * admission_slack_scales(cfg)[list(admitted)]


def build_admission_sdp(omega, cfg: NetworkConfig, ch: Channel,
                        quadratic: bool = True,
                        admitted_users=None) -> ConicProblem:
    """Admission-slack SDP iterate.

    Variables: [svec blocks | xt_1..xt_K | tt_1..tt_K (quadratic only)]
    where xt_k is the QoS slack normalized by gamma_k sigma_k^2 so that
    every epigraph block stays O(1); ``admission_slacks`` maps a solution
    back to physical units. With ``quadratic`` the objective is
    sum_k omega_k (gamma_k sigma_k^2)^2 tt_k with Schur epigraphs
    [[tt_k, xt_k], [xt_k, 1]] >= 0 (tt_k >= xt_k^2), which equals
    sum_k omega_k x_k^2 at the optimum; otherwise the plain l1 slack
    objective sum_k omega_k x_k. omega and the slack columns follow the
    ascending order of admitted_users (all users when None).
    """
    admitted = tuple(sorted(admitted_users)) if admitted_users is not None \
        else tuple(range(cfg.num_users))
    layout = SelectorLayout.build(cfg, None, admitted)
    K = len(admitted)
    nmat = layout.num_matrix_vars
    scales = admission_slack_scales(cfg)[list(admitted)]
    slot_of = {k: i for i, k in enumerate(admitted)}
    n = nmat + K + (K if quadratic else 0)
    asm = _Assembler(n)
    _qos_rows(asm, layout, ch,
              slack_col_of=lambda k: nmat + slot_of[k],
              slack_coeff_of=lambda k: scales[slot_of[k]])
    _power_rows(asm, layout)
    for i in range(K):
        asm.nonneg_row([nmat + i], [-1.0], 0.0)  # xt_i >= 0
    asm.close_nonneg()
    _matrix_psd_blocks(asm, layout)
    c = np.zeros(n)
    if quadratic:
        for i in range(K):
            # svec([[tt, xt], [xt, 1]]) = (tt, sqrt(2) xt, 1) in the slack
            asm.psd_block(
                entries=[[(nmat + K + i, -1.0)],
                         [(nmat + i, -np.sqrt(2.0))],
                         []],
                b_vals=[0.0, 0.0, 1.0],
                side=2,
            )
            c[nmat + K + i] = omega[i] * scales[i] ** 2
    else:
        for i in range(K):
            c[nmat + i] = omega[i] * scales[i]
    return asm.finish(c)


def _entry_cols(layout: SelectorLayout, na: int):
    """Column index and scale of X[a, b] (a <= b) inside one svec block."""
    iu, ju = np.triu_indices(2 * na)
    index = np.full((2 * na, 2 * na), -1, dtype=int)
    index[iu, ju] = np.arange(iu.size)
    index[ju, iu] = np.arange(iu.size)

    def col(a, b):
        scale = 1.0 if a == b else 1.0 / np.sqrt(2.0)
        return int(index[a, b]), scale

    return col


def build_linf_iterate(weights, cfg: NetworkConfig, ch: Channel) -> ConicProblem:
    """One weighted iterate of the mixed l1/l-infinity baseline.

    Epigraph variables t_{l1 l2} bound max_m max_{i in block l1, j in block
    l2} |Q_m(i, j)|; each modulus bound is the 2x2 Hermitian PSD block
    [[t, q], [conj(q), t]] in its real embedding. Variables:
    [svec blocks | t in lexicographic (l1 <= l2) order]; ``weights`` maps
    the pair order to positive reals (scalar allowed).
    """
    layout = SelectorLayout.build(cfg)
    na = layout.num_antennas
    sv = layout.svec_size
    pairs = [(l1, l2) for l1 in range(cfg.num_rrhs)
             for l2 in range(l1, cfg.num_rrhs)]
    if np.isscalar(weights):
        weights = [float(weights)] * len(pairs)
    if len(weights) != len(pairs):
        raise ValueError("one weight per RRH pair (l1 <= l2) required")
    nmat = layout.num_matrix_vars
    n = nmat + len(pairs)
    asm = _Assembler(n)
    _qos_rows(asm, layout, ch)
    _power_rows(asm, layout)

    col = _entry_cols(layout, na)
    ranges = layout.antenna_ranges
    diag_rows = []
    psd_specs = []
    for pidx, (l1, l2) in enumerate(pairs):
        tcol = nmat + pidx
        (a0, a1), (b0, b1) = ranges[l1], ranges[l2]
        for m in range(layout.num_groups):
            base = m * sv
            for i in range(a0, a1):
                for j in range(b0, b1):
                    if l1 == l2 and j < i:
                        continue
                    # entries of the structured average: the embedding block
                    # pattern is not enforced inside the solver, so both
                    # copies of each entry must be tied to the bound
                    if i == j:
                        # diagonal entries are real nonnegative (Q PSD)
                        c1, s1 = col(i, i)
                        c2, s2_ = col(na + i, na + i)
                        diag_rows.append((
                            [tcol, base + c1, base + c2],
                            [-1.0, 0.5 * s1, 0.5 * s2_], 0.0))
                        continue
                    # i < j always holds here (blocks are ordered)
                    s2 = np.sqrt(2.0)
                    cr1, sr1 = col(i, j)              # X[i, j]
                    cr2, sr2 = col(na + i, na + j)    # X[na+i, na+j]
                    ci1, si1 = col(na + i, j)         # X[na+i, j]
                    ci2, si2 = col(i, na + j)         # X[i, na+j]
                    # Re q = (X[i,j] + X[na+i,na+j]) / 2
                    # Im q = (X[na+i,j] - X[i,na+j]) / 2
                    re = [(base + cr1, -s2 * 0.5 * sr1),
                          (base + cr2, -s2 * 0.5 * sr2)]
                    imv = [(base + ci1, -s2 * 0.5 * si1),
                           (base + ci2, s2 * 0.5 * si2)]
                    neg_imv = [(j_, -v_) for j_, v_ in imv]
                    t = (tcol, -1.0)
                    # emb([[t, q], [q*, t]]) svec components, upper triangle:
                    # (t, sqrt2*Re q, 0, -sqrt2*Im q, t, sqrt2*Im q, 0, t,
                    #  sqrt2*Re q, t)
                    psd_specs.append((
                        [[t], re, [], neg_imv, [t], imv, [], [t], re, [t]],
                        [0.0] * 10,
                    ))
    for cols, vals, b in diag_rows:
        asm.nonneg_row(cols, vals, b)
    asm.close_nonneg()
    _matrix_psd_blocks(asm, layout)
    for entries, b_vals in psd_specs:
        asm.psd_block(entries, b_vals, side=4)
    c = np.zeros(n)
    c[nmat:] = np.asarray(weights, dtype=float)
    return asm.finish(c)


def extract_lifted(x: np.ndarray, layout: SelectorLayout) -> LiftedVars:
    """Structured average of the solver's real solution back to Hermitian
    lifted matrices."""
    sv = layout.svec_size
    side = 2 * layout.num_antennas
    out = []
    for s in range(layout.num_groups):
        X = smat(x[s * sv:(s + 1) * sv], side)
        out.append(hermitian_recover(X))
    return LiftedVars(Q=tuple(out), group_ids=layout.group_ids)


def group_powers(x: np.ndarray, layout: SelectorLayout) -> np.ndarray:
    """Per-RRH group powers sum_m Tr(C_lm Q_m), clipped at zero, indexed by
    the full RRH set (inactive RRHs report 0)."""
    sv = layout.svec_size
    out = np.zeros(layout.cfg.num_rrhs)
    for pos, l in enumerate(layout.active_rrhs):
        a = layout.power_coeffs(pos)
        total = 0.0
        for s in range(layout.num_groups):
            total += float(a @ x[s * sv:(s + 1) * sv])
        out[l] = max(total, 0.0)
    return out
