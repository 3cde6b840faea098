"""RRH selection, user admission, and the simulation baselines.

Implements the two end-to-end pipelines (network power minimization via
switch-off ordering + bisection, user admission via slack ordering +
bisection) together with coordinated beamforming, the reweighted
l1/l-infinity heuristic, MDR deflation, and exhaustive enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic, lift, recover, sparseopt
from .model import Beamformer, Channel, NetworkConfig, PowerBreakdown


@dataclass(frozen=True)
class InfeasibleSignal:
    """All-RRHs-on problem cannot meet the targets; run admission instead."""
    reason: str
    trace: sparseopt.IterTrace | None = None


@dataclass
class PlanResult:
    active_rrhs: tuple
    j0: int
    beamformer: Beamformer
    power: PowerBreakdown
    trace: sparseopt.IterTrace
    oracle_calls: int
    recovery: recover.RecoveryReport | None = None
    degraded: bool = False
    monotone_violation: bool = False


@dataclass
class AdmissionResult:
    admitted_users: tuple
    n0: int
    beamformer: Beamformer | None
    transmit_w: float
    trace: sparseopt.IterTrace
    oracle_calls: int = 0
    recovery: recover.RecoveryReport | None = None
    degraded: bool = False
    monotone_violation: bool = False


@dataclass(frozen=True)
class BisectionOutcome:
    cut: int
    calls: int
    monotone_violation: bool = False


def rrh_ordering(lifted: lift.LiftedVars, cfg: NetworkConfig,
                 ch: Channel) -> tuple[np.ndarray, tuple]:
    """Switch-off priorities theta_l (ascending order goes first).

    theta_l = sqrt(eta_l kappa_l / P_l^c) * sqrt(sum_m Tr(C_lm Q_m)) with
    kappa_l the total channel gain toward RRH l; ties break by index.
    """
    L = cfg.num_rrhs
    theta = np.zeros(L)
    for l in range(L):
        off = cfg.antenna_offsets[l]
        nl = cfg.antennas[l]
        gp = sum(float(np.real(np.trace(Q[off:off + nl, off:off + nl])))
                 for Q in lifted.Q)
        kappa = float(np.sum(np.abs(ch.h[:, off:off + nl]) ** 2))
        theta[l] = np.sqrt(cfg.drain_inefficiency[l] * kappa
                           / cfg.fronthaul_power[l]) * np.sqrt(max(gp, 0.0))
    pi = tuple(np.lexsort((np.arange(L), theta)))
    return theta, pi


def bisection_cut(count: int, oracle, mode: str,
                  verify: bool = False) -> BisectionOutcome:
    """Bisection over a monotone prefix-feasibility oracle.

    RRH mode: oracle(j) answers whether switching off the first j ordered
    RRHs stays feasible; returns the largest such j (j=0 is known
    feasible a priori). USER mode: oracle(n) answers whether removing the
    first n ordered users restores feasibility; returns the smallest such
    n (n=count is trivially feasible). verify additionally scans every
    index and flags monotonicity violations.
    """
    if mode not in ("rrh", "user"):
        raise ValueError("mode must be 'rrh' or 'user'")
    calls = 0
    answers = {}

    def probe(i):
        nonlocal calls
        if i not in answers:
            answers[i] = bool(oracle(i))
            calls += 1
        return answers[i]

    if mode == "rrh":
        lo, up = 0, count + 1  # feasible at lo, infeasible at up (virtual)
        while up - lo > 1:
            mid = (lo + up) // 2
            if probe(mid):
                lo = mid
            else:
                up = mid
        cut = lo
    else:
        lo, up = -1, count  # infeasible at lo (virtual), feasible at up
        while up - lo > 1:
            mid = (lo + up) // 2
            if probe(mid):
                up = mid
            else:
                lo = mid
        cut = up

    violation = False
    if verify:
        low, high = (1, count) if mode == "rrh" else (0, count - 1)
        scan = [probe(i) for i in range(low, high + 1)]
        # feasibility must be a prefix (rrh) / suffix (user) property
        flips = sum(1 for a, b in zip(scan, scan[1:]) if a != b)
        expected = scan[0] != scan[-1] if scan else False
        violation = flips > (1 if expected else 0)
    return BisectionOutcome(cut, calls, violation)


def _is_feasible(active, admitted, cfg, ch, settings) -> bool:
    prob = lift.build_feasibility(tuple(active), tuple(admitted), cfg, ch)
    return conic.solve(prob, settings).status == "Optimal"


def _plan_power(bf: Beamformer, cfg: NetworkConfig,
                active) -> PowerBreakdown:
    transmit = sum(
        float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
        / cfg.drain_inefficiency[l] for l in range(cfg.num_rrhs))
    fronthaul = sum(cfg.fronthaul_power[l] for l in active)
    return PowerBreakdown.combine(transmit, fronthaul, active)


def _tp_and_recover(active, admitted, cfg, ch, count, seed, settings):
    """Transmit-power SDP on the reduced topology plus rank-one recovery.

    Returns (beamformer, report, sdr_objective) or None when either
    stage fails.
    """
    active = tuple(sorted(active))
    admitted = tuple(sorted(admitted))
    if not admitted:
        bf = Beamformer(v=np.zeros((cfg.num_groups, cfg.total_antennas),
                                   dtype=complex))
        return bf, None, 0.0
    if not active:
        return None
    prob = lift.build_transmit_power_min(active, admitted, cfg, ch)
    sol = conic.solve(prob, settings)
    if sol.status != "Optimal":
        return None
    layout = lift.SelectorLayout.build(cfg, active, admitted)
    lifted = lift.extract_lifted(sol.x, layout)
    bf, rep = recover.gaussian_randomize(lifted, cfg, ch, layout,
                                         count=count, seed=seed,
                                         settings=settings)
    if bf is None:
        # boundary-tight instances need a sharper SDP iterate before the
        # rank-one factor meets the margin tolerance; warm start makes
        # the high-accuracy resolve cheap
        base = settings or conic.SolverSettings()
        tight = replace(base, tol=min(base.tol, 1e-10),
                        max_iters=max(base.max_iters, 400_000))
        sol = conic.solve(prob, tight, warm_start=(sol.x, sol.y, sol.s))
        if sol.status != "Optimal":
            return None
        lifted = lift.extract_lifted(sol.x, layout)
        bf, rep = recover.gaussian_randomize(lifted, cfg, ch, layout,
                                             count=count, seed=seed,
                                             settings=settings)
    if bf is None:
        return None
    return bf, rep, sol.objective


def network_power_min(cfg: NetworkConfig, ch: Channel,
                      params: sparseopt.SmoothingParams | None = None,
                      rho=None, seed: int = 0, count: int = 50,
                      settings: conic.SolverSettings | None = None,
                      omega0=None, verify_bisection: bool = False
                      ) -> PlanResult | InfeasibleSignal:
    """Network power minimization (group-sparse pipeline).

    Reweighted-l2 on the smoothed group-power objective, switch-off
    ordering, bisection over the prefix feasibility oracle, then a
    size-reduced transmit power solve and rank-one recovery.
    """
    params = params or sparseopt.SmoothingParams()
    L = cfg.num_rrhs
    users = tuple(range(cfg.num_users))
    layout = lift.SelectorLayout.build(cfg)

    def builder(om):
        return lift.build_weighted_power_sdp(om, cfg, ch, layout)

    def extract_sq(s):
        return lift.group_powers(s.x, layout)

    sol, trace = sparseopt.reweighted_solve(
        builder, extract_sq, L, params, rho=rho,
        solver_settings=settings, omega0=omega0)
    if trace.status == "Infeasible":
        return InfeasibleSignal("qos targets unreachable with all RRHs on",
                                trace)
    degraded = trace.status == "SolverStalled"
    if sol is None:
        return InfeasibleSignal("no usable iterate", trace)

    lifted = lift.extract_lifted(sol.x, layout)
    _, pi = rrh_ordering(lifted, cfg, ch)

    def oracle(j):
        active = tuple(l for l in range(L) if l not in set(pi[:j]))
        return _is_feasible(active, users, cfg, ch, settings)

    bis = bisection_cut(L, oracle, "rrh", verify=verify_bisection)

    for j in range(bis.cut, -1, -1):
        active = tuple(sorted(l for l in range(L) if l not in set(pi[:j])))
        out = _tp_and_recover(active, users, cfg, ch, count, seed, settings)
        if out is not None:
            bf, rep, _ = out
            return PlanResult(
                active_rrhs=active, j0=j, beamformer=bf,
                power=_plan_power(bf, cfg, active), trace=trace,
                oracle_calls=bis.calls, recovery=rep,
                degraded=degraded or j != bis.cut,
                monotone_violation=bis.monotone_violation)
    return InfeasibleSignal("recovery failed on every prefix", trace)


def user_admission(cfg: NetworkConfig, ch: Channel,
                   params: sparseopt.SmoothingParams | None = None,
                   seed: int = 0, count: int = 50,
                   settings: conic.SolverSettings | None = None,
                   verify_bisection: bool = False) -> AdmissionResult:
    """User admission control (individual-sparse slack pipeline).

    Reweighted-l2 on the smoothed slack objective, removal ordering by
    descending slack, bisection for the smallest removal count, then
    transmit power minimization over the admitted set.
    """
    params = params or sparseopt.SmoothingParams()
    K = cfg.num_users
    L = cfg.num_rrhs
    all_rrhs = tuple(range(L))

    def builder(om):
        return lift.build_admission_sdp(om, cfg, ch)

    def extract_sq(s):
        return lift.admission_slacks(s.x, cfg) ** 2

    sol, trace = sparseopt.reweighted_solve(
        builder, extract_sq, K, params, solver_settings=settings)
    degraded = trace.status in ("SolverStalled", "Infeasible")
    if sol is None or not trace.magnitudes:
        slacks = np.ones(K)  # arbitrary but deterministic removal order
    else:
        slacks = trace.magnitudes[-1]

    # remove the largest slack first; ties by ascending user index
    pi = tuple(np.lexsort((np.arange(K), -slacks)))

    def oracle(n):
        admitted = tuple(k for k in range(K) if k not in set(pi[:n]))
        return _is_feasible(all_rrhs, admitted, cfg, ch, settings)

    bis = bisection_cut(K, oracle, "user", verify=verify_bisection)

    for n in range(bis.cut, K + 1):
        admitted = tuple(sorted(k for k in range(K) if k not in set(pi[:n])))
        out = _tp_and_recover(all_rrhs, admitted, cfg, ch, count, seed,
                              settings)
        if out is not None:
            bf, rep, _ = out
            transmit = sum(
                float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
                / cfg.drain_inefficiency[l] for l in range(L))
            return AdmissionResult(
                admitted_users=admitted, n0=n, beamformer=bf,
                transmit_w=transmit, trace=trace, oracle_calls=bis.calls,
                recovery=rep, degraded=degraded or n != bis.cut,
                monotone_violation=bis.monotone_violation)
    return AdmissionResult(admitted_users=(), n0=K, beamformer=None,
                           transmit_w=0.0, trace=trace,
                           oracle_calls=bis.calls, degraded=True)


def coordinated_beamforming(cfg: NetworkConfig, ch: Channel, seed: int = 0,
                            count: int = 50,
                            settings: conic.SolverSettings | None = None
                            ) -> PlanResult | InfeasibleSignal:
    """Transmit power minimization with every RRH kept active."""
    active = tuple(range(cfg.num_rrhs))
    users = tuple(range(cfg.num_users))
    out = _tp_and_recover(active, users, cfg, ch, count, seed, settings)
    if out is None:
        return InfeasibleSignal("qos targets unreachable with all RRHs on")
    bf, rep, _ = out
    return PlanResult(active_rrhs=active, j0=0, beamformer=bf,
                      power=_plan_power(bf, cfg, active),
                      trace=sparseopt.IterTrace(status="Converged"),
                      oracle_calls=0, recovery=rep)


def exhaustive_search(cfg: NetworkConfig, ch: Channel, mode: str,
                      seed: int = 0, count: int = 50,
                      settings: conic.SolverSettings | None = None):
    """Enumeration over RRH subsets (network power) or user subsets
    (admitted count), with SDR-convexified QoS constraints.

    RRH mode compares subsets by SDR network power (transmit optimum
    plus the subset's fronthaul power) and recovers beamformers for the
    winner only; infeasibility of a set prunes all its subsets. USER
    mode scans decreasing cardinality and stops at the first feasible
    size, breaking ties by lower SDR transmit power.
    """
    if mode == "rrh":
        if cfg.num_rrhs > 10:
            raise ValueError("exhaustive RRH search is limited to L <= 10")
        return _exhaustive_rrh(cfg, ch, seed, count, settings)
    if mode == "user":
        if cfg.num_users > 10:
            raise ValueError("exhaustive user search is limited to K <= 10")
        return _exhaustive_user(cfg, ch, seed, count, settings)
    raise ValueError("mode must be 'rrh' or 'user'")


def _sdr_transmit(active, admitted, cfg, ch, settings):
    """SDR optimum of the transmit power problem, None if infeasible."""
    prob = lift.build_transmit_power_min(tuple(active), tuple(admitted),
                                         cfg, ch)
    sol = conic.solve(prob, settings)
    return sol.objective if sol.status == "Optimal" else None


def _exhaustive_rrh(cfg, ch, seed, count, settings):
    L = cfg.num_rrhs
    users = tuple(range(cfg.num_users))
    infeasible: list[frozenset] = []
    best = None  # (network power, active set)
    calls = 0
    tp_full = None  # transmit optimum of the full set, a lower bound
    for size in range(L, 0, -1):
        for active in itertools.combinations(range(L), size):
            aset = frozenset(active)
            if any(aset <= bad for bad in infeasible):
                continue
            fronthaul = sum(cfg.fronthaul_power[l] for l in active)
            # restricting the active set can only raise the transmit
            # optimum, so a subset whose fronthaul plus the full-set
            # transmit power already exceeds the incumbent cannot win
            # (the margin absorbs solver tolerance)
            if (best is not None and tp_full is not None
                    and fronthaul + 0.999 * tp_full >= best[0]):
                continue
            tp = _sdr_transmit(active, users, cfg, ch, settings)
            calls += 1
            if tp is None:
                infeasible.append(aset)
                continue
            if size == L:
                tp_full = tp
            net = tp + fronthaul
            if best is None or net < best[0]:
                best = (net, active)
    if best is None:
        return InfeasibleSignal("no feasible RRH subset")
    active = best[1]
    out = _tp_and_recover(active, users, cfg, ch, count, seed, settings)
    if out is None:
        return InfeasibleSignal("recovery failed for the best subset")
    bf, rep, _ = out
    return PlanResult(active_rrhs=tuple(active), j0=L - len(active),
                      beamformer=bf, power=_plan_power(bf, cfg, active),
                      trace=sparseopt.IterTrace(status="Converged"),
                      oracle_calls=calls, recovery=rep)


def _exhaustive_user(cfg, ch, seed, count, settings):
    K = cfg.num_users
    all_rrhs = tuple(range(cfg.num_rrhs))
    calls = 0
    infeasible: list[frozenset] = []
    levels: list[list[tuple]] = [[()]]  # feasible sets found per size
    # ascending sizes: an infeasible set kills all its supersets, and an
    # empty level kills everything above it
    for size in range(1, K + 1):
        feas = []
        for admitted in itertools.combinations(range(K), size):
            aset = frozenset(admitted)
            if any(bad <= aset for bad in infeasible):
                continue
            calls += 1
            if _is_feasible(all_rrhs, admitted, cfg, ch, settings):
                feas.append(admitted)
            else:
                infeasible.append(aset)
        if not feas:
            break
        levels.append(feas)

    # winner at the top feasible size, ties by lower SDR transmit power,
    # falling back a level if rank-one recovery fails throughout
    for size in range(len(levels) - 1, -1, -1):
        ranked = []
        for admitted in levels[size]:
            tp = (_sdr_transmit(all_rrhs, admitted, cfg, ch, settings)
                  if admitted else 0.0)
            if tp is not None:
                ranked.append((tp, admitted))
        ranked.sort(key=lambda it: (it[0], it[1]))
        for _, admitted in ranked:
            out = _tp_and_recover(all_rrhs, admitted, cfg, ch, count, seed,
                                  settings)
            if out is None:
                continue
            bf, rep, _ = out
            transmit = sum(
                float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
                / cfg.drain_inefficiency[l] for l in range(cfg.num_rrhs))
            return AdmissionResult(
                admitted_users=tuple(admitted), n0=K - size, beamformer=bf,
                transmit_w=transmit,
                trace=sparseopt.IterTrace(status="Converged"),
                oracle_calls=calls, recovery=rep,
                degraded=size != len(levels) - 1)
    return AdmissionResult(admitted_users=(), n0=K, beamformer=None,
                           transmit_w=0.0,
                           trace=sparseopt.IterTrace(status="Converged"),
                           oracle_calls=calls, degraded=True)


def linf_pipeline(cfg: NetworkConfig, ch: Channel,
                  params: sparseopt.SmoothingParams | None = None,
                  seed: int = 0, count: int = 50,
                  settings: conic.SolverSettings | None = None
                  ) -> PlanResult | InfeasibleSignal:
    """Reweighted l1/l-infinity baseline.

    Iterates the entrywise-modulus epigraph program with weights
    1/(t + eps), orders RRHs by their blocks' largest modulus ascending,
    and reuses the bisection + transmit-power tail of the main pipeline.
    """
    params = params or sparseopt.SmoothingParams()
    L = cfg.num_rrhs
    users = tuple(range(cfg.num_users))
    layout = lift.SelectorLayout.build(cfg)
    npairs = L * (L + 1) // 2
    weights = np.ones(npairs)
    trace = sparseopt.IterTrace()
    sol = None
    prev = None
    warm = None
    # late reweighting passes can condition badly (weight spread up to
    # 1/epsilon); once an iterate is in hand, a pass that has not
    # converged by this budget is treated as a stall, so the full budget
    # would only be burned to learn that
    base = settings or conic.SolverSettings()
    capped = replace(base, max_iters=min(base.max_iters, 3000))
    for _ in range(params.max_iters):
        prob = lift.build_linf_iterate(weights, cfg, ch)
        cur = conic.solve(prob, base if sol is None else capped,
                          warm_start=warm)
        if cur.status in ("PrimalInfeasible", "Unbounded"):
            trace.status = "Infeasible"
            return InfeasibleSignal("qos targets unreachable with all "
                                    "RRHs on", trace)
        if cur.status == "MaxIterations":
            trace.status = "SolverStalled"
            break
        sol = cur
        warm = (cur.x, cur.y, cur.s)
        t = np.clip(cur.x[layout.num_matrix_vars:], 0.0, None)
        obj = float(np.sum(t))
        trace.objectives.append(obj)
        trace.weights.append(weights)
        trace.magnitudes.append(t)
        trace.subproblem_statuses.append(cur.status)
        trace.solver_iterations.append(cur.iterations)
        if prev is not None and abs(prev - obj) < params.obj_tol:
            trace.status = "Converged"
            break
        prev = obj
        weights = 1.0 / (t + params.epsilon)
    if sol is None:
        return InfeasibleSignal("no usable iterate", trace)

    # per-RRH priority: largest modulus over all entries of its rows
    lifted = lift.extract_lifted(sol.x, layout)
    linf = np.zeros(L)
    for l in range(L):
        off = cfg.antenna_offsets[l]
        nl = cfg.antennas[l]
        linf[l] = max(float(np.abs(Q[off:off + nl, :]).max())
                      for Q in lifted.Q)
    pi = tuple(np.lexsort((np.arange(L), linf)))

    def oracle(j):
        active = tuple(l for l in range(L) if l not in set(pi[:j]))
        return _is_feasible(active, users, cfg, ch, settings)

    bis = bisection_cut(L, oracle, "rrh")
    for j in range(bis.cut, -1, -1):
        active = tuple(sorted(l for l in range(L) if l not in set(pi[:j])))
        out = _tp_and_recover(active, users, cfg, ch, count, seed, settings)
        if out is not None:
            bf, rep, _ = out
            return PlanResult(
                active_rrhs=active, j0=j, beamformer=bf,
                power=_plan_power(bf, cfg, active), trace=trace,
                oracle_calls=bis.calls, recovery=rep,
                degraded=j != bis.cut or trace.status == "SolverStalled")
    return InfeasibleSignal("recovery failed on every prefix", trace)


def mdr_admission(cfg: NetworkConfig, ch: Channel, seed: int = 0,
                  count: int = 50,
                  settings: conic.SolverSettings | None = None,
                  slack_tol: float = 1e-5) -> AdmissionResult:
    """Membership deflation by relaxation.

    Repeatedly solves the l1-slack relaxation over the surviving users
    and drops the user with the largest slack until every normalized
    slack falls below slack_tol and the reduced set verifies feasible.
    """
    K = cfg.num_users
    all_rrhs = tuple(range(cfg.num_rrhs))
    admitted = list(range(K))
    trace = sparseopt.IterTrace()
    while admitted:
        prob = lift.build_admission_sdp(np.ones(len(admitted)), cfg, ch,
                                        quadratic=False,
                                        admitted_users=tuple(admitted))
        sol = conic.solve(prob, settings)
        if sol.status != "Optimal":
            # conservative: deflation cannot proceed, drop the first user
            trace.subproblem_statuses.append(sol.status)
            admitted.pop(0)
            continue
        slacks = lift.admission_slacks(sol.x, cfg,
                                       admitted_users=tuple(admitted))
        scales = lift.admission_slack_scales(cfg)[list(admitted)]
        normalized = slacks / scales
        trace.objectives.append(float(slacks.sum()))
        trace.magnitudes.append(slacks)
        trace.subproblem_statuses.append(sol.status)
        if normalized.max() <= slack_tol and _is_feasible(
                all_rrhs, admitted, cfg, ch, settings):
            break
        worst = int(np.lexsort((np.array(admitted), -normalized))[0])
        admitted.pop(worst)
    trace.status = "Converged"
    admitted_t = tuple(admitted)
    out = _tp_and_recover(all_rrhs, admitted_t, cfg, ch, count, seed,
                          settings)
    if out is None:
        return AdmissionResult(admitted_users=(), n0=K, beamformer=None,
                               transmit_w=0.0, trace=trace, degraded=True)
    bf, rep, _ = out
    transmit = sum(
        float(np.sum(np.abs(bf.rrh_block(cfg, l)) ** 2))
        / cfg.drain_inefficiency[l] for l in range(cfg.num_rrhs))
    return AdmissionResult(admitted_users=admitted_t, n0=K - len(admitted_t),
                           beamformer=bf, transmit_w=transmit, trace=trace,
                           recovery=rep)
