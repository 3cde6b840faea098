"""Embedded first-order cone-program solver (zero / nonneg / PSD cones).

The solver runs an ADMM splitting on the homogeneous self-dual embedding of

    minimize    c'x
    subject to  b - Ax in K,   K = Zero x NonNeg x PSD x ...

PSD blocks use the scaled symmetric vectorization (off-diagonal entries
multiplied by sqrt(2)) so that Euclidean inner products of vectorized
matrices equal trace inner products.

Certificate conventions on non-optimal exits:
  * PrimalInfeasible: ``y`` holds a dual improving ray with y in K*,
    ||A'y|| ~ 0 and b'y = -1.
  * Unbounded: ``x`` holds a primal improving ray with c'x = -1 and
    A x + s ~ 0 for the returned slack ``s`` in K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "ZeroCone",
    "NonNegCone",
    "PsdCone",
    "ConicProblem",
    "ConicSolution",
    "SolverSettings",
    "svec",
    "smat",
    "svec_dim",
    "hermitian_embed",
    "hermitian_recover",
    "project_psd",
    "solve",
]


@dataclass(frozen=True)
class ZeroCone:
    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class NonNegCone:
    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class PsdCone:
    side: int

    @property
    def size(self) -> int:
        return self.side * (self.side + 1) // 2


def svec_dim(side: int) -> int:
    return side * (side + 1) // 2


_SQRT2 = np.sqrt(2.0)


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled upper-triangular vectorization of a real symmetric matrix."""
    n = S.shape[0]
    iu, ju = np.triu_indices(n)
    out = S[iu, ju].astype(float).copy()
    out[iu != ju] *= _SQRT2
    return out


def smat(x: np.ndarray, side: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    iu, ju = np.triu_indices(side)
    S = np.zeros((side, side))
    vals = np.asarray(x, dtype=float).copy()
    off = iu != ju
    vals[off] /= _SQRT2
    S[iu, ju] = vals
    S[ju, iu] = vals
    return S


def hermitian_embed(H: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian H.

    The embedding is PSD iff H is PSD; every eigenvalue of H appears twice
    and the trace doubles.
    """
    H = np.asarray(H)
    scale = max(1.0, float(np.abs(H).max()) if H.size else 1.0)
    if np.abs(H - H.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def hermitian_recover(X: np.ndarray) -> np.ndarray:
    """Structured average mapping a real symmetric 2n x 2n back to Hermitian n x n.

    For any feasible real solution of an embedded Hermitian SDP whose data
    matrices all carry the embedding structure, the result is feasible with
    the same objective value.
    """
    n = X.shape[0] // 2
    re = 0.5 * (X[:n, :n] + X[n:, n:])
    im = 0.5 * (X[n:, :n] - X[:n, n:])
    im = 0.5 * (im - im.T)
    re = 0.5 * (re + re.T)
    return re + 1j * im


def project_psd(S: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real symmetric matrix onto the PSD cone."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w[0] >= 0:
        return S
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        A = sp.csc_matrix(self.A).astype(float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cones", tuple(self.cones))
        total = sum(k.size for k in self.cones)
        if total != self.b.shape[0]:
            raise ValueError(
                f"cone dims sum to {total} but b has length {self.b.shape[0]}"
            )
        if A.shape != (self.b.shape[0], self.c.shape[0]):
            raise ValueError("A shape inconsistent with b and c")
        if not (np.isfinite(self.c).all() and np.isfinite(self.b).all()
                and np.isfinite(A.data).all()):
            raise ValueError("problem data contains NaN or Inf")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]

    def debug_dump(self) -> str:
        """Plain-text dump of the problem (layout, cones, COO triplets)."""
        lines = [
            f"vars {self.num_vars} rows {self.num_rows}",
            "cones " + " ".join(
                f"{type(k).__name__}:{k.dim if hasattr(k, 'dim') else k.side}"
                for k in self.cones
            ),
            "c " + " ".join(f"{v:.17g}" for v in self.c),
            "b " + " ".join(f"{v:.17g}" for v in self.b),
        ]
        coo = self.A.tocoo()
        lines.append("A_triplets")
        order = np.lexsort((coo.col, coo.row))
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{i} {j} {v:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class SolverSettings:
    tol: float = 1e-7
    max_iters: int = 50_000
    infeas_tol: float = 1e-6
    check_every: int = 25
    alpha: float = 1.5
    ruiz_passes: int = 10


@dataclass
class ConicSolution:
    status: str  # Optimal | PrimalInfeasible | Unbounded | MaxIterations
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    primal_res: float
    dual_res: float
    gap: float
    iterations: int
    metadata: dict = field(default_factory=dict)


def _cone_slices(cones):
    slices = []
    r = 0
    for k in cones:
        slices.append((k, slice(r, r + k.size)))
        r += k.size
    return slices


class _DualConeProjector:
    """Projection onto K*; PSD blocks of equal side are batched through eigh."""

    def __init__(self, cones):
        nonneg_idx = []
        psd_groups: dict[int, list[int]] = {}
        r = 0
        for k in cones:
            if isinstance(k, NonNegCone):
                nonneg_idx.extend(range(r, r + k.size))
            elif isinstance(k, PsdCone):
                psd_groups.setdefault(k.side, []).append(r)
            r += k.size
        self.nonneg = np.asarray(nonneg_idx, dtype=np.intp)
        self.psd = []
        for side, starts in sorted(psd_groups.items()):
            sd = svec_dim(side)
            gather = (np.asarray(starts, dtype=np.intp)[:, None]
                      + np.arange(sd, dtype=np.intp)[None, :])
            iu, ju = np.triu_indices(side)
            scale = np.where(iu == ju, 1.0, _SQRT2)
            self.psd.append((side, gather, iu, ju, scale))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = y.copy()
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(out[self.nonneg], 0.0)
        for side, gather, iu, ju, scale in self.psd:
            vals = out[gather] / scale
            nb = gather.shape[0]
            M = np.zeros((nb, side, side))
            M[:, iu, ju] = vals
            M[:, ju, iu] = vals
            w, V = np.linalg.eigh(M)
            np.clip(w, 0.0, None, out=w)
            P = (V * w[:, None, :]) @ np.transpose(V, (0, 2, 1))
            P = 0.5 * (P + np.transpose(P, (0, 2, 1)))
            out[gather] = P[:, iu, ju] * scale
        return out


def _ruiz_equilibrate(A: sp.csc_matrix, slices, passes: int):
    """Block-uniform Ruiz scaling: rows of one cone block share a scale."""
    m, n = A.shape
    d = np.ones(m)
    e = np.ones(n)
    for _ in range(passes):
        M = sp.diags(d) @ A @ sp.diags(e)
        Mabs = abs(M)
        row = np.asarray(Mabs.max(axis=1).todense()).ravel()
        for k, sl in slices:
            blk = row[sl].max(initial=0.0)
            row[sl] = blk
        row[row == 0] = 1.0
        d /= np.sqrt(row)
        M = sp.diags(d) @ A @ sp.diags(e)
        col = np.asarray(abs(M).max(axis=0).todense()).ravel()
        col[col == 0] = 1.0
        e /= np.sqrt(col)
    return d, e


def solve(problem: ConicProblem, settings: SolverSettings | None = None,
          warm_start=None) -> ConicSolution:
    """Solve a cone program via ADMM on the homogeneous self-dual embedding."""
    st = settings or SolverSettings()
    A0, b0, c0 = problem.A, problem.b, problem.c
    m, n = A0.shape
    slices = _cone_slices(problem.cones)
    project_dual = _DualConeProjector(problem.cones)

    if st.ruiz_passes > 0:
        d, e = _ruiz_equilibrate(A0, slices, st.ruiz_passes)
    else:
        d, e = np.ones(m), np.ones(n)
    A = sp.diags(d) @ A0 @ sp.diags(e)
    b = d * b0
    c = e * c0
    sig_b = max(float(np.linalg.norm(b)), 1e-6)
    sig_c = max(float(np.linalg.norm(c)), 1e-6)
    b = b / sig_b
    c = c / sig_c

    # HSDE matrix Q and the factorization of (I + Q)
    Q = sp.bmat(
        [
            [None, A.T, c[:, None]],
            [-A, None, b[:, None]],
            [-c[None, :], -b[None, :], None],
        ],
        format="csc",
    )
    lin = spla.splu((sp.identity(n + m + 1, format="csc") + Q).tocsc())

    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    u[-1] = 1.0
    v[-1] = 1.0
    if warm_start is not None:
        x0, y0, s0 = warm_start
        u[:n] = x0 / (e * sig_b)
        u[n:n + m] = y0 / (d * sig_c)
        u[-1] = 1.0
        v[n:n + m] = (d * s0) / sig_b
        v[-1] = 0.0

    bn1 = 1.0 + np.linalg.norm(b0)
    cn1 = 1.0 + np.linalg.norm(c0)
    best = None

    def unscale(uu, vv, tau):
        x = e * uu[:n] * sig_b / tau
        y = d * uu[n:n + m] * sig_c / tau
        s = (vv[n:n + m] / d) * sig_b / tau
        return x, y, s

    status = "MaxIterations"
    it = 0
    for it in range(1, st.max_iters + 1):
        ut = lin.solve(u + v)
        w = st.alpha * ut + (1.0 - st.alpha) * u
        r = w - v
        un = r.copy()
        un[n:n + m] = project_dual(r[n:n + m])
        un[-1] = max(r[-1], 0.0)
        v = v - w + un
        u = un

        if it % st.check_every != 0 and it != st.max_iters:
            continue

        tau = u[-1]
        if tau > 1e-9:
            x, y, s = unscale(u, v, tau)
            pres = np.linalg.norm(A0 @ x + s - b0) / bn1
            dres = np.linalg.norm(A0.T @ y + c0) / cn1
            pobj = float(c0 @ x)
            dobj = float(-b0 @ y)
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            best = (x, y, s, pobj, pres, dres, gap)
            if pres <= st.tol and dres <= st.tol and gap <= st.tol:
                status = "Optimal"
                break
        # infeasibility / unboundedness certificates from the raw iterate
        yr = d * u[n:n + m] * sig_c
        bty = float(b0 @ yr)
        if bty < 0.0:
            cert = yr / (-bty)
            if np.linalg.norm(A0.T @ cert) * max(1.0, np.linalg.norm(b0)) \
                    <= st.infeas_tol:
                x = np.full(n, np.nan)
                return ConicSolution(
                    "PrimalInfeasible", x, cert, np.full(m, np.nan),
                    np.nan, np.nan, np.nan, np.nan, it,
                    {"certificate": "dual_ray"},
                )
        xr = e * u[:n] * sig_b
        sr = (v[n:n + m] / d) * sig_b
        ctx = float(c0 @ xr)
        if ctx < 0.0:
            ray = xr / (-ctx)
            sray = sr / (-ctx)
            if np.linalg.norm(A0 @ ray + sray) * max(1.0, np.linalg.norm(c0)) \
                    <= st.infeas_tol:
                return ConicSolution(
                    "Unbounded", ray, np.full(m, np.nan), sray,
                    np.nan, np.nan, np.nan, np.nan, it,
                    {"certificate": "primal_ray"},
                )

    if status == "Optimal":
        x, y, s, pobj, pres, dres, gap = best
        return ConicSolution("Optimal", x, y, s, pobj, pres, dres, gap, it,
                             {"equilibrated": st.ruiz_passes > 0})
    if best is None:
        tau = max(u[-1], 1e-12)
        x, y, s = unscale(u, v, tau)
        pres = np.linalg.norm(A0 @ x + s - b0) / bn1
        dres = np.linalg.norm(A0.T @ y + c0) / cn1
        pobj = float(c0 @ x)
        gap = abs(pobj + float(b0 @ y)) / (1.0 + abs(pobj) + abs(b0 @ y))
        best = (x, y, s, pobj, pres, dres, gap)
    x, y, s, pobj, pres, dres, gap = best
    return ConicSolution("MaxIterations", x, y, s, pobj, pres, dres, gap, it,
                         {"equilibrated": st.ruiz_passes > 0})
