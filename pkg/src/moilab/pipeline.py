"""End-to-end construction of the trace-norm growth experiment.

The chain: a commutator pair (R, D) whose h-commutator grows with the scale
parameter, an admissible conjugation scale t, a pair of conjugate unitaries
H and K, block unitaries U of dimension 8n+4, a rank-structured self-adjoint
witness W, and the scaled second-order remainder m²·R_{m,n} whose trace norm
the divergence report aggregates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circle import A_CORE, eval_varsigma, make_f, make_g, make_h
from .errors import (
    DegenerateCase,
    DimMismatch,
    InsufficientLadder,
    NoAdmissibleT,
    NoStabilization,
    WitnessSearchFailed,
)
from .integrals import DoubleOI, TripleOI, taylor_remainder
from .linalg import (
    SpectralDecomposition,
    as_matrix,
    commutator,
    eig_hermitian,
    eig_unitary,
    exp_i,
    functional_calculus,
    matrix_from_json_dict,
    matrix_to_json_dict,
    schatten_norm,
)
from .schur import contraction_ascent

__all__ = [
    "AdpsPair",
    "PipelineRecord",
    "DivergenceReport",
    "grid_diagonal",
    "build_adps_pair",
    "select_t_and_B",
    "build_HK",
    "build_blocks",
    "find_W_witness",
    "scale_and_select_m",
    "run_pipeline",
    "divergence_report",
    "sqrt_log_fit",
    "ALPHA_SERIES",
]

_RATIO_GATE = 1.5
_T_GRID_DEPTH = 40
_M_LADDER_DEPTH = 30
_STABLE_REL = 0.05
_DOMINANCE = 2.0

_HFUN = make_h()
_GFUN = make_g()
_FFUN = make_f()


def grid_diagonal(n: int) -> np.ndarray:
    """The symmetric grid {±j·e^{−1}/n : j = 1..n} ∪ {0}, ascending."""
    j = np.arange(1, n + 1, dtype=np.float64)
    pos = j * (A_CORE / n)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _h_divided_diff(x, y) -> np.ndarray:
    """First divided difference of h on real points (quotient off-diagonal)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    out = np.empty(x.shape)
    near = np.abs(x - y) <= 1e-12
    out[near] = _HFUN.d1(0.5 * (x[near] + y[near]))
    with np.errstate(invalid="ignore"):
        out[~near] = (_HFUN.value(x[~near]) - _HFUN.value(y[~near])) / (x[~near] - y[~near])
    return out


@dataclass
class AdpsPair:
    """A Hermitian pair whose plain commutator has norm π while the
    h-commutator norm grows with n."""

    n: int
    r: np.ndarray
    d: np.ndarray
    comm_norm: float
    h_comm_norm: float


def _skew_polar(p: np.ndarray) -> np.ndarray:
    # polar factor of a skew-Hermitian matrix, again skew-Hermitian
    mu, q = np.linalg.eigh(1j * p)
    s = np.where(mu > 0, 1.0, np.where(mu < 0, -1.0, 0.0))
    return q @ ((-1j * s)[:, None] * q.conj().T)


def _skew_feasible(x: np.ndarray) -> np.ndarray:
    x = 0.5 * (x - x.conj().T)
    np.fill_diagonal(x, 0.0)
    nrm = float(np.linalg.norm(x, 2))
    return x if nrm <= 1.0 else x / nrm


def _skew_ascent(phi: np.ndarray, seed: int, n_starts: int, iters: int) -> tuple[float, np.ndarray]:
    """Maximize ‖Φ∘X‖_∞ over zero-diagonal skew-Hermitian contractions."""
    dim = phi.shape[0]
    gen = np.random.default_rng(np.random.SeedSequence((seed, 0xAD95)))
    idx = np.arange(dim)
    tri = np.sign(idx[None, :] - idx[:, None]).astype(np.complex128)
    seeds = [_skew_feasible(tri)]
    # triangular pattern in the ordering induced by the symbol diagonal
    order = np.argsort(np.diag(phi), kind="stable")
    tri_ord = np.zeros((dim, dim), dtype=np.complex128)
    tri_ord[np.ix_(order, order)] = tri
    seeds.append(_skew_feasible(tri_ord))
    # single-entry witnesses at the largest off-diagonal symbol entries
    off = np.abs(phi).astype(np.float64)
    np.fill_diagonal(off, 0.0)
    pairs = []
    for pos in np.argsort(off, axis=None)[::-1]:
        j, k = divmod(int(pos), dim)
        if j < k and (j, k) not in pairs:
            pairs.append((j, k))
        if len(pairs) == 3:
            break
    for j, k in pairs:
        e = np.zeros((dim, dim), dtype=np.complex128)
        e[j, k], e[k, j] = 1.0, -1.0
        seeds.append(e)
    for _ in range(max(0, n_starts - len(seeds))):
        g = gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))
        seeds.append(_skew_feasible(g))

    def val(x):
        return float(np.linalg.norm(phi * x, 2))

    best_val, best_x = -1.0, seeds[0]
    for x in seeds:
        cur = val(x)
        for _ in range(iters):
            u, _, vh = np.linalg.svd(phi * x)
            c = phi * (u[:, 0].conj()[:, None] * vh[0, :].conj()[None, :])
            p = _skew_feasible(c.conj())
            cands = [p]
            if np.linalg.norm(p, 2) > 0:
                cands.append(_skew_feasible(_skew_polar(p)))
            stepped = False
            for cand in cands:
                v = val(cand)
                if v > cur * (1.0 + 1e-10):
                    x, cur, stepped = cand, v, True
                    break
            if not stepped:
                break
        if cur > best_val:
            best_val, best_x = cur, x
    return best_val, best_x


def build_adps_pair(n: int, seed: int = 0, n_starts: int = 10, iters: int = 40) -> AdpsPair:
    """Search a commutator pair on the symmetric grid of 2n+1 points.

    R is recovered from a zero-diagonal skew-Hermitian contraction X through
    R_{jk} = X_{jk}/(λ_k − λ_j) (so [R, D] = X and [R, h(D)] = Φ∘X for the
    divided-difference symbol Φ of h), then rescaled to ‖[R, D]‖_∞ = π.
    """
    if n < 3:
        raise ValueError("scale parameter must be at least 3")
    lam = grid_diagonal(n)
    d = np.diag(lam).astype(np.complex128)
    phi = _h_divided_diff(lam[:, None], lam[None, :])
    ratio, x = _skew_ascent(phi, seed, n_starts, iters)
    if ratio <= _RATIO_GATE:
        raise WitnessSearchFailed(
            f"commutator ascent reached ratio {ratio:.4f} <= {_RATIO_GATE} at n={n} "
            f"({n_starts} starts, {iters} iterations)"
        )
    gaps = lam[None, :] - lam[:, None]
    np.fill_diagonal(gaps, 1.0)
    r = x / gaps
    np.fill_diagonal(r, 0.0)
    r = 0.5 * (r + r.conj().T)
    comm = commutator(r, d)
    r *= math.pi / schatten_norm(comm, np.inf)
    comm_norm = schatten_norm(commutator(r, d), np.inf)
    h_of_d = np.diag(_HFUN.value(lam)).astype(np.complex128)
    h_comm_norm = schatten_norm(commutator(r, h_of_d), np.inf)
    return AdpsPair(n=n, r=r, d=d, comm_norm=comm_norm, h_comm_norm=h_comm_norm)


def _h_of_hermitian(a: np.ndarray) -> np.ndarray:
    dec = eig_hermitian(a)
    return dec.reconstruct(_HFUN.value(dec.eigenvalues).astype(np.complex128))


def select_t_and_B(pair: AdpsPair) -> tuple[float, np.ndarray]:
    """Largest dyadic t whose conjugation step B = e^{itR}De^{−itR} − D keeps
    the plain commutator comparable to t while h moves by the full
    h-commutator rate."""
    dec_r = eig_hermitian(pair.r)
    h_of_d = _h_of_hermitian(pair.d)
    for j in range(_T_GRID_DEPTH + 1):
        t = 2.0 ** (-j)
        s = dec_r.reconstruct(np.exp(1j * t * dec_r.eigenvalues))
        b = s @ pair.d @ s.conj().T - pair.d
        b = 0.5 * (b + b.conj().T)
        b_norm = schatten_norm(b, np.inf)
        if not (0.5 * t * pair.comm_norm <= b_norm <= 2.0 * math.pi * t):
            continue
        h_move = schatten_norm(_h_of_hermitian(pair.d + b) - h_of_d, np.inf)
        if h_move >= 0.5 * pair.h_comm_norm * t:
            return t, b
    raise NoAdmissibleT(f"no admissible t in 2^-0..2^-{_T_GRID_DEPTH} at n={pair.n}")


def build_HK(a, b) -> tuple[np.ndarray, np.ndarray]:
    """The conjugate unitary pair H = e^{iA}, K = e^{i(A+B)}."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    h = exp_i(a)
    k = exp_i(a + b)
    if schatten_norm(k - h, np.inf) < 1e-13:
        raise DegenerateCase("conjugated unitary coincides with the base point")
    return h, k


def build_blocks(h, k) -> np.ndarray:
    """U = diag(V, V) with V = diag(K, H): dimension 4d from inputs of dim d."""
    h = as_matrix(h)
    k = as_matrix(k)
    if h.shape != k.shape:
        raise DimMismatch(f"shape mismatch {h.shape} vs {k.shape}")
    d = h.shape[0]
    u = np.zeros((4 * d, 4 * d), dtype=np.complex128)
    for i, blk in enumerate((k, h, k, h)):
        u[i * d : (i + 1) * d, i * d : (i + 1) * d] = blk
    return u


def _cluster_classes(eigenvalues: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, list]:
    """Group eigenvalues whose phase angles agree within tol.

    Returns the sorted class angles and, aligned with them, the index sets
    of the members of each class.  Repeated eigenvalues computed by separate
    diagonalizations differ at machine precision, so exact-value grouping
    would split every multiplicity class.
    """
    ang = np.angle(np.asarray(eigenvalues))
    order = np.argsort(ang)
    groups = [[int(order[0])]]
    for idx in order[1:]:
        idx = int(idx)
        if ang[idx] - ang[groups[-1][-1]] <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    if len(groups) > 1 and (ang[groups[0][0]] + 2.0 * math.pi) - ang[groups[-1][-1]] <= tol:
        groups[0] = groups.pop() + groups[0]
    angles = np.array([float(np.angle(np.sum(np.exp(1j * ang[g])))) for g in groups])
    order = np.argsort(angles)
    return angles[order], [np.array(groups[i]) for i in order]


def _sym_project(a: np.ndarray, flip: np.ndarray) -> np.ndarray:
    """Project onto coefficient vectors satisfying a(-θ) = conj(a(θ))."""
    b = 0.5 * (a + np.conj(a[flip]))
    nrm = np.linalg.norm(b)
    if nrm <= 1e-14:
        return a / np.linalg.norm(a)
    return b / nrm


def _tied_ascent(
    m: np.ndarray, flip: np.ndarray, a: np.ndarray, iters: int
) -> tuple[float, np.ndarray]:
    """Alternating sweep maximizing ‖diag(a)·M·diag(ā)‖_1 over unit a.

    Each sweep is a pair of exact half-steps: the trace-norm dual picks the
    polar factor G of the current congruence, and for fixed G the objective
    is a Hermitian quadratic form in a whose top eigenvector is the best
    next iterate.  Iterates are kept in the conjugate-even family
    a(-θ) = conj(a(θ)), which fixes the phase freedom of the maximizer and
    keeps the realized fixed-point diagonal term real and slowly varying.
    """
    a = _sym_project(a / np.linalg.norm(a), flip)
    val = -1.0
    for _ in range(iters):
        bmat = m * np.outer(a, a.conj())
        u, s, vh = np.linalg.svd(bmat)
        new_val = float(np.sum(s))
        if new_val <= val * (1.0 + 1e-12):
            return max(val, new_val), a
        val = new_val
        c = (u @ vh).conj() * m
        quad = 0.5 * (c.T + c.conj())
        _, q = np.linalg.eigh(quad)
        a = _sym_project(q[:, -1], flip)
    return val, a


def _grid_levels(angles: np.ndarray, tol: float = 1e-9) -> list[int] | None:
    """Detect the dyadic angle grid {±j·A_CORE/n} and return its rung chain.

    The chain lists the coarser nested grids n, n/2, n/4, ... (down to 8)
    that are subsets of the given one; the witness search warm-starts its
    ascent along it.  Returns None when the angles are not a dyadic grid.
    """
    pos = np.sort(angles[angles > tol])
    if pos.size == 0:
        return None
    n_est = int(round(A_CORE / pos[0]))
    if n_est < 1:
        return None
    step = A_CORE / n_est
    jj = np.rint(angles / step)
    if np.any(np.abs(angles - jj * step) > tol):
        return None
    if sorted(int(j) for j in jj) != [j for j in range(-n_est, n_est + 1) if j != 0]:
        return None
    chain = [n_est]
    while chain[0] % 2 == 0 and chain[0] // 2 >= 8:
        chain.insert(0, chain[0] // 2)
    return chain


def find_W_witness(
    u,
    seed: int = 0,
    n_starts: int = 12,
    dec: SpectralDecomposition | None = None,
    iters: int = 80,
) -> tuple[np.ndarray, float]:
    """Self-adjoint W with ‖W‖_2 = 1 making ‖T_ς^{U,U,U}(W, W)‖_1 large.

    The search runs over the rank-two family W = (xξ* + ξx*)/√2 with ξ a
    fixed eigenvector at eigenvalue 1 and x built from one representative
    eigenvector per remaining eigenvalue class: there the trace norm
    splits into the tied diagonal-congruence value of the middle-slice
    symbol M_{ij} = ς(z_i, 1, z_j) plus a fixed-point diagonal term, and
    a projected alternating multistart ascent maximizes the congruence
    value.  When the class angles form the nested dyadic grid produced by
    grid_diagonal, the ascent is warm-started level by level along the
    coarser grids, so the achieved value is non-decreasing under grid
    refinement.  Returns (W, toi_lb) where toi_lb is the trace norm
    recomputed directly at the returned witness.
    """
    u = as_matrix(u)
    if dec is None:
        dec = eig_unitary(u)
    angles, groups = _cluster_classes(dec.eigenvalues)
    ipin = int(np.argmin(np.abs(np.exp(1j * angles) - 1.0)))
    if abs(np.exp(1j * angles[ipin]) - 1.0) > 1e-9:
        raise WitnessSearchFailed("no eigenvalue class at the fixed point 1")
    if len(groups) < 2:
        raise WitnessSearchFailed("spectrum collapses to the fixed point 1")
    ang_f = np.delete(angles, ipin)
    z_f = np.exp(1j * ang_f)
    m_free = np.asarray(
        eval_varsigma(z_f[:, None], np.complex128(1.0), z_f[None, :]), dtype=np.complex128
    )
    s_free = np.asarray(
        eval_varsigma(np.complex128(1.0), z_f, np.complex128(1.0)), dtype=np.complex128
    )

    gen = np.random.default_rng(np.random.SeedSequence((seed, 0x71ED)))
    chain = _grid_levels(ang_f)
    levels = chain if chain is not None else [None]
    prev: tuple[np.ndarray, np.ndarray] | None = None
    for lev in levels:
        if lev is None:
            sel = np.arange(ang_f.size)
        else:
            step = A_CORE / lev
            jj = np.rint(ang_f / step)
            on_grid = np.abs(ang_f - jj * step) <= 1e-9
            sel = np.nonzero(on_grid & (np.abs(jj) >= 1) & (np.abs(jj) <= lev))[0]
        angs = ang_f[sel]
        mf = m_free[np.ix_(sel, sel)]
        sf = s_free[sel]
        dim = sel.size
        flip = np.array([int(np.argmin(np.abs(angs + t))) for t in angs])
        u0, _, v0 = np.linalg.svd(mf)
        starts = [np.ones(dim, dtype=np.complex128), u0[:, 0] + v0[0, :].conj()]
        for _ in range(max(0, n_starts - 2)):
            starts.append(gen.standard_normal(dim) + 1j * gen.standard_normal(dim))
        cands = []
        if prev is not None:
            p_ang, p_a = prev
            lift = np.zeros(dim, dtype=np.complex128)
            for t_old, a_old in zip(p_ang, p_a):
                lift[int(np.argmin(np.abs(angs - t_old)))] = a_old
            cands.append(lift / np.linalg.norm(lift))
            starts.insert(0, lift.copy())
        for a0 in starts:
            if np.linalg.norm(a0) == 0.0:
                continue
            _, a_fin = _tied_ascent(mf, flip, a0, iters)
            cands.append(a_fin)
        best_val, best_a = -1.0, None
        for a in cands:
            congruence = float(
                np.sum(np.linalg.svd(mf * np.outer(a, a.conj()), compute_uv=False))
            )
            fixed_point = complex(np.sum(sf * np.abs(a) ** 2))
            total = congruence + abs(fixed_point)
            if total > best_val:
                best_val, best_a = total, a
        prev = (angs, best_a)

    free_groups = [g for i, g in enumerate(groups) if i != ipin]
    reps = np.array([int(g[0]) for g in free_groups])
    xi = dec.basis[:, int(groups[ipin][0])]
    x = dec.basis[:, reps] @ prev[1]
    x = x - xi * (xi.conj() @ x)
    nrm = float(np.linalg.norm(x))
    if nrm <= 1e-12:
        raise WitnessSearchFailed("witness vector degenerated to the fixed-point class")
    x /= nrm
    w = (np.outer(x, xi.conj()) + np.outer(xi, x.conj())) / math.sqrt(2.0)
    w = 0.5 * (w + w.conj().T)
    w /= schatten_norm(w, 2)
    toi = TripleOI(eval_varsigma, dec, dec, dec)
    toi_lb = float(schatten_norm(toi.apply(w, w), 1))
    z_all = np.exp(1j * angles)
    m_slice = np.asarray(
        eval_varsigma(z_all[:, None], np.complex128(1.0), z_all[None, :]), dtype=np.complex128
    )
    slice_lb, _ = contraction_ascent(m_slice, n_starts=6, seed=seed + 17, iters=80)
    if toi_lb < 0.5 * slice_lb:
        raise WitnessSearchFailed(
            f"witness value {toi_lb:.6f} fell below half the slice bound {slice_lb:.6f}"
        )
    return w, toi_lb


def scale_and_select_m(
    u, w, n: int, dec: SpectralDecomposition | None = None
) -> tuple[int, np.ndarray]:
    """Smallest m = n·2^j where the triple-integral term dominates and
    m²‖R_{m,n}‖_1 has stabilized against the next ladder point."""
    u = as_matrix(u)
    w = as_matrix(w)
    if dec is None:
        dec = eig_unitary(u)
    prev = None
    for j in range(_M_LADDER_DEPTH + 1):
        m = n * (1 << j)
        rem, term_toi, term_doi = taylor_remainder(_FFUN, u, w / m, dec=dec)
        scaled = m * m * schatten_norm(rem, 1)
        dominant = schatten_norm(term_toi, 1) >= _DOMINANCE * schatten_norm(term_doi, 1)
        if prev is not None:
            p_m, p_rem, p_scaled, p_dom = prev
            if p_dom and abs(p_scaled - scaled) <= _STABLE_REL * scaled:
                return p_m, p_rem
        prev = (m, rem, scaled, dominant)
    raise NoStabilization(
        f"no stable dominated point on m = {n}·2^j, j <= {_M_LADDER_DEPTH}"
    )


@dataclass
class PipelineRecord:
    """One complete run at scale n, with every norm re-computable from the
    stored matrices."""

    n: int
    t: float
    b: np.ndarray
    ratio_h: float
    h: np.ndarray
    k: np.ndarray
    ratio_g: float
    u: np.ndarray
    w: np.ndarray
    toi_lb: float
    m: int
    z: np.ndarray
    remainder_norm: float
    beta: float
    scaled: float

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "t": repr(float(self.t)),
            "m": self.m,
            "ratio_h": repr(float(self.ratio_h)),
            "ratio_g": repr(float(self.ratio_g)),
            "toi_lb": repr(float(self.toi_lb)),
            "remainder_norm": repr(float(self.remainder_norm)),
            "beta": repr(float(self.beta)),
            "scaled": repr(float(self.scaled)),
            "matrices": {
                name: matrix_to_json_dict(getattr(self, name))
                for name in ("b", "h", "k", "u", "w", "z")
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PipelineRecord":
        mats = {name: matrix_from_json_dict(d["matrices"][name]) for name in ("b", "h", "k", "u", "w", "z")}
        return cls(
            n=int(d["n"]),
            t=float(d["t"]),
            ratio_h=float(d["ratio_h"]),
            ratio_g=float(d["ratio_g"]),
            toi_lb=float(d["toi_lb"]),
            m=int(d["m"]),
            remainder_norm=float(d["remainder_norm"]),
            beta=float(d["beta"]),
            scaled=float(d["scaled"]),
            **mats,
        )


def run_pipeline(n: int, seed: int = 0) -> tuple[AdpsPair, PipelineRecord]:
    """The full chain at scale n with a deterministic seed."""
    pair = build_adps_pair(n, seed)
    t, b = select_t_and_B(pair)
    h_of_d = _h_of_hermitian(pair.d)
    ratio_h = float(
        schatten_norm(_h_of_hermitian(pair.d + b) - h_of_d, np.inf)
        / schatten_norm(b, np.inf)
    )
    h_mat, k_mat = build_HK(pair.d, b)
    hk_gap = schatten_norm(k_mat - h_mat, np.inf)
    ratio_g = float(
        schatten_norm(
            functional_calculus(_GFUN, k_mat) - functional_calculus(_GFUN, h_mat), np.inf
        )
        / hk_gap
    )
    u = build_blocks(h_mat, k_mat)
    dec = eig_unitary(u)
    w, toi_lb = find_W_witness(u, seed=seed, dec=dec)
    m, rem = scale_and_select_m(u, w, n, dec=dec)
    beta = float(schatten_norm(rem, 1))
    record = PipelineRecord(
        n=n,
        t=t,
        b=b,
        ratio_h=ratio_h,
        h=h_mat,
        k=k_mat,
        ratio_g=ratio_g,
        u=u,
        w=w,
        toi_lb=toi_lb,
        m=m,
        z=w / m,
        remainder_norm=beta,
        beta=beta,
        scaled=float(m * m * beta),
    )
    return pair, record


def sqrt_log_fit(ns, values) -> tuple[float, float]:
    """Least-squares fit values ≈ a + b·√(log n); returns (a, b)."""
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    design = np.column_stack([np.ones_like(ns), np.sqrt(np.log(ns))])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(coef[0]), float(coef[1])


ALPHA_SERIES = ("inverse-square", "inverse-nlogn")


def _alpha_of(series: str, n: int) -> Fraction:
    if series == "inverse-square":
        return Fraction(1, n * n)
    if series == "inverse-nlogn":
        return Fraction(1.0 / (n * math.log(n + 1.0) ** 2))
    raise ValueError(f"unknown alpha series {series!r}; choose from {ALPHA_SERIES}")


@dataclass
class DivergenceReport:
    """Bookkeeping for the repetition counts N_n and the two partial sums."""

    series: str
    rows: list = field(default_factory=list)
    partial_quad: list = field(default_factory=list)
    partial_beta: list = field(default_factory=list)
    quad_bound: float = 0.0
    inequalities_hold: bool = False
    fits: dict = field(default_factory=dict)
    notes: str = ""

    def to_json_dict(self) -> dict:
        return {
            "series": self.series,
            "rows": [
                {
                    "n": row["n"],
                    "beta": repr(float(row["beta"])),
                    "z_l2": repr(float(row["z_l2"])),
                    "alpha": repr(float(row["alpha"])),
                    "big_n": row["big_n"],
                }
                for row in self.rows
            ],
            "partial_quad": [repr(float(v)) for v in self.partial_quad],
            "partial_beta": [repr(float(v)) for v in self.partial_beta],
            "quad_bound": repr(float(self.quad_bound)),
            "inequalities_hold": self.inequalities_hold,
            "fits": {k: [repr(float(a)), repr(float(b))] for k, (a, b) in self.fits.items()},
            "notes": self.notes,
        }


def divergence_report(records, series: str = "inverse-square") -> DivergenceReport:
    """Fold completed records into repetition counts and partial sums.

    N_n = floor(α_n·‖Z_n‖₂⁻²) + 1 is computed in exact rational arithmetic,
    so the two bookkeeping inequalities N_n ≥ α_n‖Z_n‖₂⁻² and
    N_n‖Z_n‖₂² ≤ α_n + ‖Z_n‖₂² hold by construction and are re-checked.
    """
    records = sorted(records, key=lambda rec: rec.n)
    if len(records) < 3:
        raise InsufficientLadder(f"need at least 3 records, got {len(records)}")
    rows = []
    holds = True
    quad_exact = Fraction(0)
    bound_exact = Fraction(0)
    partial_quad, partial_beta = [], []
    acc_quad = Fraction(0)
    acc_beta = 0.0
    for rec in records:
        z_l2 = float(schatten_norm(rec.z, 2))
        z_sq = Fraction(z_l2) ** 2
        alpha = _alpha_of(series, rec.n)
        big_n = int(alpha / z_sq) + 1
        holds = holds and (big_n >= alpha / z_sq) and (big_n * z_sq <= alpha + z_sq)
        acc_quad += big_n * z_sq
        bound_exact += alpha + z_sq
        acc_beta += big_n * rec.beta
        partial_quad.append(float(acc_quad))
        partial_beta.append(acc_beta)
        rows.append(
            {
                "n": rec.n,
                "beta": rec.beta,
                "z_l2": z_l2,
                "alpha": float(alpha),
                "big_n": big_n,
            }
        )
    holds = holds and acc_quad <= bound_exact
    ns = [rec.n for rec in records]
    fits = {
        "scaled": sqrt_log_fit(ns, [rec.scaled for rec in records]),
        "toi_lb": sqrt_log_fit(ns, [rec.toi_lb for rec in records]),
        "ratio_h": sqrt_log_fit(ns, [rec.ratio_h for rec in records]),
        "ratio_g": sqrt_log_fit(ns, [rec.ratio_g for rec in records]),
    }
    return DivergenceReport(
        series=series,
        rows=rows,
        partial_quad=partial_quad,
        partial_beta=partial_beta,
        quad_bound=float(bound_exact),
        inequalities_hold=bool(holds),
        fits=fits,
        notes=(
            "growth trends are fitted against sqrt(log n); over a desk-scale "
            "ladder this is indistinguishable from log n, so only the sign of "
            "the slope is asserted"
        ),
    )
