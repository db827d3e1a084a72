"""Tests for the end-to-end construction chain.

Most checks run at small scale; the full default ladder is exercised by the
acceptance suite.  A module-level cache keeps each (n, seed) pipeline run
single so the slower stages are not repeated across tests.
"""

import json
import math

import numpy as np
import pytest

from moilab import pipeline as mp
from moilab.circle import (
    A_CORE,
    divided_diff_2,
    eval_varsigma,
    make_f,
    make_g,
    make_h,
)
from moilab.errors import (
    DegenerateCase,
    DimMismatch,
    InsufficientLadder,
    WitnessSearchFailed,
)
from moilab.integrals import TripleOI
from moilab.linalg import (
    commutator,
    eig_hermitian,
    eig_unitary,
    exp_i,
    functional_calculus,
    schatten_norm,
)
from moilab.schur import Symbol3, bilinear_norm_221, contraction_ascent, linear_norm_inf

from helpers import random_unitary, rng

_RUNS: dict = {}


def pipeline_run(n: int, seed: int = 0):
    key = (n, seed)
    if key not in _RUNS:
        _RUNS[key] = mp.run_pipeline(n, seed=seed)
    return _RUNS[key]


def test_grid_diagonal_shape_and_range():
    lam = mp.grid_diagonal(5)
    assert lam.shape == (11,)
    assert lam[5] == 0.0
    assert np.all(np.diff(lam) > 0)
    assert math.isclose(lam[-1], A_CORE)
    assert np.allclose(lam, -lam[::-1])


def test_adps_pair_invariants():
    pair = mp.build_adps_pair(6, seed=0)
    lam = np.diag(pair.d).real
    assert 0.0 in lam
    assert np.max(np.abs(lam)) <= A_CORE + 1e-15
    # R is Hermitian and the plain commutator is normalized to pi
    assert np.max(np.abs(pair.r - pair.r.conj().T)) < 1e-12
    assert abs(pair.comm_norm - math.pi) < 1e-9
    assert abs(schatten_norm(commutator(pair.r, pair.d), np.inf) - math.pi) < 1e-9
    # the h-commutator beats the ratio gate
    assert pair.h_comm_norm / pair.comm_norm > 1.5


def test_adps_ratio_grows_with_n():
    ratios = []
    for n in (8, 32, 128):
        pair = mp.build_adps_pair(n, seed=0)
        ratios.append(pair.h_comm_norm / pair.comm_norm)
    assert ratios[0] < ratios[1] < ratios[2]
    _, slope = mp.sqrt_log_fit([8, 32, 128], ratios)
    assert slope > 0


def test_adps_commutation_transfer_identity():
    # [R, h(D)] equals the divided-difference symbol acting entrywise on [R, D]
    pair = mp.build_adps_pair(5, seed=1)
    lam = np.diag(pair.d).real
    hfun = make_h()
    h_of_d = np.diag(hfun.value(lam)).astype(np.complex128)
    phi = mp._h_divided_diff(lam[:, None], lam[None, :])
    lhs = commutator(pair.r, h_of_d)
    rhs = phi * commutator(pair.r, pair.d)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_adps_search_failure_when_crippled():
    with pytest.raises(WitnessSearchFailed):
        mp.build_adps_pair(3, seed=0, n_starts=1, iters=0)


def test_select_t_conditions_hold():
    pair = mp.build_adps_pair(6, seed=0)
    t, b = mp.select_t_and_B(pair)
    assert 0 < t <= 1.0
    assert math.log2(t) == round(math.log2(t))
    b_norm = schatten_norm(b, np.inf)
    assert 0.5 * t * pair.comm_norm <= b_norm <= 2.0 * math.pi * t + 1e-12
    hfun = make_h()
    lam = np.diag(pair.d).real
    h_of_d = np.diag(hfun.value(lam)).astype(np.complex128)
    dec = eig_hermitian(pair.d + b)
    h_of_db = dec.reconstruct(hfun.value(dec.eigenvalues).astype(np.complex128))
    assert schatten_norm(h_of_db - h_of_d, np.inf) >= 0.5 * pair.h_comm_norm * t - 1e-12


def test_select_t_preserves_spectrum():
    pair = mp.build_adps_pair(5, seed=2)
    _, b = mp.select_t_and_B(pair)
    ev_d = np.sort(np.linalg.eigvalsh(pair.d))
    ev_db = np.sort(np.linalg.eigvalsh(pair.d + b))
    assert np.max(np.abs(ev_d - ev_db)) < 1e-9


def test_build_hk_properties():
    pair = mp.build_adps_pair(5, seed=0)
    t, b = mp.select_t_and_B(pair)
    h, k = mp.build_HK(pair.d, b)
    for u in (h, k):
        assert np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) < 1e-12
    # the exponential is 1-Lipschitz on Hermitian perturbations
    assert schatten_norm(k - h, np.inf) <= schatten_norm(b, np.inf) + 1e-10
    # g on the unitary side agrees with h on the Hermitian side
    gfun = make_g()
    hfun = make_h()
    lam = np.diag(pair.d).real
    gh = functional_calculus(gfun, h)
    assert np.max(np.abs(gh - np.diag(hfun.value(lam)))) < 1e-10


def test_build_hk_rejects_degenerate_and_mismatched():
    d = np.diag(mp.grid_diagonal(4)).astype(np.complex128)
    with pytest.raises(DegenerateCase):
        mp.build_HK(d, np.zeros_like(d))
    with pytest.raises(DimMismatch):
        mp.build_HK(d, np.zeros((3, 3)))


def test_build_blocks_dimensions_and_multiplicity():
    pair = mp.build_adps_pair(4, seed=0)
    t, b = mp.select_t_and_B(pair)
    h, k = mp.build_HK(pair.d, b)
    u = mp.build_blocks(h, k)
    assert u.shape == (4 * (2 * 4 + 1), 4 * (2 * 4 + 1))
    # every eigenvalue class of U has multiplicity 4: two copies each of K, H
    angles, groups = mp._cluster_classes(np.linalg.eigvals(u))
    assert len(angles) == 2 * 4 + 1
    assert all(len(g) == 4 for g in groups)
    with pytest.raises(DimMismatch):
        mp.build_blocks(h, np.eye(3))


def test_cluster_classes_merges_jitter_and_wraps():
    base = np.exp(1j * np.array([0.3, 0.3 + 1e-13, -0.4, math.pi - 1e-12, -math.pi + 1e-12]))
    angles, groups = mp._cluster_classes(base)
    assert len(groups) == 3
    sizes = sorted(len(g) for g in groups)
    assert sizes == [1, 2, 2]


def test_grid_levels_detection():
    n = 16
    lam = mp.grid_diagonal(n)
    free = lam[lam != 0.0]
    assert mp._grid_levels(free) == [8, 16]
    assert mp._grid_levels(mp.grid_diagonal(10)[mp.grid_diagonal(10) != 0.0]) == [10]
    assert mp._grid_levels(np.array([0.1, 0.2, 0.35])) is None


def test_find_w_witness_contract():
    _, rec = pipeline_run(6)
    w = rec.w
    assert np.max(np.abs(w - w.conj().T)) < 1e-12
    assert abs(schatten_norm(w, 2) - 1.0) < 1e-12
    dec = eig_unitary(rec.u)
    direct = schatten_norm(TripleOI(eval_varsigma, dec, dec, dec).apply(w, w), 1)
    assert abs(direct - rec.toi_lb) < 1e-9 * (1.0 + direct)
    # the recorded value clears half the best slice lower bound
    angles, _ = mp._cluster_classes(dec.eigenvalues)
    z = np.exp(1j * angles)
    m_slice = np.asarray(eval_varsigma(z[:, None], np.complex128(1.0), z[None, :]))
    slice_lb, _ = contraction_ascent(m_slice, n_starts=6, seed=17, iters=80)
    assert rec.toi_lb >= 0.5 * slice_lb - 1e-9


def test_find_w_witness_failure_when_crippled():
    gen = rng(11)
    # a generic unitary has no eigenvalue pinned at 1
    with pytest.raises(WitnessSearchFailed):
        mp.find_W_witness(random_unitary(gen, 6), seed=0)


def test_commutation_identity_on_record():
    # T_{f2}(WU, WU) = T_varsigma(W, W)·U at the recorded witness
    _, rec = pipeline_run(6)
    dec = eig_unitary(rec.u)
    ffun = make_f()

    def f2(z0, z1, z2):
        return divided_diff_2(ffun, z0, z1, z2)

    lhs = TripleOI(f2, dec, dec, dec).apply(rec.w @ rec.u, rec.w @ rec.u)
    rhs = TripleOI(eval_varsigma, dec, dec, dec).apply(rec.w, rec.w) @ rec.u
    scale = max(schatten_norm(lhs, np.inf), schatten_norm(rhs, np.inf))
    assert schatten_norm(lhs - rhs, np.inf) < 1e-9 * (1.0 + scale)


def test_ratio_slice_bilinear_bracket_small_n():
    # g-difference ratio <= slice-1 norm bracket <= bilinear (2,2,1) upper bound
    _, rec = pipeline_run(4)
    dec = eig_unitary(rec.u)
    angles, _ = mp._cluster_classes(dec.eigenvalues)
    z = np.exp(1j * angles)
    m_slice = np.asarray(eval_varsigma(z[:, None], np.complex128(1.0), z[None, :]))
    cert = linear_norm_inf(__import__("moilab.schur", fromlist=["Symbol2"]).Symbol2(m_slice))
    assert rec.ratio_g <= cert.upper + 1e-6
    cube = np.asarray(
        eval_varsigma(z[:, None, None], z[None, :, None], z[None, None, :])
    )
    cert3 = bilinear_norm_221(Symbol3(cube))
    assert cert.lower <= cert3.upper + 1e-6
    assert cert3.lower >= cert.lower - 1e-6


def test_scale_and_select_m_contract():
    _, rec = pipeline_run(6)
    assert rec.m >= rec.n
    assert rec.m % rec.n == 0
    j = rec.m // rec.n
    assert j & (j - 1) == 0  # power of two multiplier
    assert abs(schatten_norm(rec.z, 2) - 1.0 / rec.m) < 1e-12
    # the scaled remainder approximates the triple-integral value from below
    assert rec.scaled <= rec.toi_lb + 0.05 * rec.toi_lb
    assert rec.scaled >= 0.8 * rec.toi_lb


def test_exponential_expansion_orders():
    # m(e^{iW/m} - 1) -> iW and m^2(e^{iW/m} - 1 - iW/m) -> -W^2/2
    _, rec = pipeline_run(6)
    w = rec.w
    first, second = [], []
    for m in (64, 256, 1024):
        e = exp_i(w / m)
        eye = np.eye(w.shape[0])
        first.append(schatten_norm(m * (e - eye) - 1j * w, np.inf))
        second.append(
            schatten_norm(m * m * (e - eye - 1j * w / m) + 0.5 * (w @ w), np.inf)
        )
    assert first[0] > first[1] > first[2]
    assert second[0] > second[1] > second[2]
    assert first[-1] < 1e-3 and second[-1] < 1e-3


def test_record_json_roundtrip_and_replay():
    _, rec = pipeline_run(6)
    text = json.dumps(rec.to_json_dict(), sort_keys=True)
    back = mp.PipelineRecord.from_json_dict(json.loads(text))
    assert back.n == rec.n and back.m == rec.m
    assert np.array_equal(back.u, rec.u)
    assert np.array_equal(back.w, rec.w)
    # replay the recorded norms from the stored matrices
    gfun = make_g()
    gap = schatten_norm(back.k - back.h, np.inf)
    ratio_g = schatten_norm(
        functional_calculus(gfun, back.k) - functional_calculus(gfun, back.h), np.inf
    ) / gap
    assert abs(ratio_g - back.ratio_g) < 1e-9
    dec = eig_unitary(back.u)
    val = schatten_norm(TripleOI(eval_varsigma, dec, dec, dec).apply(back.w, back.w), 1)
    assert abs(val - back.toi_lb) < 1e-9 * (1.0 + val)


def test_pipeline_determinism_byte_identical():
    _, rec1 = mp.run_pipeline(6, seed=0)
    _, rec2 = mp.run_pipeline(6, seed=0)
    t1 = json.dumps(rec1.to_json_dict(), sort_keys=True)
    t2 = json.dumps(rec2.to_json_dict(), sort_keys=True)
    assert t1 == t2


def test_witness_value_nondecreasing_under_refinement():
    _, r8 = pipeline_run(8)
    _, r16 = pipeline_run(16)
    assert r16.toi_lb >= r8.toi_lb - 1e-9
    assert r16.scaled >= r8.scaled - 1e-9


def test_divergence_report_bookkeeping():
    records = [pipeline_run(n)[1] for n in (6, 8, 12)]
    rep = mp.divergence_report(records, series="inverse-square")
    assert rep.inequalities_hold
    assert len(rep.rows) == 3
    # partial sums strictly increase and the quadratic side stays bounded
    assert all(b > a for a, b in zip(rep.partial_beta, rep.partial_beta[1:]))
    assert all(b > a for a, b in zip(rep.partial_quad, rep.partial_quad[1:]))
    assert rep.partial_quad[-1] <= rep.quad_bound
    for row in rep.rows:
        frac_alpha = mp._alpha_of("inverse-square", row["n"])
        assert row["big_n"] >= float(frac_alpha) / row["z_l2"] ** 2 - 1e-9
    assert set(rep.fits) == {"scaled", "toi_lb", "ratio_h", "ratio_g"}
    assert rep.notes


def test_divergence_report_both_series_and_errors():
    records = [pipeline_run(n)[1] for n in (6, 8, 12)]
    rep = mp.divergence_report(records, series="inverse-nlogn")
    assert rep.inequalities_hold
    with pytest.raises(InsufficientLadder):
        mp.divergence_report(records[:2])
    with pytest.raises(ValueError):
        mp.divergence_report(records, series="harmonic")


def test_divergence_report_json_shape():
    records = [pipeline_run(n)[1] for n in (6, 8, 12)]
    rep = mp.divergence_report(records)
    d = rep.to_json_dict()
    text = json.dumps(d, sort_keys=True)
    back = json.loads(text)
    assert [row["n"] for row in back["rows"]] == [6, 8, 12]
    assert float(back["rows"][0]["beta"]) == pytest.approx(records[0].beta)
    assert isinstance(back["inequalities_hold"], bool)


def test_sqrt_log_fit_recovers_planted_slope():
    ns = np.array([8, 16, 32, 64, 128])
    vals = 0.7 + 0.31 * np.sqrt(np.log(ns))
    a, b = mp.sqrt_log_fit(ns, vals)
    assert abs(a - 0.7) < 1e-12
    assert abs(b - 0.31) < 1e-12
