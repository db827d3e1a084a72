"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here.  The five-rung pipeline ladder is computed once
per session and shared by the growth, commutation, bookkeeping, and
determinism criteria; the determinism criterion reruns it from scratch.
"""

import time
from fractions import Fraction

import numpy as np

from moilab import pipeline as mp
from moilab.circle import divided_diff_1, divided_diff_2, eval_varsigma, make_f, make_g
from moilab.integrals import (
    TripleOI,
    derivative_at_zero,
    first_order_identity_residual,
    perturbation_identity_residual,
    scale_relative,
    taylor_remainder,
)
from moilab.ioutil import dump_json_text
from moilab.linalg import eig_unitary, exp_i, functional_calculus, schatten_norm
from moilab.schur import Symbol2, Symbol3, bilinear_norm_221, linear_norm_inf

from helpers import random_complex, random_hermitian, random_unitary, rng

LADDER = (8, 16, 32, 64, 128)
_LADDER_CACHE = {}


def ladder_records():
    """All five pipeline runs at seed 0, computed once, with wall time."""
    if not _LADDER_CACHE:
        started = time.monotonic()
        records = {}
        for n in LADDER:
            _, records[n] = mp.run_pipeline(n, seed=0)
        _LADDER_CACHE["records"] = records
        _LADDER_CACHE["elapsed"] = time.monotonic() - started
    return _LADDER_CACHE["records"], _LADDER_CACHE["elapsed"]


def _verdict(num, label, ok, detail=""):
    suffix = f" ({detail})" if detail else ""
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'}: {label}{suffix}")
    return ok


def test_criterion_01_identity_suite():
    fn = make_f()
    gen = rng(2026_01)
    dims = [32] + [int(d) for d in gen.integers(4, 33, size=49)]
    started = time.monotonic()
    worst = {"first-order": 0.0, "perturbation": 0.0, "taylor": 0.0}
    for d in dims:
        u0, u1, u2 = (random_unitary(gen, d) for _ in range(3))
        res = first_order_identity_residual(fn, u0, u1)
        scale = float(schatten_norm(u0 - u1, np.inf))
        worst["first-order"] = max(worst["first-order"], scale_relative(res, scale))

        x = random_complex(gen, d)
        x /= float(schatten_norm(x, np.inf))
        res = perturbation_identity_residual(fn, u0, u1, u2, x)
        worst["perturbation"] = max(worst["perturbation"], scale_relative(res, scale))

        z = random_hermitian(gen, d)
        z *= 0.5 / float(schatten_norm(z, np.inf))
        rem, t_toi, t_doi = taylor_remainder(fn, u0, z)
        res = float(schatten_norm(rem - t_toi - t_doi, np.inf))
        worst["taylor"] = max(
            worst["taylor"], scale_relative(res, float(schatten_norm(rem, np.inf)))
        )
    elapsed = time.monotonic() - started
    ok = all(v < 1e-8 for v in worst.values()) and elapsed < 120.0
    detail = (
        f"residuals {worst['first-order']:.1e}/{worst['perturbation']:.1e}/"
        f"{worst['taylor']:.1e}, {elapsed:.0f}s"
    )
    assert _verdict(1, "identity suite, 50 instances per identity, dims to 32", ok, detail)


def test_criterion_02_derivative_order():
    fn = make_f()
    gen = rng(2026_02)
    steps = (1e-3, 1e-4, 1e-5)
    orders = []
    for _ in range(20):
        u = random_unitary(gen, 8)
        z = random_hermitian(gen, 8)
        z /= float(schatten_norm(z, np.inf))
        dec = eig_unitary(u)
        f_u = functional_calculus(fn, u, dec=dec)
        deriv = derivative_at_zero(fn, u, z)
        errs = [
            float(schatten_norm((functional_calculus(fn, exp_i(t * z) @ u) - f_u) / t - deriv, np.inf))
            for t in steps
        ]
        orders.append(
            float((np.log(errs[0]) - np.log(errs[-1])) / (np.log(steps[0]) - np.log(steps[-1])))
        )
    ok = all(0.8 <= o <= 1.2 for o in orders)
    detail = f"orders in [{min(orders):.3f}, {max(orders):.3f}]"
    assert _verdict(2, "finite-difference order of the derivative formula", ok, detail)


def test_criterion_03_fixed_middle_argument():
    gfun = make_g()
    theta = np.linspace(-np.pi, np.pi, 30, endpoint=False)
    assert 0.0 in theta  # the grid contains z = 1 exactly
    pts = np.exp(1j * theta)
    one = np.complex128(1.0)
    worst = 0.0
    for z0 in pts:
        for z2 in pts:
            err = abs(complex(eval_varsigma(z0, one, z2)) - complex(divided_diff_1(gfun, z0, z2)))
            worst = max(worst, err)
    ok = worst < 1e-8
    assert _verdict(3, "symbol with middle argument pinned equals g first difference", ok, f"max err {worst:.1e}")


def test_criterion_04_bilinear_versus_slice_bounds():
    gen = rng(2026_04)
    worst_excess = -np.inf
    for k in range(50):
        n = int(gen.integers(2, 5))
        m = gen.standard_normal((n, n, n)) + 1j * gen.standard_normal((n, n, n))
        sym = Symbol3(m)
        cert = bilinear_norm_221(sym, n_starts=8, seed=k)
        slice_upper = max(
            linear_norm_inf(sym.slice(j), n_starts=6, seed=1000 + k).upper
            for j in range(n)
        )
        worst_excess = max(worst_excess, cert.lower - slice_upper)
    attained = []
    for k in range(10):
        n = 3 + (k % 2)
        vecs = []
        for _ in range(3):
            v = gen.standard_normal(n) + 1j * gen.standard_normal(n)
            vecs.append(v / np.max(np.abs(v)))
        a, b, c = vecs
        sym = Symbol3(a[:, None, None] * b[None, :, None] * c[None, None, :])
        attained.append(bilinear_norm_221(sym, n_starts=8, seed=500 + k).lower)
    ok = worst_excess <= 1e-6 and min(attained) >= 0.99
    detail = f"max lower-upper excess {worst_excess:.2e}, separable attainment >= {min(attained):.4f}"
    assert _verdict(4, "bilinear ascent within slice-supremum bound; separable attained", ok, detail)


def test_criterion_05_triangular_truncation_growth():
    sizes = (4, 8, 16, 32)
    lowers, gaps = [], []
    for n in sizes:
        cert = linear_norm_inf(Symbol2(np.triu(np.ones((n, n)), 1)), seed=3)
        lowers.append(cert.lower)
        gaps.append((cert.upper - cert.lower) / cert.upper)
    increasing = all(b > a for a, b in zip(lowers, lowers[1:]))
    slope = float(np.polyfit(np.log(sizes), lowers, 1)[0])
    ok = increasing and slope > 0 and max(gaps) < 0.1
    detail = f"values {['%.4f' % v for v in lowers]}, ln-slope {slope:.4f}, max gap {max(gaps):.2e}"
    assert _verdict(5, "triangular truncation norms grow like ln n with tight certificates", ok, detail)


def _inversions(values):
    return sum(1 for a, b in zip(values, values[1:]) if b < a)


def test_criterion_06_pipeline_growth():
    records, elapsed = ladder_records()
    ok = elapsed < 1800.0
    details = [f"{elapsed:.0f}s"]
    root_log = np.sqrt(np.log(np.asarray(LADDER, dtype=np.float64)))
    design = np.stack([np.ones_like(root_log), root_log], axis=1)
    for name in ("ratio_h", "ratio_g", "toi_lb", "scaled"):
        values = [getattr(records[n], name) for n in LADDER]
        inv = _inversions(values)
        coef, *_ = np.linalg.lstsq(design, np.asarray(values), rcond=None)
        a_fit, b_fit = mp.sqrt_log_fit(LADDER, values)
        assert abs(a_fit - coef[0]) < 1e-9 and abs(b_fit - coef[1]) < 1e-9
        ok = ok and inv <= 1 and coef[1] > 0
        details.append(f"{name}: b={coef[1]:.4f}, inversions={inv}")
    assert _verdict(6, "ladder growth trends with positive sqrt-log slope", ok, "; ".join(details))


def test_criterion_07_commutation_identity():
    records, _ = ladder_records()
    ffun = make_f()
    f2 = lambda a, b, c: divided_diff_2(ffun, a, b, c)
    worst = 0.0
    for n in LADDER:
        rec = records[n]
        dec = eig_unitary(rec.u)
        wu = rec.w @ rec.u
        lhs = TripleOI(f2, dec, dec, dec).apply(wu, wu)
        core = TripleOI(eval_varsigma, dec, dec, dec).apply(rec.w, rec.w)
        rel = float(schatten_norm(lhs - core @ rec.u, 1) / schatten_norm(core, 1))
        worst = max(worst, rel)
    ok = worst < 1e-9
    assert _verdict(7, "unitary commutation identity on every record", ok, f"max rel {worst:.1e}")


def test_criterion_08_divergence_bookkeeping():
    records, _ = ladder_records()
    report = mp.divergence_report(list(records.values()), series="inverse-square")
    ok = bool(report.inequalities_hold)
    total = Fraction(0)
    bound = Fraction(0)
    for row, n in zip(report.rows, LADDER):
        z_sq = Fraction(float(schatten_norm(records[n].z, 2))) ** 2
        alpha = Fraction(1, n * n)
        big_n = row["big_n"]
        ok = ok and big_n >= alpha / z_sq and big_n * z_sq <= alpha + z_sq
        total += big_n * z_sq
        bound += alpha + z_sq
    ok = ok and total < bound
    betas = report.partial_beta
    ok = ok and all(b > a for a, b in zip(betas, betas[1:]))
    detail = f"quad {float(total):.6f} < bound {float(bound):.6f}, beta partials {len(betas)} strictly up"
    assert _verdict(8, "repetition-count inequalities exact; partial sums ordered", ok, detail)


def test_criterion_09_determinism():
    records, _ = ladder_records()
    ok = True
    for n in LADDER:
        _, again = mp.run_pipeline(n, seed=0)
        ok = ok and dump_json_text(again.to_json_dict()) == dump_json_text(records[n].to_json_dict())
    assert _verdict(9, "byte-identical records for identical seeds", ok)


def test_criterion_10_exponential_lipschitz():
    gen = rng(2026_10)
    worst = -np.inf
    for _ in range(200):
        d = int(gen.integers(2, 17))
        a = random_hermitian(gen, d)
        b = random_hermitian(gen, d) * float(gen.uniform(0.01, 2.0))
        lhs = float(schatten_norm(exp_i(a + b) - exp_i(a), np.inf))
        worst = max(worst, lhs - float(schatten_norm(b, np.inf)))
    ok = worst <= 1e-10
    assert _verdict(10, "exponential perturbation bounded by the generator norm", ok, f"max excess {worst:.1e}")
