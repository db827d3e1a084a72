"""Command line front end for the laboratory.

Subcommands:
  verify    run the operator-integral identity suite, emit a JSON report
  schur     certify a multiplier symbol read from JSON
  pipeline  run the construction ladder, write one record file per scale
  report    fold a directory of records into a divergence report and a CSV

Exit codes follow the usual CI convention: 0 when everything passed, 1 when
a check or a pipeline stage failed, 2 on configuration or usage errors.
The environment variable MOILAB_OUT supplies the default output directory.
All randomness derives from the root seed, so equal configurations produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from glob import glob

import numpy as np

from .circle import divided_diff_1, divided_diff_2, eval_varsigma, make_f, make_g
from .errors import InsufficientLadder, MoilabError
from .integrals import (
    DoubleOI,
    TripleOI,
    derivative_at_zero,
    doi_continuity_check,
    first_order_identity_residual,
    perturbation_identity_residual,
    scale_relative,
    taylor_remainder,
)
from .ioutil import atomic_write_text, read_json, write_json
from .linalg import eig_unitary, exp_i, functional_calculus, schatten_norm
from .pipeline import (
    ALPHA_SERIES,
    PipelineRecord,
    divergence_report,
    run_pipeline,
)
from .schur import Symbol2, Symbol3, bilinear_norm_221, linear_norm_inf

__all__ = ["RunConfig", "run_verify", "run_schur", "run_pipeline_cmd", "run_report", "main"]

_ENV_OUT = "MOILAB_OUT"

DEFAULT_TOLERANCES = {
    "first-order-difference": 1e-8,
    "derivative-order": 0.2,
    "perturbation-identity": 1e-8,
    "taylor-remainder": 1e-8,
    "linear-transfer": 1e-9,
    "doi-continuity": 1e-6,
    "fixed-point-slice": 1e-8,
    "unitary-commutation": 1e-9,
}


class ConfigError(ValueError):
    """Invalid command line or configuration value (exit code 2)."""


@dataclass
class RunConfig:
    """Validated run parameters shared by the subcommands."""

    subcommand: str
    n_ladder: list = field(default_factory=lambda: [8, 16, 32, 64, 128])
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str = "."
    series: str = "inverse-square"
    inject_bug: bool = False
    symbol_path: str = ""

    def validate(self) -> "RunConfig":
        if any(int(n) < 3 for n in self.n_ladder):
            raise ConfigError("ladder entries must be >= 3")
        if any(b <= a for a, b in zip(self.n_ladder, self.n_ladder[1:])):
            raise ConfigError("ladder must be strictly increasing")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must fit in 64 bits")
        for name, value in self.tolerances.items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance name: {name}")
            if not (float(value) > 0.0):
                raise ConfigError(f"tolerance {name} must be positive")
        if self.series not in ALPHA_SERIES:
            raise ConfigError(f"unknown series: {self.series}")
        return self


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, tag)))


def _random_complex(gen: np.random.Generator, n: int) -> np.ndarray:
    return gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))


def _random_unitary(gen: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(_random_complex(gen, n))
    d = np.diag(r)
    return q * (d / np.abs(d))[np.newaxis, :]


def _random_hermitian(gen: np.random.Generator, n: int) -> np.ndarray:
    a = _random_complex(gen, n)
    return 0.5 * (a + a.conj().T)


# ---------------------------------------------------------------------------
# verify suite
# ---------------------------------------------------------------------------


def _check_first_order(seed: int, inject_bug: bool, instances: int = 6, dim: int = 6) -> float:
    fn = make_f()
    gen = _rng(seed, 0xC1)
    worst = 0.0
    for _ in range(instances):
        u0 = _random_unitary(gen, dim)
        u1 = _random_unitary(gen, dim)
        if inject_bug:
            # test-only fault injection: flip the sign of the integral term
            dec0, dec1 = eig_unitary(u0), eig_unitary(u1)
            phi = lambda a, b: divided_diff_1(fn, a, b)
            t = DoubleOI(phi, dec0, dec1).apply(u0 - u1)
            res = float(
                schatten_norm(
                    functional_calculus(fn, u0, dec=dec0)
                    - functional_calculus(fn, u1, dec=dec1)
                    + t,
                    np.inf,
                )
            )
        else:
            res = first_order_identity_residual(fn, u0, u1)
        scale = float(schatten_norm(np.asarray(u0) - np.asarray(u1), np.inf))
        worst = max(worst, scale_relative(res, scale))
    return worst


def _check_derivative_order(seed: int, instances: int = 3, dim: int = 6) -> float:
    fn = make_f()
    gen = _rng(seed, 0xC2)
    steps = (1e-3, 1e-4, 1e-5)
    worst = 0.0
    for _ in range(instances):
        u = _random_unitary(gen, dim)
        z = _random_hermitian(gen, dim)
        z /= float(schatten_norm(z, np.inf))
        dec = eig_unitary(u)
        f_u = functional_calculus(fn, u, dec=dec)
        deriv = derivative_at_zero(fn, u, z)
        errs = []
        for t in steps:
            fd = (functional_calculus(fn, exp_i(t * z) @ u) - f_u) / t
            errs.append(float(schatten_norm(fd - deriv, np.inf)))
        order = (np.log(errs[0]) - np.log(errs[-1])) / (
            np.log(steps[0]) - np.log(steps[-1])
        )
        worst = max(worst, abs(float(order) - 1.0))
    return worst


def _check_perturbation(seed: int, instances: int = 6, dim: int = 6) -> float:
    fn = make_f()
    gen = _rng(seed, 0xC3)
    worst = 0.0
    for _ in range(instances):
        u0 = _random_unitary(gen, dim)
        u1 = _random_unitary(gen, dim)
        u2 = _random_unitary(gen, dim)
        x = _random_complex(gen, dim)
        x /= float(schatten_norm(x, np.inf))
        res = perturbation_identity_residual(fn, u0, u1, u2, x)
        scale = float(schatten_norm(np.asarray(u0) - np.asarray(u1), np.inf))
        worst = max(worst, scale_relative(res, scale))
    return worst


def _check_taylor(seed: int, instances: int = 6, dim: int = 6) -> float:
    fn = make_f()
    gen = _rng(seed, 0xC4)
    worst = 0.0
    for _ in range(instances):
        u = _random_unitary(gen, dim)
        z = _random_hermitian(gen, dim)
        z *= 0.5 / float(schatten_norm(z, np.inf))
        rem, t_toi, t_doi = taylor_remainder(fn, u, z)
        res = float(schatten_norm(rem - t_toi - t_doi, np.inf))
        worst = max(worst, scale_relative(res, float(schatten_norm(rem, np.inf))))
    return worst


def _check_linear_transfer(seed: int, instances: int = 3, dim: int = 5) -> float:
    """The multiplier certificate witness achieves the same value through the
    operator integral: the two norms are one computation in two bases."""
    fn = make_f()
    gen = _rng(seed, 0xC5)
    phi = lambda a, b: divided_diff_1(fn, a, b)
    worst = 0.0
    for k in range(instances):
        u0 = _random_unitary(gen, dim)
        u1 = _random_unitary(gen, dim)
        dec0, dec1 = eig_unitary(u0), eig_unitary(u1)
        m = np.asarray(
            [[phi(a, b) for b in dec1.eigenvalues] for a in dec0.eigenvalues],
            dtype=np.complex128,
        )
        cert = linear_norm_inf(Symbol2(m), n_starts=8, seed=seed + k)
        xc = cert.witness["x"]
        x = dec0.basis @ xc @ dec1.basis.conj().T
        achieved = float(schatten_norm(DoubleOI(phi, dec0, dec1).apply(x), np.inf))
        worst = max(worst, abs(achieved - cert.lower) / (1.0 + cert.lower))
    return worst


def _check_doi_continuity(seed: int, dim: int = 5) -> float:
    fn = make_f()
    gen = _rng(seed, 0xC6)
    phi = lambda a, b: divided_diff_1(fn, a, b)
    u0 = _random_unitary(gen, dim)
    u1 = _random_unitary(gen, dim)
    z = _random_hermitian(gen, dim)
    z /= float(schatten_norm(z, np.inf))
    perturbed = [exp_i(z / m) @ u0 for m in (1e2, 1e4, 1e6)]
    tests = []
    for _ in range(3):
        x = _random_complex(gen, dim)
        tests.append(x / float(schatten_norm(x, np.inf)))
    devs = doi_continuity_check(phi, u0, u1, perturbed, tests)
    if np.any(np.diff(devs) > 0):
        return float("inf")
    return float(devs[-1])


def _check_fixed_point_slice(grid: int = 12) -> float:
    """At a middle argument pinned to 1 the second-order symbol collapses to
    the first divided difference of g."""
    gfun = make_g()
    theta = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    pts = np.exp(1j * theta)
    worst = 0.0
    one = np.complex128(1.0)
    for z0 in pts:
        for z2 in list(pts) + [z0, one]:
            lhs = eval_varsigma(z0, one, z2)
            rhs = divided_diff_1(gfun, z0, z2)
            worst = max(worst, abs(complex(lhs) - complex(rhs)))
        lhs = eval_varsigma(one, one, z0)
        rhs = divided_diff_1(gfun, one, z0)
        worst = max(worst, abs(complex(lhs) - complex(rhs)))
    return worst


def _check_unitary_commutation(seed: int, instances: int = 3, dim: int = 6) -> float:
    ffun = make_f()
    gen = _rng(seed, 0xC7)
    f2 = lambda a, b, c: divided_diff_2(ffun, a, b, c)
    worst = 0.0
    for _ in range(instances):
        u = _random_unitary(gen, dim)
        w = _random_hermitian(gen, dim)
        w /= float(schatten_norm(w, 2))
        dec = eig_unitary(u)
        lhs = TripleOI(f2, dec, dec, dec).apply(w @ u, w @ u)
        core = TripleOI(eval_varsigma, dec, dec, dec).apply(w, w)
        res = float(schatten_norm(lhs - core @ u, 1))
        worst = max(worst, res / float(schatten_norm(core, 1)))
    return worst


def verify_suite(seed: int, inject_bug: bool = False) -> list:
    """Run every identity check once and collect (name, residual) pairs."""
    return [
        ("first-order-difference", _check_first_order(seed, inject_bug)),
        ("derivative-order", _check_derivative_order(seed)),
        ("perturbation-identity", _check_perturbation(seed)),
        ("taylor-remainder", _check_taylor(seed)),
        ("linear-transfer", _check_linear_transfer(seed)),
        ("doi-continuity", _check_doi_continuity(seed)),
        ("fixed-point-slice", _check_fixed_point_slice()),
        ("unitary-commutation", _check_unitary_commutation(seed)),
    ]


def run_verify(config: RunConfig) -> int:
    suite = verify_suite(config.seed, inject_bug=config.inject_bug)
    entries = []
    all_pass = True
    for name, residual in suite:
        threshold = float(config.tolerances[name])
        ok = bool(residual < threshold)
        all_pass &= ok
        entries.append(
            {
                "name": name,
                "residual": repr(float(residual)),
                "threshold": repr(threshold),
                "pass": ok,
            }
        )
        print(f"{'PASS' if ok else 'FAIL'} {name}: residual={residual:.3e} threshold={threshold:.1e}")
    report = {"seed": int(config.seed), "suite": entries, "all_pass": bool(all_pass)}
    path = os.path.join(config.out, "verify_report.json")
    write_json(path, report)
    print(f"verify: {sum(e['pass'] for e in entries)}/{len(entries)} checks passed -> {path}")
    return 0 if all_pass else 1


# ---------------------------------------------------------------------------
# schur / pipeline / report
# ---------------------------------------------------------------------------


def run_schur(config: RunConfig) -> int:
    try:
        payload = read_json(config.symbol_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read symbol file: {exc}") from exc
    kind = payload.get("kind") if isinstance(payload, dict) else None
    if kind == "symbol2":
        cert = linear_norm_inf(Symbol2.from_json_dict(payload), seed=config.seed)
    elif kind == "symbol3":
        cert = bilinear_norm_221(Symbol3.from_json_dict(payload), seed=config.seed)
    else:
        raise ConfigError("symbol file must declare kind symbol2 or symbol3")
    path = os.path.join(config.out, "certificate.json")
    write_json(path, cert.to_json_dict())
    print(
        f"{kind}: lower={cert.lower:.12g} upper={cert.upper:.12g} "
        f"method={cert.method} -> {path}"
    )
    return 0


_STAGE_OF_ERROR = {
    "WitnessSearchFailed": "find_W_witness",
    "NoAdmissibleT": "select_t_and_B",
    "DegenerateCase": "build_HK",
    "NoStabilization": "scale_and_select_m",
    "NoConvergence": "build_adps_pair",
}


def record_filename(n: int) -> str:
    return f"record_n{int(n):04d}.json"


def run_pipeline_cmd(config: RunConfig) -> int:
    os.makedirs(config.out, exist_ok=True)
    for n in config.n_ladder:
        started = time.monotonic()
        try:
            _, rec = run_pipeline(int(n), seed=config.seed)
        except MoilabError as exc:
            stage = _STAGE_OF_ERROR.get(type(exc).__name__, "pipeline")
            print(f"pipeline failed at n={n} in stage {stage}: {exc}", file=sys.stderr)
            return 1
        path = os.path.join(config.out, record_filename(n))
        write_json(path, rec.to_json_dict())
        elapsed = time.monotonic() - started
        print(
            f"n={n}: t={rec.t:.6g} ratio_h={rec.ratio_h:.6f} ratio_g={rec.ratio_g:.6f} "
            f"toi_lb={rec.toi_lb:.6f} m={rec.m} scaled={rec.scaled:.6f} "
            f"({elapsed:.1f}s) -> {path}"
        )
    return 0


def load_records(directory: str) -> list:
    paths = sorted(glob(os.path.join(directory, "record_n*.json")))
    records = []
    for path in paths:
        try:
            records.append(PipelineRecord.from_json_dict(read_json(path)))
        except (KeyError, ValueError, TypeError) as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
    return records


def run_report(config: RunConfig) -> int:
    if not os.path.isdir(config.out):
        raise ConfigError(f"record directory does not exist: {config.out}")
    records = load_records(config.out)
    try:
        report = divergence_report(records, series=config.series)
    except InsufficientLadder as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    json_path = os.path.join(config.out, "divergence_report.json")
    write_json(json_path, report.to_json_dict())
    records = sorted(records, key=lambda rec: rec.n)
    lines = ["n,ratio_h,ratio_g,toi_lb,scaled"]
    for rec in records:
        lines.append(
            ",".join(
                [str(rec.n)]
                + [
                    repr(float(v))
                    for v in (rec.ratio_h, rec.ratio_g, rec.toi_lb, rec.scaled)
                ]
            )
        )
    csv_path = os.path.join(config.out, "divergence_report.csv")
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    verdict = "hold" if report.inequalities_hold else "VIOLATED"
    print(f"repetition-count inequalities (N_n >= alpha_n/|Z|^2, N_n|Z|^2 <= alpha_n + |Z|^2): {verdict}")
    print(
        f"quadratic partial sum {report.partial_quad[-1]:.6g} "
        f"<= bound {report.quad_bound:.6g}: {verdict}"
    )
    for name, (a, b) in report.fits.items():
        print(f"fit {name}: intercept={a:.6f} slope={b:.6f} (vs sqrt(log n))")
    print(f"report -> {json_path}, {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parse_ladder(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad ladder: {text}") from exc


def _parse_tols(pairs) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected NAME=VALUE, got: {pair}")
        try:
            tols[name.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance value: {pair}") from exc
    return tols


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moilab",
        description="operator-integral laboratory: identity checks, multiplier "
        "certificates, the construction ladder, and divergence bookkeeping",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed (64-bit)")
    common.add_argument(
        "--out",
        default=os.environ.get(_ENV_OUT, "."),
        help=f"output directory (default: ${_ENV_OUT} or the working directory)",
    )

    p_verify = sub.add_parser("verify", parents=[common], help="run the identity suite")
    p_verify.add_argument(
        "--tol",
        action="append",
        metavar="NAME=VALUE",
        help="override a residual threshold (repeatable)",
    )
    p_verify.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)

    p_schur = sub.add_parser("schur", parents=[common], help="certify a symbol JSON")
    p_schur.add_argument("symbol", help="path to a symbol2/symbol3 JSON file")

    p_pipe = sub.add_parser("pipeline", parents=[common], help="run the ladder")
    p_pipe.add_argument(
        "--n-ladder",
        default="8,16,32,64,128",
        help="comma-separated strictly increasing scales, entries >= 3",
    )

    p_rep = sub.add_parser("report", parents=[common], help="summarize records")
    p_rep.add_argument(
        "--alpha-series",
        choices=list(ALPHA_SERIES),
        default="inverse-square",
        help="weight series for the repetition counts",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(subcommand=args.subcommand, seed=args.seed, out=args.out)
    if args.subcommand == "verify":
        config.tolerances = _parse_tols(args.tol)
        config.inject_bug = bool(args.inject_bug)
    elif args.subcommand == "schur":
        config.symbol_path = args.symbol
    elif args.subcommand == "pipeline":
        config.n_ladder = _parse_ladder(args.n_ladder)
    elif args.subcommand == "report":
        config.series = args.alpha_series
    return config.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        if config.subcommand == "verify":
            return run_verify(config)
        if config.subcommand == "schur":
            return run_schur(config)
        if config.subcommand == "pipeline":
            return run_pipeline_cmd(config)
        return run_report(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
