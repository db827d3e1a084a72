"""Scalar functions on the unit circle and their divided differences.

The central objects are a C¹ even 2π-periodic function h on the line (closed
form |x|·(log|log(|x|/e)|)^{-1/2} on [-1/e, 1/e], quintic bridge outside), the
circle functions g(e^{iθ}) = h(θ) and f(z) = (z-1)·g(z), the three-variable
symbol ς(z0,z1,z2) = z1·f^{[2]}(z0,z1,z2), and numerically stable first and
second divided differences for arbitrary C¹/C² circle functions.

All evaluators are vectorized over numpy arrays; scalars come back as scalars.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NotC2, NotOnCircle, SecondDerivativeSingular
from .ioutil import atomic_write_text

__all__ = [
    "A_CORE",
    "BRIDGE_VALUE_AT_PI",
    "DELTA_COINCIDENT",
    "DELTA_DERIVATIVE",
    "CircleFunction",
    "RealLineFunction",
    "eval_h",
    "eval_h_derivatives",
    "make_h",
    "make_g",
    "make_f",
    "divided_diff_1",
    "divided_diff_2",
    "eval_varsigma",
    "poly_circle_function",
    "export_function_csv",
]

A_CORE = math.exp(-1.0)          # closed form holds on [-A_CORE, A_CORE]
BRIDGE_VALUE_AT_PI = 1.0         # free target value of the C2 bridge at pi
DELTA_COINCIDENT = 1e-6          # above: raw quotients
DELTA_DERIVATIVE = 1e-9          # below: pure derivative branch
_CIRCLE_TOL = 1e-12
_TWO_PI = 2.0 * math.pi


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    """Reduce to [-pi, pi] (endpoints may map to either sign; h is even)."""
    return x - _TWO_PI * np.round(x / _TWO_PI)


def _core_h(y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form h, h', h'' for y in (0, 1/e]."""
    u = 1.0 - np.log(y)          # = |log(y/e)| since y <= 1/e < e
    ell = np.log(u)
    inv_sqrt = ell ** -0.5
    val = y * inv_sqrt
    d1 = inv_sqrt + 0.5 * ell ** -1.5 / u
    d2 = ell ** -1.5 / (2.0 * y * u) * (1.0 + 1.0 / u) + 0.75 * ell ** -2.5 / (y * u * u)
    return val, d1, d2


def _bridge_coefficients() -> np.ndarray:
    # Quintic q(s) on s in [0,1], s = (y - A_CORE)/(pi - A_CORE), matching
    # value/d1/d2 of the closed form at A_CORE and (BRIDGE_VALUE_AT_PI, 0, 0) at pi.
    span = math.pi - A_CORE
    ya = np.asarray([A_CORE])
    va, da, dda = (float(arr[0]) for arr in _core_h(ya))
    rows = np.array(
        [
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, 1, 1, 1, 1, 1],
            [0, 1, 2, 3, 4, 5],
            [0, 0, 2, 6, 12, 20],
        ],
        dtype=np.float64,
    )
    rhs = np.array([va, da * span, dda * span**2, BRIDGE_VALUE_AT_PI, 0.0, 0.0])
    return np.linalg.solve(rows, rhs)


_BRIDGE = _bridge_coefficients()
_BRIDGE_D1 = np.polynomial.polynomial.polyder(_BRIDGE)
_BRIDGE_D2 = np.polynomial.polynomial.polyder(_BRIDGE, 2)
_BRIDGE_SPAN = math.pi - A_CORE


def _bridge_h(y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = (y - A_CORE) / _BRIDGE_SPAN
    val = np.polynomial.polynomial.polyval(s, _BRIDGE)
    d1 = np.polynomial.polynomial.polyval(s, _BRIDGE_D1) / _BRIDGE_SPAN
    d2 = np.polynomial.polynomial.polyval(s, _BRIDGE_D2) / _BRIDGE_SPAN**2
    return val, d1, d2


def _h_all(x, need_d2: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(h, h', h'') at reduced angles; h'' entries are NaN at exact zeros
    unless need_d2, in which case a zero argument raises."""
    xr = _wrap_angle(np.asarray(x, dtype=np.float64))
    y = np.abs(xr)
    sign = np.sign(xr)  # h odd-derivative sign; sign(0) = 0 matches h'(0) = 0
    val = np.zeros_like(y)
    d1 = np.zeros_like(y)
    d2 = np.full_like(y, np.nan)

    zero = y == 0.0
    if need_d2 and np.any(zero):
        raise SecondDerivativeSingular("h'' does not exist at x = 0")
    core = (~zero) & (y <= A_CORE)
    if np.any(core):
        v, g1, g2 = _core_h(y[core])
        val[core] = v
        d1[core] = g1
        d2[core] = g2
    bridge = y > A_CORE
    if np.any(bridge):
        v, g1, g2 = _bridge_h(y[bridge])
        val[bridge] = v
        d1[bridge] = g1
        d2[bridge] = g2
    return val, sign * d1, d2


def eval_h(x):
    """The even 2π-periodic C¹ function h (closed form inside [-1/e, 1/e])."""
    val, _, _ = _h_all(x, need_d2=False)
    return float(val) if np.isscalar(x) or np.asarray(x).ndim == 0 else val


def eval_h_derivatives(x):
    """(h'(x), h''(x)); raises SecondDerivativeSingular at x = 0 (mod 2π)."""
    _, d1, d2 = _h_all(x, need_d2=True)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(d1), float(d2)
    return d1, d2


@dataclass
class RealLineFunction:
    """A 2π-periodic scalar function on the line with two derivatives."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    singular_points: tuple[float, ...] = ()
    even: bool = False


@dataclass
class CircleFunction:
    """A scalar function of a unit-circle point z with derivatives in z."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    smoothness: str = "C2"  # declared class: "C1" or "C2"
    singular_angles: tuple[float, ...] = ()


def make_h() -> RealLineFunction:
    def d1(x):
        _, g1, _ = _h_all(x, need_d2=False)
        return g1

    def d2(x):
        _, _, g2 = _h_all(x, need_d2=True)
        return g2

    def value(x):
        v, _, _ = _h_all(x, need_d2=False)
        return v

    return RealLineFunction(value=value, d1=d1, d2=d2, singular_points=(0.0,), even=True)


def make_g() -> CircleFunction:
    """g(e^{iθ}) = h(θ): C¹ on the circle, second derivative singular at z = 1."""

    def value(z):
        z = np.asarray(z, dtype=np.complex128)
        v, _, _ = _h_all(np.angle(z), need_d2=False)
        return v.astype(np.complex128)

    def d1(z):
        z = np.asarray(z, dtype=np.complex128)
        _, g1, _ = _h_all(np.angle(z), need_d2=False)
        return g1 / (1j * z)

    def d2(z):
        z = np.asarray(z, dtype=np.complex128)
        _, g1, g2 = _h_all(np.angle(z), need_d2=True)
        return (1j * g1 - g2) / (z * z)

    return CircleFunction(value=value, d1=d1, d2=d2, smoothness="C1", singular_angles=(0.0,))


def make_f() -> CircleFunction:
    """f(z) = (z-1)·g(z): the C² function driving every experiment here."""

    def value(z):
        z = np.asarray(z, dtype=np.complex128)
        v, _, _ = _h_all(np.angle(z), need_d2=False)
        return (z - 1.0) * v

    def d1(z):
        z = np.asarray(z, dtype=np.complex128)
        v, g1, _ = _h_all(np.angle(z), need_d2=False)
        return v + (z - 1.0) * g1 / (1j * z)

    def d2(z):
        # 2g'(z) + (z-1)g''(z); the second term has a removable zero at z = 1
        # (θ·h''(θ) → 0), where the whole expression is exactly 2g'(1) = 0.
        arr = np.asarray(z, dtype=np.complex128)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        theta = np.angle(arr)
        out = np.zeros(arr.shape, dtype=np.complex128)
        safe = theta != 0.0
        if np.any(safe):
            zs = arr[safe]
            _, g1, g2 = _h_all(theta[safe], need_d2=True)
            out[safe] = 2.0 * g1 / (1j * zs) + (zs - 1.0) * (1j * g1 - g2) / (zs * zs)
        return out[0] if scalar else out

    return CircleFunction(value=value, d1=d1, d2=d2, smoothness="C2")


_F_CACHE: CircleFunction | None = None


def _the_f() -> CircleFunction:
    global _F_CACHE
    if _F_CACHE is None:
        _F_CACHE = make_f()
    return _F_CACHE


def poly_circle_function(coeffs: Sequence[complex]) -> CircleFunction:
    """Polynomial Σ c_k z^k as a CircleFunction with exact derivatives."""
    c = np.asarray(coeffs, dtype=np.complex128)
    c1 = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1, complex)
    c2 = np.polynomial.polynomial.polyder(c, 2) if c.size > 2 else np.zeros(1, complex)
    pv = np.polynomial.polynomial.polyval
    return CircleFunction(
        value=lambda z: pv(np.asarray(z, np.complex128), c),
        d1=lambda z: pv(np.asarray(z, np.complex128), c1),
        d2=lambda z: pv(np.asarray(z, np.complex128), c2),
        smoothness="C2",
    )


def _check_circle(*zs: np.ndarray) -> None:
    for z in zs:
        if z.size and float(np.max(np.abs(np.abs(z) - 1.0))) > _CIRCLE_TOL:
            raise NotOnCircle("argument not on the unit circle within 1e-12")


def _dd1_flat(phi: CircleFunction, z0: np.ndarray, z1: np.ndarray) -> np.ndarray:
    """First divided difference on flat arrays; three-branch stable scheme."""
    out = np.empty(z0.shape, dtype=np.complex128)
    d = np.abs(z0 - z1)

    far = d > DELTA_COINCIDENT
    if np.any(far):
        a, b = z0[far], z1[far]
        out[far] = (phi.value(a) - phi.value(b)) / (a - b)

    band = (~far) & (d > DELTA_DERIVATIVE)
    if np.any(band):
        # Simpson rule for ∫F'(θ)dθ along the arc, F(θ) = φ(e^{iθ}); the
        # arc length comes from the chord (whose subtraction is exact for
        # nearby points), only its sign from the angles.  No cancellation:
        # a quotient of two tiny well-conditioned quantities.
        a, b = z0[band], z1[band]
        ta, tb = np.angle(a), np.angle(b)
        delta = np.copysign(2.0 * np.arcsin(0.5 * d[band]), _wrap_angle(ta - tb))
        tm = tb + 0.5 * _wrap_angle(ta - tb)
        zm = np.exp(1j * tm)
        simpson = (
            1j * a * phi.d1(a) + 4j * zm * phi.d1(zm) + 1j * b * phi.d1(b)
        ) / 6.0
        # divide by the on-circle chord 2i·sin(δ/2)·e^{iθm}: the raw chord
        # a - b carries a radial component (inputs are unimodular only to
        # ~1e-12) that would pollute the quotient at (radial error)/gap.
        chord = 2j * np.sin(0.5 * delta) * zm
        out[band] = simpson * delta / chord

    close = d <= DELTA_DERIVATIVE
    if np.any(close):
        a, b = z0[close], z1[close]
        ta, tb = np.angle(a), np.angle(b)
        tm = tb + 0.5 * _wrap_angle(ta - tb)
        zm = np.where(a == b, a, np.exp(1j * tm))
        out[close] = phi.d1(zm)

    return out


def divided_diff_1(phi: CircleFunction, z0, z1):
    """φ^{[1]}(z0, z1): the quotient away from coincidence, φ'(z0) at it,
    and a three-point arc-corrected formula in the narrow band between."""
    a, b = np.broadcast_arrays(
        np.asarray(z0, dtype=np.complex128), np.asarray(z1, dtype=np.complex128)
    )
    scalar = a.ndim == 0
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    _check_circle(a, b)
    out = _dd1_flat(phi, a.ravel(), b.ravel()).reshape(a.shape)
    return complex(out[0]) if scalar else out


def divided_diff_2(phi: CircleFunction, z0, z1, z2):
    """φ^{[2]}(z0, z1, z2), symmetric in its three arguments.

    The pair with the largest gap is used as the outer pair of the nested
    quotient (φ^{[1]}(p, mid) − φ^{[1]}(mid, q))/(p − q); when even the largest
    gap is below the coincidence threshold the cluster collapses to
    φ''(center)/2.  Exact coincidences fall out of the same scheme: with
    z0 = z2 the value is (φ'(z0) − φ^{[1]}(z0, z1))/(z0 − z1), the one-variable
    derivative of the stable quotient.
    """
    if phi.smoothness != "C2":
        raise NotC2("second divided differences need a function declared C2")
    a, b, c = np.broadcast_arrays(
        np.asarray(z0, dtype=np.complex128),
        np.asarray(z1, dtype=np.complex128),
        np.asarray(z2, dtype=np.complex128),
    )
    scalar = a.ndim == 0
    shape = np.atleast_1d(a).shape
    a = np.atleast_1d(a).ravel()
    b = np.atleast_1d(b).ravel()
    c = np.atleast_1d(c).ravel()
    _check_circle(a, b, c)

    d01 = np.abs(a - b)
    d12 = np.abs(b - c)
    d02 = np.abs(a - c)
    gap = np.maximum(np.maximum(d01, d12), d02)

    # relabel so the widest pair is (p, q); the mathematical value is symmetric
    use01 = (d01 >= d02) & (d01 >= d12)
    use12 = (~use01) & (d12 >= d02)
    p = np.where(use01, a, np.where(use12, b, a))
    q = np.where(use01, b, np.where(use12, c, c))
    mid = np.where(use01, c, np.where(use12, a, b))

    out = np.empty(a.shape, dtype=np.complex128)
    wide = gap > DELTA_COINCIDENT
    if np.any(wide):
        pw, mw, qw = p[wide], mid[wide], q[wide]
        left = _dd1_flat(phi, pw, mw)
        right = _dd1_flat(phi, mw, qw)
        out[wide] = (left - right) / (pw - qw)

    tight = ~wide
    if np.any(tight):
        at, bt, ct = a[tight], b[tight], c[tight]
        base = np.angle(ct)
        center = base + (_wrap_angle(np.angle(at) - base) + _wrap_angle(np.angle(bt) - base)) / 3.0
        zc = np.where((at == bt) & (bt == ct), at, np.exp(1j * center))
        out[tight] = 0.5 * phi.d2(zc)

    out = out.reshape(shape)
    return complex(out[0]) if scalar else out


def eval_varsigma(z0, z1, z2):
    """ς(z0, z1, z2) = z1 · f^{[2]}(z0, z1, z2) for the package's f."""
    mid = np.asarray(z1, dtype=np.complex128)
    return mid * divided_diff_2(_the_f(), z0, z1, z2)


def export_function_csv(path: str, fn, num_points: int = 720) -> None:
    """Sample a CircleFunction or RealLineFunction on a uniform angle grid.

    Columns: theta, value, d1, d2 (complex columns split into _re/_im).
    Points where a derivative is singular are left empty.
    """
    thetas = np.linspace(-math.pi, math.pi, num_points, endpoint=False)
    is_circle = isinstance(fn, CircleFunction)
    header = (
        ["theta", "value_re", "value_im", "d1_re", "d1_im", "d2_re", "d2_im"]
        if is_circle
        else ["theta", "value", "d1", "d2"]
    )
    rows = []
    for t in thetas:
        arg = np.asarray([np.exp(1j * t)]) if is_circle else np.asarray([t])
        cells: list[object] = [repr(float(t))]
        for attr in ("value", "d1", "d2"):
            try:
                v = getattr(fn, attr)(arg)[0]
            except SecondDerivativeSingular:
                cells.extend(["", ""] if is_circle else [""])
                continue
            if is_circle:
                cells.extend([repr(float(np.real(v))), repr(float(np.imag(v)))])
            else:
                cells.append(repr(float(np.real(v))))
        rows.append(cells)
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())
