"""Double and triple operator integrals for unitaries.

T_φ^{U0,U1}(X) = Σ φ(z_i, w_k) P_i X Q_k over the spectral projections of the
two unitaries, and its bilinear triple analogue.  Everything is computed in
eigencoordinates where the integrals become (bilinear) Schur multipliers.
The module also carries the first- and second-order difference identities
these integrals satisfy and a continuity check along perturbation sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NotUnitary
from .linalg import (
    SpectralDecomposition,
    eig_unitary,
    exp_i,
    functional_calculus,
    is_unitary,
    schatten_norm,
)
from .schur import Symbol2, Symbol3

__all__ = [
    "DoubleOI",
    "TripleOI",
    "doi_apply",
    "toi_apply",
    "first_order_identity_residual",
    "derivative_at_zero",
    "perturbation_identity_residual",
    "taylor_remainder",
    "doi_continuity_check",
    "toi_continuity_check",
    "scale_relative",
]


def _dedup(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct eigenvalues (bit-exact, sorted) and inverse index map.

    Only exactly repeated floats collapse; nearby-but-distinct eigenvalues
    are kept separate, the divided differences handle them stably.
    """
    uniq, inv = np.unique(values, return_inverse=True)
    return uniq, inv.reshape(values.shape)


@dataclass
class DoubleOI:
    """A double operator integral with a fixed two-point symbol."""

    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dec0: SpectralDecomposition
    dec1: SpectralDecomposition
    _sym: Symbol2 | None = None

    def symbol(self) -> Symbol2:
        if self._sym is None:
            u0, inv0 = _dedup(self.dec0.eigenvalues)
            u1, inv1 = _dedup(self.dec1.eigenvalues)
            block = np.asarray(self.phi(u0[:, None], u1[None, :]), dtype=np.complex128)
            self._sym = Symbol2(block[inv0[:, None], inv1[None, :]])
        return self._sym

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        v0, v1 = self.dec0.basis, self.dec1.basis
        xt = v0.conj().T @ x @ v1
        return v0 @ (self.symbol().m * xt) @ v1.conj().T


@dataclass
class TripleOI:
    """A bilinear triple operator integral with a three-point symbol."""

    psi: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    dec0: SpectralDecomposition
    dec1: SpectralDecomposition
    dec2: SpectralDecomposition

    def symbol(self) -> Symbol3:
        # full O(n^3) materialization; only sensible at small n
        u0, inv0 = _dedup(self.dec0.eigenvalues)
        u1, inv1 = _dedup(self.dec1.eigenvalues)
        u2, inv2 = _dedup(self.dec2.eigenvalues)
        block = np.asarray(
            self.psi(u0[:, None, None], u1[None, :, None], u2[None, None, :]),
            dtype=np.complex128,
        )
        return Symbol3(block[np.ix_(inv0, inv1, inv2)])

    def apply(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        y = np.asarray(y, dtype=np.complex128)
        v0, v1, v2 = self.dec0.basis, self.dec1.basis, self.dec2.basis
        xt = v0.conj().T @ x @ v1
        yt = v1.conj().T @ y @ v2
        u0, inv0 = _dedup(self.dec0.eigenvalues)
        u1, inv1 = _dedup(self.dec1.eigenvalues)
        u2, inv2 = _dedup(self.dec2.eigenvalues)
        acc = np.zeros((x.shape[0], y.shape[1]), dtype=np.complex128)
        row = inv0[:, None]
        col = inv2[None, :]
        # middle classes ascend with the sorted distinct eigenvalues, which
        # fixes the summation order; the symbol is evaluated once per class
        # on the deduplicated outer grids, keeping memory at O(n^2)
        for c, lam in enumerate(u1):
            members = np.nonzero(inv1 == c)[0]
            prod = xt[:, members] @ yt[members, :]
            block = np.asarray(self.psi(u0[:, None], lam, u2[None, :]), dtype=np.complex128)
            acc += block[row, col] * prod
        return v0 @ acc @ v2.conj().T


def _decompose(u, tol: float = 1e-10) -> SpectralDecomposition:
    u = np.asarray(u, dtype=np.complex128)
    if not is_unitary(u, tol):
        raise NotUnitary("operator integral endpoints must be unitary")
    return eig_unitary(u, tol)


def doi_apply(phi, u0, u1, x) -> np.ndarray:
    return DoubleOI(phi, _decompose(u0), _decompose(u1)).apply(x)


def toi_apply(psi, u0, u1, u2, x, y) -> np.ndarray:
    return TripleOI(psi, _decompose(u0), _decompose(u1), _decompose(u2)).apply(x, y)


def scale_relative(residual: float, *norms: float) -> float:
    return float(residual) / (1.0 + max([0.0, *map(float, norms)]))


def _dd1_of(fn) -> Callable:
    from .circle import divided_diff_1

    return lambda a, b: divided_diff_1(fn, a, b)


def _dd2_of(fn) -> Callable:
    from .circle import divided_diff_2

    return lambda a, b, c: divided_diff_2(fn, a, b, c)


def first_order_identity_residual(fn, u0, u1) -> float:
    """‖f(U0) − f(U1) − T_{f^{[1]}}^{U0,U1}(U0 − U1)‖_∞."""
    dec0, dec1 = _decompose(u0), _decompose(u1)
    f_u0 = functional_calculus(fn, u0, dec=dec0)
    f_u1 = functional_calculus(fn, u1, dec=dec1)
    t = DoubleOI(_dd1_of(fn), dec0, dec1).apply(np.asarray(u0) - np.asarray(u1))
    return float(schatten_norm(f_u0 - f_u1 - t, np.inf))


def derivative_at_zero(fn, u, z) -> np.ndarray:
    """T_{f^{[1]}}^{U,U}(iZU): the derivative of t ↦ f(e^{itZ}U) at t = 0."""
    dec = _decompose(u)
    arg = 1j * np.asarray(z, dtype=np.complex128) @ np.asarray(u, dtype=np.complex128)
    return DoubleOI(_dd1_of(fn), dec, dec).apply(arg)


def perturbation_identity_residual(fn, u0, u1, u2, x) -> float:
    """Residual of T^{U0,U2}(X) − T^{U1,U2}(X) = T^{U0,U1,U2}(U0 − U1, X)."""
    dec0, dec1, dec2 = _decompose(u0), _decompose(u1), _decompose(u2)
    dd1 = _dd1_of(fn)
    lhs = DoubleOI(dd1, dec0, dec2).apply(x) - DoubleOI(dd1, dec1, dec2).apply(x)
    rhs = TripleOI(_dd2_of(fn), dec0, dec1, dec2).apply(
        np.asarray(u0) - np.asarray(u1), x
    )
    return float(schatten_norm(lhs - rhs, np.inf))


def taylor_remainder(
    fn, u, z, dec: SpectralDecomposition | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Second-order remainder of f(e^{iZ}U) and its two-part decomposition.

    Returns (remainder, term_toi, term_doi) with
      remainder = f(U') − f(U) − T_{f^{[1]}}^{U,U}(iZU),   U' = e^{iZ}U,
      term_toi  = T_{f^{[2]}}^{U',U,U}(U' − U, iZU),
      term_doi  = T_{f^{[1]}}^{U',U}(U' − U − iZU),
    and remainder = term_toi + term_doi up to roundoff.  A precomputed
    decomposition of U may be passed to skip the eigensolve.
    """
    u = np.asarray(u, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    u_new = exp_i(z) @ u
    if dec is None:
        dec = _decompose(u)
    dec_new = _decompose(u_new)
    izu = 1j * z @ u
    diff = u_new - u
    dd1 = _dd1_of(fn)
    remainder = (
        functional_calculus(fn, u_new, dec=dec_new)
        - functional_calculus(fn, u, dec=dec)
        - DoubleOI(dd1, dec, dec).apply(izu)
    )
    term_toi = TripleOI(_dd2_of(fn), dec_new, dec, dec).apply(diff, izu)
    term_doi = DoubleOI(dd1, dec_new, dec).apply(diff - izu)
    return remainder, term_toi, term_doi


def doi_continuity_check(phi, u0, u1, perturbed: Sequence, tests: Sequence) -> np.ndarray:
    """sup over test arguments of ‖T^{F,U1}_φ(X) − T^{U0,U1}_φ(X)‖_∞ per F."""
    dec0, dec1 = _decompose(u0), _decompose(u1)
    base_op = DoubleOI(phi, dec0, dec1)
    base = [base_op.apply(x) for x in tests]
    out = []
    for f in perturbed:
        dec_f = _decompose(f)
        doi = DoubleOI(phi, dec_f, dec1)
        out.append(
            max(
                float(schatten_norm(doi.apply(x) - b, np.inf))
                for x, b in zip(tests, base)
            )
        )
    return np.asarray(out)


def toi_continuity_check(
    psi, u0, u1, u2, perturbed: Sequence, tests: Sequence
) -> np.ndarray:
    """Triple-integral version of the continuity check (perturbing U0)."""
    dec0, dec1, dec2 = _decompose(u0), _decompose(u1), _decompose(u2)
    base_op = TripleOI(psi, dec0, dec1, dec2)
    base = [base_op.apply(x, y) for x, y in tests]
    out = []
    for f in perturbed:
        dec_f = _decompose(f)
        toi = TripleOI(psi, dec_f, dec1, dec2)
        out.append(
            max(
                float(schatten_norm(toi.apply(x, y) - b, np.inf))
                for (x, y), b in zip(tests, base)
            )
        )
    return np.asarray(out)
