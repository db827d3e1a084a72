"""Shared random-instance generators and independent oracles for the tests."""

from __future__ import annotations

import numpy as np


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_complex(gen: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    shape = (n, n if m is None else m)
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


def random_hermitian(gen: np.random.Generator, n: int) -> np.ndarray:
    a = random_complex(gen, n)
    return (a + a.conj().T) / 2.0


def random_unitary(gen: np.random.Generator, n: int) -> np.ndarray:
    # QR of a Ginibre matrix with the R-diagonal phases absorbed: Haar unitary.
    q, r = np.linalg.qr(random_complex(gen, n))
    d = np.diag(r)
    return q * (d / np.abs(d))[np.newaxis, :]


def singular_values_oracle(a: np.ndarray) -> np.ndarray:
    """Singular values via the Gram matrix, independent of np.linalg.svd."""
    w = np.linalg.eigvalsh(a.conj().T @ a)
    return np.sqrt(np.clip(w, 0.0, None))[::-1]
