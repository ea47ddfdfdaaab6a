"""Seeded random matrix samplers used by the fuzzing and search harnesses.

Positive definite draws use G G* + tau*I with G a standard complex Gaussian
matrix, which covers the full metric cone; the tiny ridge keeps batched
Cholesky factorizations away from the semidefinite boundary.  Everything
takes an explicit ``numpy.random.Generator`` so every failure replays from
its seed.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .hermitian import POSITIVITY_RTOL, HermitianForm, hermitize

__all__ = [
    "complex_gaussian",
    "random_hermitian_batch",
    "random_positive_definite_batch",
    "random_positive_semidefinite_batch",
    "random_positive_definite",
    "random_positive_semidefinite",
    "random_hermitian",
]


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussian array (independent re/im, variance 1/2 each)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian_batch(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Batch of Hermitian matrices with Gaussian entries, shape (count, n, n)."""
    g = complex_gaussian(rng, (count, dim, dim))
    return hermitize(g)


def random_positive_definite_batch(
    rng: np.random.Generator, dim: int, count: int
) -> np.ndarray:
    """Batch of positive definite matrices G G* + tau*I, shape (count, n, n)."""
    g = complex_gaussian(rng, (count, dim, dim))
    gram = g @ np.conj(np.swapaxes(g, -1, -2))
    gram = hermitize(gram)  # exact conjugate symmetry for downstream eigh
    scale = np.maximum(1.0, np.linalg.norm(gram, axis=(-2, -1)))
    ridge = POSITIVITY_RTOL * scale
    gram[:, np.arange(dim), np.arange(dim)] += ridge[:, None]
    return gram


def random_positive_semidefinite_batch(
    rng: np.random.Generator,
    dim: int,
    count: int,
    singular_fraction: float = 0.25,
) -> np.ndarray:
    """Batch of psd matrices, a fraction of them exactly rank-deficient.

    Nef boundary cases matter: ``singular_fraction`` of the draws are built
    from a thin Gaussian factor G of shape (n, r) with r < n, so they have
    exact zero eigenvalues.
    """
    if not 0.0 <= singular_fraction <= 1.0:
        raise UsageError("singular_fraction must be in [0, 1]")
    out = np.empty((count, dim, dim), dtype=complex)
    singular = rng.random(count) < singular_fraction
    full = np.nonzero(~singular)[0]
    if full.size:
        g = complex_gaussian(rng, (full.size, dim, dim))
        out[full] = hermitize(g @ np.conj(np.swapaxes(g, -1, -2)))
    for i in np.nonzero(singular)[0]:
        rank = int(rng.integers(1, dim)) if dim > 1 else 1
        g = complex_gaussian(rng, (dim, rank))
        out[i] = hermitize(g @ g.conj().T)
    return out


def random_positive_definite(rng: np.random.Generator, dim: int) -> HermitianForm:
    """One random positive definite form."""
    return HermitianForm(random_positive_definite_batch(rng, dim, 1)[0])


def random_positive_semidefinite(rng: np.random.Generator, dim: int) -> HermitianForm:
    """One random psd form (may be exactly singular)."""
    return HermitianForm(random_positive_semidefinite_batch(rng, dim, 1)[0])


def random_hermitian(rng: np.random.Generator, dim: int) -> HermitianForm:
    """One random Hermitian form of indefinite tendency."""
    return HermitianForm(random_hermitian_batch(rng, dim, 1)[0])
