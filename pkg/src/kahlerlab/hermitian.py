"""Pointwise linear algebra of constant Hermitian (1,1)-forms.

A real (1,1)-form with constant coefficients, written sum_{j,k} A[j,k]
i dz_j wedge dzbar_k, is identified with its n x n Hermitian coefficient
matrix A.  This module implements the algebra that drives every class-level
computation on the unit-volume torus: relative traces and eigenvalues of one
form against a metric, mixed discriminants realizing wedge products of
constant forms, and the pointwise trace-product inequality for triples of
metrics.

Everything here is dimension-generic and grid-free.  Functions suffixed
``_array`` are vectorized kernels operating on stacked matrices of shape
(..., n, n); they back both the fuzzing harnesses and the per-node checks on
torus grids.  All operations are pure and inputs are never mutated, so values
can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import PositivityError, UsageError

__all__ = [
    "HermitianForm",
    "TraceProductWitness",
    "TraceFuzzReport",
    "relative_trace",
    "relative_eigenvalues",
    "mixed_discriminant",
    "intersection_number",
    "check_trace_product_inequality",
    "fuzz_trace_product",
    "positivity_threshold",
    "inequality_slack_tolerance",
    "hermitize",
    "mixed_discriminant_array",
    "relative_trace_array",
    "relative_eigenvalues_array",
]

#: Relative scale of the eigenvalue band treated as zero when classifying
#: positivity.  Exact-zero tests are meaningless in floating point; nef
#: (semidefinite) boundaries live inside this band.
POSITIVITY_RTOL = 1e-10

#: Relative slack granted when checking inequalities that are theorems:
#: rounding must never produce a false violation.
INEQUALITY_RTOL = 1e-9

#: Mixed discriminants by subset polarization cost 2^n determinants; beyond
#: this dimension the approach stops being desk-scale.
MAX_DIM = 8


def positivity_threshold(eigenvalues) -> float:
    """Eigenvalue magnitude below which a value classifies as zero."""
    scale = max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
    return POSITIVITY_RTOL * scale


def inequality_slack_tolerance(*values: float) -> float:
    """Tolerance for ``lhs >= rhs`` checks, relative to the operand scale."""
    scale = max(1.0, *(abs(float(v)) for v in values)) if values else 1.0
    return INEQUALITY_RTOL * scale


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return (A + A*)/2 along the last two axes.

    The result is exactly conjugate-symmetric in IEEE arithmetic: entries
    (j,k) and (k,j) are built from the same two summands, conjugated.
    """
    a = np.asarray(a, dtype=complex)
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


class HermitianForm:
    """A constant real (1,1)-form given by its Hermitian coefficient matrix.

    The constructor symmetrizes, so ``form.matrix`` is exactly conjugate
    symmetric.  Positivity classification is a pure function of the spectrum
    with a relative zero band (see ``positivity_threshold``): eigenvalues
    inside the band count as zero, so nef boundary forms classify as
    positive semidefinite rather than flapping between signs.
    """

    __slots__ = ("matrix", "_eigenvalues")

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise UsageError(f"coefficient matrix must be square, got shape {a.shape}")
        if a.shape[0] == 0:
            raise UsageError("dimension must be positive")
        if a.shape[0] > MAX_DIM:
            raise UsageError(f"dimension {a.shape[0]} exceeds supported maximum {MAX_DIM}")
        m = hermitize(a)
        m.setflags(write=False)
        self.matrix = m
        self._eigenvalues = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Real eigenvalues, ascending (cached)."""
        if self._eigenvalues is None:
            ev = np.linalg.eigvalsh(self.matrix)
            ev.setflags(write=False)
            self._eigenvalues = ev
        return self._eigenvalues

    def classify(self) -> str:
        """'positive_definite', 'positive_semidefinite' or 'indefinite'."""
        ev = self.eigenvalues
        tau = positivity_threshold(ev)
        if ev[0] > tau:
            return "positive_definite"
        if ev[0] >= -tau:
            return "positive_semidefinite"
        return "indefinite"

    def is_positive_definite(self) -> bool:
        return self.classify() == "positive_definite"

    def is_positive_semidefinite(self) -> bool:
        return self.classify() != "indefinite"

    # Forms make a real vector space; only real scalings keep them real.
    def __add__(self, other):
        if isinstance(other, HermitianForm):
            if other.dim != self.dim:
                raise UsageError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return HermitianForm(self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HermitianForm):
            if other.dim != self.dim:
                raise UsageError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return HermitianForm(self.matrix - other.matrix)
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return HermitianForm(self.matrix * float(scalar))
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianForm(dim={self.dim}, {self.classify()})"

    @classmethod
    def identity(cls, dim: int) -> "HermitianForm":
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, entries) -> "HermitianForm":
        return cls(np.diag(np.asarray(entries, dtype=float)))


def _as_matrix(form) -> np.ndarray:
    if isinstance(form, HermitianForm):
        return form.matrix
    return HermitianForm(form).matrix


def _require_same_dim(matrices) -> int:
    dims = {m.shape[-1] for m in matrices}
    if len(dims) != 1:
        raise UsageError(f"dimension mismatch among operands: {sorted(dims)}")
    return dims.pop()


def _require_metric(form: HermitianForm, name: str) -> None:
    """Positive definiteness check that names the offending eigenvalue."""
    ev = form.eigenvalues
    tau = positivity_threshold(ev)
    if ev[0] <= tau:
        raise PositivityError(
            f"{name} must be positive definite; smallest eigenvalue is {ev[0]:.6g}"
        )


# ---------------------------------------------------------------------------
# relative traces and eigenvalues
# ---------------------------------------------------------------------------

def relative_trace(base: HermitianForm, arg: HermitianForm) -> float:
    """Trace of ``arg`` with respect to the metric ``base``.

    In coefficients this is trace(base^{-1} arg); it equals n times the
    arithmetic mean of the eigenvalues of ``arg`` relative to ``base``, and
    equals n exactly when ``arg == base``.

    Raises
    ------
    PositivityError
        If ``base`` is not positive definite.
    UsageError
        If the dimensions differ.
    """
    _require_same_dim([base.matrix, arg.matrix])
    _require_metric(base, "base")
    return float(np.trace(np.linalg.solve(base.matrix, arg.matrix)).real)


def relative_trace_array(base: np.ndarray, arg: np.ndarray) -> np.ndarray:
    """Vectorized trace(base^{-1} arg) over stacks of shape (..., n, n)."""
    return np.trace(np.linalg.solve(base, arg), axis1=-2, axis2=-1).real


def relative_eigenvalues(base: HermitianForm, arg: HermitianForm) -> np.ndarray:
    """Eigenvalues of ``arg`` relative to the metric ``base``, ascending.

    These are the generalized eigenvalues of the pencil (arg, base).  Their
    sum is ``relative_trace(base, arg)`` and their product is
    det(arg)/det(base); all are positive when ``arg`` is positive definite.
    """
    _require_same_dim([base.matrix, arg.matrix])
    _require_metric(base, "base")
    return scipy.linalg.eigh(arg.matrix, base.matrix, eigvals_only=True)


def relative_eigenvalues_array(base: np.ndarray, arg: np.ndarray) -> np.ndarray:
    """Vectorized relative eigenvalues over stacks of shape (..., n, n).

    Reduces the pencil (arg, base) by the Cholesky factor of ``base``:
    eigvalsh(L^{-1} arg L^{-*}) with base = L L*.  Returns shape (..., n),
    ascending along the last axis.
    """
    chol = np.linalg.cholesky(base)
    inv_chol = np.linalg.inv(chol)
    reduced = inv_chol @ arg @ np.conj(np.swapaxes(inv_chol, -1, -2))
    return np.linalg.eigvalsh(reduced)


# ---------------------------------------------------------------------------
# mixed discriminants and intersection numbers
# ---------------------------------------------------------------------------

def mixed_discriminant_array(matrices) -> np.ndarray:
    """Mixed discriminant D(A_1, ..., A_n) of n stacked matrices.

    Each entry of ``matrices`` has shape (..., n, n) (leading axes broadcast).
    Uses inclusion-exclusion polarization over the 2^n - 1 nonempty subsets:

        D = (1/n!) * sum_S (-1)^(n-|S|) det(sum_{i in S} A_i)

    which is symmetric, multilinear, and normalized so D(A, ..., A) = det A.
    """
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    n = _require_same_dim(mats)
    if len(mats) != n:
        raise UsageError(f"need exactly {n} factors for dimension {n}, got {len(mats)}")
    if n > MAX_DIM:
        raise UsageError(f"dimension {n} exceeds supported maximum {MAX_DIM}")
    total = 0.0
    for size in range(1, n + 1):
        sign = (-1) ** (n - size)
        for subset in combinations(range(n), size):
            acc = mats[subset[0]]
            for i in subset[1:]:
                acc = acc + mats[i]
            total = total + sign * np.linalg.det(acc)
    return np.real(total) / math.factorial(n)


def mixed_discriminant(forms) -> float:
    """Mixed discriminant of n Hermitian forms in dimension n.

    Symmetric and multilinear with D(A, ..., A) = det A; realizes wedge
    products of constant forms on the unit-volume torus up to the n! factor
    (see ``intersection_number``).
    """
    mats = [_as_matrix(f) for f in forms]
    return float(mixed_discriminant_array(mats))


def intersection_number(factors) -> float:
    """Integral of the wedge product of n constant forms on the torus.

    With total volume normalized to 1, constant forms integrate to
    n! * D(A_1, ..., A_n).  For a metric ``a`` this satisfies the contraction
    identity  int a^{n-1} ^ b = (1/n) * relative_trace(a, b) * int a^n.
    """
    return math.factorial(len(list(factors))) * mixed_discriminant(factors)


# ---------------------------------------------------------------------------
# the trace-product inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceProductWitness:
    """One evaluation of the metric trace-product inequality.

    ``lhs = (trace of b w.r.t. a) * (trace of c w.r.t. b)`` against
    ``rhs = trace of c w.r.t. a``; ``holds`` grants relative slack so
    rounding cannot flag a theorem as violated.
    """

    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def check_trace_product_inequality(
    a: HermitianForm, b: HermitianForm, c: HermitianForm
) -> TraceProductWitness:
    """Check (trace_a b)(trace_b c) >= trace_a c for metrics a, b, c.

    All three forms must be positive definite (the inequality is a statement
    about Hermitian metrics); in dimension 1 it degenerates to an equality.
    """
    _require_same_dim([a.matrix, b.matrix, c.matrix])
    for name, form in (("a", a), ("b", b), ("c", c)):
        if not form.is_positive_definite():
            raise PositivityError(
                f"{name} must be positive definite; smallest eigenvalue is "
                f"{form.eigenvalues[0]:.6g}"
            )
    lhs = relative_trace(a, b) * relative_trace(b, c)
    rhs = relative_trace(a, c)
    holds = lhs >= rhs - inequality_slack_tolerance(lhs, rhs)
    return TraceProductWitness(lhs=lhs, rhs=rhs, holds=holds)


@dataclass(frozen=True)
class TraceFuzzReport:
    """Outcome of a randomized trace-product fuzzing batch."""

    dim: int
    samples: int
    seed: int
    min_slack: float
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def fuzz_trace_product(dim: int, samples: int, seed: int) -> TraceFuzzReport:
    """Fuzz the trace-product inequality on random positive definite triples.

    Samples are drawn in vectorized batches; any triple violating the
    inequality beyond the relative slack is returned verbatim so the failure
    can be replayed.
    """
    from .sampling import random_positive_definite_batch

    if dim < 1:
        raise UsageError("dimension must be >= 1")
    if samples < 1:
        raise UsageError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    min_slack = math.inf
    violations = []
    batch = 20000
    remaining = samples
    while remaining > 0:
        count = min(batch, remaining)
        remaining -= count
        a = random_positive_definite_batch(rng, dim, count)
        b = random_positive_definite_batch(rng, dim, count)
        c = random_positive_definite_batch(rng, dim, count)
        lhs = relative_trace_array(a, b) * relative_trace_array(b, c)
        rhs = relative_trace_array(a, c)
        slack = lhs - rhs
        min_slack = min(min_slack, float(slack.min()))
        tol = INEQUALITY_RTOL * np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        bad = np.nonzero(slack < -tol)[0]
        for i in bad:
            violations.append(
                {"a": a[i].copy(), "b": b[i].copy(), "c": c[i].copy(),
                 "lhs": float(lhs[i]), "rhs": float(rhs[i])}
            )
    return TraceFuzzReport(
        dim=dim, samples=samples, seed=seed, min_slack=min_slack, violations=violations
    )
