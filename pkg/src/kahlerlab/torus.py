"""Periodic-grid calculus on the unit-volume flat complex torus.

The torus C^n / (Z^n + i Z^n) is discretized by N equispaced points per real
axis (2n real axes, N^(2n) nodes, quadrature weight 1/N^(2n) per node so the
total volume is exactly 1).  Real axes are ordered (x_1, y_1, ..., x_n, y_n)
with z_j = x_j + i y_j.

Differentiation is spectral: the complex Hessian d^2 u / dz_j dzbar_k acts in
frequency space as multiplication by

    -pi^2 (f_{x_j} - i f_{y_j}) (f_{x_k} + i f_{y_k})

on the mode exp(2 pi i f.xi), which is exact for band-limited data and makes
the integration-by-parts identities of the torus hold to rounding.  The
Nyquist frequency of even grids is treated as zero in first-derivative
factors, which is why resolutions must be even (and at least 8 to leave room
below the Nyquist line).
"""

from __future__ import annotations

import math
import struct
from itertools import combinations

import numpy as np

from .errors import UsageError
from .hermitian import (
    HermitianForm,
    hermitize,
    intersection_number,
    mixed_discriminant_array,
)

__all__ = [
    "TorusGrid",
    "PotentialField",
    "FormField",
    "i_ddbar",
    "integrate_top",
    "ddbar_closedness_defect",
    "band_limited_potential",
    "save_field",
    "load_field",
]

#: Tolerance for the sup-zero normalization tag; the shift is exact up to one
#: floating subtraction, so the band is tight.
SUP_ZERO_TOL = 1e-12

DEFAULT_RESOLUTION = {1: 64, 2: 16}


class TorusGrid:
    """Discretization of the unit-volume torus; owns spectral data.

    Immutable after construction; two grids compare equal iff they have the
    same complex dimension and resolution.
    """

    __slots__ = ("complex_dim", "resolution", "shape", "node_count", "node_weight", "_w")

    def __init__(self, complex_dim: int, resolution: int | None = None):
        if complex_dim < 1:
            raise UsageError("complex dimension must be >= 1")
        if resolution is None:
            resolution = DEFAULT_RESOLUTION.get(complex_dim)
            if resolution is None:
                raise UsageError(
                    f"no default resolution for dimension {complex_dim}; pass one"
                )
        if resolution % 2 != 0 or resolution < 8:
            raise UsageError("resolution must be even and >= 8")
        self.complex_dim = int(complex_dim)
        self.resolution = int(resolution)
        self.shape = (self.resolution,) * (2 * self.complex_dim)
        self.node_count = self.resolution ** (2 * self.complex_dim)
        self.node_weight = 1.0 / self.node_count
        self._w = None

    def __eq__(self, other):
        return (
            isinstance(other, TorusGrid)
            and self.complex_dim == other.complex_dim
            and self.resolution == other.resolution
        )

    def __hash__(self):
        return hash((self.complex_dim, self.resolution))

    def __repr__(self):
        return f"TorusGrid(n={self.complex_dim}, N={self.resolution})"

    def axis_coordinate(self, axis: int) -> np.ndarray:
        """Coordinate values along one real axis, broadcastable to the grid.

        Axis 2j is x_{j+1}, axis 2j+1 is y_{j+1}; values run over [0, 1).
        """
        if not 0 <= axis < 2 * self.complex_dim:
            raise UsageError(f"axis {axis} out of range for {self!r}")
        coords = np.arange(self.resolution) / self.resolution
        view = [1] * (2 * self.complex_dim)
        view[axis] = -1
        return coords.reshape(view)

    def _frequency_factors(self):
        """Cached arrays w_j = f_{x_j} + i f_{y_j} over the grid, Nyquist zeroed."""
        if self._w is None:
            n, res = self.complex_dim, self.resolution
            freqs = np.fft.fftfreq(res) * res
            freqs[res // 2] = 0.0  # first-derivative factors drop the Nyquist mode
            w = []
            for j in range(n):
                vx = [1] * (2 * n)
                vx[2 * j] = -1
                vy = [1] * (2 * n)
                vy[2 * j + 1] = -1
                w.append(freqs.reshape(vx) + 1j * freqs.reshape(vy))
            self._w = w
        return self._w

    def hessian_multiplier(self, j: int, k: int) -> np.ndarray:
        """Fourier multiplier of d^2/dz_j dzbar_k on this grid."""
        w = self._frequency_factors()
        return -np.pi**2 * np.conj(w[j]) * w[k]


class PotentialField:
    """Real periodic scalar field on a torus grid.

    The normalization tag records which gauge the values are in: 'raw',
    'mean-zero' or 'sup-zero' (max over nodes within [-1e-12, 0]).
    """

    __slots__ = ("grid", "values", "normalization")

    _TAGS = ("raw", "mean-zero", "sup-zero")

    def __init__(self, grid: TorusGrid, values, normalization: str = "raw"):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise UsageError(
                f"values shape {values.shape} does not match grid shape {grid.shape}"
            )
        if normalization not in self._TAGS:
            raise UsageError(f"unknown normalization tag {normalization!r}")
        if normalization == "sup-zero":
            top = float(values.max())
            if not -SUP_ZERO_TOL <= top <= 0.0:
                raise UsageError(f"sup-zero field has max {top:.3g}, expected in [-1e-12, 0]")
        self.grid = grid
        self.values = values
        self.normalization = normalization

    @classmethod
    def zero(cls, grid: TorusGrid) -> "PotentialField":
        return cls(grid, np.zeros(grid.shape), "mean-zero")

    def mean(self) -> float:
        return float(self.values.mean())

    def with_mean_zero(self) -> "PotentialField":
        return PotentialField(self.grid, self.values - self.values.mean(), "mean-zero")

    def with_sup_zero(self) -> "PotentialField":
        return PotentialField(self.grid, self.values - self.values.max(), "sup-zero")

    def __add__(self, other):
        if isinstance(other, PotentialField):
            if other.grid != self.grid:
                raise UsageError("fields live on different grids")
            return PotentialField(self.grid, self.values + other.values, "raw")
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return PotentialField(self.grid, self.values * float(scalar), "raw")
        return NotImplemented

    __rmul__ = __mul__


class FormField:
    """Field of Hermitian (1,1)-form coefficients over a torus grid.

    ``entries`` has shape grid.shape + (n, n) and is Hermitian at every node
    (the constructor symmetrizes, which is exact and idempotent).
    """

    __slots__ = ("grid", "entries")

    def __init__(self, grid: TorusGrid, entries, _skip_hermitize: bool = False):
        entries = np.asarray(entries, dtype=complex)
        n = grid.complex_dim
        if entries.shape != grid.shape + (n, n):
            raise UsageError(
                f"entries shape {entries.shape} does not match grid {grid.shape + (n, n)}"
            )
        self.grid = grid
        self.entries = entries if _skip_hermitize else hermitize(entries)

    @classmethod
    def constant(cls, grid: TorusGrid, form: HermitianForm) -> "FormField":
        if form.dim != grid.complex_dim:
            raise UsageError(
                f"form dimension {form.dim} does not match grid dimension {grid.complex_dim}"
            )
        entries = np.broadcast_to(form.matrix, grid.shape + (form.dim, form.dim)).copy()
        return cls(grid, entries, _skip_hermitize=True)

    def __add__(self, other):
        if isinstance(other, FormField):
            if other.grid != self.grid:
                raise UsageError("fields live on different grids")
            return FormField(self.grid, self.entries + other.entries, _skip_hermitize=True)
        if isinstance(other, HermitianForm):
            if other.dim != self.grid.complex_dim:
                raise UsageError("dimension mismatch")
            return FormField(self.grid, self.entries + other.matrix, _skip_hermitize=True)
        return NotImplemented

    __radd__ = __add__

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return FormField(self.grid, self.entries * float(scalar), _skip_hermitize=True)
        return NotImplemented

    __rmul__ = __mul__

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue over all nodes (positivity margin)."""
        return float(np.linalg.eigvalsh(self.entries)[..., 0].min())


def _hessian_entries(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Complex Hessian of a real field; exactly Hermitian by construction."""
    n = grid.complex_dim
    u_hat = np.fft.fftn(values)
    entries = np.empty(grid.shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            h = np.fft.ifftn(grid.hessian_multiplier(j, k) * u_hat)
            if j == k:
                entries[..., j, j] = h.real
            else:
                entries[..., j, k] = h
                entries[..., k, j] = np.conj(h)
    return entries


def i_ddbar(u: PotentialField) -> FormField:
    """The (1,1)-form i ddbar u as the field of complex Hessians of u.

    Spectral differentiation makes this exact for trigonometric data below
    the Nyquist frequency; every entry has exact zero mean over the grid
    (integration by parts has no boundary on the torus).
    """
    return FormField(u.grid, _hessian_entries(u.grid, u.values), _skip_hermitize=True)


def _split_factors(factors):
    """Common (dim, grid, list of coefficient arrays) for mixed factor lists."""
    factors = list(factors)
    if not factors:
        raise UsageError("need at least one factor")
    grid = None
    dims = set()
    for f in factors:
        if isinstance(f, FormField):
            if grid is None:
                grid = f.grid
            elif f.grid != grid:
                raise UsageError("factors live on different grids")
            dims.add(f.grid.complex_dim)
        elif isinstance(f, HermitianForm):
            dims.add(f.dim)
        else:
            raise UsageError(f"unsupported factor type {type(f).__name__}")
    if len(dims) != 1:
        raise UsageError(f"dimension mismatch among factors: {sorted(dims)}")
    return dims.pop(), grid


def integrate_top(factors) -> float:
    """Integral over the torus of the wedge product of n (1,1)-form factors.

    Factors may mix ``FormField`` values with constant ``HermitianForm``
    values (constants broadcast).  At each node the wedge product of constant
    representatives is n! times the mixed discriminant of the coefficient
    matrices, so the quadrature is the node average of that quantity.  With
    every factor constant this reduces exactly to ``intersection_number``.
    """
    dim, grid = _split_factors(factors)
    factors = list(factors)
    if len(factors) != dim:
        raise UsageError(f"need exactly {dim} factors for dimension {dim}, got {len(factors)}")
    if grid is None:
        return intersection_number(factors)
    mats = [f.entries if isinstance(f, FormField) else f.matrix for f in factors]
    d = mixed_discriminant_array(mats)
    return math.factorial(dim) * float(np.mean(d))


def _minor_sign(index: int, sorted_tuple) -> int:
    """Sign of inserting d z_index in front of the ordered wedge of the rest."""
    return -1 if sorted_tuple.index(index) % 2 else 1


def ddbar_closedness_defect(g: FormField, k: int) -> float:
    """Max-norm of ddbar applied to the k-th wedge power of a (1,1)-form field.

    The k-th power of g has (k,k)-components proportional to the k x k minors
    det(g[J, K]); applying d dbar spectrally and collecting components gives a
    (k+1, k+1)-form whose largest coefficient magnitude is returned.  Constant
    fields and fields of the shape (constant + i ddbar u) have defect at the
    rounding floor; a genuinely non-closed field reports a positive defect.
    """
    n = g.grid.complex_dim
    if not 1 <= k <= n - 1:
        raise UsageError(f"wedge exponent k={k} out of range 1..{n - 1}")
    index_sets = list(combinations(range(n), k))
    minors_hat = {}
    for rows in index_sets:
        sub = g.entries[..., rows, :]
        for cols in index_sets:
            minor = np.linalg.det(sub[..., :, cols])
            minors_hat[(rows, cols)] = np.fft.fftn(minor)
    defect = 0.0
    out_sets = list(combinations(range(n), k + 1))
    for rows in out_sets:
        for cols in out_sets:
            acc = np.zeros(g.grid.shape, dtype=complex)
            for j in rows:
                sub_rows = tuple(r for r in rows if r != j)
                sign_j = _minor_sign(j, rows)
                for l in cols:
                    sub_cols = tuple(c for c in cols if c != l)
                    sign = sign_j * _minor_sign(l, cols)
                    mult = g.grid.hessian_multiplier(j, l)
                    acc += sign * mult * minors_hat[(sub_rows, sub_cols)]
            component = np.fft.ifftn(acc)
            defect = max(defect, float(np.abs(component).max()))
    return defect


def band_limited_potential(
    grid: TorusGrid,
    rng: np.random.Generator,
    amplitude: float,
    max_freq: int = 2,
) -> PotentialField:
    """Random real band-limited field rescaled to the given sup amplitude.

    Draws Gaussian Fourier coefficients on the modes 0 < |f|_inf <= max_freq
    with a 1/(1+|f|^2) rolloff, symmetrizes so the field is real, and rescales
    to max |h| = amplitude.  Deterministic given the generator state.
    """
    if amplitude < 0:
        raise UsageError("amplitude must be >= 0")
    if not 1 <= max_freq < grid.resolution // 2:
        raise UsageError("max_freq must be >= 1 and below the Nyquist frequency")
    axes = 2 * grid.complex_dim
    spectrum = np.zeros(grid.shape, dtype=complex)
    rng_modes = np.ndindex(*([2 * max_freq + 1] * axes))
    for offset in rng_modes:
        f = tuple(o - max_freq for o in offset)
        if all(c == 0 for c in f):
            continue
        coeff = (rng.standard_normal() + 1j * rng.standard_normal())
        coeff /= 1.0 + sum(c * c for c in f)
        idx = tuple(c % grid.resolution for c in f)
        neg = tuple(-c % grid.resolution for c in f)
        spectrum[idx] += coeff
        spectrum[neg] += np.conj(coeff)
    values = np.fft.ifftn(spectrum).real
    top = np.abs(values).max()
    if top > 0 and amplitude > 0:
        values *= amplitude / top
    else:
        values[...] = 0.0
    return PotentialField(grid, values, "raw")


# ---------------------------------------------------------------------------
# binary field cache
# ---------------------------------------------------------------------------

_KIND_POTENTIAL = 1
_KIND_FORM = 2
_TAG_CODES = {"raw": 0, "mean-zero": 1, "sup-zero": 2}
_TAG_NAMES = {v: k for k, v in _TAG_CODES.items()}


def save_field(field, path) -> None:
    """Write a field to a flat binary cache file.

    Layout: header of four little-endian uint32 (complex dimension, grid
    resolution, field kind, normalization tag), then node data row-major as
    little-endian float64 (complex entries as re, im pairs).
    """
    if isinstance(field, PotentialField):
        kind, tag = _KIND_POTENTIAL, _TAG_CODES[field.normalization]
        payload = np.ascontiguousarray(field.values, dtype="<f8")
    elif isinstance(field, FormField):
        kind, tag = _KIND_FORM, 0
        payload = np.ascontiguousarray(field.entries).astype("<c16").view("<f8")
    else:
        raise UsageError(f"unsupported field type {type(field).__name__}")
    header = struct.pack("<IIII", field.grid.complex_dim, field.grid.resolution, kind, tag)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_field(path):
    """Read a field written by ``save_field``; returns the matching type."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise UsageError(f"{path}: truncated field cache header")
        n, res, kind, tag = struct.unpack("<IIII", header)
        grid = TorusGrid(n, res)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if kind == _KIND_POTENTIAL:
        if raw.size != grid.node_count:
            raise UsageError(f"{path}: payload size does not match grid")
        return PotentialField(grid, raw.reshape(grid.shape).copy(), _TAG_NAMES[tag])
    if kind == _KIND_FORM:
        expected = grid.node_count * n * n * 2
        if raw.size != expected:
            raise UsageError(f"{path}: payload size does not match grid")
        entries = raw.view("<c16").reshape(grid.shape + (n, n)).copy()
        return FormField(grid, entries, _skip_hermitize=True)
    raise UsageError(f"{path}: unknown field kind {kind}")
