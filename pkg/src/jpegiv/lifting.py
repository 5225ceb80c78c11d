"""Irregular-grid lifting scheme for the CDF 9/7 (JPEG 2000) wavelet.

The classical 9/7 filter bank (Antonini, Barlaud, Mathieu and Daubechies,
1992) assumes equispaced samples.  Here each predict/update step is an
interpolating filter whose weights come from the actual grid spacing, so the
transform applies to series observed at arbitrary strictly increasing
locations; on an equispaced grid every interior weight collapses to 0.5 and
the standard 9/7 lifting steps reappear.

Conventions (positions are 1-based in all prose):

* One decomposition pass splits a length-m segment into the odd-position part
  d (length ceil(m/2)) and even-position part s, applies four lifting steps
  s += F(d, 0, pi1), d += F(s, 1, pi2), s += F(d, 0, pi3), d += F(s, 1, pi4),
  rescales d by phi and s by 1/phi, and stores [d, s] with the grid reordered
  to [odd locations, even locations].  The d block is the approximation and is
  what deeper passes decompose further.
* Odd-length segments are padded with one synthetic even-position point ahead
  of the lifting steps.  The pad value is a fixed linear combination of the
  last three entries (``OddPadCoefficients``) and the padded location
  extrapolates the last spacing: t_{m+1} = 2 t_m - t_{m-1}.  No constant
  combination can make that coefficient vanish on every irregular grid, so
  the forward pass stores the resulting synthetic detail coefficient; the
  paired inverse consumes it, which makes odd-length round trips exact.  All
  linear-operator views of the transform (the matrix oracle, the transposed
  inverse, the denoiser) treat the slot as zero instead.
* ``transposed_inverse_transform`` applies the exact matrix transpose of the
  inverse transform using filters only, never assembled matrices.  Its filter
  with flag f is the transpose of ``lifting_filter`` with the same flag.

``build_matrix_oracle`` assembles the same operators as dense matrices from
first principles (permutation, scaling and neighbour-weight matrices) and
exists solely to validate the filter implementations on small inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridTooShort, LevelOutOfRange, TooLarge, ZeroGridSpacing
from .grid_series import GridSeries, LevelSchedule


@dataclass(frozen=True)
class FilterConstants:
    """Lifting coefficients and normalisation of the CDF 9/7 filter bank."""

    pi1: float = -1.5861343420693648
    pi2: float = -0.0529801185718856
    pi3: float = 0.8829110755411875
    pi4: float = 0.4435068520511142
    phi: float = 1.1496043988602418


CONSTANTS = FilterConstants()


def _pad_coefficients(c: FilterConstants) -> tuple[float, float, float]:
    den = 1.0 + 2.0 * c.pi2 * c.pi3
    return (
        -2.0 * c.pi1 * c.pi2 * c.pi3 / den,
        2.0 * c.pi2 * c.pi3 / den,
        2.0 * (c.pi1 + c.pi3 + 3.0 * c.pi1 * c.pi2 * c.pi3) / den,
    )


@dataclass(frozen=True)
class OddPadCoefficients:
    """Weights of the synthetic point appended to odd-length segments."""

    phi_delta: tuple[float, float, float] = field(default_factory=lambda: _pad_coefficients(CONSTANTS))


ODD_PAD = OddPadCoefficients()


@dataclass(frozen=True)
class WaveletCoefficients:
    """Output of the forward transform.

    ``coefficients[:m]`` for m = head size after ``level`` passes is the
    approximation block; the detail block of depth k (k = 1 finest) occupies
    the slice returned by :meth:`detail_slice`.  ``synthetic`` maps depth to
    the stored synthetic detail coefficient of odd-length segments.
    """

    coefficients: np.ndarray
    permuted_grid: np.ndarray
    schedule: LevelSchedule
    level: int
    synthetic: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))
        object.__setattr__(self, "permuted_grid", np.asarray(self.permuted_grid, dtype=np.float64))
        if self.coefficients.shape != self.permuted_grid.shape:
            raise GridTooShort("coefficients and permuted_grid must have equal length")

    def coarse_size(self) -> int:
        """Length of the approximation block."""
        return self.schedule.head_size(self.level)

    def detail_slice(self, depth: int) -> slice:
        """Index range of the depth-k detail block (depth 1 = finest)."""
        if not 1 <= depth <= self.level:
            raise IndexError(f"depth {depth} outside 1..{self.level}")
        return slice(self.schedule.head_size(depth), self.schedule.segment_size(depth))

    def with_coefficients(self, vector: np.ndarray) -> "WaveletCoefficients":
        """Same layout with replaced coefficients and zeroed synthetic slots."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != self.coefficients.shape:
            raise GridTooShort("replacement vector has the wrong length")
        return replace(self, coefficients=vector, synthetic={})


def _split_grid(grid: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    if grid.shape[0] < 2 * m:
        raise GridTooShort(f"grid of length {grid.shape[0]} cannot host {m} filtered points")
    return grid[0 : 2 * m : 2], grid[1 : 2 * m : 2]


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    if np.any(den == 0.0):
        raise ZeroGridSpacing("coincident grid locations in a filter weight denominator")
    return num / den


def lifting_filter(
    series: np.ndarray, even_flag: int, pi: float, grid: np.ndarray
) -> np.ndarray:
    """One predict/update step: 2*pi*(w_l * S[1:n] + w_h * S[2:n+1]).

    ``even_flag=0`` filters the odd-position input to update even positions
    (weights from odd-position spacings, padded by duplicating the last
    element); ``even_flag=1`` filters the even-position input to update odd
    positions (even-position spacings, first element duplicated).  Boundary
    weights are 0.5.
    """
    series = np.asarray(series, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    m = series.shape[0]
    odd, even = _split_grid(grid, m)
    if even_flag == 0:
        weights = _safe_divide(odd[1:] - even[:-1], odd[1:] - odd[:-1])
        left = np.append(weights, 0.5)
        padded = np.append(series, series[-1])
    else:
        weights = _safe_divide(even[1:] - odd[1:], even[1:] - even[:-1])
        left = np.concatenate(([0.5], weights))
        padded = np.concatenate(([series[0]], series))
    return 2.0 * pi * (left * padded[:m] + (1.0 - left) * padded[1 : m + 1])


def trans_inv_filter(
    series: np.ndarray, even_flag: int, pi: float, grid: np.ndarray
) -> np.ndarray:
    """Exact transpose of :func:`lifting_filter` with the same flag.

    ``even_flag=0``: w_l = [0, 1-w], w_h = [w, 1], first element duplicated;
    ``even_flag=1``: w_l = [1, 1-w], w_h = [w, 0], last element duplicated.
    """
    series = np.asarray(series, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    m = series.shape[0]
    odd, even = _split_grid(grid, m)
    if even_flag == 0:
        weights = _safe_divide(odd[1:] - even[:-1], odd[1:] - odd[:-1])
        w_l = np.concatenate(([0.0], 1.0 - weights))
        w_h = np.append(weights, 1.0)
        padded = np.concatenate(([series[0]], series))
    else:
        weights = _safe_divide(even[1:] - odd[1:], even[1:] - even[:-1])
        w_l = np.concatenate(([1.0], 1.0 - weights))
        w_h = np.append(weights, 0.0)
        padded = np.append(series, series[-1])
    return 2.0 * pi * (w_l * padded[:m] + w_h * padded[1 : m + 1])


def _extrapolate(grid: np.ndarray) -> np.ndarray:
    return np.append(grid, 2.0 * grid[-1] - grid[-2])


def _forward_one(
    values: np.ndarray, grid: np.ndarray, constants: FilterConstants
) -> tuple[np.ndarray, np.ndarray, float | None]:
    """One decomposition pass; returns (stored segment, permuted grid, synthetic)."""
    m = values.shape[0]
    q = (m + 1) // 2
    d = values[0::2].astype(np.float64, copy=True)
    s = values[1::2].astype(np.float64, copy=True)
    padded_grid = grid
    synthetic = None
    if m % 2 == 1:
        pd = ODD_PAD.phi_delta
        s = np.append(s, pd[0] * d[q - 2] + pd[1] * s[q - 2] + pd[2] * d[q - 1])
        padded_grid = _extrapolate(grid)
    s = s + lifting_filter(d, 0, constants.pi1, padded_grid)
    d = d + lifting_filter(s, 1, constants.pi2, padded_grid)
    s = s + lifting_filter(d, 0, constants.pi3, padded_grid)
    d = d + lifting_filter(s, 1, constants.pi4, padded_grid)
    d *= constants.phi
    s /= constants.phi
    if m % 2 == 1:
        synthetic = float(s[-1])
        s = s[:-1]
    stored = np.concatenate([d, s])
    permuted = np.concatenate([padded_grid[0::2], padded_grid[1::2][: m - q]])
    return stored, permuted, synthetic


def forward_transform(series: GridSeries, level: int) -> WaveletCoefficients:
    """Multiresolution forward transform of a validated series."""
    n = len(series)
    schedule = LevelSchedule.for_length(n)
    if not 1 <= level <= schedule.max_level:
        raise LevelOutOfRange(f"level {level} outside 1..{schedule.max_level} for n={n}")
    coeffs = series.values.astype(np.float64, copy=True)
    grid = series.locations.astype(np.float64, copy=True)
    synthetic: dict[int, float] = {}
    for depth in range(1, level + 1):
        m = schedule.segment_size(depth)
        stored, permuted, synth = _forward_one(coeffs[:m], grid[:m], CONSTANTS)
        coeffs[:m] = stored
        grid[:m] = permuted
        if synth is not None:
            synthetic[depth] = synth
    return WaveletCoefficients(
        coefficients=coeffs,
        permuted_grid=grid,
        schedule=schedule,
        level=level,
        synthetic=synthetic,
    )


def _inverse_one(
    stored: np.ndarray,
    permuted_grid: np.ndarray,
    synthetic: float | None,
    constants: FilterConstants,
) -> tuple[np.ndarray, np.ndarray]:
    """Undo one pass; returns (values, interleaved grid)."""
    m = stored.shape[0]
    q = (m + 1) // 2
    d = stored[:q] / constants.phi
    s = stored[q:] * constants.phi
    grid = np.empty(m)
    grid[0::2] = permuted_grid[:q]
    grid[1::2] = permuted_grid[q:]
    padded_grid = grid
    if m % 2 == 1:
        s = np.append(s, (synthetic if synthetic is not None else 0.0) * constants.phi)
        padded_grid = _extrapolate(grid)
    d = d - lifting_filter(s, 1, constants.pi4, padded_grid)
    s = s - lifting_filter(d, 0, constants.pi3, padded_grid)
    d = d - lifting_filter(s, 1, constants.pi2, padded_grid)
    s = s - lifting_filter(d, 0, constants.pi1, padded_grid)
    values = np.empty(m)
    values[0::2] = d
    values[1::2] = s[: m - q]
    return values, grid


def inverse_transform(coeffs: WaveletCoefficients) -> GridSeries:
    """Reconstruct the series, coarsest pass first.

    Synthetic detail slots of odd-length segments use the stored values when
    present, zero otherwise (the linear-operator convention).
    """
    schedule = coeffs.schedule
    values = coeffs.coefficients.astype(np.float64, copy=True)
    grid = coeffs.permuted_grid.astype(np.float64, copy=True)
    for depth in range(coeffs.level, 0, -1):
        m = schedule.segment_size(depth)
        seg_values, seg_grid = _inverse_one(
            values[:m], grid[:m], coeffs.synthetic.get(depth), CONSTANTS
        )
        values[:m] = seg_values
        grid[:m] = seg_grid
    return GridSeries(grid, values)


def transposed_inverse_transform(
    vector: np.ndarray, grid: np.ndarray, level: int
) -> np.ndarray:
    """Apply the transpose of the inverse transform via lifting filters.

    ``grid`` is the original (un-permuted) location vector, exactly as the
    forward transform consumes it.  Finest pass first; each pass recurses into
    the odd-position subgrid.  Returns a coefficient-layout vector.
    """
    vector = np.asarray(vector, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    n = vector.shape[0]
    if grid.shape[0] != n:
        raise GridTooShort(f"{n} values vs {grid.shape[0]} grid points")
    schedule = LevelSchedule.for_length(n)
    if not 1 <= level <= schedule.max_level:
        raise LevelOutOfRange(f"level {level} outside 1..{schedule.max_level} for n={n}")
    out = vector.copy()
    seg_grid = grid
    c = CONSTANTS
    for depth in range(1, level + 1):
        m = schedule.segment_size(depth)
        q = (m + 1) // 2
        d = out[:m][0::2].copy()
        s = out[:m][1::2].copy()
        padded_grid = seg_grid
        if m % 2 == 1:
            s = np.append(s, 0.0)
            padded_grid = _extrapolate(seg_grid)
        d = d - trans_inv_filter(s, 0, c.pi1, padded_grid)
        s = s - trans_inv_filter(d, 1, c.pi2, padded_grid)
        d = d - trans_inv_filter(s, 0, c.pi3, padded_grid)
        s = s - trans_inv_filter(d, 1, c.pi4, padded_grid)
        d /= c.phi
        s *= c.phi
        out[:m] = np.concatenate([d, s[: m - q]])
        seg_grid = padded_grid[0::2]
    return out


def _neighbour_matrix(grid: np.ndarray, pi: float, even_rows: bool) -> np.ndarray:
    """I plus the 2*pi-scaled interpolation weights of one lifting step.

    ``even_rows=True`` fills rows at even 1-based positions with weights from
    their odd-position neighbours; ``even_rows=False`` the converse.  Boundary
    rows with a single neighbour use weight 1.
    """
    p = grid.shape[0]
    mat = np.eye(p)
    if even_rows:
        for i in range(1, p, 2):
            if i + 1 < p:
                w = (grid[i + 1] - grid[i]) / (grid[i + 1] - grid[i - 1])
                mat[i, i - 1] = 2.0 * pi * w
                mat[i, i + 1] = 2.0 * pi * (1.0 - w)
            else:
                mat[i, i - 1] = 2.0 * pi
    else:
        for i in range(0, p, 2):
            if i == 0:
                mat[0, 1] = 2.0 * pi
            else:
                w = (grid[i + 1] - grid[i]) / (grid[i + 1] - grid[i - 1])
                mat[i, i - 1] = 2.0 * pi * w
                mat[i, i + 1] = 2.0 * pi * (1.0 - w)
    return mat


def build_matrix_oracle(
    grid: np.ndarray, level: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense (forward, inverse, transposed-inverse) matrices for small n.

    Built from explicit permutation/scaling/neighbour matrices, independently
    of the filter code paths, as a validation oracle.  Odd-length segments
    enter the forward product through an explicit pad matrix and leave it
    through a drop matrix; the inverse product inserts a zero at each dropped
    slot (the linear-operator convention for synthetic coefficients).
    """
    grid = np.asarray(grid, dtype=np.float64)
    n = grid.shape[0]
    if n > 256:
        raise TooLarge("matrix oracle is restricted to n <= 256")
    schedule = LevelSchedule.for_length(n)
    if not 1 <= level <= schedule.max_level:
        raise LevelOutOfRange(f"level {level} outside 1..{schedule.max_level} for n={n}")
    c = CONSTANTS
    forward = np.eye(n)
    inverse = np.eye(n)
    seg_grid = grid.copy()
    for depth in range(1, level + 1):
        m = schedule.segment_size(depth)
        odd = m % 2 == 1
        padded_grid = _extrapolate(seg_grid) if odd else seg_grid
        p = padded_grid.shape[0]
        h1 = _neighbour_matrix(padded_grid, c.pi1, even_rows=True)
        h2 = _neighbour_matrix(padded_grid, c.pi2, even_rows=False)
        h3 = _neighbour_matrix(padded_grid, c.pi3, even_rows=True)
        h4 = _neighbour_matrix(padded_grid, c.pi4, even_rows=False)
        scale = np.diag(np.where(np.arange(p) % 2 == 0, c.phi, 1.0 / c.phi))
        shuffle = np.zeros((p, p))
        for row, col in enumerate(list(range(0, p, 2)) + list(range(1, p, 2))):
            shuffle[row, col] = 1.0
        phi_padded = shuffle @ scale @ h4 @ h3 @ h2 @ h1
        if odd:
            pad = np.zeros((p, m))
            pad[:m, :m] = np.eye(m)
            pd = ODD_PAD.phi_delta
            pad[m, m - 3] = pd[0]
            pad[m, m - 2] = pd[1]
            pad[m, m - 1] = pd[2]
            drop = np.eye(p)[:m]
            phi_seg = drop @ phi_padded @ pad
            inv_seg = drop @ np.linalg.inv(phi_padded) @ drop.T
        else:
            phi_seg = phi_padded
            inv_seg = np.linalg.inv(phi_padded)
        forward_full = np.eye(n)
        forward_full[:m, :m] = phi_seg
        inverse_full = np.eye(n)
        inverse_full[:m, :m] = inv_seg
        forward = forward_full @ forward
        inverse = inverse @ inverse_full
        seg_grid = padded_grid[0::2]
    return forward, inverse, inverse.T.copy()
