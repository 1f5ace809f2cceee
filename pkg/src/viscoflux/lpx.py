"""Littlewood-Paley blocks, (hybrid) Besov and Chemin-Lerner norms, paraproducts.

All norms are L2-based (``p = 2``) and live on the periodic lattice, so the
dyadic sums are finite: the partition keeps exactly the shells needed to
cover every nonzero lattice frequency.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, GridMismatchError, MeanNonZeroError
from .grid import SpectralField, as_coeffs

# inner / outer radius of the ball on which chi transitions from 1 to 0
_CHI_ONE = 3.0 / 4.0
_CHI_ZERO = 4.0 / 3.0


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    with np.errstate(over="ignore"):
        a = np.exp(-1.0 / tm)
        b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def chi(r):
    """Radial low-pass profile: 1 on r <= 3/4, 0 on r >= 4/3."""
    return smooth_step((_CHI_ZERO - np.asarray(r, dtype=float)) / (_CHI_ZERO - _CHI_ONE))


def phi(r):
    """Annulus profile ``chi(r/2) - chi(r)``, supported in 3/4 <= r <= 8/3."""
    r = np.asarray(r, dtype=float)
    return chi(0.5 * r) - chi(r)


@dataclass(frozen=True)
class BesovSpec:
    """Exponents of a (hybrid) Besov or Chemin-Lerner norm.

    ``sigma`` defaults to ``s`` (plain Besov). ``R0=None`` defers to the
    partition's threshold.
    """

    s: float
    sigma: float = None
    p_int: int = 2
    r_sum: int = 1
    R0: float = None
    q_time: float = None

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.s)
        if self.p_int != 2:
            raise ConfigError("only p = 2 Besov norms are supported")
        if self.r_sum not in (1, 2):
            raise ConfigError(f"r_sum must be 1 or 2, got {self.r_sum}")
        if self.R0 is not None and not self.R0 > 0:
            raise ConfigError("R0 must be positive")
        if self.q_time not in (None, 1, 2, math.inf):
            raise ConfigError(f"q_time must be 1, 2 or inf, got {self.q_time}")


class DyadicPartition:
    """Dyadic shells ``phi(2^-j xi)`` for ``j_min <= j <= j_max`` on a grid."""

    def __init__(self, grid, R0, j_min, j_max):
        self.grid = grid
        self.R0 = float(R0)
        self.j_min = int(j_min)
        self.j_max = int(j_max)
        self.k0 = int(math.ceil(math.log2(self.R0)))

    def __repr__(self):
        return (f"DyadicPartition({self.grid!r}, R0={self.R0:g}, "
                f"j=[{self.j_min}, {self.j_max}])")

    @property
    def shells(self):
        return np.arange(self.j_min, self.j_max + 1)

    @cached_property
    def multipliers(self):
        """``phi(2^-j |k|)`` for every shell, shape ``(J,) + hat_shape``."""
        kabs = self.grid.kabs
        return np.stack([phi(kabs * 2.0 ** -int(j)) for j in self.shells])

    @cached_property
    def _mult_sq(self):
        return self.multipliers ** 2

    def index(self, j):
        return int(j) - self.j_min

    def low_mask(self, R0=None):
        R0 = self.R0 if R0 is None else R0
        return 2.0 ** self.shells <= R0

    def chi_multiplier(self, j):
        return chi(self.grid.kabs * 2.0 ** -int(j))


def build_partition(grid, R0):
    """Pick the shell range covering every nonzero lattice frequency."""
    if not R0 > 0:
        raise ConfigError(f"R0 must be positive, got {R0}")
    kmin = 2 * np.pi / grid.L
    kmax = float(grid.kabs.max())
    # sum_{j_min..j_max} phi(2^-j r) = chi(2^-(j_max+1) r) - chi(2^-j_min r)
    j_min = math.floor(math.log2(kmin / _CHI_ZERO))
    j_max = math.ceil(math.log2(kmax / _CHI_ONE)) - 1
    if j_max - j_min + 1 < 3:
        raise ConfigError(f"grid {grid!r} hosts fewer than 3 dyadic shells")
    return DyadicPartition(grid, R0, j_min, j_max)


def partition_residual(part):
    """Max over nonzero lattice modes of |sum_j phi(2^-j xi) - 1| (and of the
    inhomogeneous form chi + sum_{j>=0} phi)."""
    nz = part.grid.kabs > 0
    total = part.multipliers.sum(axis=0)
    homo = float(np.abs(total - 1.0)[nz].max())
    js = part.shells
    inhom = chi(part.grid.kabs) + part.multipliers[js >= 0].sum(axis=0)
    return homo, float(np.abs(inhom - 1.0).max())


# ------------------------------------------------------------------ blocks


def block(f, j, part):
    """Dyadic block ``phi(2^-j D) f``; zero outside the active shell range."""
    c = as_coeffs(f, part.grid)
    if not part.j_min <= j <= part.j_max:
        return SpectralField.from_coeffs(part.grid, np.zeros_like(c))
    return SpectralField.from_coeffs(part.grid, c * part.multipliers[part.index(j)])


def low_cutoff(f, j, part, form="chi"):
    """``S_j f``, either as ``chi(2^-j D) f`` or as ``sum_{k <= j-1} block(f, k)``."""
    field = f if isinstance(f, SpectralField) else SpectralField(part.grid, f)
    field.require_mean_zero()
    c = field.coeffs
    if form == "chi":
        m = part.chi_multiplier(j)
        m = np.where(part.grid.kabs > 0, m, 0.0)
    elif form == "sum":
        upto = min(int(j) - 1, part.j_max)
        if upto < part.j_min:
            m = np.zeros(part.grid.hat_shape)
        else:
            m = part.multipliers[: part.index(upto) + 1].sum(axis=0)
    else:
        raise ValueError(f"unknown form {form!r}")
    return SpectralField.from_coeffs(part.grid, c * m)


def shell_norms(f, part):
    """L2 norms of every block of ``f`` (all components together)."""
    return shell_norms_hat(as_coeffs(f, part.grid), part)


def _check_mean(f, part, rtol=1e-10):
    c = as_coeffs(f, part.grid)
    zm = np.abs(part.grid.zero_mode(c))
    scale = max(float(np.abs(c).max()), 1e-300)
    if np.any(zm > rtol * scale):
        raise MeanNonZeroError()


def weights(spec, part):
    """Per-shell weights ``2^{js}`` (low) / ``2^{j sigma}`` (high)."""
    R0 = part.R0 if spec.R0 is None else spec.R0
    js = part.shells.astype(float)
    low = part.low_mask(R0)
    return np.where(low, 2.0 ** (js * spec.s), 2.0 ** (js * spec.sigma)), low


def _sum_blocks(terms, r):
    if r == 1:
        return float(np.sum(terms))
    return float(np.sqrt(np.sum(terms ** 2)))


def besov_norm(f, spec, part, check_mean=True):
    """Homogeneous ``B^s_{2,r}`` norm (``spec.sigma`` ignored)."""
    if check_mean:
        _check_mean(f, part)
    n = shell_norms(f, part)
    return _sum_blocks(2.0 ** (part.shells * float(spec.s)) * n, spec.r_sum)


def hybrid_norm(f, spec, part, check_mean=True):
    """Hybrid norm: weight ``2^{ks}`` on shells with 2^k <= R0, ``2^{k sigma}`` above."""
    if check_mean:
        _check_mean(f, part)
    w, _ = weights(spec, part)
    return float(np.sum(w * shell_norms(f, part)))


def hybrid_split(f, spec, part, check_mean=True):
    """(low part, high part) of the hybrid norm."""
    if check_mean:
        _check_mean(f, part)
    w, low = weights(spec, part)
    t = w * shell_norms(f, part)
    return float(t[low].sum()), float(t[~low].sum())


def temporal_block_norms(shell_series, times, q):
    """Per-block temporal L^q norms of a ``(T, J)`` array of shell norms."""
    shell_series = np.asarray(shell_series, dtype=float)
    if q == math.inf:
        return shell_series.max(axis=0)
    if len(times) < 2:
        raise ValueError("at least 2 samples are needed for a temporal L^q norm, q < inf")
    if q == 1:
        return np.trapezoid(shell_series, times, axis=0)
    if q == 2:
        return np.sqrt(np.trapezoid(shell_series ** 2, times, axis=0))
    raise ValueError(f"unsupported q_time {q}")


def chemin_lerner_norm(series, times, spec, part, check_mean=True):
    """``L~^q_T`` hybrid norm: temporal L^q per block, then the weighted block sum."""
    q = math.inf if spec.q_time is None else spec.q_time
    if check_mean:
        for f in series:
            _check_mean(f, part)
    shells = np.array([shell_norms(f, part) for f in series])
    w, _ = weights(spec, part)
    return float(np.sum(w * temporal_block_norms(shells, times, q)))


def interpolation_violations(shell_series, times, s_mid, part, rtol=1e-12):
    """Count shells where the per-block form of
    ``||f||_{L~2 B^{s}} <= ||f||_{L~inf B^{s-1}}^(1/2) ||f||_{L1 B^{s+1}}^(1/2)``
    fails; also returns whether the summed (r=1) inequality holds."""
    inf = temporal_block_norms(shell_series, times, math.inf)
    one = temporal_block_norms(shell_series, times, 1)
    two = temporal_block_norms(shell_series, times, 2)
    js = part.shells.astype(float)
    lhs = 2.0 ** (js * s_mid) * two
    a = 2.0 ** (js * (s_mid - 1)) * inf
    b = 2.0 ** (js * (s_mid + 1)) * one
    rhs = np.sqrt(a * b)
    violations = int(np.sum(lhs > rhs * (1 + rtol) + 1e-300))
    summed_ok = lhs.sum() <= np.sqrt(a.sum() * b.sum()) * (1 + rtol) + 1e-300
    return violations, bool(summed_ok)


def l2_equivalence_constants(part, samples=20001):
    """(c1, c2) with ``c1 ||f|| <= ||f||_{B^0_{2,2}} <= c2 ||f||`` for this phi."""
    r = np.linspace(1.0, 2.0, samples)
    js = np.arange(-3, 4)
    s = sum(phi(r * 2.0 ** -int(j)) ** 2 for j in js)
    return float(np.sqrt(s.min())), float(np.sqrt(s.max()))


# ------------------------------------------------------------- products


def _pad_index(n, N, M):
    h = N // 2
    full = np.r_[0:h, M - h:M]
    src_full = np.r_[0:h, h:N]
    half = np.arange(h + 1)
    dst = np.ix_(*([full] * (n - 1) + [half]))
    src = np.ix_(*([src_full] * (n - 1) + [half]))
    return src, dst


def product_hat(fc, gc, grid):
    """Alias-free product of two scalar coefficient arrays (3/2-rule padding).

    Input Nyquist modes are dropped and the result is truncated back to the
    grid with its Nyquist planes zeroed.
    """
    n, N = grid.n, grid.N
    M = 3 * N // 2
    src, dst = _pad_index(n, N, M)
    pad_shape = (M,) * (n - 1) + (M // 2 + 1,)
    scale = (M / N) ** n

    def up(c):
        c = np.where(grid.nyquist, 0.0, c)
        big = np.zeros(pad_shape, dtype=complex)
        big[dst] = c[src]
        return np.fft.irfftn(big, s=(M,) * n, axes=tuple(range(n))) * scale

    h = np.fft.rfftn(up(fc) * up(gc)) / scale
    out = h[dst]
    out[grid.nyquist] = 0.0
    return out


def product(f, g, grid):
    """Dealiased pointwise product of two scalar fields."""
    return SpectralField.from_coeffs(grid, product_hat(as_coeffs(f, grid), as_coeffs(g, grid), grid))


def _blocks_hat(c, part):
    return c[None] * part.multipliers


def paraproduct(f, g, part):
    """Bony paraproduct ``T_f g = sum_k S_{k-1} f * block(g, k)``."""
    grid = part.grid
    fc, gc = _bony_inputs(f, g, part)
    bf = _blocks_hat(fc, part)
    bg = _blocks_hat(gc, part)
    low = np.cumsum(bf, axis=0)  # low[i] = sum_{k' <= j_min + i} block(f, k')
    out = np.zeros(grid.hat_shape, dtype=complex)
    for i in range(2, len(part.shells)):
        out += product_hat(low[i - 2], bg[i], grid)
    return SpectralField.from_coeffs(grid, out)


def remainder(f, g, part):
    """Bony remainder ``R(f, g) = sum_{|k-k'| <= 1} block(f, k) * block(g, k')``."""
    grid = part.grid
    fc, gc = _bony_inputs(f, g, part)
    bf = _blocks_hat(fc, part)
    bg = _blocks_hat(gc, part)
    J = len(part.shells)
    out = np.zeros(grid.hat_shape, dtype=complex)
    for i in range(J):
        near = bg[max(i - 1, 0): i + 2].sum(axis=0)
        out += product_hat(bf[i], near, grid)
    return SpectralField.from_coeffs(grid, out)


def _bony_inputs(f, g, part):
    grid = part.grid
    for h in (f, g):
        if isinstance(h, SpectralField) and h.grid != grid:
            raise GridMismatchError(f"field grid {h.grid!r} differs from partition grid {grid!r}")
    fc, gc = as_coeffs(f, grid), as_coeffs(g, grid)
    for c in (fc, gc):
        if c.ndim != grid.n:
            raise ValueError("paraproducts are defined for scalar fields")
        zm = abs(grid.zero_mode(c))
        if zm > 1e-10 * max(float(np.abs(c).max()), 1e-300):
            raise MeanNonZeroError("paraproduct inputs must be mean-zero")
    return fc, gc


# ------------------------------------------------------------- reports


def norm_report_rows(field_id, f, spec, part):
    """Rows ``(field_id, j, shell_norm, weight, side)`` of a hybrid norm."""
    w, low = weights(spec, part)
    n = shell_norms(f, part)
    return [(field_id, int(j), float(nj), float(wj), "low" if lo else "high")
            for j, nj, wj, lo in zip(part.shells, n, w, low)]


def product_ratios(grid, part, pairs, seed, kind="besov", s=None, t=None, band=None):
    """Ratios ``||fg|| / (||f|| ||g||)`` over a random corpus of band-limited pairs.

    ``kind="besov"`` uses ``B^{s+t-n/2}_{2,1}`` over ``B^s x B^t``;
    ``kind="hybrid"`` uses ``B^{n/2-1}_{2,1}`` over the hybrid norms
    ``B^{n/2,n/2-1} x B^{n/2-1,n/2}``. The mean of ``fg`` is dropped.
    """
    n = grid.n
    rng = np.random.default_rng(seed)
    band = band or (1, grid.N // 4)
    if kind == "besov":
        s = n / 2 if s is None else s
        t = n / 2 - 1 if t is None else t
        sf, sg, sp = BesovSpec(s), BesovSpec(t), BesovSpec(s + t - n / 2)
    elif kind == "hybrid":
        sf = BesovSpec(n / 2, n / 2 - 1)
        sg = BesovSpec(n / 2 - 1, n / 2)
        sp = BesovSpec(n / 2 - 1)
    else:
        raise ValueError(kind)
    out = np.empty(pairs)
    for i in range(pairs):
        slope_f, slope_g = rng.uniform(0.0, 2.0, size=2)
        f = grid.random_field(rng, band=band, slope=slope_f)
        g = grid.random_field(rng, band=band, slope=slope_g)
        fc, gc = grid.fft(f), grid.fft(g)
        pc = product_hat(fc, gc, grid)
        pc[(0,) * n] = 0.0
        num = float(np.sum(_weights_for(sp, part) * shell_norms_hat(pc, part)))
        den = (float(np.sum(_weights_for(sf, part) * shell_norms_hat(fc, part)))
               * float(np.sum(_weights_for(sg, part) * shell_norms_hat(gc, part))))
        out[i] = num / den
    return out


def _weights_for(spec, part):
    return weights(spec, part)[0]


def shell_norms_hat(c, part):
    g = part.grid
    pw = g.power(c)
    scale = g.volume / float(g.N) ** (2 * g.n)
    sq = np.tensordot(part._mult_sq, pw, axes=(tuple(range(1, pw.ndim + 1)),
                                               tuple(range(pw.ndim))))
    return np.sqrt(np.maximum(sq * scale, 0.0))
