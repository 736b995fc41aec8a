"""Fourier-domain kernel ridge regression over all cyclic shifts of a patch.

Conventions
-----------
* ``dft2`` is the unnormalized forward transform over the last two axes, so
  the transform of a unit impulse is all ones and the inverse carries the
  ``1/L`` factor.
* A cyclic shift by ``(m, n)`` is ``np.roll(x, (m, n), axis=(-2, -1))``.
* A kernel vector ``k`` stores ``k[l] = kappa(z, shift(x, l))`` for every shift
  ``l``; for autocorrelation ``z = x``.
* Kernels are normalized by ``L``, the total number of feature elements, so the
  Gaussian bandwidth does not depend on the channel count.

Dense matrix "oracle" helpers at the bottom exist for verification on small
grids; the tracker never calls them.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.signal import resample

from .errors import ConfigError, DimensionError, SingularityError, SizeGuardError

DIVISOR_GUARD = 1e-12
MAX_DENSE = 4096


@dataclass(frozen=True)
class Kernel:
    """Kernel spec: ``"gaussian"`` (RBF with bandwidth ``sigma``) or ``"linear"``."""

    name: str = "gaussian"
    sigma: float = 0.5

    def __post_init__(self):
        if self.name not in ("gaussian", "linear"):
            raise ConfigError(f"unknown kernel {self.name!r}")
        if self.name == "gaussian" and not self.sigma > 0:
            raise ConfigError("gaussian kernel needs sigma > 0")

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        """Direct evaluation ``kappa(a, b)`` (used by the naive oracles)."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if self.name == "linear":
            return float(np.sum(a * b)) / a.size
        d = float(np.sum((a - b) ** 2))
        return float(np.exp(-max(d, 0.0) / (self.sigma ** 2 * a.size)))


def dft2(fm: np.ndarray) -> np.ndarray:
    return np.fft.fft2(np.asarray(fm), axes=(-2, -1))


def idft2(sp: np.ndarray) -> np.ndarray:
    """Inverse transform; returns the real part (inputs here are spectra of real maps)."""
    return np.fft.ifft2(sp, axes=(-2, -1)).real


def gaussian_target(height: int, width: int, s: float) -> np.ndarray:
    """Gaussian pulse of bandwidth ``s`` peaking at shift ``(0, 0)``, cyclically wrapped."""
    if not s > 0:
        raise ValueError("bandwidth must be positive")
    dy = np.arange(height)
    dy = np.minimum(dy, height - dy).astype(np.float64)
    dx = np.arange(width)
    dx = np.minimum(dx, width - dx).astype(np.float64)
    return np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * s * s))


def target_bandwidth(height: int, width: int) -> float:
    return float(np.sqrt(height * width)) / 10.0


def _as_channels(fm: np.ndarray) -> np.ndarray:
    fm = np.asarray(fm, dtype=np.float64)
    return fm[None] if fm.ndim == 2 else fm


def kernel_crosscorrelation(z: np.ndarray, x: np.ndarray, kernel: Kernel) -> np.ndarray:
    """``k[l] = kappa(z, shift(x, l))`` for all cyclic shifts ``l``."""
    z = _as_channels(z)
    x = _as_channels(x)
    if z.shape != x.shape:
        raise DimensionError(f"shape mismatch {z.shape} vs {x.shape}")
    n = z.size
    corr = idft2(np.sum(dft2(z) * np.conj(dft2(x)), axis=0))
    if kernel.name == "linear":
        return corr / n
    d = np.maximum(np.sum(z * z) + np.sum(x * x) - 2.0 * corr, 0.0)
    return np.exp(-d / (kernel.sigma ** 2 * n))


def kernel_autocorrelation(x: np.ndarray, kernel: Kernel) -> np.ndarray:
    """``k[i] = kappa(x, shift(x, i))``; the first row of the circulant kernel matrix."""
    return kernel_crosscorrelation(x, x, kernel)


def _guarded_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    if np.min(np.abs(den)) < DIVISOR_GUARD:
        raise SingularityError("Fourier divisor below 1e-12; kernel spectrum degenerate")
    return num / den


def ridge_solve(k: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Spectrum of the dual coefficients: ``F(y) / (F(k) + lam)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return _guarded_divide(dft2(y), dft2(k) + lam)


def blended_solve(k_hat: np.ndarray, k: np.ndarray, y: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Approximate minimizer of the learned/current blended cost.

    ``F(y) / ((1 - gamma) F(k_hat) + gamma F(k) + lam)``.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    den = (1.0 - gamma) * dft2(k_hat) + gamma * dft2(k) + lam
    return _guarded_divide(dft2(y), den)


@dataclass(frozen=True)
class SpectralModel:
    """Learned appearance ``x_hat`` plus the spectrum of its dual coefficients.

    ``alpha_num``/``alpha_den`` are only kept by trackers that average the
    numerator and denominator separately; then ``alpha_f == alpha_num / alpha_den``.
    """

    x_hat: np.ndarray
    alpha_f: np.ndarray
    kernel: Kernel = Kernel()
    lam: float = 1e-4
    gamma: float = 1.0
    alpha_num: Optional[np.ndarray] = None
    alpha_den: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.x_hat.shape[-2:] != self.alpha_f.shape:
            raise DimensionError("appearance and coefficient grids differ")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha_f.shape


def train(x: np.ndarray, y: np.ndarray, kernel: Kernel = Kernel(), lam: float = 1e-4) -> SpectralModel:
    """Closed-form model on a single sample."""
    x = _as_channels(x)
    return SpectralModel(x_hat=x, alpha_f=ridge_solve(kernel_autocorrelation(x, kernel), y, lam),
                         kernel=kernel, lam=lam)


def train_blended(x_hat: np.ndarray, x: np.ndarray, y: np.ndarray, gamma: float,
                  kernel: Kernel = Kernel(), lam: float = 1e-4) -> SpectralModel:
    """Model on the learned appearance ``x_hat`` that also fits the current sample ``x``."""
    x_hat = _as_channels(x_hat)
    x = _as_channels(x)
    k_hat = kernel_autocorrelation(x_hat, kernel)
    k = k_hat if x_hat is x else kernel_autocorrelation(x, kernel)
    return SpectralModel(x_hat=x_hat, alpha_f=blended_solve(k_hat, k, y, gamma, lam),
                         kernel=kernel, lam=lam, gamma=gamma)


@dataclass(frozen=True)
class ResponseMap:
    grid: np.ndarray
    peak: tuple[int, int]
    peak_value: float

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "ResponseMap":
        idx = int(np.argmax(grid))
        r, c = divmod(idx, grid.shape[1])
        return cls(grid=grid, peak=(r, c), peak_value=float(grid[r, c]))

    @property
    def shift(self) -> tuple[int, int]:
        """Peak as a signed cyclic translation ``(dy, dx)`` in grid cells."""
        return wrap_index(self.peak, self.grid.shape)


def wrap_index(idx: tuple[int, int], shape: tuple[int, int]) -> tuple[int, int]:
    r, c = idx
    h, w = shape
    return (r - h if r > h / 2 else r, c - w if c > w / 2 else c)


def detect(model: SpectralModel, z: np.ndarray) -> ResponseMap:
    """Response of the model over every cyclic shift of ``z``."""
    z = _as_channels(z)
    if z.shape != model.x_hat.shape:
        raise DimensionError(f"patch {z.shape} does not match model {model.x_hat.shape}")
    kz = kernel_crosscorrelation(z, model.x_hat, model.kernel)
    return ResponseMap.from_grid(idft2(model.alpha_f * dft2(kz)))


def refine_shift(resp: ResponseMap, factor: int) -> tuple[int, int]:
    """Translation ``(dy, dx)`` in pixels, read off the response band-limited
    interpolated onto a grid ``factor`` times finer than the cell grid."""
    if factor <= 1:
        return resp.shift
    h, w = resp.grid.shape
    fine = resample(resample(resp.grid, h * factor, axis=0), w * factor, axis=1)
    idx = int(np.argmax(fine))
    r, c = divmod(idx, fine.shape[1])
    return wrap_index((r, c), fine.shape)


def linear_update(old, new, gamma: float):
    """Fixed learning-rate blend ``(1 - gamma) old + gamma new``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    old = np.asarray(old)
    new = np.asarray(new)
    if old.shape != new.shape:
        raise DimensionError(f"shape mismatch {old.shape} vs {new.shape}")
    return (1.0 - gamma) * old + gamma * new


def update_model(model: SpectralModel, fresh: SpectralModel, gamma: float) -> SpectralModel:
    """Blend every stored quantity of ``model`` toward ``fresh`` at rate ``gamma``."""
    kw = dict(x_hat=linear_update(model.x_hat, fresh.x_hat, gamma))
    if model.alpha_num is not None and fresh.alpha_num is not None:
        num = linear_update(model.alpha_num, fresh.alpha_num, gamma)
        den = linear_update(model.alpha_den, fresh.alpha_den, gamma)
        kw.update(alpha_num=num, alpha_den=den, alpha_f=_guarded_divide(num, den))
    else:
        kw.update(alpha_f=linear_update(model.alpha_f, fresh.alpha_f, gamma))
    return replace(model, **kw)


def train_split(x: np.ndarray, y: np.ndarray, kernel: Kernel, lam: float) -> SpectralModel:
    """Single-sample model that also keeps numerator ``F(y) F(k)`` and denominator
    ``F(k) (F(k) + lam)`` for separate averaging."""
    x = _as_channels(x)
    kf = dft2(kernel_autocorrelation(x, kernel))
    num = dft2(y) * kf
    den = kf * (kf + lam)
    return SpectralModel(x_hat=x, alpha_f=_guarded_divide(num, den), kernel=kernel, lam=lam,
                         alpha_num=num, alpha_den=den)


def expanded_weights(gamma: float, p: int) -> np.ndarray:
    """Weight of sample ``j = 1..p`` after ``p`` fixed-rate updates: ``gamma (1-gamma)^(p-j)``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if p < 1:
        raise ValueError("p must be >= 1")
    lag = p - np.arange(1, p + 1)
    return gamma * (1.0 - gamma) ** lag


# ---------------------------------------------------------------------------
# dense oracles
# ---------------------------------------------------------------------------

def circulant_from_vector(k: np.ndarray) -> np.ndarray:
    """Dense (block-)circulant matrix whose row ``i`` is ``k`` shifted by ``i``.

    Rows and columns are indexed by flattened row-major shifts.
    """
    k = np.asarray(k)
    if k.ndim == 1:
        k = k[None, :]
    h, w = k.shape
    n = h * w
    if n > MAX_DENSE:
        raise SizeGuardError(f"refusing to build a {n}x{n} dense matrix")
    r = np.repeat(np.arange(h), w)
    c = np.tile(np.arange(w), h)
    return k[(r[None, :] - r[:, None]) % h, (c[None, :] - c[:, None]) % w]


def oracle_rls_cost(alpha: np.ndarray, K: np.ndarray, y: np.ndarray, lam: float) -> float:
    alpha = np.ravel(alpha)
    y = np.ravel(y)
    if K.shape != (y.size, alpha.size):
        raise DimensionError("inconsistent oracle dimensions")
    r = y - K @ alpha
    return float(r @ r + lam * alpha @ (K @ alpha))


def oracle_blend_cost(alpha, K_hat, K, y, gamma: float, lam: float) -> float:
    return ((1.0 - gamma) * oracle_rls_cost(alpha, K_hat, y, lam)
            + gamma * oracle_rls_cost(alpha, K, y, lam))


def oracle_exact_blend(K_hat: np.ndarray, K: np.ndarray, y, gamma: float, lam: float) -> np.ndarray:
    """Exact minimizer of the blended cost by a dense linear solve."""
    y = np.ravel(y)
    eye = np.eye(y.size)
    lhs = (1.0 - gamma) * K_hat @ (K_hat + lam * eye) + gamma * K @ (K + lam * eye)
    rhs = ((1.0 - gamma) * K_hat + gamma * K) @ y
    if np.linalg.cond(lhs) > 1e14:
        raise SingularityError("blended normal operator is singular")
    return np.linalg.solve(lhs, rhs)


def oracle_ridge(K: np.ndarray, y, lam: float) -> np.ndarray:
    y = np.ravel(y)
    return np.linalg.solve(K + lam * np.eye(y.size), y)
