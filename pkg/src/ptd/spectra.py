"""2-D Fourier power spectra and radial binning."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ScoreError

# ITU-R BT.601 luma weights, applied to [0, 255] channel intensities.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """Collapse an HxW or HxWxC array to float64 luma in [0, 255]."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] >= 3:
        r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
        w_r, w_g, w_b = LUMA_WEIGHTS
        return w_r * r + w_g * g + w_b * b
    if arr.ndim == 3 and arr.shape[2] == 1:
        return arr[..., 0]
    raise ScoreError(f"cannot convert array of shape {arr.shape} to grayscale")


def load_grayscale(path, resize_to: int | None = None) -> np.ndarray:
    """Decode an image file to a luma array, optionally bilinear-resized."""
    try:
        img = Image.open(path)
        img.load()
    except OSError as exc:
        raise ScoreError(f"cannot decode image {path}: {exc}") from exc
    if img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    if resize_to is not None:
        img = img.resize((resize_to, resize_to), Image.BILINEAR)
    return to_grayscale(np.asarray(img))


def power_spectrum_2d(gray: np.ndarray) -> np.ndarray:
    """Centered 2-D power spectrum (squared DFT magnitudes)."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or min(gray.shape) < 2:
        raise ScoreError(f"need a 2-D image of side >= 2, got {gray.shape}")
    spectrum = np.fft.fftshift(np.fft.fft2(gray))
    return np.abs(spectrum) ** 2


def radial_bin_indices(shape: tuple[int, int]) -> tuple[np.ndarray, int]:
    """Integer-rounded radius of each centered-spectrum cell, plus k_max."""
    h, w = shape
    cy, cx = h // 2, w // 2  # zero-frequency cell after fftshift
    yy, xx = np.ogrid[:h, :w]
    radius = np.rint(np.hypot(yy - cy, xx - cx)).astype(np.int64)
    k_max = min(h, w) // 2
    return radius, k_max


def radial_power_spectrum(gray: np.ndarray) -> np.ndarray:
    """Radially binned spectral energy P(k), k = 0..k_max.

    Bin k sums the squared magnitudes of all frequency components whose
    integer-rounded distance from the zero-frequency center equals k;
    components beyond k_max (the corner wedges) are discarded.
    """
    power = power_spectrum_2d(gray)
    radius, k_max = radial_bin_indices(power.shape)
    mask = radius <= k_max
    bins = np.bincount(radius[mask].ravel(), weights=power[mask].ravel(),
                       minlength=k_max + 1)
    return bins


def frequency_cutoff(bins: np.ndarray) -> int:
    """Smallest c with cumulative energy through bin c >= half the total."""
    bins = np.asarray(bins, dtype=np.float64)
    total = bins.sum()
    if not total > 0:
        raise ScoreError("zero total spectral energy")
    cumulative = np.cumsum(bins)
    return int(np.searchsorted(cumulative, total / 2.0, side="left"))


def mean_log_power_map(images, resize_to: int | None = 224):
    """Mean of log(1 + power) maps plus the mean raw radial profile.

    ``images`` yields grayscale arrays or file paths.  All spectra must
    share one shape; pass ``resize_to`` to reconcile mixed sizes (paths
    only; arrays are used as-is).
    """
    mean_map = None
    profile_sum = None
    n = 0
    for item in images:
        if isinstance(item, np.ndarray):
            gray = item
        else:
            gray = load_grayscale(item, resize_to=resize_to)
        power = power_spectrum_2d(gray)
        if mean_map is None:
            mean_map = np.log1p(power)
            profile_sum = radial_power_spectrum_from_power(power)
        else:
            if power.shape != mean_map.shape:
                raise ScoreError(
                    "mixed image sizes; enable resizing to compare spectra")
            mean_map += np.log1p(power)
            profile_sum += radial_power_spectrum_from_power(power)
        n += 1
    if n == 0:
        raise ScoreError("mean power spectrum needs at least one image")
    return mean_map / n, profile_sum / n, n


def radial_power_spectrum_from_power(power: np.ndarray) -> np.ndarray:
    radius, k_max = radial_bin_indices(power.shape)
    mask = radius <= k_max
    return np.bincount(radius[mask].ravel(), weights=power[mask].ravel(),
                       minlength=k_max + 1)


def spectral_distance(profile_a: np.ndarray, profile_b: np.ndarray) -> float:
    """L2 distance between sum-normalized radial profiles."""
    a = np.asarray(profile_a, dtype=np.float64)
    b = np.asarray(profile_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ScoreError(f"profile length mismatch: {a.shape} vs {b.shape}")
    if not (a.sum() > 0 and b.sum() > 0):
        raise ScoreError("cannot normalize a zero-energy profile")
    return float(np.linalg.norm(a / a.sum() - b / b.sum()))
