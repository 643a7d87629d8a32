"""Photometric losses: L1 + (1 - SSIM) blend used by localization and map refinement.

SSIM uses a 7x7 uniform window and is evaluated only where the window fits
entirely inside the image, so results are exactly reproducible with a naive
sliding-window implementation.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter

from .splat import RenderConfig


class DimensionMismatch(ValueError):
    pass


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise DimensionMismatch(f"expected HxW or HxWxC images, got shape {a.shape}")
    return a, b


def ssim(img_a: np.ndarray, img_b: np.ndarray, cfg: RenderConfig | None = None, mask: np.ndarray | None = None) -> float:
    """Mean local SSIM, channel-averaged. `mask` selects window centers to keep."""
    cfg = cfg or RenderConfig()
    a, b = _check_pair(img_a, img_b)
    win = cfg.ssim_window
    h = win // 2
    H, W, _ = a.shape
    if H < win or W < win:
        raise ValueError(f"images must be at least {win}x{win} for SSIM")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (H, W):
            raise DimensionMismatch(f"mask shape {mask.shape} does not match image {(H, W)}")
        mask = mask[h : H - h, h : W - h]
        if not mask.any():
            raise ValueError("mask leaves no valid SSIM windows")

    c1, c2 = cfg.ssim_c1, cfg.ssim_c2
    vals = []
    for c in range(a.shape[2]):
        x = a[:, :, c]
        y = b[:, :, c]
        mu_x = uniform_filter(x, win)
        mu_y = uniform_filter(y, win)
        xx = uniform_filter(x * x, win)
        yy = uniform_filter(y * y, win)
        xy = uniform_filter(x * y, win)
        var_x = xx - mu_x * mu_x
        var_y = yy - mu_y * mu_y
        cov = xy - mu_x * mu_y
        smap = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
        smap = smap[h : H - h, h : W - h]  # windows fully inside the image
        vals.append(float(smap[mask].mean()) if mask is not None else float(smap.mean()))
    return float(np.mean(vals))


def l1_loss(img_a: np.ndarray, img_b: np.ndarray, mask: np.ndarray | None = None) -> float:
    a, b = _check_pair(img_a, img_b)
    diff = np.abs(a - b)
    if mask is None:
        return float(diff.mean())
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape[:2]:
        raise DimensionMismatch(f"mask shape {mask.shape} does not match image {a.shape[:2]}")
    if not mask.any():
        raise ValueError("mask leaves no pixels for the L1 term")
    return float(diff[mask].mean())


def photometric_loss(
    img_a: np.ndarray,
    img_b: np.ndarray,
    cfg: RenderConfig | None = None,
    mask: np.ndarray | None = None,
) -> float:
    """alpha * L1 + (1 - alpha) * (1 - SSIM); mask restricts both terms."""
    cfg = cfg or RenderConfig()
    w = cfg.loss_alpha
    l1 = l1_loss(img_a, img_b, mask) if w > 0.0 else 0.0
    s = ssim(img_a, img_b, cfg, mask) if w < 1.0 else 1.0
    return w * l1 + (1.0 - w) * (1.0 - s)
