"""Dreamer backends: cross-time view synthesis and novel-view inpainting.

Both operations share one contract: pixels outside the mask are returned
bit-exactly from the input; only masked pixels are synthesized. The oracle
backend consults the simulator ground truth (optionally corrupted by Gaussian
pixel noise and dropout, the stand-ins for generation error); the layout
heuristic extends boundary colors and exists to measure how SLAM degrades when
dreams are poor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import maximum_filter

from .geometry import PoseSE3
from .rng import STREAM_DREAM_CROSS, STREAM_DREAM_INPAINT, stream_rng
from .scene import CameraIntrinsics, WorldSpec, WorldState, render_gt, world_at


class OracleUnavailable(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass
class DreamerConfig:
    backend: str = "oracle"  # "oracle" | "layout"
    sigma: float = 0.02  # per-channel Gaussian pixel noise inside the mask
    dropout: float = 0.0  # fraction of dreamed pixels blacked out
    dilation_px: int = 6
    tau_opacity: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.backend not in ("oracle", "layout"):
            raise ValueError(f"unknown dreamer backend: {self.backend!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")


def make_inpaint_mask_M(fg_mask: np.ndarray, radius: int) -> np.ndarray:
    """Square dilation of the foreground mask: true within Chebyshev distance radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    fg = np.asarray(fg_mask, dtype=bool)
    if radius == 0:
        return fg.copy()
    return maximum_filter(fg, size=2 * radius + 1, mode="constant", cval=False)


def make_inpaint_mask_B(opacity: np.ndarray, tau_opacity: float = 0.5) -> np.ndarray:
    if not (0.0 < tau_opacity < 1.0):
        raise ValueError("tau_opacity must be in (0, 1)")
    return np.asarray(opacity) < tau_opacity


def _corrupt(img: np.ndarray, sigma: float, dropout: float, rng: np.random.Generator) -> np.ndarray:
    out = img
    if sigma > 0:
        out = out + rng.normal(0.0, sigma, size=img.shape)
    if dropout > 0:
        drop = rng.uniform(size=img.shape[:2]) < dropout
        out = np.where(drop[:, :, None], 0.0, out)
    return np.clip(out, 0.0, 1.0)


def _nearest_fill_rows(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill masked pixels from the nearest unmasked pixel in the same row (tie: left)."""
    H, W = mask.shape
    out = img.copy()
    cols = np.arange(W)
    unfilled_rows = []
    for i in range(H):
        free = cols[~mask[i]]
        if free.size == 0:
            unfilled_rows.append(i)
            continue
        need = cols[mask[i]]
        pos = np.searchsorted(free, need)
        left = free[np.clip(pos - 1, 0, free.size - 1)]
        right = free[np.clip(pos, 0, free.size - 1)]
        pick = np.where(np.abs(need - left) <= np.abs(need - right), left, right)
        out[i, need] = img[i, pick]
    if unfilled_rows:
        # a fully masked row borrows each pixel from the nearest filled row
        filled = np.array([i for i in range(H) if i not in set(unfilled_rows)])
        if filled.size == 0:
            return out
        for i in unfilled_rows:
            j = filled[np.argmin(np.abs(filled - i))]
            out[i] = out[j]
    return out


def _nearest_fill_cols(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return _nearest_fill_rows(img.transpose(1, 0, 2), mask.T).transpose(1, 0, 2)


class Dreamer:
    """Dispatches the two synthesis operations to the configured backend.

    ctx for the oracle backend is the simulator world plus camera intrinsics;
    omit both for offline logs and the oracle raises OracleUnavailable.
    """

    def __init__(self, cfg: DreamerConfig, world: WorldSpec | None = None, K: CameraIntrinsics | None = None):
        self.cfg = cfg
        self.world = world
        self.K = K

    def _require_oracle(self):
        if self.world is None or self.K is None:
            raise OracleUnavailable("oracle dreamer needs a simulator world and intrinsics")

    def cross_time(
        self,
        img_t: np.ndarray,
        img_next: np.ndarray,
        mask_m: np.ndarray,
        time_t: float,
        pose_next: PoseSE3,
        key: int = 0,
    ) -> np.ndarray:
        """Scene at time t seen from the (t+1) camera; equals img_next outside mask_m."""
        img_t = np.asarray(img_t, dtype=np.float64)
        img_next = np.asarray(img_next, dtype=np.float64)
        mask_m = np.asarray(mask_m, dtype=bool)
        if img_t.shape != img_next.shape or mask_m.shape != img_next.shape[:2]:
            raise DimensionMismatch("cross-time inputs must share dimensions")
        if not mask_m.any():
            return img_next.copy()
        if self.cfg.backend == "oracle":
            self._require_oracle()
            state = world_at(self.world, time_t)
            gt = render_gt(state, pose_next, self.K)
            rng = stream_rng(self.cfg.seed, STREAM_DREAM_CROSS, key)
            fill = _corrupt(gt.rgb, self.cfg.sigma, self.cfg.dropout, rng)
        else:
            fill = _nearest_fill_rows(img_next, mask_m)
        out = img_next.copy()
        out[mask_m] = fill[mask_m]
        return out

    def inpaint_depth(
        self,
        depth: np.ndarray,
        mask_b: np.ndarray,
        pose: PoseSE3,
        key: int = 0,
    ) -> np.ndarray:
        """Depth for the pixels inpainted by inpaint_view, used to back-project them.

        The oracle reads the static-background depth; the layout backend extends
        the depth of the nearest filled pixel with the same row/column split as
        its colors. Pixels whose fill source is itself unobserved stay inf.
        """
        depth = np.asarray(depth, dtype=np.float64)
        mask_b = np.asarray(mask_b, dtype=bool)
        if mask_b.shape != depth.shape:
            raise DimensionMismatch("inpaint depth inputs must share dimensions")
        if not mask_b.any():
            return depth.copy()
        if self.cfg.backend == "oracle":
            self._require_oracle()
            bg_only = WorldState(spec=replace(self.world, movers=[]), time=0.0)
            fill = render_gt(bg_only, pose, self.K).depth
        else:
            d3 = depth[:, :, None]
            horizon = int(round(self.K.cy)) if self.K is not None else depth.shape[0] // 2
            below = np.zeros_like(mask_b)
            below[horizon:] = True
            fill = np.where(
                below,
                _nearest_fill_cols(d3, mask_b | ~below)[:, :, 0],
                _nearest_fill_rows(d3, mask_b | below)[:, :, 0],
            )
        out = depth.copy()
        out[mask_b] = fill[mask_b]
        return out

    def inpaint_view(
        self,
        rgb: np.ndarray,
        opacity: np.ndarray,
        mask_b: np.ndarray,
        pose: PoseSE3,
        key: int = 0,
    ) -> np.ndarray:
        """Fill low-opacity pixels of a rendered static-background view."""
        rgb = np.asarray(rgb, dtype=np.float64)
        mask_b = np.asarray(mask_b, dtype=bool)
        if mask_b.shape != rgb.shape[:2] or np.asarray(opacity).shape != rgb.shape[:2]:
            raise DimensionMismatch("inpaint inputs must share dimensions")
        if not mask_b.any():
            return rgb.copy()
        if self.cfg.backend == "oracle":
            self._require_oracle()
            bg_only = WorldState(spec=replace(self.world, movers=[]), time=0.0)
            gt = render_gt(bg_only, pose, self.K)
            rng = stream_rng(self.cfg.seed, STREAM_DREAM_INPAINT, key)
            fill = _corrupt(gt.rgb, self.cfg.sigma, self.cfg.dropout, rng)
        else:
            # floor/wall split: below the horizon row surfaces run along columns,
            # above it along rows
            horizon = int(round(self.K.cy)) if self.K is not None else rgb.shape[0] // 2
            below = np.zeros_like(mask_b)
            below[horizon:] = True
            fill = _nearest_fill_cols(rgb, mask_b | ~below)
            fill_rows = _nearest_fill_rows(rgb, mask_b | below)
            fill = np.where(below[:, :, None], fill, fill_rows)
        out = rgb.copy()
        out[mask_b] = fill[mask_b]
        return out
