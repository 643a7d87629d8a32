"""Dreamer backends: mask construction, oracle synthesis, layout heuristic."""

import json

import numpy as np
import pytest

from dreamslab.dream import (
    DimensionMismatch,
    Dreamer,
    DreamerConfig,
    OracleUnavailable,
    make_inpaint_mask_B,
    make_inpaint_mask_M,
)
from dreamslab.geometry import camera_pose
from dreamslab.scene import CameraIntrinsics, load_world, render_gt, world_at

from conftest import mover_doc, room_doc, rng


@pytest.fixture
def dynamic_room():
    doc = room_doc(movers=[mover_doc([(0.0, 1.0, 0.0, 0.0), (2.0, 1.0, 0.8, 0.0)])])
    return load_world(json.dumps(doc))


def frames(world, K, pose_t, pose_next, t=0.0, t_next=1.0):
    gt_t = render_gt(world_at(world, t), pose_t, K)
    gt_next = render_gt(world_at(world, t_next), pose_next, K)
    return gt_t, gt_next


# ---------------------------------------------------------------- masks


def test_mask_m_matches_chebyshev_oracle():
    r = rng(11)
    fg = r.uniform(size=(12, 15)) < 0.12
    radius = 4
    got = make_inpaint_mask_M(fg, radius)
    want = np.zeros_like(fg)
    ys, xs = np.nonzero(fg)
    for i in range(12):
        for j in range(15):
            if fg[ys, xs].size and np.any(np.maximum(np.abs(ys - i), np.abs(xs - j)) <= radius):
                want[i, j] = True
    assert np.array_equal(got, want)


def test_mask_m_single_pixel_radius_one():
    fg = np.zeros((9, 9), dtype=bool)
    fg[4, 4] = True
    got = make_inpaint_mask_M(fg, 1)
    want = np.zeros((9, 9), dtype=bool)
    want[3:6, 3:6] = True
    assert np.array_equal(got, want)


def test_mask_m_empty_and_zero_radius():
    fg = np.zeros((5, 5), dtype=bool)
    assert not make_inpaint_mask_M(fg, 6).any()
    fg[2, 3] = True
    got = make_inpaint_mask_M(fg, 0)
    assert np.array_equal(got, fg)
    got[0, 0] = True  # returned mask is a copy
    assert not fg[0, 0]
    with pytest.raises(ValueError):
        make_inpaint_mask_M(fg, -1)


def test_mask_b_thresholding():
    opacity = np.array([[0.6, 0.4], [0.7, 0.1]])
    got = make_inpaint_mask_B(opacity, 0.5)
    assert np.array_equal(got, [[False, True], [False, True]])
    # boundary is strict: opacity exactly at tau is kept
    assert not make_inpaint_mask_B(np.array([[0.5]]), 0.5)[0, 0]
    with pytest.raises(ValueError):
        make_inpaint_mask_B(opacity, 1.0)


# ---------------------------------------------------------------- cross-time


def test_cross_time_oracle_exact_at_zero_noise(dynamic_room):
    K = CameraIntrinsics.with_fov90(33, 33)
    pose_t = camera_pose(-1.2, 0.0, 1.2, 0.0)
    pose_next = camera_pose(-1.1, 0.05, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose_t, pose_next)
    mask = make_inpaint_mask_M(gt_next.fg_mask > 0, 3)
    assert mask.any() and not mask.all()

    d = Dreamer(DreamerConfig(sigma=0.0, dropout=0.0), dynamic_room, K)
    out = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose_next, key=5)

    assert np.array_equal(out[~mask], gt_next.rgb[~mask])
    want_inside = render_gt(world_at(dynamic_room, 0.0), pose_next, K).rgb
    assert np.array_equal(out[mask], want_inside[mask])


def test_cross_time_shows_mover_at_old_position(dynamic_room):
    # the dream must contain the time-t scene, not the time-(t+1) scene
    K = CameraIntrinsics.with_fov90(33, 33)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose, pose)
    mask = np.ones((33, 33), dtype=bool)
    d = Dreamer(DreamerConfig(sigma=0.0), dynamic_room, K)
    out = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=0)
    assert np.array_equal(out, gt_t.rgb)
    assert not np.array_equal(out, gt_next.rgb)


def test_cross_time_noise_std_matches_sigma(dynamic_room):
    K = CameraIntrinsics.with_fov90(80, 80)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose, pose)
    clean = render_gt(world_at(dynamic_room, 0.0), pose, K).rgb
    mask = np.ones((80, 80), dtype=bool)

    d = Dreamer(DreamerConfig(sigma=0.02, dropout=0.0), dynamic_room, K)
    out = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=3)
    # clipping at 0/1 would bias the measurement, so sample mid-range pixels
    mid = (clean > 0.1) & (clean < 0.9)
    diffs = (out - clean)[mid]
    assert diffs.size >= 10_000
    assert 0.018 <= diffs.std() <= 0.022


def test_cross_time_deterministic_per_key(dynamic_room):
    K = CameraIntrinsics.with_fov90(33, 33)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose, pose)
    mask = np.ones((33, 33), dtype=bool)
    d = Dreamer(DreamerConfig(sigma=0.05), dynamic_room, K)
    a = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=7)
    b = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=7)
    c = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_cross_time_degrades_monotonically_in_sigma(dynamic_room):
    K = CameraIntrinsics.with_fov90(33, 33)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose, pose)
    clean = render_gt(world_at(dynamic_room, 0.0), pose, K).rgb
    mask = np.ones((33, 33), dtype=bool)

    errs = []
    for sigma in (0.0, 0.01, 0.05, 0.1):
        d = Dreamer(DreamerConfig(sigma=sigma), dynamic_room, K)
        per_key = [
            np.abs(d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=k) - clean).mean()
            for k in range(5)
        ]
        errs.append(np.mean(per_key))
    assert errs[0] == 0.0
    assert all(a < b for a, b in zip(errs, errs[1:]))


def test_cross_time_dropout_blacks_out_pixels(dynamic_room):
    K = CameraIntrinsics.with_fov90(33, 33)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    gt_t, gt_next = frames(dynamic_room, K, pose, pose)
    mask = np.ones((33, 33), dtype=bool)
    d = Dreamer(DreamerConfig(sigma=0.0, dropout=0.5), dynamic_room, K)
    out = d.cross_time(gt_t.rgb, gt_next.rgb, mask, 0.0, pose, key=1)
    frac_black = np.all(out == 0.0, axis=2).mean()
    assert 0.4 <= frac_black <= 0.6


def test_cross_time_layout_fill_rules():
    H, W = 6, 16
    img_next = np.zeros((H, W, 3))
    img_next[:, W // 2 :] = 1.0  # left black, right white
    img_t = img_next.copy()
    mask = np.zeros((H, W), dtype=bool)
    mask[:, 7] = True  # sources at 6 and 8 are equidistant: tie goes left
    d = Dreamer(DreamerConfig(backend="layout"))
    out = d.cross_time(img_t, img_next, mask, 0.0, None)
    assert np.array_equal(out[:, 7], np.zeros((H, 3)))

    mask = np.zeros((H, W), dtype=bool)
    mask[:, 7:9] = True
    out = d.cross_time(img_t, img_next, mask, 0.0, None)
    assert np.array_equal(out[:, 7], np.zeros((H, 3)))  # nearest is col 6
    assert np.array_equal(out[:, 8], np.ones((H, 3)))  # nearest is col 9
    assert np.array_equal(out[~mask], img_next[~mask])


def test_cross_time_layout_fully_masked_row_borrows_neighbor():
    img = np.zeros((4, 5, 3))
    img[1] = 0.3
    mask = np.zeros((4, 5), dtype=bool)
    mask[2] = True  # whole row dreamed, nearest filled row is 1
    d = Dreamer(DreamerConfig(backend="layout"))
    out = d.cross_time(img, img, mask, 0.0, None)
    assert np.allclose(out[2], 0.3)


def test_cross_time_empty_mask_identity_without_oracle():
    img = rng(0).uniform(size=(5, 5, 3))
    d = Dreamer(DreamerConfig(backend="oracle"))
    out = d.cross_time(img, img, np.zeros((5, 5), dtype=bool), 0.0, None)
    assert np.array_equal(out, img)


def test_cross_time_oracle_requires_world():
    img = np.zeros((5, 5, 3))
    mask = np.ones((5, 5), dtype=bool)
    with pytest.raises(OracleUnavailable):
        Dreamer(DreamerConfig(backend="oracle")).cross_time(img, img, mask, 0.0, None)


def test_cross_time_dimension_mismatch():
    d = Dreamer(DreamerConfig(backend="layout"))
    a = np.zeros((5, 5, 3))
    b = np.zeros((5, 6, 3))
    with pytest.raises(DimensionMismatch):
        d.cross_time(a, b, np.zeros((5, 5), dtype=bool), 0.0, None)
    with pytest.raises(DimensionMismatch):
        d.cross_time(a, a, np.zeros((4, 5), dtype=bool), 0.0, None)


# ---------------------------------------------------------------- inpainting


def test_inpaint_empty_mask_identity():
    img = rng(1).uniform(size=(6, 6, 3))
    d = Dreamer(DreamerConfig(backend="layout"))
    out = d.inpaint_view(img, np.ones((6, 6)), np.zeros((6, 6), dtype=bool), None)
    assert np.array_equal(out, img)


def test_inpaint_oracle_fills_with_static_background(dynamic_room):
    # the dreamed content must ignore movers even when one is in view
    K = CameraIntrinsics.with_fov90(33, 33)
    pose = camera_pose(-1.2, 0.0, 1.2, 0.0)
    full = render_gt(world_at(dynamic_room, 0.0), pose, K)
    assert (full.fg_mask > 0).any()

    opacity = np.ones((33, 33))
    opacity[10:20, 5:25] = 0.2
    mask_b = make_inpaint_mask_B(opacity, 0.5)
    d = Dreamer(DreamerConfig(sigma=0.0, dropout=0.0), dynamic_room, K)
    out = d.inpaint_view(full.rgb, opacity, mask_b, pose, key=2)

    statics_only = load_world(json.dumps(room_doc()))
    want = render_gt(world_at(statics_only, 0.0), pose, K).rgb
    assert np.array_equal(out[mask_b], want[mask_b])
    assert np.array_equal(out[~mask_b], full.rgb[~mask_b])


def test_inpaint_layout_splits_at_horizon():
    K = CameraIntrinsics.with_fov90(17, 17)  # cy = 8.0
    H, W = 17, 17
    rgb = np.zeros((H, W, 3))
    cols = np.arange(W) / W
    rows = np.arange(H) / H
    rgb[8:, :, 0] = cols[None, :]  # below horizon: color keyed by column
    rgb[:8, :, 1] = rows[:8, None]  # above horizon: color keyed by row
    mask = np.zeros((H, W), dtype=bool)
    mask[11:14, 4:7] = True
    mask[2:5, 9:12] = True
    d = Dreamer(DreamerConfig(backend="layout"), None, K)
    out = d.inpaint_view(rgb, np.where(mask, 0.0, 1.0), mask, None)
    assert np.allclose(out[11:14, 4:7, 0], cols[None, 4:7])
    assert np.allclose(out[2:5, 9:12, 1], rows[2:5, None])
    assert np.array_equal(out[~mask], rgb[~mask])


def test_inpaint_dimension_mismatch_and_oracle_guard():
    img = np.zeros((5, 5, 3))
    with pytest.raises(DimensionMismatch):
        Dreamer(DreamerConfig(backend="layout")).inpaint_view(
            img, np.ones((4, 5)), np.zeros((5, 5), dtype=bool), None
        )
    with pytest.raises(OracleUnavailable):
        Dreamer(DreamerConfig(backend="oracle")).inpaint_view(
            img, np.zeros((5, 5)), np.ones((5, 5), dtype=bool), None
        )


def test_dreamer_config_validation():
    with pytest.raises(ValueError):
        DreamerConfig(backend="diffusion")
    with pytest.raises(ValueError):
        DreamerConfig(sigma=-0.1)
    with pytest.raises(ValueError):
        DreamerConfig(dropout=1.0)
