import numpy as np
import pytest

from dreamslab.geometry import PoseSE3, quat_normalize, rotvec_to_quat
from dreamslab.localize import (
    CorrespondenceSet,
    DegenerateGeometry,
    RefineConfig,
    RenderEmpty,
    TooFewPairs,
    map_in_camera_frame,
    refine_pose_photometric,
    svd_align,
)
from dreamslab.losses import photometric_loss
from dreamslab.scene import CameraIntrinsics
from dreamslab.splat import GaussianMap, RenderConfig, rasterize

from helpers import map_from_gaussians, random_gaussians


def random_pose(rng, rot_scale=np.pi, t_scale=2.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(-rot_scale, rot_scale)
    return PoseSE3(rotvec_to_quat(ang * axis), rng.uniform(-t_scale, t_scale, size=3))


def make_pairs(rng, pose, n=50, noise=0.0):
    p_bar = rng.uniform(-2, 2, size=(n, 3))
    p = p_bar @ pose.R.T + pose.t
    if noise:
        p = p + rng.normal(0, noise, size=p.shape)
    return CorrespondenceSet(p, p_bar, np.ones(n))


class TestSvdAlign:
    def test_identity_on_fixed_points(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
        delta, rms = svd_align(CorrespondenceSet(pts, pts, np.ones(4)))
        assert delta.rotation_angle_to(PoseSE3.identity()) < 1e-12
        assert np.linalg.norm(delta.t) < 1e-12
        assert rms < 1e-12

    def test_pure_translation(self):
        rng = np.random.default_rng(0)
        p_bar = rng.uniform(-1, 1, size=(10, 3))
        p = p_bar + np.array([1.0, 2.0, 3.0])
        delta, _ = svd_align(CorrespondenceSet(p, p_bar, np.ones(10)))
        assert np.allclose(delta.t, [1, 2, 3], atol=1e-12)
        assert delta.rotation_angle_to(PoseSE3.identity()) < 1e-12

    def test_recovers_100_random_transforms(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            pose = random_pose(rng)
            delta, rms = svd_align(make_pairs(rng, pose))
            assert delta.rotation_angle_to(pose) < 1e-9
            assert np.linalg.norm(delta.t - pose.t) < 1e-9
            assert rms < 1e-9

    def test_weighted_alignment_ignores_zero_weight_outliers(self):
        rng = np.random.default_rng(2)
        pose = random_pose(rng)
        pairs = make_pairs(rng, pose, n=30)
        p = pairs.p.copy()
        p[:5] += 10.0  # corrupt five pairs, then weight them out
        w = np.ones(30)
        w[:5] = 0.0
        delta, _ = svd_align(CorrespondenceSet(p, pairs.p_bar, w))
        assert delta.rotation_angle_to(pose) < 1e-9
        assert np.linalg.norm(delta.t - pose.t) < 1e-9

    def test_gauge_conjugation(self):
        rng = np.random.default_rng(3)
        pose = random_pose(rng)
        pairs = make_pairs(rng, pose)
        gauge = random_pose(rng)
        conj = CorrespondenceSet(
            pairs.p @ gauge.R.T + gauge.t,
            pairs.p_bar @ gauge.R.T + gauge.t,
            pairs.weights,
        )
        delta, _ = svd_align(pairs)
        delta_conj, _ = svd_align(conj)
        want = gauge @ delta @ gauge.inverse()
        assert delta_conj.rotation_angle_to(want) < 1e-9
        assert np.linalg.norm(delta_conj.t - want.t) < 1e-9

    def test_stochastic_optimality(self):
        rng = np.random.default_rng(4)
        pose = random_pose(rng)
        pairs = make_pairs(rng, pose, noise=0.01)
        _, best_rms = svd_align(pairs)

        def rms_of(cand):
            res = pairs.p - (pairs.p_bar @ cand.R.T + cand.t)
            return float(np.sqrt((res * res).sum(axis=1).mean()))

        for _ in range(1000):
            assert best_rms <= rms_of(random_pose(rng)) + 1e-12

    def test_too_few_pairs(self):
        pts = np.zeros((2, 3))
        with pytest.raises(TooFewPairs):
            svd_align(CorrespondenceSet(pts, pts, np.ones(2)))

    def test_collinear_points_degenerate(self):
        t = np.linspace(0, 1, 10)[:, None]
        line = t * np.array([1.0, 2.0, 0.5])
        with pytest.raises(DegenerateGeometry):
            svd_align(CorrespondenceSet(line, line, np.ones(10)))

    def test_coincident_points_degenerate(self):
        pts = np.ones((5, 3))
        with pytest.raises(DegenerateGeometry):
            svd_align(CorrespondenceSet(pts, pts, np.ones(5)))

    def test_rejects_nonfinite(self):
        pts = np.zeros((4, 3))
        bad = pts.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            CorrespondenceSet(bad, pts, np.ones(4))


def textured_scene(rng, n=60):
    """A color-varied splat cloud in front of the origin camera."""
    gs = random_gaussians(rng, n, center_lo=(-1.5, -1.5, 1.5), center_hi=(1.5, 1.5, 5.0))
    return map_from_gaussians(gs)


def cam(n=48):
    return CameraIntrinsics(width=n, height=n, fx=n / 2, fy=n / 2, cx=(n - 1) / 2, cy=(n - 1) / 2)


class TestRefine:
    def test_already_at_optimum(self):
        rng = np.random.default_rng(5)
        gmap = textured_scene(rng)
        K = cam()
        true_delta = PoseSE3.identity()
        target = rasterize(gmap, true_delta.inverse(), K).rgb
        refined, loss, iters = refine_pose_photometric(true_delta, gmap, target, K)
        assert refined.rotation_angle_to(true_delta) < 1e-6
        assert np.linalg.norm(refined.t - true_delta.t) < 1e-6
        assert loss < 1e-4

    def test_perturbed_seed_recovers(self):
        rng = np.random.default_rng(6)
        gmap = textured_scene(rng)
        K = cam()
        true_delta = PoseSE3.identity()
        target = rasterize(gmap, true_delta.inverse(), K).rgb
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        init = PoseSE3(rotvec_to_quat(np.deg2rad(2.0) * axis), np.array([0.02, -0.015, 0.01]))
        refined, loss, _ = refine_pose_photometric(init, gmap, target, K)
        assert refined.rotation_angle_to(true_delta) < np.deg2rad(0.2)
        assert np.linalg.norm(refined.t - true_delta.t) < 5e-3

    def test_loss_never_increases(self):
        rng = np.random.default_rng(7)
        gmap = textured_scene(rng)
        K = cam()
        target = rasterize(gmap, PoseSE3.identity().inverse(), K).rgb
        init = PoseSE3(rotvec_to_quat(np.array([0.0, 0.02, 0.01])), np.array([0.03, 0.0, -0.02]))
        init_loss = photometric_loss(target, rasterize(gmap, init.inverse(), K).rgb)
        _, final_loss, _ = refine_pose_photometric(init, gmap, target, K)
        assert final_loss <= init_loss + 1e-15

    def test_render_empty_raises(self):
        gmap = GaussianMap()
        K = cam()
        with pytest.raises(RenderEmpty):
            refine_pose_photometric(PoseSE3.identity(), gmap, np.zeros((48, 48, 3)), K)

    def test_gauss_newton_step_is_descent_direction(self):
        # the normal-equation step must oppose the numeric gradient of 0.5*||r||^2
        rng = np.random.default_rng(8)
        gmap = textured_scene(rng, n=40)
        K = cam(32)
        target = rasterize(gmap, PoseSE3.identity().inverse(), K).rgb

        def residual(delta):
            return (rasterize(gmap, delta.inverse(), K).rgb - target).ravel()

        h = 1e-4
        for trial in range(10):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            pose = PoseSE3(
                rotvec_to_quat(rng.uniform(0.005, 0.03) * axis),
                rng.uniform(-0.03, 0.03, size=3),
            )
            r = residual(pose)
            J = np.empty((r.size, 6))
            grad = np.empty(6)
            for k in range(6):
                e = np.zeros(6)
                e[k] = h
                rp = residual(PoseSE3.from_twist(e) @ pose)
                rm = residual(PoseSE3.from_twist(-e) @ pose)
                J[:, k] = (rp - rm) / (2 * h)
                grad[k] = (0.5 * rp @ rp - 0.5 * rm @ rm) / (2 * h)
            if np.linalg.norm(grad) < 1e-12:
                continue
            step = np.linalg.solve(J.T @ J + 1e-3 * np.eye(6), -(J.T @ r))
            assert step @ grad < 0.0


class TestMapInCameraFrame:
    def test_roundtrip_render_matches(self):
        rng = np.random.default_rng(9)
        gs = random_gaussians(rng, 25)
        gmap = map_from_gaussians(gs)
        K = cam()
        cam_pose = PoseSE3(rotvec_to_quat(np.array([0.1, -0.2, 0.3])), np.array([0.4, -0.1, 0.2]))
        direct = rasterize(gmap, cam_pose, K)
        local = map_in_camera_frame(gmap, np.arange(len(gmap)), cam_pose)
        relocal = rasterize(local, PoseSE3.identity(), K)
        assert np.max(np.abs(direct.rgb - relocal.rgb)) < 1e-9
        assert np.max(np.abs(direct.alpha - relocal.alpha)) < 1e-9
