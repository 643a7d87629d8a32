import numpy as np
import pytest

from dreamslab.losses import DimensionMismatch, l1_loss, photometric_loss, ssim
from dreamslab.splat import RenderConfig

from helpers import ssim_reference


def rand_img(rng, h=16, w=16):
    return rng.uniform(0, 1, size=(h, w, 3))


class TestSsim:
    def test_identical_images_score_one(self):
        rng = np.random.default_rng(0)
        img = rand_img(rng)
        assert abs(ssim(img, img) - 1.0) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rand_img(rng), rand_img(rng)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_constant_images_closed_form(self):
        a = np.full((16, 16, 3), 0.2)
        b = np.full((16, 16, 3), 0.4)
        want = (2 * 0.2 * 0.4 + 1e-4) / (0.2**2 + 0.4**2 + 1e-4)
        assert abs(ssim(a, b) - want) < 1e-6

    def test_matches_sliding_window_reference(self):
        rng = np.random.default_rng(2)
        a, b = rand_img(rng), rand_img(rng)
        assert abs(ssim(a, b) - ssim_reference(a, b)) < 1e-9

    def test_grayscale_pair(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0, 1, size=(16, 16))
        b = rng.uniform(0, 1, size=(16, 16))
        assert abs(ssim(a, b) - ssim_reference(a, b)) < 1e-9

    def test_too_small_image_rejected(self):
        a = np.zeros((4, 4, 3))
        with pytest.raises(ValueError, match="at least"):
            ssim(a, a)

    def test_masked_keeps_only_selected_window_centers(self):
        rng = np.random.default_rng(4)
        a, b = rand_img(rng, 20, 20), rand_img(rng, 20, 20)
        mask = np.zeros((20, 20), dtype=bool)
        mask[8:12, 8:12] = True
        got = ssim(a, b, mask=mask)
        # reference: naive per-window values, averaged over mask-true centers
        cfg = RenderConfig()
        h = cfg.ssim_window // 2
        vals = []
        for c in range(3):
            for i in range(8, 12):
                for j in range(8, 12):
                    pa = a[i - h : i + h + 1, j - h : j + h + 1, c]
                    pb = b[i - h : i + h + 1, j - h : j + h + 1, c]
                    mua, mub = pa.mean(), pb.mean()
                    va = (pa * pa).mean() - mua * mua
                    vb = (pb * pb).mean() - mub * mub
                    cov = (pa * pb).mean() - mua * mub
                    vals.append(
                        ((2 * mua * mub + cfg.ssim_c1) * (2 * cov + cfg.ssim_c2))
                        / ((mua**2 + mub**2 + cfg.ssim_c1) * (va + vb + cfg.ssim_c2))
                    )
        assert abs(got - np.mean(vals)) < 1e-9


class TestPhotometricLoss:
    def test_zero_on_identical(self):
        rng = np.random.default_rng(5)
        img = rand_img(rng)
        assert photometric_loss(img, img) == 0.0

    def test_pure_l1_constant_offset(self):
        rng = np.random.default_rng(6)
        img = rng.uniform(0, 0.5, size=(16, 16, 3))
        cfg = RenderConfig(loss_alpha=1.0)
        assert abs(photometric_loss(img, img + 0.1, cfg) - 0.1) < 1e-9

    def test_pure_ssim_constant_images(self):
        a = np.full((16, 16, 3), 0.2)
        b = np.full((16, 16, 3), 0.4)
        cfg = RenderConfig(loss_alpha=0.0)
        want = 1.0 - (2 * 0.2 * 0.4 + 1e-4) / (0.2**2 + 0.4**2 + 1e-4)
        assert abs(photometric_loss(a, b, cfg) - want) < 1e-6

    def test_nonnegative(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a, b = rand_img(rng), rand_img(rng)
            assert photometric_loss(a, b) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            photometric_loss(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))

    def test_masked_l1_ignores_masked_out_pixels(self):
        rng = np.random.default_rng(8)
        a = rand_img(rng)
        b = a.copy()
        b[:8] += 0.3  # corrupt only the top half
        mask = np.zeros((16, 16), dtype=bool)
        mask[8:] = True
        assert l1_loss(a, b, mask) == 0.0
        assert l1_loss(a, b) > 0.0

    def test_empty_mask_rejected(self):
        a = np.zeros((16, 16, 3))
        with pytest.raises(ValueError, match="mask"):
            l1_loss(a, a, np.zeros((16, 16), dtype=bool))
