import numpy as np
import pytest
import torch

from jscclab.metrics import (QualityScore, RDPoint, as_batch, bd_rate, ms_ssim, ms_ssim_batch, ms_ssim_db, psnr,
                             psnr_per_image)

from oracles import gradient_check, ms_ssim_oracle


def test_psnr_cases():
    x = torch.zeros(1, 3, 8, 8)
    assert psnr(x, x) == 100.0
    assert psnr(x, torch.ones_like(x)) == pytest.approx(0.0, abs=1e-12)
    y = x + 1 / 255
    assert psnr(x, y) == pytest.approx(48.1308036, abs=1e-6)


def test_psnr_accepts_hwc_arrays():
    a = np.random.default_rng(0).random((8, 8, 3))
    b = np.clip(a + 0.01, 0, 1)
    assert psnr(a, b) == pytest.approx(psnr(torch.from_numpy(a).permute(2, 0, 1), torch.from_numpy(b).permute(2, 0, 1)))
    with pytest.raises(ValueError):
        psnr(a, b[:4])


def test_psnr_per_image():
    x = torch.zeros(2, 3, 4, 4)
    y = torch.stack([x[0] + 0.1, x[1] + 0.01])
    vals = psnr_per_image(x, y)
    assert vals[0] == pytest.approx(20.0) and vals[1] == pytest.approx(40.0)


def test_ms_ssim_identity_and_db():
    x = torch.rand(1, 3, 176, 176, dtype=torch.float64)
    assert ms_ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    assert ms_ssim_db(0.9) == pytest.approx(10.0, abs=1e-6)
    assert ms_ssim_db(1.0) == 60.0
    with pytest.raises(ValueError):
        ms_ssim_db(1.2)


def test_ms_ssim_too_small():
    with pytest.raises(ValueError):
        ms_ssim(torch.rand(1, 3, 128, 128), torch.rand(1, 3, 128, 128))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ms_ssim_against_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((176, 192, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    assert abs(ms_ssim(a, b) - ms_ssim_oracle(a, b)) < 1e-6


def test_ms_ssim_gradient():
    torch.manual_seed(0)
    x = torch.rand(1, 1, 160, 160, dtype=torch.float64)
    y = (x + 0.05 * torch.randn_like(x)).clamp(0, 1).requires_grad_(True)
    assert gradient_check(lambda: ms_ssim_batch(x, y).sum(), [y], max_coords=20) < 1e-4


def test_bd_rate_identity_and_half():
    rates = np.array([0.02, 0.04, 0.06, 0.08, 0.125])
    quality = 10 * np.log10(rates) + 40
    a = list(zip(rates, quality))
    assert bd_rate(a, a) == pytest.approx(0.0, abs=1e-9)
    b = list(zip(rates / 2, quality))
    assert bd_rate(a, b) == pytest.approx(-50.0, abs=1e-9)


def test_bd_rate_accepts_rd_points():
    pts = [RDPoint(r, 10.0, QualityScore("psnr", q)) for r, q in [(0.02, 20), (0.04, 23), (0.06, 25), (0.1, 27)]]
    assert bd_rate(pts, pts) == pytest.approx(0.0)


def test_bd_rate_validation():
    a = [(0.1, 20), (0.2, 21), (0.3, 22), (0.4, 23)]
    with pytest.raises(ValueError):
        bd_rate(a[:3], a)
    with pytest.raises(ValueError):
        bd_rate(a, [(0.1, 30), (0.2, 31), (0.3, 32), (0.4, 33)])
    with pytest.raises(ValueError):
        bd_rate(a, [(0.1, 20), (0.2, 20), (0.3, 22), (0.4, 23)])
    with pytest.raises(ValueError):
        RDPoint(0.0, 1.0, QualityScore("psnr", 1.0))


def test_as_batch_rejects_bad_rank():
    with pytest.raises(ValueError):
        as_batch(torch.zeros(4, 4))
