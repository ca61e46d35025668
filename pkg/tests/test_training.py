import csv

import pytest
import torch

from jscclab.codec import CodecConfig
from jscclab.model import JSCCModel
from jscclab.training import (SNR_GRID, TrainPhaseConfig, evaluate_psnr, loss, paper_schedule, run_training,
                              sample_condition, single_adaptive_schedule)


def _data(n=8, size=16):
    g = torch.Generator().manual_seed(0)
    return torch.rand(n, 3, size, size, generator=g)


def test_loss_modes():
    x = torch.zeros(1, 3, 4, 4)
    assert loss(x, x + 0.5).item() == pytest.approx(0.25)
    y = torch.rand(1, 3, 160, 160)
    assert loss(y, y, "one_minus_msssim").item() == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError):
        loss(x, x, "l1")


def test_phase_validation():
    with pytest.raises(ValueError):
        TrainPhaseConfig(lr=0)
    with pytest.raises(ValueError):
        TrainPhaseConfig(snr_policy="gauss")
    with pytest.raises(ValueError):
        TrainPhaseConfig(trainable="decoder")


def test_schedules():
    ph = paper_schedule((3, 4, 5))
    assert [p.steps for p in ph] == [3, 4, 5]
    snr, rate = sample_condition(ph[0], 64, torch.Generator().manual_seed(0))
    assert torch.all(snr == 13.0) and torch.all(rate == 0.125)
    snr, rate = sample_condition(ph[1], 256, torch.Generator().manual_seed(0))
    assert torch.all(snr == 13.0) and set(rate.tolist()) == set(ph[1].rate_grid)
    snr, _ = sample_condition(ph[2], 256, torch.Generator().manual_seed(0))
    assert set(snr.tolist()) == set(SNR_GRID)
    sa = single_adaptive_schedule((2, 2), snr_policy="uniform")
    assert [p.trainable for p in sa] == ["except_modnets", "all"]
    snr, _ = sample_condition(sa[0], 1000, torch.Generator().manual_seed(0))
    assert snr.min() >= 1.0 and snr.max() <= 13.0 and snr.std() > 3


def test_except_modnets_freezes_modnets(tiny_config):
    model = JSCCModel(tiny_config)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    phase = TrainPhaseConfig("b", 3, lr=1e-2, batch_size=2, trainable="except_modnets", rate_policy="grid",
                             rate_grid=(1 / 24, 1 / 12), rate=1 / 12)
    run_training(model, [phase], _data())
    after = model.state_dict()
    modnet = [n for n in before if n.startswith(("enc_snr", "dec_snr", "rate_net"))]
    assert modnet
    assert all(torch.equal(before[n], after[n]) for n in modnet)
    assert not torch.equal(before["encoder.embed.proj.weight"], after["encoder.embed.proj.weight"])


def test_training_reduces_loss_and_logs(tmp_path, tiny_config):
    cfg = CodecConfig(**{**tiny_config.to_dict(), "variant": "baseline", "cbr": 1 / 6})
    model = JSCCModel(cfg)
    phase = TrainPhaseConfig("p", 40, lr=2e-3, batch_size=4, snr=10.0)
    data = _data(4)
    res = run_training(model, [phase], data, log_csv=tmp_path / "log.csv", checkpoint=tmp_path / "m.swjc")
    first = sum(r["loss"] for r in res.history[:5]) / 5
    last = sum(r["loss"] for r in res.history[-5:]) / 5
    assert last < first
    rows = list(csv.reader(open(tmp_path / "log.csv")))
    assert rows[0][:2] == ["phase", "step"] and len(rows) == 41
    assert (tmp_path / "m.swjc").exists()


def test_non_finite_loss_raises(tiny_config):
    model = JSCCModel(tiny_config)
    data = _data(2)
    data[0, 0, 0, 0] = float("nan")
    with pytest.raises(FloatingPointError):
        run_training(model, [TrainPhaseConfig("p", 2, batch_size=2, rate=1 / 12)], data)


def test_evaluate_psnr_deterministic(tiny_config):
    model = JSCCModel(tiny_config)
    x = _data(2)
    assert evaluate_psnr(model, x, 5.0, 1 / 12, seed=3) == evaluate_psnr(model, x, 5.0, 1 / 12, seed=3)
