import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from jscclab.channel import (ChannelRealization, equalize, power_normalize, snr_to_sigma2, to_reals, transmit,
                             transmit_awgn, transmit_fading)


def _symbols(k, seed=0):
    g = torch.Generator().manual_seed(seed)
    return power_normalize(torch.randn(2 * k, generator=g))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 500), st.floats(1e-3, 1e3))
def test_power_normalize_unit_power(k, scale):
    raw = torch.randn(2 * k, dtype=torch.float64) * scale
    y = power_normalize(raw)
    assert y.shape == (k,)
    assert abs((y.abs() ** 2).mean().item() - 1) < 1e-9


def test_power_normalize_rejects_zero_and_odd():
    with pytest.raises(ValueError):
        power_normalize(torch.zeros(8))
    with pytest.raises(ValueError):
        power_normalize(torch.ones(7), k=4)


def test_to_reals_roundtrip():
    raw = torch.randn(20, dtype=torch.float64)
    y = power_normalize(raw)
    assert torch.allclose(to_reals(y), raw * (10 ** 0.5 / raw.norm()))


def test_sigma2_values():
    assert snr_to_sigma2(13.0) == pytest.approx(0.0501187, rel=1e-6)
    assert snr_to_sigma2(0.0) == 1.0


def test_awgn_infinite_snr_is_identity():
    y = _symbols(100)
    assert torch.equal(transmit_awgn(y, float("inf"), 0), y)


def test_awgn_seeded_reproducible():
    y = _symbols(64)
    assert torch.equal(transmit_awgn(y, 5.0, 7), transmit_awgn(y, 5.0, 7))
    assert not torch.equal(transmit_awgn(y, 5.0, 7), transmit_awgn(y, 5.0, 8))


def test_awgn_noise_variance():
    y = _symbols(200_000)
    noise = transmit_awgn(y, 13.0, 3) - y
    assert (noise.abs() ** 2).mean().item() == pytest.approx(0.0501187, rel=0.02)


def test_fading_h_one_matches_awgn():
    y = _symbols(1000)
    rx, csi = transmit_fading(y, 10.0, "rayleigh-fast", seed=4, h=torch.ones(1000, dtype=y.dtype))
    assert torch.allclose(rx, transmit_awgn(y, 10.0, 4))
    assert csi.sigma2 == pytest.approx(0.1)


def test_block_fading_shares_one_gain():
    _, csi = transmit_fading(_symbols(50), 10.0, "rayleigh-block", seed=1)
    assert torch.all(csi.h == csi.h[0])
    _, fast = transmit_fading(_symbols(50), 10.0, "rayleigh-fast", seed=1)
    assert len(set(fast.h.tolist())) == 50


def test_noiseless_equalizer_inverts_channel():
    y = _symbols(500)
    rx, csi = transmit_fading(y, float("inf"), "rayleigh-fast", seed=2)
    assert torch.allclose(equalize(rx, csi), y, atol=1e-5)


def test_equalizer_formula_and_shape_check():
    h = torch.tensor([1 + 1j, 0.5j], dtype=torch.complex128)
    rx = torch.tensor([2 + 0j, 1 - 1j], dtype=torch.complex128)
    csi = ChannelRealization(h, 0.5, "rayleigh-fast")
    expected = torch.tensor([(1 - 1j) * 2 / 2.5, -0.5j * (1 - 1j) / 0.75], dtype=torch.complex128)
    assert torch.allclose(equalize(rx, csi), expected)
    with pytest.raises(ValueError):
        equalize(rx[:1], csi)


def test_unknown_kind():
    with pytest.raises(ValueError):
        transmit_fading(_symbols(4), 1.0, "rician")


def test_transmit_dispatch():
    y = _symbols(32)
    assert torch.equal(transmit(y, 3.0, "awgn", 5), transmit_awgn(y, 3.0, 5))
    out = transmit(y, 3.0, "rayleigh-block", 5, equalize_csi=False)
    rx, _ = transmit_fading(y, 3.0, "rayleigh-block", 5)
    assert torch.equal(out, rx)
