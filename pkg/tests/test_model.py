import pytest
import torch

from jscclab.codec import CodecConfig, preset
from jscclab.model import JSCCModel
from jscclab.channel import transmit_awgn

from oracles import gradient_check


@pytest.mark.parametrize("variant", ["baseline", "sa", "ra", "sa_ra"])
def test_roundtrip_shape(tiny_config, variant):
    cfg = CodecConfig(**{**tiny_config.to_dict(), "variant": variant, "cbr": 1 / 12})
    model = JSCCModel(cfg)
    x = torch.rand(2, 3, 16, 32)
    x_hat, info = model(x, 10.0, 1 / 12 if cfg.rate_adaptive else None)
    assert x_hat.shape == x.shape
    assert x_hat.min() >= 0 and x_hat.max() <= 1


def test_symbol_count_high_res():
    model = JSCCModel(preset("B"))
    assert model.symbol_count(512, 768, 1 / 16) == 32 * 48 * 96 // 2 == 73728


def test_encode_low_res_counts():
    torch.manual_seed(0)
    model = JSCCModel(CodecConfig(depths=(1, 1), widths=(32, 96), window=2, variant="ra", modnet_hidden=8))
    symbols, mask = model.encode(torch.rand(1, 3, 32, 32), 10.0, 1 / 3)
    assert model.latent_size(32, 32) == (8, 8)
    assert int(mask.sum()) == 32
    assert symbols[0].numel() == 1024
    assert abs((symbols[0].abs() ** 2).mean().item() - 1) < 1e-6


def test_sa_variant_uses_single_affine_head(tiny_config):
    cfg = CodecConfig(**{**tiny_config.to_dict(), "variant": "sa", "cbr": 1 / 12})
    model = JSCCModel(cfg)
    assert model.enc_head.in_features == 16 and model.enc_head.out_features == 8
    with pytest.raises(ValueError):
        model.encode(torch.rand(1, 3, 16, 16), 5.0, 1 / 6)


def test_masked_channels_are_zero_before_decoder(tiny_config):
    model = JSCCModel(tiny_config)
    symbols, mask = model.encode(torch.rand(2, 3, 16, 16), 5.0, 1 / 24)
    latent = model.reconstruct_features(symbols, mask, (4, 4))
    dropped = ~mask.bool()
    assert dropped.any()
    for b in range(2):
        assert torch.count_nonzero(latent[b][..., dropped[b]]) == 0


def test_full_mask_reconstruction_is_plain_reshape(tiny_config):
    model = JSCCModel(tiny_config)
    y = torch.randn(1, 4, 4, 16)
    mask = torch.ones(1, 16)
    raw = model.compact(y[0], mask[0])
    sym = torch.view_as_complex(raw.view(-1, 2))
    assert torch.equal(model.reconstruct_features([sym], mask, (4, 4)), y)


def test_decode_rejects_count_mismatch(tiny_config):
    model = JSCCModel(tiny_config)
    symbols, mask = model.encode(torch.rand(1, 3, 16, 16), 5.0, 1 / 12)
    with pytest.raises(ValueError):
        model.decode([symbols[0][:-1]], mask, 5.0, (16, 16))


def test_per_sample_rates(tiny_config):
    model = JSCCModel(tiny_config)
    x = torch.rand(3, 3, 16, 16)
    _, info = model(x, torch.tensor([1.0, 5.0, 9.0]), torch.tensor([1 / 24, 1 / 12, 1 / 6]))
    assert [int(m.sum()) for m in info.mask] == [4, 8, 16]
    assert info.k == [4 * 4 * 4 // 2, 4 * 4 * 8 // 2, 4 * 4 * 16 // 2]


def test_chain_gradient_fd(tiny_config):
    torch.manual_seed(3)
    model = JSCCModel(tiny_config).double()
    x = torch.rand(1, 3, 16, 16, dtype=torch.float64, requires_grad=True)

    def f():
        symbols, mask = model.encode(x, 7.0, 1 / 12)
        g = torch.Generator().manual_seed(11)
        rx = [transmit_awgn(s, 7.0, g) for s in symbols]
        return model.decode(rx, mask, 7.0, (16, 16), clamp=False).pow(2).sum()

    params = [model.encoder.embed.proj.weight, model.rate_net.trunk[3].weight, model.dec_snr.units[2].fc1.weight,
              model.decoder.head.weight]
    assert gradient_check(f, [x] + params, max_coords=40) < 1e-4


def test_forward_matches_encode_decode(tiny_config):
    model = JSCCModel(tiny_config).eval()
    x = torch.rand(2, 3, 16, 16)
    out, _ = model(x, 4.0, 1 / 12, generator=torch.Generator().manual_seed(5))
    symbols, mask = model.encode(x, 4.0, 1 / 12)
    g = torch.Generator().manual_seed(5)
    rx = [transmit_awgn(s, 4.0, g) for s in symbols]
    assert torch.allclose(model.decode(rx, mask, 4.0, (16, 16)), out)
