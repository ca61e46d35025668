import pytest
import torch
import torch.nn as nn

from jscclab.channel_modnet import ChannelModNet, ModulationUnit, modulate, sm_vector

from oracles import gradient_check


def test_unit_range_and_shape():
    unit = ModulationUnit(24)
    g = sm_vector(torch.tensor([1.0, 7.0, 13.0]), unit)
    assert g.shape == (3, 24)
    assert torch.all((g > 0) & (g < 1))


def test_unit_zero_weights_give_half():
    unit = ModulationUnit(6)
    for p in unit.parameters():
        nn.init.zeros_(p)
    assert torch.equal(sm_vector(5.0, unit), torch.full((1, 6), 0.5))


def test_output_shape_and_width_check():
    net = ChannelModNet(16, hidden=8)
    x = torch.randn(2, 4, 4, 16)
    assert modulate(x, 10.0, net).shape == x.shape
    with pytest.raises(ValueError):
        modulate(torch.randn(1, 4, 4, 12), 10.0, net)


def test_gains_are_spatially_uniform():
    # with identity trunk, modulation is elementwise and position independent
    net = ChannelModNet(4, hidden=8)
    with torch.no_grad():
        for layer in net.trunk:
            layer.weight.copy_(torch.eye(4))
            layer.bias.zero_()
    x = torch.ones(1, 3, 5, 4)
    out = modulate(x, 4.0, net)
    assert torch.allclose(out, out[0, 0, 0].expand_as(out))
    gains = torch.stack(net.gains(4.0)).prod(0)
    assert torch.allclose(out[0, 0, 0], gains[0])


def test_per_sample_snr():
    net = ChannelModNet(8, hidden=8)
    x = torch.randn(1, 2, 2, 8).expand(2, -1, -1, -1)
    out = modulate(x, torch.tensor([1.0, 13.0]), net)
    single = modulate(x[:1], 13.0, net)
    assert torch.allclose(out[1:], single, atol=1e-6)


def test_gradient_fd():
    torch.manual_seed(2)
    net = ChannelModNet(16, hidden=8).double()
    x = torch.randn(1, 8, 8, 16, dtype=torch.float64, requires_grad=True)
    params = [x, net.trunk[2].weight, net.units[4].fc1.weight, net.units[0].fc3.bias]
    assert gradient_check(lambda: modulate(x, 6.0, net).pow(2).sum(), params) < 1e-5
