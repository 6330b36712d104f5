import pytest
import torch

from featsynth.config import GanConfig
from featsynth.errors import DimensionError
from featsynth.gan_core import GanCore, MappingNetwork, sample_latent
from helpers import rel_err


def small_gan(seed=0):
    torch.manual_seed(seed)
    cfg = GanConfig(z_dim=8, w_dim=8, channels=8, proxy_res=8, img_res=16,
                    widths={4: 8, 8: 8, 16: 4})
    return GanCore(cfg)


def test_sample_latent_deterministic():
    a = sample_latent(0, 16)
    b = sample_latent(0, 16)
    assert torch.equal(a.values, b.values)
    assert a.seed == 0


def test_sample_latent_distinct_seeds():
    assert not torch.equal(sample_latent(0, 16).values, sample_latent(1, 16).values)


def test_sample_latent_moments():
    # law-of-large-numbers check on the sampler itself
    samples = torch.stack([sample_latent(i, 32).values for i in range(10_000)])
    assert samples.mean(dim=0).abs().max() < 0.05
    assert (samples.var(dim=0) - 1).abs().max() < 0.1


def test_map_latent_deterministic():
    gan = small_gan()
    z = sample_latent(3, 8)
    assert torch.equal(gan.map_latent(z), gan.map_latent(z))


def test_map_latent_zero_weights():
    net = MappingNetwork(8, 8, depth=4)
    for p in net.parameters():
        torch.nn.init.zeros_(p)
    assert torch.equal(net(torch.randn(8)), torch.zeros(8))


def test_map_latent_wrong_length():
    gan = small_gan()
    with pytest.raises(DimensionError):
        gan.map_latent(torch.randn(5))


def test_map_latent_jacobian_matches_finite_differences():
    torch.manual_seed(1)
    net = MappingNetwork(6, 6, depth=3).double()
    z = torch.randn(6, dtype=torch.float64)
    analytic = torch.autograd.functional.jacobian(net, z)
    eps = 1e-5
    numeric = torch.zeros_like(analytic)
    for i in range(6):
        hi, lo = z.clone(), z.clone()
        hi[i] += eps
        lo[i] -= eps
        numeric[:, i] = (net(hi) - net(lo)) / (2 * eps)
    assert rel_err(analytic, numeric) < 1e-4


def test_generate_front_shape():
    gan = small_gan()
    f = gan.generate_front(gan.map_latent(sample_latent(0, 8)))
    assert f.shape == (8, 8, 8)


def test_generate_front_grad_matches_finite_differences():
    torch.manual_seed(2)
    gan = small_gan().double()
    w = torch.randn(8, dtype=torch.float64, requires_grad=True)
    out = gan.generate_front(w).mean()
    (analytic,) = torch.autograd.grad(out, w)
    eps = 1e-5
    numeric = torch.zeros(8, dtype=torch.float64)
    with torch.no_grad():
        for i in range(8):
            hi, lo = w.detach().clone(), w.detach().clone()
            hi[i] += eps
            lo[i] -= eps
            numeric[i] = (gan.generate_front(hi).mean() - gan.generate_front(lo).mean()) / (2 * eps)
    assert rel_err(analytic, numeric) < 1e-4


def test_generate_back_shape_and_range():
    gan = small_gan()
    x = gan.generate_back(gan.generate_front(gan.map_latent(sample_latent(1, 8))))
    assert x.shape == (3, 16, 16)
    assert x.min() >= -1 and x.max() <= 1


def test_split_consistency_bitwise():
    gan = small_gan()
    w = gan.map_latent(sample_latent(5, 8))
    assert torch.equal(gan.generate_back(gan.generate_front(w)), gan(w))


def test_generate_back_gradient_flows():
    gan = small_gan()
    f = gan.generate_front(gan.map_latent(sample_latent(2, 8))).detach().requires_grad_(True)
    loss = (gan.generate_back(f) * torch.randn(3, 16, 16)).sum()
    (grad,) = torch.autograd.grad(loss, f)
    assert grad.abs().sum() > 0


def test_generate_back_dimension_error():
    gan = small_gan()
    with pytest.raises(DimensionError):
        gan.generate_back(torch.randn(8, 4, 4))


def test_discriminate_zero_weights():
    gan = small_gan()
    for p in gan.disc.parameters():
        torch.nn.init.zeros_(p)
    x = torch.rand(3, 16, 16) * 2 - 1
    assert float(gan.discriminate(x)) == 0.0


def test_discriminate_scalar_finite():
    gan = small_gan()
    s = gan.discriminate(torch.rand(3, 16, 16) * 2 - 1)
    assert s.dim() == 0 and torch.isfinite(s)


def test_forward_deterministic_in_eval():
    gan = small_gan().eval()
    w = gan.map_latent(sample_latent(9, 8))
    assert torch.equal(gan(w), gan(w))


def test_trained_gan_separates_real_from_noise(micro_gan):
    gan, images = micro_gan
    real = images[:16]
    noise = torch.rand(16, 3, gan.cfg.img_res, gan.cfg.img_res) * 2 - 1
    with torch.no_grad():
        assert gan.disc(real).mean() > gan.disc(noise).mean()


def test_trained_front_differs_across_latents(micro_gan):
    gan, _ = micro_gan
    with torch.no_grad():
        f0 = gan.generate_front(gan.map_latent(sample_latent(100, gan.cfg.z_dim)))
        f1 = gan.generate_front(gan.map_latent(sample_latent(101, gan.cfg.z_dim)))
    assert not torch.equal(f0, f1)
