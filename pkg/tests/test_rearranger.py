import math

import pytest
import torch
import torch.nn.functional as F

from featsynth.config import GanConfig, RearrangerConfig
from featsynth.errors import ConfigError, DimensionError
from featsynth.rearranger import (Rearranger, attention, positional_encoding,
                                  rearrange)
from helpers import check_grad


def tiny_rearranger(seed=0, channels=3, proxy=4, k=4, attn=8, embed=8):
    torch.manual_seed(seed)
    gan_cfg = GanConfig(channels=channels, proxy_res=proxy, img_res=proxy * 4,
                        widths={4: 8, proxy: channels, proxy * 2: 8, proxy * 4: 8})
    return Rearranger(gan_cfg, RearrangerConfig(attn_dim=attn, embed_dim=embed,
                                                block_layers=2), k=k)


# -- positional encoding ------------------------------------------------------


def test_pe_deterministic():
    assert torch.equal(positional_encoding(16, 8), positional_encoding(16, 8))


def test_pe_range():
    t = positional_encoding(32, 16)
    assert t.min() >= -1.0 and t.max() <= 1.0


def test_pe_all_positions_distinct():
    t = positional_encoding(32, 16).reshape(32, -1).T   # [256, 32]
    for i in range(t.shape[0]):
        diff = (t - t[i]).abs().sum(dim=1)
        same = (diff < 1e-9).nonzero().reshape(-1).tolist()
        assert same == [i], f"position {i} collides with {same}"


def test_pe_rejects_bad_width():
    with pytest.raises(ConfigError):
        positional_encoding(18, 8)


# -- attention (functional) ---------------------------------------------------


def test_attention_single_key_returns_value():
    q = torch.randn(5, 3, dtype=torch.float64)
    k = torch.randn(1, 3, dtype=torch.float64)
    v = torch.randn(1, 3, dtype=torch.float64)
    out = attention(q, k, v)
    assert torch.allclose(out, v.expand(5, -1))


def test_attention_identical_keys_average_values():
    q = torch.randn(2, 4, dtype=torch.float64)
    k = torch.randn(1, 4, dtype=torch.float64).expand(6, -1)
    v = torch.randn(6, 4, dtype=torch.float64)
    assert torch.allclose(attention(q, k, v), v.mean(dim=0).expand(2, -1))


def test_attention_hand_oracle():
    # softmax(0, ln4) = (1/5, 4/5); values (0, 1) -> 0.8
    q = torch.tensor([[1.0]], dtype=torch.float64)
    k = torch.tensor([[0.0], [math.log(4.0)]], dtype=torch.float64)
    v = torch.tensor([[0.0], [1.0]], dtype=torch.float64)
    assert attention(q, k, v).item() == pytest.approx(0.8, abs=1e-12)


def test_attention_dimension_errors():
    with pytest.raises(DimensionError):
        attention(torch.randn(2, 3), torch.randn(2, 4), torch.randn(2, 3))
    with pytest.raises(DimensionError):
        attention(torch.randn(2, 3), torch.randn(2, 3), torch.randn(5, 3))
    with pytest.raises(DimensionError):
        attention(torch.randn(2, 3, 1), torch.randn(2, 3), torch.randn(2, 3))


# -- mask embedding -----------------------------------------------------------


def test_embed_mask_shape():
    r = tiny_rearranger()
    m = torch.zeros(4, 4, dtype=torch.long)
    assert r.embed_mask(m).shape == (16, 8)


def test_embed_mask_same_label_different_positions_differ():
    r = tiny_rearranger()
    q = r.embed_mask(torch.full((4, 4), 2, dtype=torch.long))
    # every row carries class 2 but a distinct positional code
    assert (q[0] - q[5]).abs().max() > 1e-6


def test_embed_mask_rows_are_pixel_local():
    # each query row depends only on (label, position): splicing one pixel's
    # label from another mask changes exactly that row
    r = tiny_rearranger()
    g = torch.Generator().manual_seed(3)
    m1 = torch.randint(0, 4, (4, 4), generator=g)
    m2 = m1.clone()
    m2[0, 0] = (m1[0, 0] + 1) % 4
    q1, q2 = r.embed_mask(m1), r.embed_mask(m2)
    assert not torch.allclose(q1[0], q2[0])
    assert torch.allclose(q1[1:], q2[1:])


def test_embed_mask_rejects_out_of_range_labels():
    r = tiny_rearranger()
    with pytest.raises(DimensionError):
        r.embed_mask(torch.full((4, 4), 4, dtype=torch.long))
    with pytest.raises(DimensionError):
        r.embed_mask(torch.zeros(5, 5, dtype=torch.long))


def test_embed_mask_probs_one_hot_matches_hard():
    r = tiny_rearranger()
    g = torch.Generator().manual_seed(1)
    m = torch.randint(0, 4, (4, 4), generator=g)
    onehot = F.one_hot(m, 4).permute(2, 0, 1).float()
    assert torch.allclose(r.embed_mask(m), r.embed_mask_probs(onehot), atol=1e-6)


# -- rearrange ----------------------------------------------------------------


def test_rearrange_preserves_feature_shape():
    r = tiny_rearranger()
    m = torch.zeros(4, 4, dtype=torch.long)
    f = torch.randn(3, 4, 4)
    assert r(m, f).shape == f.shape
    assert r(m[None].expand(2, -1, -1), f[None].expand(2, -1, -1, -1)).shape == (2, 3, 4, 4)


def test_rearrange_zero_query_gives_spatially_constant_output():
    # zero W_Q -> uniform attention -> every attended token identical; the
    # remaining layers are pointwise, so the output is constant over pixels
    r = tiny_rearranger(seed=5)
    with torch.no_grad():
        r.w_q.weight.zero_()
    g = torch.Generator().manual_seed(2)
    m = torch.randint(0, 4, (4, 4), generator=g)
    out = r(m, torch.randn(3, 4, 4, generator=g)).reshape(3, -1)
    assert (out - out[:, :1]).abs().max() < 1e-5


def test_rearrange_gradient_matches_finite_differences():
    r = tiny_rearranger(seed=7).double()
    g = torch.Generator().manual_seed(8)
    m = torch.randint(0, 4, (4, 4), generator=g)

    def loss(f):
        return (r(m, f) - f).pow(2).sum()

    check_grad(loss, torch.randn(3, 4, 4, generator=g, dtype=torch.float64),
               tol=1e-4)


def test_rearrange_functional_alias():
    r = tiny_rearranger()
    g = torch.Generator().manual_seed(4)
    m = torch.randint(0, 4, (4, 4), generator=g)
    f = torch.randn(3, 4, 4, generator=g)
    assert torch.equal(rearrange(m, f, r), r(m, f))


def test_rearrange_rejects_wrong_feature_shape():
    r = tiny_rearranger()
    m = torch.zeros(4, 4, dtype=torch.long)
    with pytest.raises(DimensionError):
        r(m, torch.randn(5, 4, 4))
