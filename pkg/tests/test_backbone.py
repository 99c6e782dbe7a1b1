"""Encoder backbone: config, norms, rotary positions, masking, early exits."""

import numpy as np
import pytest
import torch

from cryptogram.model.backbone import (
    CONTEXT_LEN,
    PRESETS,
    VOCAB_SIZE,
    Encoder,
    ModelConfig,
    RMSNorm,
    apply_rope,
    rope_angles,
)
from cryptogram.model.heads import build_model

from conftest import tiny_config


def rand_tokens(b, t, seed=0, pad_tail=0):
    g = torch.Generator().manual_seed(seed)
    tok = torch.randint(0, VOCAB_SIZE - 1, (b, t), generator=g)
    if pad_tail:
        tok[:, -pad_tail:] = VOCAB_SIZE - 1
    return tok


# ---------------------------------------------------------------------------
# config

def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=30, n_layers=1, n_heads=4, ffn_dim=64)
    with pytest.raises(ValueError):
        # d_head = 3 is odd, incompatible with rotary pairs
        ModelConfig(d_model=12, n_layers=1, n_heads=4, ffn_dim=64)
    cfg = tiny_config()
    assert cfg.d_head == 16
    assert cfg.pad_id == 36


def test_config_round_trips_through_dict():
    cfg = PRESETS["3.4M"]
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_preset_ladder_parameter_counts():
    # size tags name the rounded total parameter count
    for tag, cfg in PRESETS.items():
        want = float(tag[:-1]) * 1e6
        got = build_model(cfg, head="standard").n_params()
        assert abs(got - want) / want < 0.12, (tag, got)


def test_preset_defaults():
    assert PRESETS["3.4M"].context_len == CONTEXT_LEN == 304
    assert PRESETS["3.4M"].vocab_size == VOCAB_SIZE == 37
    assert PRESETS["3.4M"].rope_theta == 10_000.0


# ---------------------------------------------------------------------------
# rmsnorm

def test_rmsnorm_matches_reference():
    torch.manual_seed(0)
    norm = RMSNorm(24, eps=1e-5)
    with torch.no_grad():
        norm.weight.mul_(1.7)
    x = torch.randn(3, 5, 24)
    ref = (x.double()
           / torch.sqrt(x.double().pow(2).mean(-1, keepdim=True) + 1e-5)
           * norm.weight.double())
    torch.testing.assert_close(norm(x).double(), ref, rtol=1e-5, atol=1e-6)


def test_rmsnorm_keeps_dtype():
    norm = RMSNorm(8)
    assert norm(torch.randn(2, 8, dtype=torch.bfloat16)).dtype == torch.bfloat16


# ---------------------------------------------------------------------------
# rotary positions

def test_rope_identity_at_position_zero():
    cos, sin = rope_angles(torch.arange(1), 16, 10_000.0, torch.float32, "cpu")
    x = torch.randn(2, 3, 1, 16)
    torch.testing.assert_close(apply_rope(x, cos, sin), x)


def test_rope_preserves_norm():
    cos, sin = rope_angles(torch.arange(64), 32, 10_000.0, torch.float32, "cpu")
    x = torch.randn(4, 64, 32)
    torch.testing.assert_close(apply_rope(x, cos, sin).norm(dim=-1),
                               x.norm(dim=-1), rtol=1e-5, atol=1e-5)


def test_rope_inner_products_depend_on_offset_only():
    d = 32
    q = torch.randn(d, dtype=torch.float64)
    k = torch.randn(d, dtype=torch.float64)

    def scored(p_q, p_k):
        cos, sin = rope_angles(torch.tensor([p_q, p_k]), d, 10_000.0,
                               torch.float64, "cpu")
        rq = apply_rope(q[None], cos[:1], sin[:1])[0]
        rk = apply_rope(k[None], cos[1:], sin[1:])[0]
        return float(rq @ rk)

    assert scored(3, 10) == pytest.approx(scored(45, 52), abs=1e-9)
    assert scored(0, 7) == pytest.approx(scored(100, 107), abs=1e-9)
    assert abs(scored(3, 10) - scored(3, 12)) > 1e-6


def test_rope_rejects_odd_head_dim():
    with pytest.raises(ValueError):
        rope_angles(torch.arange(4), 7, 10_000.0, torch.float32, "cpu")


# ---------------------------------------------------------------------------
# encoder

def test_encoder_state_stack_shapes():
    cfg = tiny_config()
    enc = Encoder(cfg)
    hs = enc(rand_tokens(2, 11))
    assert len(hs.layers) == cfg.n_layers + 1
    assert hs.n_layers == cfg.n_layers
    for s in hs.layers:
        assert s.shape == (2, 11, cfg.d_model)
    assert hs.final.shape == (2, 11, cfg.d_model)
    assert hs[0].shape == (2, 11, cfg.d_model)


def test_encoder_residual_branches_start_at_zero():
    # zero-initialized output projections make every block the identity at init
    enc = Encoder(tiny_config())
    hs = enc(rand_tokens(2, 9, seed=4))
    for s in hs.layers[1:]:
        torch.testing.assert_close(s, hs.layers[0])


def test_encoder_input_validation():
    enc = Encoder(tiny_config())
    with pytest.raises(ValueError):
        enc(torch.zeros(5, dtype=torch.int64))
    with pytest.raises(ValueError):
        enc(torch.full((1, 3), VOCAB_SIZE, dtype=torch.int64))
    with pytest.raises(ValueError):
        enc(rand_tokens(1, CONTEXT_LEN + 1))


def test_encoder_init_is_seeded_and_bounded():
    torch.manual_seed(3)
    a = Encoder(tiny_config())
    torch.manual_seed(3)
    b = Encoder(tiny_config())
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert a.embed.weight.abs().max() <= 2 * 0.02 + 1e-8
    for layer in a.layers:
        assert layer.attn.wq.weight.abs().max() <= 2 * 0.02 + 1e-8
        assert layer.attn.wq.bias is None


def test_padding_does_not_change_real_positions():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    tok = rand_tokens(3, 12, seed=1)
    padded = torch.cat([tok, torch.full((3, 6), 36)], dim=1)
    out_a = enc(tok).final
    out_b = enc(padded).final
    torch.testing.assert_close(out_b[:, :12], out_a, rtol=1e-5, atol=1e-6)


def test_batch_permutation_equivariance():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    tok = rand_tokens(5, 10, seed=2)
    perm = torch.tensor([4, 2, 0, 1, 3])
    torch.testing.assert_close(enc(tok[perm]).final, enc(tok).final[perm],
                               rtol=1e-5, atol=1e-6)


def _noise_residuals(enc):
    # zero-init residuals make many properties trivially true; perturb them
    g = torch.Generator().manual_seed(99)
    with torch.no_grad():
        for layer in enc.layers:
            layer.attn.wo.weight.copy_(
                torch.randn(layer.attn.wo.weight.shape, generator=g) * 0.05)
            layer.ffn.down.weight.copy_(
                torch.randn(layer.ffn.down.weight.shape, generator=g) * 0.05)


def test_attention_capture_matches_fast_path():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    tok = rand_tokens(2, 10, seed=3, pad_tail=3)
    fast = enc(tok)
    slow = enc(tok, capture_attention=True)
    torch.testing.assert_close(slow.final, fast.final, rtol=1e-5, atol=1e-6)
    assert fast.attentions is None
    assert len(slow.attentions) == enc.cfg.n_layers


def test_attention_weights_are_masked_distributions():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    tok = rand_tokens(2, 10, seed=5, pad_tail=4)
    hs = enc(tok, capture_attention=True)
    for w in hs.attentions:
        assert w.shape == (2, enc.cfg.n_heads, 10, 10)
        torch.testing.assert_close(w.sum(-1), torch.ones_like(w.sum(-1)),
                                   rtol=1e-5, atol=1e-5)
        # no probability mass lands on padded keys, even from pad queries
        assert w[..., -4:].abs().max() < 1e-6


def test_early_exit_final_layer_is_bitwise_identical():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    hs = enc(rand_tokens(4, 17, seed=6, pad_tail=2))
    assert torch.equal(enc.exit_states(hs, enc.cfg.n_layers), hs.final)


def test_early_exit_intermediate_layers():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    hs = enc(rand_tokens(2, 8, seed=7))
    for k in range(enc.cfg.n_layers + 1):
        torch.testing.assert_close(enc.exit_states(hs, k), enc.norm(hs.layers[k]))
    with pytest.raises(ValueError):
        enc.exit_states(hs, enc.cfg.n_layers + 1)


def test_n_params_counts_everything_once():
    enc = Encoder(tiny_config())
    assert enc.n_params() == sum(p.numel() for p in enc.parameters())


def test_pad_mask_defaults_to_pad_id():
    torch.manual_seed(8)
    enc = Encoder(tiny_config())
    _noise_residuals(enc)
    tok = rand_tokens(2, 9, seed=9, pad_tail=3)
    explicit = enc(tok, pad_mask=tok == 36).final
    torch.testing.assert_close(enc(tok).final, explicit)
