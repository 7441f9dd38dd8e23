import numpy as np
import pytest
import torch

from dimreal.errors import ConfigError, EngineNumericError
from dimreal.inpaint import DsttConfig, DsttEngine, DsttModel, scaled_dot_product
from dimreal.inpaint.dstt import Vec2Patch, fit_toy
from dimreal.masks import BinaryMask

from oracles import attention_oracle, fold_oracle

SMALL = DsttConfig.small()


class TestConfig:
    def test_small_preset(self):
        assert (SMALL.width, SMALL.height) == (64, 36)
        assert SMALL.tokens == 16 * 9 == 144

    def test_full_default_resolution(self):
        cfg = DsttConfig()
        assert (cfg.width, cfg.height) == (640, 360)

    def test_indivisible_resolution_rejected(self):
        with pytest.raises(ConfigError):
            DsttConfig(width=65, height=36, patch=4)

    def test_group_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            DsttConfig(width=64, height=36, patch=4, channels=32, kernel=6,
                       heads=2, temporal_groups=4)

    def test_kernel_below_patch_rejected(self):
        with pytest.raises(ConfigError):
            DsttConfig(width=64, height=36, patch=4, kernel=2)

    def test_json_roundtrip(self):
        assert DsttConfig.from_dict(SMALL.to_dict()) == SMALL


class TestPatchEmbed:
    def test_token_count(self):
        model = DsttModel(SMALL)
        tokens = model.patch_embed(torch.zeros(1, 3, 36, 64), torch.zeros(1, 1, 36, 64))
        assert tokens.shape == (1, 144, 32)

    def test_zero_input_zero_bias_gives_zero_tokens(self):
        model = DsttModel(SMALL)
        with torch.no_grad():
            model.embed.bias.zero_()
        tokens = model.patch_embed(torch.zeros(1, 3, 36, 64), torch.zeros(1, 1, 36, 64))
        assert torch.all(tokens == 0)

    def test_single_pixel_locality(self):
        model = DsttModel(SMALL)
        with torch.no_grad():
            model.embed.bias.zero_()
        rgb = torch.zeros(1, 3, 36, 64)
        rgb[0, 0, 13, 42] = 1.0  # patch row 13//4=3, col 42//4=10
        tokens = model.patch_embed(rgb, torch.zeros(1, 1, 36, 64))
        nonzero = torch.nonzero(tokens.abs().sum(-1).squeeze(0)).ravel().tolist()
        assert nonzero == [3 * 16 + 10]

    def test_wrong_resolution_rejected(self):
        model = DsttModel(SMALL)
        with pytest.raises(ConfigError):
            model.patch_embed(torch.zeros(1, 3, 36, 32), torch.zeros(1, 1, 36, 32))


class TestAttentionCore:
    def test_matches_hand_rolled_oracle(self, rng):
        for _ in range(20):
            q = rng.normal(size=(4, 8))
            k = rng.normal(size=(4, 8))
            v = rng.normal(size=(4, 8))
            out, w = scaled_dot_product(torch.tensor(q), torch.tensor(k), torch.tensor(v))
            expected, w_expected = attention_oracle(q, k, v)
            assert np.max(np.abs(out.numpy() - expected)) < 1e-5
            assert np.max(np.abs(w.numpy() - w_expected)) < 1e-5

    def test_rows_sum_to_one(self, rng):
        q = torch.randn(2, 3, 7, 16)
        k = torch.randn(2, 3, 9, 16)
        v = torch.randn(2, 3, 9, 16)
        _, w = scaled_dot_product(q, k, v)
        assert torch.allclose(w.sum(-1), torch.ones(2, 3, 7), atol=1e-5)

    def test_single_key_passes_value_through(self):
        q = torch.randn(1, 4)
        k = torch.randn(1, 4)
        v = torch.randn(1, 4)
        out, w = scaled_dot_product(q, k, v)
        assert torch.allclose(out, v)
        assert float(w) == pytest.approx(1.0)

    def test_equal_keys_give_uniform_weights(self):
        q = torch.randn(1, 8)
        k = torch.ones(5, 8) * 0.37
        v = torch.randn(5, 8)
        _, w = scaled_dot_product(q, k, v)
        assert torch.allclose(w, torch.full((1, 5), 0.2), atol=1e-6)


def tiny_v2p_config(patch, kernel, rows, cols, channels=6):
    return DsttConfig(width=patch * cols, height=patch * rows, patch=patch,
                      channels=channels, kernel=kernel, heads=1,
                      temporal_groups=1, blocks=("S",))


class TestVec2Patch:
    def test_non_overlapping_patches_placed_verbatim(self):
        cfg = tiny_v2p_config(patch=2, kernel=2, rows=2, cols=3, channels=1)
        v2p = Vec2Patch(cfg, out_channels=1)
        with torch.no_grad():
            v2p.deconv.weight.fill_(1.0)   # token value broadcast to its patch
            v2p.deconv.bias.zero_()
        tokens = torch.arange(6, dtype=torch.float32).reshape(1, 6, 1)
        out = v2p(tokens).squeeze()
        for i in range(2):
            for j in range(3):
                assert torch.all(out[2 * i:2 * i + 2, 2 * j:2 * j + 2] == 3 * i + j)

    def test_two_overlapping_constant_patches_sum(self):
        # One token row, two columns, kernel 4 > stride 2: columns 2-3 of the
        # full canvas get both patches; crop offset is 1.
        cfg = tiny_v2p_config(patch=2, kernel=4, rows=1, cols=2, channels=1)
        v2p = Vec2Patch(cfg, out_channels=1)
        with torch.no_grad():
            v2p.deconv.weight.fill_(1.0)
            v2p.deconv.bias.zero_()
        tokens = torch.ones(1, 2, 1)
        out = v2p(tokens).squeeze()
        assert out.shape == (2, 4)
        assert torch.all(out == torch.tensor([[1.0, 2.0, 2.0, 1.0]] * 2))

    def test_matches_fold_oracle_random_configs(self, rng):
        for trial in range(20):
            patch = int(rng.integers(1, 4))
            kernel = patch + int(rng.integers(0, 3))
            rows = int(rng.integers(1, 4))
            cols = int(rng.integers(1, 4))
            channels = int(rng.integers(1, 5))
            cfg = tiny_v2p_config(patch, kernel, rows, cols, channels)
            out_channels = int(rng.integers(1, 4))
            v2p = Vec2Patch(cfg, out_channels=out_channels)
            tokens = torch.randn(1, cfg.tokens, channels)
            got = v2p(tokens).detach().numpy()[0]
            expected = fold_oracle(tokens.numpy()[0],
                                   v2p.deconv.weight.detach().numpy(),
                                   v2p.deconv.bias.detach().numpy(),
                                   rows, cols, patch, kernel,
                                   cfg.height, cfg.width)
            assert np.max(np.abs(got - expected)) < 1e-5, f"trial {trial}"

    def test_token_count_mismatch_rejected(self):
        cfg = tiny_v2p_config(patch=2, kernel=2, rows=2, cols=2, channels=4)
        v2p = Vec2Patch(cfg, out_channels=3)
        with pytest.raises(ConfigError):
            v2p(torch.zeros(1, 5, 4))


class TestForward:
    def test_output_dims_and_slot_shape(self):
        engine = DsttEngine(SMALL, seed=0)
        rgb = np.zeros((36, 64, 3), dtype=np.uint8)
        result = engine.inpaint(rgb, BinaryMask.empty(64, 36))
        assert result.rgb.shape == (36, 64, 3)
        assert tuple(result.memory.slots[-1].shape) == (144, 32)

    def test_finite_outputs_random_weights(self, rng):
        for seed in range(3):
            engine = DsttEngine(SMALL, seed=seed)
            rgb = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
            bits = rng.random((36, 64)) > 0.7
            redacted = rgb.copy()
            redacted[bits] = 0
            result = engine.inpaint(redacted, BinaryMask(bits))
            assert np.isfinite(result.rgb.astype(np.float64)).all()

    def test_memory_fifo_last_two_frames(self, rng):
        engine = DsttEngine(SMALL, seed=1)
        memory = engine.zero_memory()
        slots_seen = []
        for t in range(3):
            rgb = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
            result = engine.inpaint(rgb, BinaryMask.empty(64, 36), memory)
            memory = result.memory
            slots_seen.append(memory.slots[-1])
        assert torch.equal(memory.slots[0], slots_seen[1])
        assert torch.equal(memory.slots[1], slots_seen[2])

    def test_memory_changes_output(self, rng):
        # temporal attention must actually read the slots
        engine = DsttEngine(SMALL, seed=2)
        rgb = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
        bits = np.zeros((36, 64), dtype=bool)
        bits[10:20, 20:40] = True
        redacted = rgb.copy()
        redacted[bits] = 0
        mask = BinaryMask(bits)
        cold = engine.inpaint(redacted, mask, engine.zero_memory())
        warm_memory = engine.zero_memory().push(torch.randn(144, 32)) \
            .push(torch.randn(144, 32))
        warm = engine.inpaint(redacted, mask, warm_memory)
        assert not np.array_equal(cold.rgb, warm.rgb)

    def test_deterministic_two_runs(self, rng):
        rgb = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
        bits = rng.random((36, 64)) > 0.8
        redacted = rgb.copy()
        redacted[bits] = 0
        a = DsttEngine(SMALL, seed=5).inpaint(redacted, BinaryMask(bits))
        b = DsttEngine(SMALL, seed=5).inpaint(redacted, BinaryMask(bits))
        assert np.array_equal(a.rgb, b.rgb)

    def test_non_finite_weights_raise_numeric_error(self):
        engine = DsttEngine(SMALL, seed=0)
        with torch.no_grad():
            engine.model.decode[0].weight.fill_(float("nan"))
        with pytest.raises(EngineNumericError):
            engine.inpaint(np.zeros((36, 64, 3), dtype=np.uint8),
                           BinaryMask.empty(64, 36))

    def test_memory_slot_shape_mismatch_rejected(self):
        engine = DsttEngine(SMALL, seed=0)
        model = engine.model
        bad = (torch.zeros(1, 10, 32), torch.zeros(1, 10, 32))
        with pytest.raises(ConfigError):
            model(torch.zeros(1, 3, 36, 64), torch.zeros(1, 1, 36, 64), bad)


def test_fit_toy_reduces_loss(rng):
    engine = DsttEngine(SMALL, seed=3)
    target = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
    bits = np.zeros((36, 64), dtype=bool)
    bits[12:22, 24:44] = True
    redacted = target.copy()
    redacted[bits] = 0
    seq = [(redacted, BinaryMask(bits), target)] * 3
    history = fit_toy(engine, seq, epochs=8, lr=1e-3)
    assert history[-1] < history[0]
