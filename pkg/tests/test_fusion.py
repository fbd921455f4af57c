import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from aste_dual.corpus import build_dependency_graph
from aste_dual.fusion import (
    AttentionMaps,
    InteractionStack,
    attention_scores,
    interact_once,
)
from fd import assert_grad_matches_fd


class TestAttentionScores:
    def test_zero_input_uniform(self):
        maps = attention_scores(torch.zeros(2, 3))
        assert torch.allclose(maps, torch.full((2, 2), 0.5))

    def test_single_row(self):
        maps = attention_scores(torch.randn(1, 4))
        assert torch.allclose(maps, torch.ones(1, 1))

    def test_orthonormal_rows(self):
        # softmax([1, 0, 0]) computed independently
        expected_diag = float(np.exp(1.0) / (np.exp(1.0) + 2.0))
        maps = attention_scores(torch.eye(3))
        assert maps[0, 0].item() == pytest.approx(expected_diag, abs=1e-6)
        assert maps[0, 1].item() == pytest.approx(1.0 / (math.e + 2.0), abs=1e-6)

    @given(st.integers(1, 16), st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_rows_sum_to_one(self, n, seed):
        gen = torch.Generator().manual_seed(seed)
        h = torch.randn(n, 5, generator=gen) * 3
        maps = attention_scores(h)
        assert torch.all(maps >= 0)
        assert torch.allclose(maps.sum(dim=1), torch.ones(n), atol=1e-6)

    def test_multi_head_rows_sum_to_one(self):
        h = torch.randn(4, 6)
        maps = attention_scores(h, heads=2)
        assert maps.shape == (4, 4)
        assert torch.allclose(maps.sum(dim=1), torch.ones(4), atol=1e-6)


class TestInteractOnce:
    def test_uniform_map_arithmetic(self):
        h_b = torch.tensor([[2.0], [4.0]])
        h_p = torch.zeros(2, 1)
        maps = AttentionMaps(alpha_b=torch.eye(2), alpha_p=torch.full((2, 2), 0.5))
        h_b2, _ = interact_once(h_b, h_p, maps, dropout_rate=0.0, training=False)
        assert torch.allclose(h_b2, torch.tensor([[5.0], [7.0]]))

    def test_zero_dropout_equals_eval(self):
        torch.manual_seed(0)
        h_b, h_p = torch.randn(3, 4), torch.randn(3, 5)
        maps = AttentionMaps(
            alpha_b=attention_scores(h_b), alpha_p=attention_scores(h_p)
        )
        train_out = interact_once(h_b, h_p, maps, dropout_rate=0.0, training=True)
        eval_out = interact_once(h_b, h_p, maps, dropout_rate=0.5, training=False)
        assert torch.equal(train_out[0], eval_out[0])
        assert torch.equal(train_out[1], eval_out[1])

    def test_identity_alpha_b_doubles_h_p(self):
        h_b, h_p = torch.randn(3, 4), torch.randn(3, 5)
        maps = AttentionMaps(alpha_b=torch.eye(3), alpha_p=attention_scores(h_p))
        _, h_p2 = interact_once(h_b, h_p, maps, dropout_rate=0.0, training=False)
        assert torch.allclose(h_p2, 2 * h_p)

    def test_zero_maps_pure_residual(self):
        h_b, h_p = torch.randn(3, 4), torch.randn(3, 5)
        maps = AttentionMaps(alpha_b=torch.zeros(3, 3), alpha_p=torch.zeros(3, 3))
        h_b2, h_p2 = interact_once(h_b, h_p, maps, dropout_rate=0.0, training=False)
        assert torch.equal(h_b2, h_b)
        assert torch.equal(h_p2, h_p)


class _IdentityGcn(torch.nn.Module):
    def forward(self, h, adj):
        return h


class _IdentityLstm(torch.nn.Module):
    def forward(self, x):
        return x


def _adj(n):
    heads = [-1] + [i - 1 for i in range(1, n)]
    return torch.as_tensor(
        build_dependency_graph(heads, n).normalized, dtype=torch.float32
    )


class TestInteractionStack:
    def test_single_layer_with_identity_refresh(self):
        torch.manual_seed(1)
        stack = InteractionStack(d_l=6, iterations=1, gcn_layers=2, dropout=0.1).eval()
        stack.layers[0].gcn = _IdentityGcn()
        stack.layers[0].lstm = _IdentityLstm()
        h_b, h_p = torch.randn(3, 4), torch.randn(3, 6)
        out = stack(h_b, h_p, _adj(3))
        alpha_p = attention_scores(h_p)
        assert torch.allclose(out, alpha_p @ h_b + h_b, atol=1e-6)

    @pytest.mark.parametrize("iterations", [1, 2, 3])
    def test_output_keeps_basic_width(self, iterations):
        torch.manual_seed(2)
        stack = InteractionStack(d_l=6, iterations=iterations, gcn_layers=1, dropout=0.0).eval()
        out = stack(torch.randn(4, 10), torch.randn(4, 6), _adj(4))
        assert out.shape == (4, 10)

    def test_two_layers_equal_manual_unroll(self):
        torch.manual_seed(3)
        stack = InteractionStack(d_l=6, iterations=2, gcn_layers=2, dropout=0.1).eval()
        h_b, h_p = torch.randn(4, 8, dtype=torch.float32), torch.randn(4, 6)
        adj = _adj(4)
        out = stack(h_b, h_p, adj)

        cur_b, cur_p = h_b, h_p
        for layer in stack.layers:
            maps = AttentionMaps(
                alpha_b=attention_scores(cur_b), alpha_p=attention_scores(cur_p)
            )
            cur_b, mixed_p = interact_once(cur_b, cur_p, maps, 0.0, training=False)
            cur_p = layer.lstm(layer.gcn(mixed_p, adj))
        assert torch.allclose(out, cur_b, atol=1e-6)

    def test_eval_stack_is_deterministic(self):
        torch.manual_seed(4)
        stack = InteractionStack(d_l=6, iterations=2, gcn_layers=1, dropout=0.3).eval()
        h_b, h_p, adj = torch.randn(3, 7), torch.randn(3, 6), _adj(3)
        assert torch.equal(stack(h_b, h_p, adj), stack(h_b, h_p, adj))

    def test_shared_weights_reuse_parameters(self):
        stack = InteractionStack(
            d_l=6, iterations=3, gcn_layers=1, dropout=0.0, share_weights=True
        )
        params = {id(p) for p in stack.parameters()}
        single = InteractionStack(d_l=6, iterations=1, gcn_layers=1, dropout=0.0)
        assert len(params) == len(list(single.parameters()))


def test_attention_and_mix_gradients_match_fd():
    torch.manual_seed(5)
    h_b = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
    h_p = torch.randn(3, 5, dtype=torch.float64, requires_grad=True)

    def loss():
        maps = AttentionMaps(
            alpha_b=attention_scores(h_b), alpha_p=attention_scores(h_p)
        )
        b2, p2 = interact_once(h_b, h_p, maps, dropout_rate=0.0, training=False)
        return (b2**2).sum() + (p2**3).sum()

    assert_grad_matches_fd(loss, [h_b, h_p])


def test_full_interaction_layer_gradients_match_fd():
    torch.manual_seed(6)
    stack = InteractionStack(d_l=4, iterations=1, gcn_layers=1, dropout=0.0).double()
    stack.eval()
    layer = stack.layers[0]
    adj = _adj(3).double()
    h_b = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
    h_p = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)

    def loss():
        b2, p2 = layer(h_b, h_p, adj)
        return (b2**2).sum() + (p2**2).sum()

    assert_grad_matches_fd(
        loss, [h_b, h_p, layer.gcn.linears[0].weight, layer.lstm.lstm.weight_ih_l0]
    )
