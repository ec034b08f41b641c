# cusp/tests/tests_model_cusp.py
from __future__ import annotations

import math

import numpy as np
import pytest

from core import autograd as ag
from core.exceptions import ConfigError, DimensionMismatch, EmptyMaskError, InvalidInput
from curvature.orc import OrcConfig, compute_all
from cusp.encoding import CurvatureEncoder
from cusp.model import (
    ModelConfig,
    ModelInputs,
    ModelParams,
    Targets,
    attach_positional_encoding,
    cusp_pooling,
    encode_features,
    forward,
    loss,
    lp_loss,
    lp_scores,
    nc_loss,
    node_features,
    prepare_inputs,
    weight_decay_term,
)
from cusp.training import gradient_check
from graphs import generators
from graphs.functions import normalized_adjacency
from manifolds import stereo
from manifolds.product import ProductMatrix, Signature, product_exp0

MIXED = Signature.parse("H:4:-1,S:4:1,E:4:0")


def _flat_inputs(g, rng, d_f=3):
    F = rng.standard_normal((g.n, d_f))
    return ModelInputs(F, normalized_adjacency(g).toarray(), np.zeros(g.n))


@pytest.fixture
def small_sbm():
    return generators.sbm([6, 6], 0.6, 0.1, seed=1, feature_noise=0.3)


@pytest.fixture
def mixed_setup(small_sbm):
    cfg = ModelConfig(d_m=12, d_c=4, d_pool=4, L=2, activation="tanh")
    encoder = CurvatureEncoder.gaussian(4, seed=0, signature=MIXED.rescaled(4))
    inputs = prepare_inputs(small_sbm, compute_all(small_sbm, OrcConfig()), encoder)
    params = ModelParams.init(MIXED, 2, cfg, "nc", 2, np.random.default_rng(0), encoder)
    return small_sbm, cfg, inputs, params


# -----------------------------
# Config and parameters
# -----------------------------
@pytest.mark.parametrize("kwargs", [
    {"activation": "gelu"},
    {"gpr_init": "heat"},
    {"L": 0},
    {"d_pool": 0},
    {"d_c": -1},
    {"lp_temperature": 0.0},
])
def test_model_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ModelConfig(**kwargs)


def test_params_layout_for_mixed_signature(mixed_setup):
    _, cfg, _, params = mixed_setup
    names = set(params.tensors)
    assert {"encoder.W", "encoder.b", "epsilon", "head.W", "head.b", "pool.theta"} <= names
    assert {f"gamma.{l}" for l in range(3)} <= names
    assert {"curvature.0", "curvature.1"} <= names and "curvature.2" not in names
    assert {"pe.P.0", "pe.P.1", "pe.P.2"} <= names
    assert params["head.W"].shape == (16, 2)
    assert str(params.learned_signature()) == "H:4:-1,S:4:1,E:4:0"


def test_frozen_parts_have_no_gradient():
    cfg = ModelConfig(d_c=0, train_gamma=False, train_curvature=False, filter_bank=False, L=3)
    params = ModelParams.init(Signature.parse("H:4:-1,E:4:0"), 3, cfg, "lp")
    assert params.gamma_names() == ["gamma.3"]
    assert not params["gamma.3"].requires_grad
    assert not params["curvature.0"].requires_grad
    assert params["epsilon"].shape == (1,)
    assert all(p.requires_grad for p in params.trainable())


def test_param_init_errors():
    cfg = ModelConfig(d_c=4)
    with pytest.raises(InvalidInput):
        ModelParams.init(MIXED, 3, cfg, "nc", 2)
    with pytest.raises(InvalidInput):
        ModelParams.init(MIXED, 3, ModelConfig(d_c=0), "nc", 1)
    with pytest.raises(ConfigError):
        ModelParams.init(MIXED, 3, ModelConfig(d_c=0), "gc", 2)


def test_load_arrays_checks_names_and_shapes():
    params = ModelParams.init(Signature.euclidean(4), 3, ModelConfig(d_c=0, L=2), "lp")
    arrays = params.arrays()
    arrays["encoder.W"] = np.zeros((2, 4))
    with pytest.raises(DimensionMismatch):
        params.load_arrays(arrays)
    del arrays["encoder.W"]
    with pytest.raises(InvalidInput):
        params.load_arrays(arrays)


def test_node_features_default_to_identity(triangle):
    assert np.array_equal(node_features(triangle), np.eye(3))


def test_encode_features_checks_width(rng):
    params = ModelParams.init(Signature.euclidean(4), 3, ModelConfig(d_c=0), "lp")
    with pytest.raises(DimensionMismatch):
        encode_features(rng.standard_normal((5, 2)), params, ModelConfig(d_c=0))


# -----------------------------
# Pooling
# -----------------------------
def test_pooling_weights_form_a_distribution(rng):
    cfg = ModelConfig(d_c=0, d_pool=4)
    params = ModelParams.init(MIXED, 3, cfg, "lp", rng=rng)
    entry = product_exp0(ProductMatrix.from_array(rng.standard_normal((7, 12)) * 0.3, MIXED))
    beta, pooled = cusp_pooling(entry, params, cfg)
    beta = np.asarray(ag.value_of(beta))
    assert beta.shape == (3,)
    assert beta.sum() == pytest.approx(1.0)
    assert np.all(beta > 0)
    for q, (Z, k) in enumerate(zip(entry.blocks, entry.curvatures)):
        expected = stereo.kappa_scale(float(beta[q]), Z, float(ag.value_of(k)))
        assert np.allclose(ag.value_of(pooled.blocks[q]), expected, atol=1e-12)


def test_pooling_off_is_uniform(rng):
    cfg = ModelConfig(d_c=0, pooling=False)
    params = ModelParams.init(MIXED, 3, cfg, "lp", rng=rng)
    assert "pool.theta" not in params
    entry = product_exp0(ProductMatrix.from_array(rng.standard_normal((4, 12)) * 0.3, MIXED))
    beta, _ = cusp_pooling(entry, params, cfg)
    assert np.allclose(beta, 1.0 / 3.0)


def test_single_component_is_not_pooled(rng):
    cfg = ModelConfig(d_c=0)
    sig = Signature.euclidean(4)
    params = ModelParams.init(sig, 3, cfg, "lp", rng=rng)
    entry = ProductMatrix.from_array(rng.standard_normal((4, 4)), sig)
    beta, pooled = cusp_pooling(entry, params, cfg)
    assert np.allclose(beta, [1.0])
    assert np.allclose(pooled.values(), entry.values())


def test_positional_encoding_rows_must_match(rng):
    sig = Signature.euclidean(2)
    a = ProductMatrix.from_array(rng.standard_normal((3, 2)), sig)
    b = ProductMatrix.from_array(rng.standard_normal((4, 2)), sig)
    with pytest.raises(DimensionMismatch):
        attach_positional_encoding(a, b)
    assert attach_positional_encoding(a, None) is a


# -----------------------------
# Forward pass
# -----------------------------
def test_flat_single_filter_matches_gpr_gnn(rng, make_random_graph):
    g = make_random_graph(n=9, p=0.4, seed=4)
    inputs = _flat_inputs(g, rng)
    cfg = ModelConfig(d_c=0, L=3, filter_bank=False)
    params = ModelParams.init(Signature.euclidean(8), 3, cfg, "nc", 2, rng)
    out = forward(inputs, params, cfg)

    A = inputs.adjacency
    H = np.maximum(inputs.features @ params["encoder.W"].value + params["encoder.b"].value, 0.0)
    gamma = params["gamma.3"].value
    Z, hop = gamma[0] * H, H
    for l in range(1, 4):
        hop = A @ hop
        Z = Z + gamma[l] * hop
    expected = Z @ params["head.W"].value + params["head.b"].value
    assert np.max(np.abs(np.asarray(ag.value_of(out.logits)) - expected)) <= 1e-10


def test_flat_filter_bank_mixes_entries(rng, make_random_graph):
    g = make_random_graph(n=8, p=0.5, seed=6)
    inputs = _flat_inputs(g, rng)
    cfg = ModelConfig(d_c=0, L=2)
    params = ModelParams.init(Signature.euclidean(6), 3, cfg, "lp", rng=rng)
    out = forward(inputs, params, cfg)

    A = inputs.adjacency
    H = np.maximum(inputs.features @ params["encoder.W"].value + params["encoder.b"].value, 0.0)
    hops = [H, A @ H, A @ A @ H]
    entries = [params["gamma.0"].value.sum() * H]
    for l in (1, 2):
        gamma = params[f"gamma.{l}"].value
        entries.append(sum(gamma[j] * hops[j] for j in range(l + 1)))
    expected = sum(entries) / 3.0
    assert out.logits is None
    assert np.allclose(out.zeta.values(), expected, atol=1e-10)
    assert np.allclose(ag.value_of(out.epsilon), 1.0 / 3.0)


def test_mixed_forward_shapes_and_domain(mixed_setup):
    g, cfg, inputs, params = mixed_setup
    out = forward(inputs, params, cfg)
    assert np.shape(ag.value_of(out.logits)) == (g.n, 2)
    assert out.zeta.width == 16
    assert out.zeta.in_domain()
    assert len(out.betas) == cfg.L + 1


def test_dropout_only_in_training(mixed_setup):
    _, cfg, inputs, params = mixed_setup
    a = ag.value_of(forward(inputs, params, cfg).logits)
    b = ag.value_of(forward(inputs, params, cfg, training=True, rng=np.random.default_rng(0), dropout=0.5).logits)
    c = ag.value_of(forward(inputs, params, cfg).logits)
    assert np.array_equal(a, c)
    assert not np.allclose(a, b)


# -----------------------------
# Losses
# -----------------------------
def test_nc_loss_worked_example():
    logits = np.array([[0.0, 0.0], [math.log(3.0), 0.0]])
    value = nc_loss(logits, np.array([0, 1]), np.array([0, 1]))
    assert float(value) == pytest.approx(1.5 * math.log(2.0))
    with pytest.raises(EmptyMaskError):
        nc_loss(logits, np.array([0, 1]), np.array([], dtype=int))


def test_lp_loss_worked_example():
    sig = Signature.euclidean(2)
    zeta = ProductMatrix.from_array(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]), sig)
    cfg = ModelConfig(lp_radius=2.0, lp_temperature=1.0)
    pos, neg = np.array([[0, 1]]), np.array([[0, 2]])
    expected = 0.5 * (math.log1p(math.exp(-1.0)) + math.log1p(math.exp(-7.0)))
    assert float(lp_loss(zeta, pos, neg, cfg)) == pytest.approx(expected)
    assert lp_scores(zeta, pos, cfg) == pytest.approx([1.0 / (1.0 + math.exp(-1.0))])
    with pytest.raises(EmptyMaskError):
        lp_loss(zeta, np.zeros((0, 2)), neg, cfg)


def test_loss_adds_weight_decay():
    params = ModelParams.init(Signature.euclidean(2), 2, ModelConfig(d_c=0), "lp")
    expected = 0.5 * 0.1 * float(np.sum(params["encoder.W"].value ** 2))
    assert float(ag.value_of(weight_decay_term(params, 0.1))) == pytest.approx(expected)
    with pytest.raises(ConfigError):
        loss(None, Targets("gc"), ModelConfig())


# -----------------------------
# Gradients
# -----------------------------
def test_gradient_check_node_classification(mixed_setup):
    g, cfg, inputs, params = mixed_setup
    targets = Targets("nc", labels=g.labels, index=np.arange(g.n))
    result = gradient_check(params, inputs, cfg, targets, n_probes=20, weight_decay=5e-4)
    assert len(result.probes) == 20
    assert result.max_rel_error <= 1e-4


def test_gradient_check_samples_every_trainable_tensor(mixed_setup):
    g, cfg, inputs, params = mixed_setup
    targets = Targets("nc", labels=g.labels, index=np.arange(g.n))
    trainable = {n for n, p in params.tensors.items() if p.requires_grad}
    assert len(trainable) <= 20
    result = gradient_check(params, inputs, cfg, targets, n_probes=20)
    assert {p[0] for p in result.probes} == trainable


def test_gradient_check_catches_a_dropped_gradient(mixed_setup, monkeypatch):
    g, cfg, inputs, params = mixed_setup
    targets = Targets("nc", labels=g.labels, index=np.arange(g.n))
    backward = ag.Tensor.backward

    def drop_head_gradient(self, grad=None):
        backward(self, grad)
        params["head.W"].grad = np.zeros_like(params["head.W"].value)

    monkeypatch.setattr(ag.Tensor, "backward", drop_head_gradient)
    result = gradient_check(params, inputs, cfg, targets, n_probes=20)
    head = [p for p in result.probes if p[0] == "head.W"]
    assert head and head[0][2] == 0.0
    assert result.max_rel_error > 0.5


def test_gradient_check_link_prediction(small_sbm):
    cfg = ModelConfig(d_m=12, d_c=0, d_pool=4, L=2, activation="tanh")
    inputs = prepare_inputs(small_sbm, compute_all(small_sbm, OrcConfig()))
    params = ModelParams.init(MIXED, 2, cfg, "lp", rng=np.random.default_rng(1))
    pos = np.stack([small_sbm.src[:10], small_sbm.dst[:10]], axis=1)
    neg = np.array([[0, 11], [1, 10], [2, 9], [3, 8]])
    result = gradient_check(params, inputs, cfg, Targets("lp", pos=pos, neg=neg), n_probes=20)
    assert len(result.probes) == 20
    assert result.max_rel_error <= 1e-4
