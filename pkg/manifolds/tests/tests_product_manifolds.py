# manifolds/tests/tests_product_manifolds.py
from __future__ import annotations

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from core import autograd as ag
from core.exceptions import ConfigError, DimensionMismatch, DomainError, InvalidInput
from graphs import generators
from graphs.io import save_edge_list
from manifolds import stereo
from manifolds.product import (
    Component,
    ProductMatrix,
    Signature,
    clamp_trainable_curvature,
    product_distance,
    product_exp0,
    product_log0,
    raw_from_curvature,
    split_dims,
)
from manifolds.signature import (
    choose_clusters,
    estimate_signature,
    histogram_from_values,
    parse_preferred_dims,
)

SIGNATURES = [
    "E:48:0",
    "H:24:-1,S:24:1",
    "H:16:-0.45,S:16:0.25,E:16:0",
    "H:8:-1,H:8:-0.3,S:8:0.5,S:8:1,E:16:0",
]


def _product_points(rng, sig: Signature, n=40, reach=0.8):
    blocks = []
    for comp in sig:
        v = rng.standard_normal((n, comp.dim))
        scale = reach / np.sqrt(abs(comp.curvature)) if comp.curvature else reach
        v *= rng.uniform(0, scale, size=(n, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
        blocks.append(stereo.exp0(v, comp.curvature))
    return np.concatenate(blocks, axis=1)


# -----------------------------
# Components and signatures
# -----------------------------
@pytest.mark.parametrize("kind,curvature", [("H", 0.5), ("H", 0.0), ("S", -1.0), ("E", 0.1), ("X", 0.0)])
def test_component_sign_contract(kind, curvature):
    with pytest.raises(ConfigError):
        Component(kind, 4, curvature)


def test_euclidean_component_is_never_trainable():
    assert Component("E", 4, 0.0, trainable=True).trainable is False


@pytest.mark.parametrize("text", SIGNATURES)
def test_signature_text_round_trip(text):
    sig = Signature.parse(text)
    again = Signature.parse(str(sig))
    assert str(again) == text
    assert again.slices == sig.slices
    assert sig.dim == sum(sig.dims)


def test_signature_default_curvatures_and_slices():
    sig = Signature.parse("h:8, S:4, E:2")
    assert sig.curvatures == (-1.0, 1.0, 0.0)
    assert sig.kinds == ("H", "S", "E")
    assert sig.slices == (slice(0, 8), slice(8, 12), slice(12, 14))


@pytest.mark.parametrize("text", ["", "E:4,E:4", "H:0:-1", "H:x:-1", "H:4:-1:2", "S:4:-0.5"])
def test_signature_parse_errors(text):
    with pytest.raises(ConfigError):
        Signature.parse(text)


def test_signature_derivations():
    sig = Signature.parse("H:16:-0.45,S:16:0.25,E:16:0")
    assert str(sig.with_curvatures([-0.5, 0.3, 7.0])) == "H:16:-0.5,S:16:0.3,E:16:0"
    assert sig.rescaled(12).dims == (4, 4, 4)
    with pytest.raises(DimensionMismatch):
        sig.with_dims([4, 4])


@pytest.mark.parametrize("weights,total,expected", [
    ([1, 1, 1], 10, [4, 3, 3]),
    ([0.5, 0.3, 0.2], 48, [25, 14, 9]),
    ([0.0, 1.0], 4, [1, 3]),
    ([1.0], 7, [7]),
])
def test_split_dims(weights, total, expected):
    assert split_dims(weights, total) == expected


def test_split_dims_errors():
    with pytest.raises(DimensionMismatch):
        split_dims([1, 1, 1], 2)
    with pytest.raises(InvalidInput):
        split_dims([0, 0], 4)


# -----------------------------
# Product operations
# -----------------------------
@pytest.mark.parametrize("text", SIGNATURES)
def test_product_exp_log_round_trip(text, rng):
    sig = Signature.parse(text)
    X = _product_points(rng, sig)
    assert np.max(np.abs(product_exp0(product_log0(X, sig), sig) - X)) <= 1e-8


def test_all_euclidean_maps_are_identity(rng):
    sig = Signature.euclidean(6)
    X = rng.standard_normal((5, 6))
    assert np.array_equal(product_exp0(X, sig), X)
    assert np.array_equal(product_log0(X, sig), X)


@pytest.mark.parametrize("text", SIGNATURES)
def test_product_distance_axioms(text, rng):
    sig = Signature.parse(text)
    x, y, z = (_product_points(rng, sig) for _ in range(3))
    dxy = product_distance(x, y, sig)
    assert np.allclose(dxy, product_distance(y, x, sig), atol=1e-10)
    assert np.allclose(product_distance(x, x, sig), 0.0, atol=1e-7)
    assert np.all(dxy <= product_distance(x, z, sig) + product_distance(z, y, sig) + 1e-9)


def test_product_distance_combines_components(rng):
    sig = Signature.parse("H:3:-1,E:2:0")
    x, y = _product_points(rng, sig, n=5), _product_points(rng, sig, n=5)
    dh = stereo.distance(x[:, :3], y[:, :3], -1.0)
    de = np.linalg.norm(x[:, 3:] - y[:, 3:], axis=1)
    assert np.allclose(product_distance(x, y, sig), np.sqrt(dh ** 2 + de ** 2))


def test_product_distance_pure_euclidean(rng):
    sig = Signature.euclidean(4)
    x, y = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    assert np.allclose(product_distance(x, y, sig), np.linalg.norm(x - y, axis=1))


def test_product_distance_needs_matching_products(rng):
    a = ProductMatrix.from_array(np.zeros((2, 4)), Signature.parse("H:2:-1,E:2:0"))
    b = ProductMatrix.from_array(np.zeros((2, 4)), Signature.parse("H:2:-0.5,E:2:0"))
    with pytest.raises(DimensionMismatch):
        product_distance(a, b)


def test_product_matrix_layout_checks():
    sig = Signature.parse("H:2:-1,S:3:1")
    with pytest.raises(DimensionMismatch):
        ProductMatrix.from_array(np.zeros((4, 4)), sig)
    with pytest.raises(DimensionMismatch):
        ProductMatrix([np.zeros((4, 2)), np.zeros((3, 3))], [-1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        product_exp0(np.zeros((4, 5)))
    pm = ProductMatrix.from_array(np.zeros((4, 5)), sig)
    assert (pm.n, pm.width, len(pm)) == (4, 5, 2)
    assert pm.in_domain()
    both = pm.concat(pm)
    assert both.signature is None and both.width == 10


def test_product_matrix_keeps_input_kind(rng):
    sig = Signature.parse("H:2:-1,S:3:1")
    pm = ProductMatrix.from_array(rng.uniform(-0.2, 0.2, (4, 5)), sig)
    assert isinstance(product_exp0(pm), ProductMatrix)
    assert isinstance(product_exp0(pm.values(), sig), np.ndarray)


# -----------------------------
# Trainable curvature
# -----------------------------
@pytest.mark.parametrize("kind,curvature", [("H", -0.45), ("H", -3.0), ("S", 0.25), ("S", 40.0)])
def test_curvature_clamp_inverts_init(kind, curvature):
    raw = raw_from_curvature(curvature, kind)
    assert clamp_trainable_curvature(raw, kind) == pytest.approx(curvature, abs=1e-12)


def test_curvature_clamp_keeps_sign():
    for raw in (-50.0, 0.0, 50.0):
        assert clamp_trainable_curvature(raw, "H") < 0
        assert clamp_trainable_curvature(raw, "S") > 0
    assert clamp_trainable_curvature(3.0, "E") == 0.0


def test_curvature_clamp_is_differentiable():
    raw = ag.parameter(0.3)
    kappa = clamp_trainable_curvature(raw, "H")
    kappa.backward()
    assert float(raw.grad) == pytest.approx(-1.0 / (1.0 + np.exp(-0.3)))


def test_raw_from_curvature_near_zero_raises():
    with pytest.raises(DomainError):
        raw_from_curvature(-1e-7, "H")


# -----------------------------
# Signature estimation
# -----------------------------
def _bimodal():
    shape = [1, 4, 10, 4, 1]
    offsets = [-0.02, -0.01, 0.0, 0.01, 0.02]
    hist = [(-0.45 + o, f) for o, f in zip(offsets, shape)]
    hist += [(0.25 + o, f) for o, f in zip(offsets, shape)]
    return hist


def test_bimodal_histogram_with_preferred_dims(caplog):
    sig = estimate_signature(_bimodal(), preferred_dims="H:16,S:16")
    assert str(sig) == "H:16:-0.45,S:16:0.25"
    assert "override" in caplog.text


def test_bimodal_histogram_proportional_dims():
    sig = estimate_signature(_bimodal(), d_m=48)
    assert sig.kinds == ("H", "S")
    assert sig.dims == (24, 24)
    assert abs(sig[0].curvature + 0.45) <= 0.05 and abs(sig[1].curvature - 0.25) <= 0.05


def test_flat_histogram_gives_euclidean():
    assert str(estimate_signature([(0.0, 10.0)], d_m=48)) == "E:48:0"
    assert str(estimate_signature([(-0.01, 3.0), (0.02, 5.0)], d_m=48)) == "E:48:0"


def test_component_caps_merge_overflow_into_euclidean(caplog):
    hist = [(-0.8, 0.3), (-0.2, 0.2), (0.5, 0.5)]
    sig = estimate_signature(hist, h_max=1, s_max=2, d_m=48)
    assert str(sig) == "H:14:-0.8,S:25:0.5,E:9:0"
    folded = [r for r in caplog.records if "folded into E" in r.getMessage()]
    assert len(folded) == 1 and folded[0].levelname == "WARNING"
    assert "h_max=1" in folded[0].getMessage()


def test_estimate_signature_invariants():
    rng = np.random.default_rng(5)
    for seed in range(10):
        values = np.round(rng.uniform(-1, 1, 60), 2)
        sig = estimate_signature(histogram_from_values(values), h_max=1, s_max=1, d_m=32, restarts=5, seed=seed)
        assert sig.dim == 32
        assert sig.kinds.count("E") <= 1
        assert sig.kinds.count("H") <= 1 and sig.kinds.count("S") <= 1


@pytest.mark.parametrize("hist", [[], [(0.1, 0.0)], [(0.1, -1.0)], [(float("nan"), 1.0)]])
def test_estimate_signature_rejects_bad_histograms(hist):
    with pytest.raises(InvalidInput):
        estimate_signature(hist)


def test_preferred_dims_must_match_components():
    with pytest.raises(ConfigError):
        estimate_signature(_bimodal(), preferred_dims="H:16")
    with pytest.raises(ConfigError):
        estimate_signature(_bimodal(), preferred_dims="H:16,S:16,E:16")
    with pytest.raises(ConfigError):
        parse_preferred_dims("H:big")


def test_choose_clusters_stops_on_separated_points():
    points = np.array([-0.5, 0.5])
    model = choose_clusters(points, np.array([0.5, 0.5]), k_max=5)
    assert model.n_clusters == 2


def test_histogram_from_values_counts():
    assert histogram_from_values(np.array([0.5, -0.5, 0.5])) == [(-0.5, 1.0), (0.5, 2.0)]


# -----------------------------
# Command
# -----------------------------
def test_signature_command_from_histogram(tmp_path, capsys):
    hist = tmp_path / "hist.csv"
    hist.write_text("curvature,frequency\n" + "".join(f"{c!r},{f}\n" for c, f in _bimodal()))
    cfg = tmp_path / "cusp.cfg"
    cfg.write_text("signature.preferred_dims = H:16,S:16\n")
    call_command("signature", str(hist), config=str(cfg))
    assert capsys.readouterr().out.strip() == "H:16:-0.45,S:16:0.25"


def test_signature_command_from_graph_and_spec(tmp_path, capsys):
    path = save_edge_list(generators.complete(5), tmp_path / "k5.txt")
    call_command("signature", str(path))
    out = capsys.readouterr().out.strip()
    assert out.startswith("S:48:")
    cfg = tmp_path / "cusp.cfg"
    cfg.write_text("signature.spec = H:8:-1,E:8:0\n")
    call_command("signature", str(path), config=str(cfg))
    assert capsys.readouterr().out.strip() == "H:8:-1,E:8:0"


def test_signature_command_bad_histogram_row(tmp_path):
    hist = tmp_path / "hist.csv"
    hist.write_text("curvature,frequency\n0.1,2\nabc,1\n")
    with pytest.raises(CommandError) as exc:
        call_command("signature", str(hist))
    assert "line 3" in str(exc.value)


def test_signature_command_empty_histogram(tmp_path):
    hist = tmp_path / "hist.csv"
    hist.write_text("curvature,frequency\n")
    with pytest.raises(CommandError) as exc:
        call_command("signature", str(hist))
    assert exc.value.returncode == 2
