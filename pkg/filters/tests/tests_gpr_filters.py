# filters/tests/tests_gpr_filters.py
from __future__ import annotations

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from numpy.polynomial import polynomial

from core.exceptions import ConfigError, DimensionMismatch, DomainError
from filters.gpr import (
    FilterBank,
    GprWeights,
    bank_responses,
    build_filter_bank,
    filter_response,
    gpr_combine,
    gpr_weights,
    gpr_weights_highpass,
    gpr_weights_ppr,
    propagate,
)
from graphs import generators
from graphs.functions import normalized_adjacency
from manifolds.product import ProductMatrix, Signature, product_exp0


def _curved_input(rng, n, signature):
    v = rng.standard_normal((n, signature.dim)) * 0.2
    return product_exp0(ProductMatrix.from_array(v, signature))


# -----------------------------
# Weight initialisations
# -----------------------------
def test_ppr_weights_values():
    w = gpr_weights_ppr(0.3, 2)
    assert w.gamma == pytest.approx([0.3, 0.21, 0.49])
    assert w.init_kind == "ppr" and w.L == 2


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.9])
@pytest.mark.parametrize("L", [0, 1, 10, 64])
def test_ppr_weights_sum_to_one(alpha, L):
    gamma = gpr_weights_ppr(alpha, L).gamma
    assert gamma.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(gamma >= 0)


def test_highpass_weights_alternate():
    assert gpr_weights_highpass(0.5, 3).gamma == pytest.approx([1.0, -0.5, 0.25, -0.125])


@pytest.mark.parametrize("kind,alpha,L,exc", [
    ("ppr", 0.0, 3, DomainError),
    ("ppr", 1.0, 3, DomainError),
    ("highpass", 0.5, -1, DomainError),
    ("lowpass", 0.5, 3, ConfigError),
])
def test_weight_validation(kind, alpha, L, exc):
    with pytest.raises(exc):
        gpr_weights(kind, alpha, L)


def test_gpr_weights_record_checks():
    with pytest.raises(DomainError):
        GprWeights(np.array([0.5, 0.6]), "ppr")
    with pytest.raises(DimensionMismatch):
        GprWeights(np.array([]))
    with pytest.raises(DomainError):
        GprWeights(np.array([1.0, np.nan]))
    w = gpr_weights_ppr(0.3, 4)
    assert w.prefix(2).gamma == pytest.approx(w.gamma[:2])
    with pytest.raises(ValueError):
        w.gamma[0] = 2.0


# -----------------------------
# Frequency response
# -----------------------------
def test_horner_matches_direct_evaluation(rng):
    gamma = rng.standard_normal(8)
    lam = np.linspace(-1.0, 1.0, 33)
    assert np.allclose(filter_response(gamma, lam), polynomial.polyval(lam, gamma), atol=1e-12)
    assert isinstance(filter_response(gamma, 0.5), float)


def test_response_outside_unit_interval_raises():
    with pytest.raises(DomainError):
        filter_response(gpr_weights_ppr(0.3, 3), 1.01)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.9])
def test_ppr_response_is_low_pass(alpha):
    w = gpr_weights_ppr(alpha, 10)
    peak = filter_response(w, 1.0)
    assert peak == pytest.approx(1.0)
    for seed in range(50):
        g = generators.random_connected(12, 0.35, seed=seed)
        lam = np.linalg.eigvalsh(normalized_adjacency(g).toarray())
        lam = np.clip(lam[lam < 1.0 - 1e-6], -1.0, 1.0)
        assert np.all(np.abs(filter_response(w, lam)) / peak < 1.0)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
def test_highpass_response_approaches_resolvent(alpha):
    lam = np.linspace(-1.0, 1.0, 201)
    gap = np.abs(filter_response(gpr_weights_highpass(alpha, 64), lam) - 1.0 / (1.0 + alpha * lam))
    assert gap.max() <= 2.0 * alpha ** 64 + 1e-12


def test_bank_responses_identity_entry_is_constant():
    weights = [gpr_weights_ppr(0.3, 3).gamma] * 4
    lam = np.linspace(-1.0, 1.0, 5)
    out = bank_responses(weights, lam)
    assert len(out) == 4
    assert np.allclose(out[0], 1.0)
    assert np.allclose(out[2], filter_response(weights[2][:3], lam))


# -----------------------------
# Propagation and the filter bank
# -----------------------------
def test_euclidean_bank_matches_spectral_closed_form(rng):
    signature = Signature.euclidean(5)
    for seed in range(20):
        g = generators.random_connected(10, 0.4, seed=seed)
        A = normalized_adjacency(g)
        X = rng.standard_normal((g.n, 5))
        gamma = gpr_weights_ppr(0.2, 6).gamma
        bank = build_filter_bank(A, ProductMatrix.from_array(X, signature), [gamma] * 7)
        lam, U = np.linalg.eigh(A.toarray())
        expected = U @ np.diag(polynomial.polyval(lam, gamma)) @ U.T @ X
        assert np.max(np.abs(bank.entries[-1].values() - expected)) <= 1e-8


def test_one_hot_weights_pick_a_single_hop(rng, make_random_graph):
    signature = Signature.parse("H:3:-1,S:2:0.5,E:2:0")
    g = make_random_graph(n=9, p=0.5, seed=2)
    hops = propagate(normalized_adjacency(g), _curved_input(rng, g.n, signature), 3)
    for k in range(4):
        gamma = np.zeros(4)
        gamma[k] = 1.0
        combined = gpr_combine(gamma, hops)
        assert np.allclose(combined.values(), hops[k].values(), atol=1e-10)


def test_curved_bank_stays_in_domain(rng, make_random_graph):
    signature = Signature.parse("H:4:-1,S:4:1")
    g = make_random_graph(n=10, p=0.4, seed=1)
    L = 4
    bank = build_filter_bank(normalized_adjacency(g), _curved_input(rng, g.n, signature),
                             [gpr_weights_ppr(0.3, L)] * (L + 1))
    assert len(bank) == L + 1 and bank.L == L
    assert all(entry.in_domain() for entry in bank.entries)
    assert bank.epsilon == pytest.approx([1.0 / (L + 1)] * (L + 1))


def test_bank_shape_errors(rng, triangle):
    A = normalized_adjacency(triangle)
    H0 = ProductMatrix.from_array(rng.standard_normal((3, 2)), Signature.euclidean(2))
    with pytest.raises(DomainError):
        build_filter_bank(A, H0, [np.ones(1)])
    with pytest.raises(DimensionMismatch):
        build_filter_bank(A, H0, [np.ones(3)] * 2, L=2)
    with pytest.raises(DimensionMismatch):
        build_filter_bank(A, H0, [np.ones(3), np.ones(2), np.ones(3)])
    with pytest.raises(DimensionMismatch):
        FilterBank([H0], [np.ones(2), np.ones(2)])
    with pytest.raises(DimensionMismatch):
        propagate(np.eye(4), H0, 1)
    with pytest.raises(DimensionMismatch):
        gpr_combine(np.ones(3), [H0, H0])


# -----------------------------
# Command
# -----------------------------
def test_filter_response_command_default_init(tmp_path, capsys):
    out = tmp_path / "response.csv"
    call_command("filter_response", out=str(out))
    rows = out.read_text().splitlines()
    assert len(rows) == 202
    header = rows[0].split(",")
    assert header[0] == "lambda" and header[-1] == "g_filter_10"
    assert rows[1].startswith("-1.0,")
    assert "ppr(alpha=0.3)" in capsys.readouterr().out


def test_filter_response_command_reads_config(tmp_path):
    cfg = tmp_path / "cusp.cfg"
    cfg.write_text("model.L = 3\nmodel.gpr_init = highpass\nmodel.alpha = 0.5\n")
    out = tmp_path / "response.csv"
    call_command("filter_response", out=str(out), config=str(cfg))
    rows = out.read_text().splitlines()
    assert rows[0] == "lambda,g_filter_0,g_filter_1,g_filter_2,g_filter_3"
    last = [float(x) for x in rows[-1].split(",")]
    assert last == pytest.approx([1.0, 0.625, 0.5, 0.75, 0.625])


def test_filter_response_command_missing_params(tmp_path):
    with pytest.raises(CommandError) as exc:
        call_command("filter_response", out=str(tmp_path / "r.csv"), params=str(tmp_path / "nope.npz"))
    assert exc.value.returncode == 2
