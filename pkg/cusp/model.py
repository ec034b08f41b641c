"""
The curvature-aware network: feature encoder, filter bank over the CUSP
adjacency, component pooling, curvature positional encoding and task heads.

Everything below is written against `core.autograd`, so one forward pass serves
inference (plain arrays) and training (tape tensors).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from core import autograd as ag
from core.exceptions import ConfigError, DimensionMismatch, EmptyMaskError, InvalidInput
from curvature.laplacian import build as build_laplacian
from curvature.orc import OrcResult, normalize
from filters.gpr import build_filter_bank, gpr_combine, gpr_weights, propagate
from graphs.graph import Graph
from manifolds import stereo
from manifolds.product import (
    ProductMatrix,
    Signature,
    clamp_trainable_curvature,
    raw_from_curvature,
)

from .encoding import CurvatureEncoder, phi_euclidean, project_encoding, trainable_projectors

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    "relu": ag.relu,
    "tanh": ag.tanh,
    "none": lambda x: x,
}
TASKS = ("nc", "lp")


@dataclass(frozen=True)
class ModelConfig:
    d_m: int = 48
    d_c: int = 16
    d_pool: int = 16
    L: int = 10
    alpha: float = 0.3
    gpr_init: str = "ppr"
    activation: str = "relu"
    pooling: bool = True
    filter_bank: bool = True
    train_gamma: bool = True
    train_curvature: bool = True
    sigma: float = 1.0
    lp_radius: float = 2.0
    lp_temperature: float = 1.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"model.activation must be one of {', '.join(ACTIVATIONS)}")
        if self.gpr_init not in ("ppr", "highpass"):
            raise ConfigError("model.gpr_init must be ppr or highpass")
        if self.L < 1:
            raise ConfigError("model.L must be >= 1")
        if self.d_c < 0 or self.d_pool < 1 or self.d_m < 1:
            raise ConfigError("model.d_m and model.d_pool must be >= 1, model.d_c >= 0")
        if self.lp_temperature <= 0:
            raise ConfigError("model.lp_temperature must be > 0")

    @classmethod
    def from_config(cls, config) -> "ModelConfig":
        section = config.section("model")
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in section.items() if k in names})


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


class ModelParams:
    """
    Named parameter tensors. Frozen parts (gamma with train_gamma off,
    curvatures with train_curvature off) are tensors without gradients.
    """

    def __init__(self, signature: Signature, tensors: dict[str, ag.Tensor], task: str = "nc",
                 encoding_signature: Optional[Signature] = None):
        self.signature = signature
        self.tensors = dict(tensors)
        self.task = task
        self.encoding_signature = encoding_signature

    @classmethod
    def init(cls, signature: Signature, d_f: int, cfg: ModelConfig, task: str = "nc",
             n_classes: Optional[int] = None, rng: Optional[np.random.Generator] = None,
             encoder: Optional[CurvatureEncoder] = None) -> "ModelParams":
        if task not in TASKS:
            raise ConfigError(f"train.task must be nc or lp, got {task!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        d_m = signature.dim
        t: dict[str, ag.Tensor] = {
            "encoder.W": ag.parameter(_glorot(rng, d_f, d_m), "encoder.W"),
            "encoder.b": ag.parameter(np.zeros(d_m), "encoder.b"),
        }

        init = gpr_weights(cfg.gpr_init, cfg.alpha, cfg.L).gamma
        filters = range(cfg.L + 1) if cfg.filter_bank else [cfg.L]
        for l in filters:
            t[f"gamma.{l}"] = ag.Tensor(init.copy(), requires_grad=cfg.train_gamma, name=f"gamma.{l}")
        t["epsilon"] = ag.parameter(np.zeros(len(filters)), "epsilon")

        for q, comp in enumerate(signature):
            if comp.kind == "E":
                continue
            trainable = cfg.train_curvature and comp.trainable
            t[f"curvature.{q}"] = ag.Tensor(raw_from_curvature(comp.curvature, comp.kind),
                                            requires_grad=trainable, name=f"curvature.{q}")

        if cfg.pooling and len(signature) > 1:
            for q, comp in enumerate(signature):
                t[f"pool.W.{q}"] = ag.parameter(_glorot(rng, comp.dim, cfg.d_pool), f"pool.W.{q}")
            t["pool.theta"] = ag.parameter(rng.normal(0.0, 1.0 / np.sqrt(cfg.d_pool), cfg.d_pool),
                                           "pool.theta")

        encoding_signature = None
        if cfg.d_c > 0:
            if encoder is None or encoder.signature is None:
                raise InvalidInput("model.d_c > 0 needs a curvature encoder with a signature")
            encoding_signature = encoder.signature
            for P in trainable_projectors(encoder):
                t[P.name] = P

        if task == "nc":
            if not n_classes or n_classes < 2:
                raise InvalidInput("node classification needs at least two classes")
            width = d_m + cfg.d_c
            t["head.W"] = ag.parameter(_glorot(rng, width, n_classes), "head.W")
            t["head.b"] = ag.parameter(np.zeros(n_classes), "head.b")
        return cls(signature, t, task, encoding_signature)

    def __getitem__(self, name: str) -> ag.Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def kappa(self, q: int):
        comp = self.signature[q]
        if comp.kind == "E":
            return 0.0
        return clamp_trainable_curvature(self.tensors[f"curvature.{q}"], comp.kind)

    def kappas(self) -> list:
        return [self.kappa(q) for q in range(len(self.signature))]

    def learned_signature(self) -> Signature:
        return self.signature.with_curvatures([float(ag.value_of(k)) for k in self.kappas()])

    def gamma_names(self) -> list[str]:
        return sorted((n for n in self.tensors if n.startswith("gamma.")), key=lambda n: int(n.split(".")[1]))

    def gammas(self) -> list[np.ndarray]:
        return [self.tensors[n].value.copy() for n in self.gamma_names()]

    def trainable(self) -> list[ag.Tensor]:
        return [p for p in self.tensors.values() if p.requires_grad]

    def decayed(self) -> list[ag.Tensor]:
        return [p for n, p in self.tensors.items() if n in ("encoder.W", "head.W") or n.startswith("pool.W.")]

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: p.value.copy() for n, p in self.tensors.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.tensors.items():
            if name not in arrays:
                raise InvalidInput(f"parameter {name} missing from the checkpoint")
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != p.shape:
                raise DimensionMismatch(f"parameter {name}: shape {value.shape} != {p.shape}")
            p.value = value.copy()


# -----------------------------
# Inputs
# -----------------------------

@dataclass(frozen=True, eq=False)
class ModelInputs:
    features: np.ndarray
    adjacency: np.ndarray
    node_orc: np.ndarray
    pe_features: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.features.shape[0]


def node_features(g: Graph) -> np.ndarray:
    """Graph features, or one-hot node identities when the graph has none."""
    return np.asarray(g.features, dtype=np.float64) if g.features is not None else np.eye(g.n)


def prepare_inputs(g: Graph, orc: OrcResult, encoder: Optional[CurvatureEncoder] = None) -> ModelInputs:
    cl = build_laplacian(g, orc)
    node_orc = normalize(orc.node_values(g.n))
    pe = phi_euclidean(encoder, node_orc) if encoder is not None else None
    return ModelInputs(node_features(g), cl.dense_adjacency(), node_orc, pe)


# -----------------------------
# Forward pieces
# -----------------------------

def encode_features(F, params: ModelParams, cfg: ModelConfig, training: bool = False,
                    rng: Optional[np.random.Generator] = None, dropout: float = 0.0):
    """f_theta(F) = act(dropout(F) W + b)."""
    X = np.asarray(F, dtype=np.float64)
    if X.shape[1] != params["encoder.W"].shape[0]:
        raise DimensionMismatch(f"features have {X.shape[1]} columns, encoder expects {params['encoder.W'].shape[0]}")
    if training and dropout > 0:
        keep = (rng.random(X.shape) >= dropout).astype(np.float64)
        X = X * keep / (1.0 - dropout)
    return ACTIVATIONS[cfg.activation](X @ params["encoder.W"] + params["encoder.b"])


def initial_embedding(F, params: ModelParams, cfg: ModelConfig, training: bool = False,
                      rng: Optional[np.random.Generator] = None, dropout: float = 0.0) -> ProductMatrix:
    """H^(0) = exp_0 per component of the encoded features."""
    H = encode_features(F, params, cfg, training, rng, dropout)
    kappas = params.kappas()
    blocks = [stereo.exp0(H[:, s], k) for s, k in zip(params.signature.slices, kappas)]
    return ProductMatrix(blocks, kappas, params.signature)


def cusp_pooling(entry: ProductMatrix, params: ModelParams, cfg: ModelConfig):
    """
    beta = softmax over components of the node-averaged attention
    sigmoid(theta^T (log_0(W_q (x) Z_q) - mu)); returns (beta, beta_q (x) Z_q blocks).
    """
    Q = len(entry)
    if Q == 1 or not cfg.pooling:
        beta = np.full(Q, 1.0 / Q)
    else:
        tangents = []
        for q, (Z, k) in enumerate(zip(entry.blocks, entry.curvatures)):
            W = params[f"pool.W.{q}"]
            if W.shape[0] != np.shape(ag.value_of(Z))[-1]:
                raise DimensionMismatch(f"pooling map {q} expects width {W.shape[0]}")
            tangents.append(stereo.log0(stereo.kappa_right_matmul(Z, W, k), k))
        mu = tangents[0]
        for T in tangents[1:]:
            mu = mu + T
        mu = mu / float(Q)
        theta = params["pool.theta"]
        tau = ag.stack([ag.mean(ag.sigmoid((T - mu) @ theta)) for T in tangents])
        beta = ag.softmax(tau)
    blocks = [stereo.kappa_scale(beta[q], Z, k) for q, (Z, k) in enumerate(zip(entry.blocks, entry.curvatures))]
    return beta, ProductMatrix(blocks, entry.curvatures, entry.signature)


def positional_encoding(inputs: ModelInputs, params: ModelParams) -> Optional[ProductMatrix]:
    if inputs.pe_features is None or params.encoding_signature is None:
        return None
    sig = params.encoding_signature
    projectors = [params[f"pe.P.{q}"] for q in range(len(sig))]
    return project_encoding(inputs.pe_features, projectors, params.kappas(), sig)


def attach_positional_encoding(pooled: ProductMatrix, pe: Optional[ProductMatrix]) -> ProductMatrix:
    """zeta = pooled || pe, row by row."""
    if pe is None:
        return pooled
    if pe.n != pooled.n:
        raise DimensionMismatch(f"{pooled.n} embedding rows but {pe.n} encoding rows")
    return pooled.concat(pe)


def mix_filters(zetas: list[ProductMatrix], epsilon) -> ProductMatrix:
    """Blockwise exp_0(sum_l eps_l log_0(zeta_l))."""
    first = zetas[0]
    blocks = []
    for q, k in enumerate(first.curvatures):
        acc = None
        for l, z in enumerate(zetas):
            term = epsilon[l] * stereo.log0(z.blocks[q], k)
            acc = term if acc is None else acc + term
        blocks.append(stereo.exp0(acc, k))
    return ProductMatrix(blocks, first.curvatures)


@dataclass(eq=False)
class ForwardOutput:
    zeta: ProductMatrix
    logits: Optional[object]
    betas: list
    epsilon: object


def forward(inputs: ModelInputs, params: ModelParams, cfg: ModelConfig, training: bool = False,
            rng: Optional[np.random.Generator] = None, dropout: float = 0.0) -> ForwardOutput:
    H0 = initial_embedding(inputs.features, params, cfg, training, rng, dropout)
    names = params.gamma_names()
    gammas = [params[n] for n in names]
    if cfg.filter_bank:
        entries = build_filter_bank(inputs.adjacency, H0, gammas, cfg.L).entries
    else:
        entries = [gpr_combine(gammas[0], propagate(inputs.adjacency, H0, cfg.L))]

    pe = positional_encoding(inputs, params)
    betas, zetas = [], []
    for entry in entries:
        beta, pooled = cusp_pooling(entry, params, cfg)
        betas.append(beta)
        zetas.append(attach_positional_encoding(pooled, pe))

    epsilon = ag.softmax(params["epsilon"])
    zeta = mix_filters(zetas, epsilon)
    logits = nc_logits(zeta, params) if params.task == "nc" else None
    return ForwardOutput(zeta, logits, betas, epsilon)


# -----------------------------
# Heads and losses
# -----------------------------

def nc_logits(zeta: ProductMatrix, params: ModelParams):
    tangent = ag.concatenate([stereo.log0(b, k) for b, k in zip(zeta.blocks, zeta.curvatures)], axis=-1)
    return tangent @ params["head.W"] + params["head.b"]


def lp_logits(zeta: ProductMatrix, pairs: np.ndarray, cfg: ModelConfig):
    """(r - d^2) / t, so that sigmoid of it is the Fermi-Dirac score 1 / (1 + exp((d^2 - r) / t))."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    sq = 0.0
    for block, k in zip(zeta.blocks, zeta.curvatures):
        d = stereo.distance(block[pairs[:, 0]], block[pairs[:, 1]], k)
        sq = sq + d * d
    return (cfg.lp_radius - sq) / cfg.lp_temperature


def lp_scores(zeta: ProductMatrix, pairs: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    return np.asarray(ag.value_of(ag.sigmoid(lp_logits(zeta, pairs, cfg))))


@dataclass(frozen=True, eq=False)
class Targets:
    """NC: labels with the node index to score; LP: positive and negative pairs."""
    task: str
    labels: Optional[np.ndarray] = None
    index: Optional[np.ndarray] = None
    pos: Optional[np.ndarray] = None
    neg: Optional[np.ndarray] = None


def nc_loss(logits, labels: np.ndarray, index: np.ndarray):
    """Mean cross entropy over the indexed nodes."""
    index = np.asarray(index, dtype=np.int64)
    if index.size == 0:
        raise EmptyMaskError("no nodes in the training mask")
    rows = logits[index]
    picked = rows[(np.arange(index.size), np.asarray(labels)[index])]
    return ag.mean(ag.logsumexp(rows, axis=1) - picked)


def lp_loss(zeta: ProductMatrix, pos: np.ndarray, neg: np.ndarray, cfg: ModelConfig):
    """Binary cross entropy over positive and negative pairs."""
    pos = np.asarray(pos).reshape(-1, 2)
    neg = np.asarray(neg).reshape(-1, 2)
    if pos.shape[0] == 0:
        raise EmptyMaskError("no positive edges to train on")
    total = ag.sum(ag.softplus(-lp_logits(zeta, pos, cfg)))
    count = pos.shape[0]
    if neg.shape[0]:
        total = total + ag.sum(ag.softplus(lp_logits(zeta, neg, cfg)))
        count += neg.shape[0]
    return total / float(count)


def weight_decay_term(params: ModelParams, weight_decay: float):
    total = 0.0
    for W in params.decayed():
        total = total + ag.sum(W * W)
    return 0.5 * weight_decay * total


def loss(outputs: ForwardOutput, targets: Targets, cfg: ModelConfig,
         params: Optional[ModelParams] = None, weight_decay: float = 0.0):
    if targets.task == "nc":
        value = nc_loss(outputs.logits, targets.labels, targets.index)
    elif targets.task == "lp":
        value = lp_loss(outputs.zeta, targets.pos, targets.neg, cfg)
    else:
        raise ConfigError(f"unknown task {targets.task!r}")
    if params is not None and weight_decay > 0:
        value = value + weight_decay_term(params, weight_decay)
    return value
