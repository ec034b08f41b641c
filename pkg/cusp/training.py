from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import f1_score, roc_auc_score

from core import autograd as ag
from core.config import Config
from core.exceptions import ConfigError, InvalidInput, NonFiniteError, SplitError
from curvature.orc import OrcConfig, OrcResult, compute_all
from graphs.graph import Graph
from manifolds.product import Signature
from manifolds.signature import signature_from_config

from .encoding import CurvatureEncoder
from .model import (
    ModelConfig,
    ModelInputs,
    ModelParams,
    Targets,
    forward,
    lp_scores,
    loss,
    prepare_inputs,
)

logger = logging.getLogger(__name__)

DEFAULT_SPLITS = {"nc": (0.6, 0.2, 0.2), "lp": (0.85, 0.05, 0.1)}
SPLIT_ATTEMPTS = 10
PROBE_FLOOR = 1e-5
KINK_TOL = 1e-3


def parse_split(text: str, task: str) -> tuple[float, float, float]:
    if text.strip() == "auto":
        return DEFAULT_SPLITS[task]
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"train.split must be 'auto' or 'a,b,c', got {text!r}") from None
    if len(parts) != 3 or any(p < 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9 or parts[0] <= 0:
        raise ConfigError(f"train.split fractions must be three nonnegative numbers summing to 1, got {text!r}")
    return parts


@dataclass(frozen=True)
class TrainConfig:
    task: str = "nc"
    lr: float = 4e-3
    epochs: int = 100
    weight_decay: float = 5e-4
    dropout: float = 0.3
    seed: int = 0
    split: tuple = DEFAULT_SPLITS["nc"]
    repeats: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.task not in DEFAULT_SPLITS:
            raise ConfigError(f"train.task must be nc or lp, got {self.task!r}")
        if self.epochs < 1 or self.repeats < 1:
            raise ConfigError("train.epochs and train.repeats must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("train.dropout must lie in [0, 1)")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("train.lr must be > 0 and train.weight_decay >= 0")

    @classmethod
    def from_config(cls, config: Config) -> "TrainConfig":
        section = dict(config.section("train"))
        task = section.get("task", "nc")
        section["split"] = parse_split(section.get("split", "auto"), task)
        names = {f.name for f in fields(cls)}
        return cls(model=ModelConfig.from_config(config), **{k: v for k, v in section.items() if k in names})


# -----------------------------
# Splits
# -----------------------------

@dataclass(frozen=True, eq=False)
class NodeSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    """Edge ids per part plus fixed negative pairs for validation and test."""
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray

    def train_mask(self, m: int) -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        mask[self.train] = True
        return mask


def _cut(count: int, fractions: Sequence[float]) -> tuple[int, int]:
    n_train = int(round(fractions[0] * count))
    n_val = int(round(fractions[1] * count))
    return n_train, min(n_val, count - n_train)


def split_nodes(labels: np.ndarray, fractions: Sequence[float], rng: np.random.Generator,
                attempts: int = SPLIT_ATTEMPTS) -> NodeSplit:
    """Random node split; redrawn while a class is missing from the training part."""
    labels = np.asarray(labels)
    classes = set(np.unique(labels).tolist())
    n_train, n_val = _cut(labels.size, fractions)
    for attempt in range(1, attempts + 1):
        perm = rng.permutation(labels.size)
        train = np.sort(perm[:n_train])
        if set(np.unique(labels[train]).tolist()) == classes:
            return NodeSplit(train, np.sort(perm[n_train:n_train + n_val]), np.sort(perm[n_train + n_val:]))
        logger.warning("Split attempt %d misses a class in the training part, reseeding", attempt)
    raise SplitError(f"no split with every class in training after {attempts} attempts")


def edge_pairs(g: Graph, ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    return np.stack([g.src[ids], g.dst[ids]], axis=1)


def sample_negatives(g: Graph, k: int, rng: np.random.Generator, exclude=()) -> np.ndarray:
    """k distinct node pairs u < v that are not edges of `g` and not in `exclude`."""
    if k == 0:
        return np.zeros((0, 2), dtype=np.int64)
    taken = {(int(u), int(v)) for u, v in exclude}
    available = g.n * (g.n - 1) // 2 - g.m - len(taken)
    if available < k:
        raise SplitError(f"graph has only {available} free node pairs, need {k} negatives")
    out: list[tuple[int, int]] = []
    while len(out) < k:
        u, v = (int(x) for x in rng.integers(0, g.n, size=2))
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        if key in taken or g.has_edge(*key):
            continue
        taken.add(key)
        out.append(key)
    return np.array(out, dtype=np.int64)


def split_edges(g: Graph, fractions: Sequence[float], rng: np.random.Generator) -> EdgeSplit:
    """
    Random edge split. Nodes left without a training edge get one incident edge
    moved back from validation/test so the training graph has no isolated nodes.
    """
    n_train, n_val = _cut(g.m, fractions)
    perm = rng.permutation(g.m)
    train = list(perm[:n_train])
    held = {int(e): "val" for e in perm[n_train:n_train + n_val]}
    held.update({int(e): "test" for e in perm[n_train + n_val:]})

    deg = np.zeros(g.n, dtype=np.int64)
    for e in train:
        deg[g.src[e]] += 1
        deg[g.dst[e]] += 1
    moved = 0
    for e in [int(x) for x in perm[n_train:]]:
        if deg[g.src[e]] == 0 or deg[g.dst[e]] == 0:
            del held[e]
            train.append(e)
            deg[g.src[e]] += 1
            deg[g.dst[e]] += 1
            moved += 1
    if moved:
        logger.info("Moved %d held-out edges back to training to keep every node connected", moved)

    val = np.array(sorted(e for e, part in held.items() if part == "val"), dtype=np.int64)
    test = np.array(sorted(e for e, part in held.items() if part == "test"), dtype=np.int64)
    if test.size == 0 or val.size == 0:
        raise SplitError("link prediction needs validation and test edges")
    val_neg = sample_negatives(g, val.size, rng)
    test_neg = sample_negatives(g, test.size, rng, exclude=val_neg)
    return EdgeSplit(np.sort(np.array(train, dtype=np.int64)), val, test, val_neg, test_neg)


# -----------------------------
# Optimizer
# -----------------------------

class Adam:
    """First/second moment adaptive steps over tape tensors."""

    def __init__(self, params: Sequence[ag.Tensor], lr: float = 4e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p.value = p.value - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


# -----------------------------
# Run context
# -----------------------------

@dataclass(eq=False)
class RunContext:
    graph: Graph
    train_graph: Graph
    orc: OrcResult
    signature: Signature
    encoder: Optional[CurvatureEncoder]
    inputs: ModelInputs
    split: object
    task: str
    n_classes: Optional[int] = None

    def targets(self, part: str, rng: Optional[np.random.Generator] = None) -> Targets:
        if self.task == "nc":
            return Targets("nc", labels=self.graph.labels, index=getattr(self.split, part))
        pos = edge_pairs(self.graph, getattr(self.split, part))
        if part == "train":
            neg = sample_negatives(self.graph, pos.shape[0], rng)
        else:
            neg = getattr(self.split, f"{part}_neg")
        return Targets("lp", pos=pos, neg=neg)


def build_context(g: Graph, config: Config, cfg: TrainConfig, seed: int,
                  split=None, signature: Optional[Signature] = None,
                  frequencies: Optional[np.ndarray] = None) -> tuple[RunContext, np.random.Generator]:
    """Split, curvature of the training graph, signature, encoder and model inputs."""
    rng = np.random.default_rng(seed)
    n_classes = None
    if cfg.task == "nc":
        if g.labels is None:
            raise InvalidInput("node classification needs labels")
        n_classes = int(g.labels.max()) + 1
        split = split if split is not None else split_nodes(g.labels, cfg.split, rng)
        train_graph = g
    else:
        split = split if split is not None else split_edges(g, cfg.split, rng)
        train_graph = g.with_edges(split.train_mask(g.m))

    orc = compute_all(train_graph, OrcConfig.from_config(config))
    if signature is None:
        signature = signature_from_config(config, orc.edge_values(train_graph), seed)
    if signature.dim != cfg.model.d_m:
        logger.info("Signature %s has %d columns; model.d_m=%d is not used", signature, signature.dim, cfg.model.d_m)

    encoder = None
    if cfg.model.d_c > 0:
        enc_sig = signature.rescaled(cfg.model.d_c)
        if frequencies is None:
            encoder = CurvatureEncoder.gaussian(cfg.model.d_c, cfg.model.sigma, seed, enc_sig)
        else:
            encoder = CurvatureEncoder(frequencies, "gaussian", cfg.model.sigma, seed, enc_sig)

    inputs = prepare_inputs(train_graph, orc, encoder)
    ctx = RunContext(g, train_graph, orc, signature, encoder, inputs, split, cfg.task, n_classes)
    return ctx, rng


def init_params(ctx: RunContext, cfg: TrainConfig, rng: np.random.Generator) -> ModelParams:
    return ModelParams.init(ctx.signature, ctx.inputs.features.shape[1], cfg.model, cfg.task,
                            ctx.n_classes, rng, ctx.encoder)


# -----------------------------
# Metrics
# -----------------------------

def metric_name(task: str) -> str:
    return "f1" if task == "nc" else "auc"


def part_metric(ctx: RunContext, out, cfg: TrainConfig, part: str) -> float:
    """Micro-F1 for node classification, ROC-AUC for link prediction."""
    targets = ctx.targets(part)
    if ctx.task == "nc":
        idx = np.asarray(targets.index, dtype=np.int64)
        if idx.size == 0:
            return float("nan")
        pred = np.argmax(np.asarray(ag.value_of(out.logits))[idx], axis=1)
        return float(f1_score(ctx.graph.labels[idx], pred, average="micro"))
    scores = np.concatenate([lp_scores(out.zeta, targets.pos, cfg.model),
                             lp_scores(out.zeta, targets.neg, cfg.model)])
    truth = np.concatenate([np.ones(len(targets.pos)), np.zeros(len(targets.neg))])
    return float(roc_auc_score(truth, scores))


def evaluate(ctx: RunContext, params: ModelParams, cfg: TrainConfig) -> dict[str, float]:
    out = forward(ctx.inputs, params, cfg.model)
    return {part: part_metric(ctx, out, cfg, part) for part in ("val", "test")}


# -----------------------------
# Training
# -----------------------------

@dataclass(eq=False)
class TrainResult:
    params: ModelParams
    history: list
    best_epoch: int
    val_metric: float
    test_metric: float
    context: RunContext
    train_config: TrainConfig
    config: Config
    seed: int

    @property
    def metric(self) -> str:
        return metric_name(self.train_config.task)

    def report(self) -> list[tuple[str, str]]:
        """Flat key/value report of metrics and learned parameters."""
        out = forward(self.context.inputs, self.params, self.train_config.model)
        rows = [
            ("task", self.train_config.task),
            ("metric", self.metric),
            ("seed", str(self.seed)),
            ("best_epoch", str(self.best_epoch)),
            ("val_metric", repr(self.val_metric)),
            ("test_metric", repr(self.test_metric)),
            ("signature", str(self.params.learned_signature())),
        ]
        for q, k in enumerate(self.params.kappas()):
            rows.append((f"curvature.{q}", repr(float(ag.value_of(k)))))
        for l, beta in enumerate(out.betas):
            rows.append((f"beta.{l}", ",".join(repr(float(b)) for b in np.ravel(ag.value_of(beta)))))
        rows.append(("epsilon", ",".join(repr(float(e)) for e in np.ravel(ag.value_of(out.epsilon)))))
        for name, gamma in zip(self.params.gamma_names(), self.params.gammas()):
            rows.append((name, ",".join(repr(float(x)) for x in gamma)))
        return rows


def train(g: Graph, config: Optional[Config] = None, seed: Optional[int] = None) -> TrainResult:
    """
    Full-graph training with Adam; the parameters of the best validation epoch
    are restored at the end. Deterministic for a fixed seed.
    """
    config = config if config is not None else Config()
    cfg = TrainConfig.from_config(config)
    seed = cfg.seed if seed is None else seed
    ctx, rng = build_context(g, config, cfg, seed)
    params = init_params(ctx, cfg, rng)
    opt = Adam(params.trainable(), cfg.lr)

    history = []
    best_val, best_epoch, best_arrays = -np.inf, 0, params.arrays()
    for epoch in range(1, cfg.epochs + 1):
        opt.zero_grad()
        out = forward(ctx.inputs, params, cfg.model, training=True, rng=rng, dropout=cfg.dropout)
        value = loss(out, ctx.targets("train", rng), cfg.model, params, cfg.weight_decay)
        train_loss = float(ag.value_of(value))
        if not np.isfinite(train_loss):
            raise NonFiniteError(f"training loss became {train_loss} at epoch {epoch}")
        value.backward()
        opt.step()

        val = part_metric(ctx, forward(ctx.inputs, params, cfg.model), cfg, "val")
        history.append((epoch, train_loss, val))
        if val > best_val:
            best_val, best_epoch, best_arrays = val, epoch, params.arrays()
        logger.debug("epoch %d loss %.6f val %s %.4f", epoch, train_loss, metric_name(cfg.task), val)

    params.load_arrays(best_arrays)
    metrics = evaluate(ctx, params, cfg)
    logger.info("Best epoch %d: val %s %.4f, test %.4f", best_epoch, metric_name(cfg.task),
                metrics["val"], metrics["test"])
    return TrainResult(params, history, best_epoch, metrics["val"], metrics["test"], ctx, cfg, config, seed)


@dataclass(frozen=True)
class RepeatSummary:
    metrics: tuple
    mean: float
    half_width: float

    def as_line(self, name: str) -> str:
        return f"test {name} {self.mean:.4f} +/- {self.half_width:.4f} over {len(self.metrics)} runs"


def summarize(values: Sequence[float]) -> RepeatSummary:
    """Mean and 95% normal interval half width 1.96 std / sqrt(k)."""
    arr = np.asarray(values, dtype=np.float64)
    half = 1.96 * arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
    return RepeatSummary(tuple(float(v) for v in arr), float(arr.mean()), float(half))


def train_repeats(g: Graph, config: Optional[Config] = None) -> tuple[list[TrainResult], RepeatSummary]:
    """`train.repeats` runs on independently seeded splits."""
    config = config if config is not None else Config()
    cfg = TrainConfig.from_config(config)
    results = [train(g, config, seed=cfg.seed + i) for i in range(cfg.repeats)]
    return results, summarize([r.test_metric for r in results])


# -----------------------------
# Gradient check
# -----------------------------

@dataclass
class GradientCheckResult:
    max_rel_error: float
    probes: list = field(default_factory=list)
    excluded: list = field(default_factory=list)


def _loss_value(inputs, params, cfg: ModelConfig, targets, weight_decay) -> float:
    value = float(ag.value_of(loss(forward(inputs, params, cfg), targets, cfg, params, weight_decay)))
    if not np.isfinite(value):
        raise NonFiniteError("loss is not finite during the gradient check")
    return value


def gradient_check(params: ModelParams, inputs: ModelInputs, cfg: ModelConfig, targets: Targets,
                   n_probes: int = 20, h: float = 1e-5, seed: int = 0,
                   weight_decay: float = 0.0) -> GradientCheckResult:
    """
    Compare tape gradients with central differences on randomly chosen scalar
    parameters. Every trainable tensor gets one probe before any tensor gets a
    second, so a tensor whose gradient the tape dropped is always sampled.
    Relative errors are taken against max(|analytic|, |central|, 1e-5). Probes
    whose one-sided differences disagree (a kink within h) are excluded and reported.
    """
    trainable = {n: p for n, p in params.tensors.items() if p.requires_grad}
    for p in trainable.values():
        p.grad = None
    value = loss(forward(inputs, params, cfg), targets, cfg, params, weight_decay)
    if not np.isfinite(float(ag.value_of(value))):
        raise NonFiniteError("loss is not finite during the gradient check")
    value.backward()
    base = float(ag.value_of(value))

    rng = np.random.default_rng(seed)
    grads, rounds = {}, []
    for name, p in trainable.items():
        grad = np.zeros_like(p.value) if p.grad is None else np.asarray(p.grad)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"gradient of {name} is not finite")
        grads[name] = grad.ravel()
        rounds.append([(name, int(i)) for i in rng.permutation(grad.size)])
    candidates = []
    for depth in range(max((len(r) for r in rounds), default=0)):
        layer = [r[depth] for r in rounds if depth < len(r)]
        candidates.extend(layer[k] for k in rng.permutation(len(layer)))

    result = GradientCheckResult(0.0)
    for name, i in candidates:
        if len(result.probes) >= n_probes:
            break
        p = trainable[name]
        analytic = float(grads[name][i])
        original = float(p.value.flat[i])
        p.value.flat[i] = original + h
        f_plus = _loss_value(inputs, params, cfg, targets, weight_decay)
        p.value.flat[i] = original - h
        f_minus = _loss_value(inputs, params, cfg, targets, weight_decay)
        p.value.flat[i] = original

        central = (f_plus - f_minus) / (2 * h)
        forward_diff = (f_plus - base) / h
        backward_diff = (base - f_minus) / h
        if abs(forward_diff - backward_diff) > KINK_TOL * max(1.0, abs(central)):
            logger.warning("Gradient probe %s[%d] sits on a kink, excluded", name, i)
            result.excluded.append((name, i, "kink"))
            continue
        rel = abs(analytic - central) / max(abs(analytic), abs(central), PROBE_FLOOR)
        result.probes.append((name, i, analytic, central, rel))
        result.max_rel_error = max(result.max_rel_error, rel)
    if len(result.probes) < n_probes:
        logger.warning("Only %d of %d gradient probes were usable", len(result.probes), n_probes)
    return result


# -----------------------------
# Checkpoints
# -----------------------------

PARAM_PREFIX = "param__"


@dataclass(eq=False)
class Checkpoint:
    params: dict
    config: Config
    signature: Signature
    task: str
    seed: int
    frequencies: Optional[np.ndarray]
    split: object


def save_checkpoint(result: TrainResult, path: str | Path) -> Path:
    """params.npz: every parameter array plus config, signature, encoder frequencies, split and negatives."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ctx = result.context
    arrays = {PARAM_PREFIX + n: v for n, v in result.params.arrays().items()}
    arrays.update(
        config=np.array(result.config.as_text()),
        signature=np.array(str(ctx.signature)),
        task=np.array(result.train_config.task),
        seed=np.array(result.seed),
        frequencies=ctx.encoder.frequencies if ctx.encoder is not None else np.zeros(0),
        split_train=ctx.split.train,
        split_val=ctx.split.val,
        split_test=ctx.split.test,
    )
    if isinstance(ctx.split, EdgeSplit):
        arrays.update(val_neg=ctx.split.val_neg, test_neg=ctx.split.test_neg)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        keys = set(data.files)
        missing = {"config", "signature", "task", "seed", "split_train"} - keys
        if missing:
            raise InvalidInput(f"{path} is not a checkpoint (missing {', '.join(sorted(missing))})")
        params = {k[len(PARAM_PREFIX):]: data[k].copy() for k in keys if k.startswith(PARAM_PREFIX)}
        task = str(data["task"])
        if task == "lp":
            split = EdgeSplit(data["split_train"], data["split_val"], data["split_test"],
                              data["val_neg"], data["test_neg"])
        else:
            split = NodeSplit(data["split_train"], data["split_val"], data["split_test"])
        freqs = data["frequencies"]
        return Checkpoint(
            params=params,
            config=Config.from_text(str(data["config"])),
            signature=Signature.parse(str(data["signature"])),
            task=task,
            seed=int(data["seed"]),
            frequencies=freqs.copy() if freqs.size else None,
            split=split,
        )


def restore(g: Graph, ckpt: Checkpoint) -> tuple[RunContext, ModelParams, TrainConfig]:
    """Rebuild the run context and parameters a checkpoint was trained with."""
    cfg = TrainConfig.from_config(ckpt.config)
    ctx, rng = build_context(g, ckpt.config, cfg, ckpt.seed, split=ckpt.split,
                             signature=ckpt.signature, frequencies=ckpt.frequencies)
    params = init_params(ctx, cfg, rng)
    params.load_arrays(ckpt.params)
    return ctx, params, cfg


def evaluate_checkpoint(g: Graph, ckpt: Checkpoint) -> dict[str, float]:
    ctx, params, cfg = restore(g, ckpt)
    return evaluate(ctx, params, cfg)
