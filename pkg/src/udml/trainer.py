"""Two-stage progressive training of the unbiased dynamic fusion model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import fusion
from .autodiff import Tensor
from .dependency import DependencyState, dependency_scores, normalize_alpha
from .encoder import ModalityEncoder, embed_sample
from .estimator import (NoiseEstimator, NoiseGrid, estimator_loss,
                        inference_uncertainty, predict_sigma)
from .metrics import accuracy, macro_f1
from .autodiff import zero_grad
from .nn import ReduceOnPlateau, make_optimizer
from .synthdata import ModalityBatch, SyntheticDataset, corrupt_split


@dataclass
class TrainConfig:
    epochs: int = 60
    stage1_fraction: float = 0.5
    batch_size: int = 128
    lr: float = 0.03
    optimizer: str = "sgd"
    momentum: float = 0.9
    weight_decay: float = 0.0
    est_lr: float = 3e-3
    seed: int = 0
    strategy: str = "udml"
    nue_off: bool = False
    mc_off: bool = False
    pos_off: bool = False
    noise_levels: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5,
                                       4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0,
                                       11.0, 12.0)
    alpha_mode: str = "ema"
    alpha_decay: float = 0.99
    est_grad_scope: str = "estimator_only"
    est_input_mode: str = "variance"
    eval_sample: bool = False
    stage2_dynamic_task: bool = False
    stage2_noisy_task: bool = False
    embed_dim: int = 32
    hidden_dim: int = 128
    plateau_patience: int = 5

    def validate(self) -> None:
        if self.epochs < 2:
            raise ValueError("TrainConfig: epochs must be >= 2")
        if not 0.0 < self.stage1_fraction < 1.0:
            raise ValueError("TrainConfig: stage1_fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("TrainConfig: batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("TrainConfig: lr must be positive")
        if self.est_lr <= 0:
            raise ValueError("TrainConfig: est_lr must be positive")
        if self.strategy not in fusion.STRATEGIES:
            raise ValueError(f"TrainConfig: unknown strategy {self.strategy!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"TrainConfig: unknown optimizer {self.optimizer!r}")
        if self.alpha_mode not in ("ema", "eval_pass"):
            raise ValueError(f"TrainConfig: unknown alpha_mode {self.alpha_mode!r}")
        if self.est_grad_scope != "estimator_only":
            raise ValueError("TrainConfig: est_grad_scope must be 'estimator_only'")
        if self.est_input_mode not in ("variance", "raw"):
            raise ValueError(f"TrainConfig: unknown est_input_mode {self.est_input_mode!r}")
        NoiseGrid(self.noise_levels)

    def stage1_epochs(self) -> int:
        return 0 if self.pos_off else math.ceil(self.stage1_fraction * self.epochs)


class UdmlModel:
    """Per-modality probabilistic encoders, noise estimators, shared fusion head."""

    def __init__(self, feat_dims: list[int], num_classes: int, embed_dim: int = 32,
                 hidden_dim: int = 64, strategy: str = "udml",
                 est_input_mode: str = "variance"):
        self.feat_dims = list(feat_dims)
        self.num_modalities = len(feat_dims)
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.est_input_mode = est_input_mode
        self.encoders = [ModalityEncoder(d, embed_dim, hidden_dim) for d in feat_dims]
        est_in = [embed_dim if est_input_mode == "variance" else d for d in feat_dims]
        self.estimators = [NoiseEstimator(d, hidden_dim, est_input_mode) for d in est_in]
        self.head = fusion.FusionHead(self.num_modalities, embed_dim, num_classes, strategy)
        groups = [id(p) for _, p in self.main_named_parameters()]
        est_ids = {id(p) for _, p in self.estimator_named_parameters()}
        assert est_ids.isdisjoint(groups), "estimator and main parameter groups alias"

    def init(self, rng: np.random.Generator) -> None:
        for enc in self.encoders:
            enc.init(rng)
        for est in self.estimators:
            est.init(rng)
        self.head.init(rng)

    def main_named_parameters(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for m, enc in enumerate(self.encoders):
            out.extend(enc.named_parameters(f"encoders.{m}."))
        out.extend(self.head.named_parameters("head."))
        return out

    def estimator_named_parameters(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for m, est in enumerate(self.estimators):
            out.extend(est.named_parameters(f"estimators.{m}."))
        return out

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.main_named_parameters() + self.estimator_named_parameters()

    def encode_features(self, features: list[np.ndarray]):
        return [enc.encode(Tensor(x)) for enc, x in zip(self.encoders, features)]

    def modality_logits(self, features: list[np.ndarray], keep: list[int]) -> np.ndarray:
        """Eval-mode logits with every modality outside `keep` zeroed out."""
        embs = self.encode_features(features)
        batch = features[0].shape[0]
        z = []
        for m, emb in enumerate(embs):
            if m in keep:
                z.append(Tensor(emb.mu.data))
            else:
                z.append(Tensor(np.zeros((batch, self.embed_dim))))
        return fusion.fuse(self.head, z, None).data

    def predict_noise(self, features: list[np.ndarray], embeddings=None) -> np.ndarray:
        """Estimated noise level per sample and modality, shape [batch, M]."""
        if embeddings is None:
            embeddings = self.encode_features(features)
        cols = []
        for m, est in enumerate(self.estimators):
            if self.est_input_mode == "variance":
                inp = Tensor(embeddings[m].sigma2.data)
            else:
                inp = Tensor(features[m])
            cols.append(predict_sigma(est, inp).data)
        return np.stack(cols, axis=1)

    def rho(self, features: list[np.ndarray], embeddings=None) -> np.ndarray:
        """Inference uncertainty per sample and modality, shape [batch, M]."""
        if embeddings is None:
            embeddings = self.encode_features(features)
        cols = []
        for m, est in enumerate(self.estimators):
            if self.est_input_mode == "variance":
                inp = Tensor(embeddings[m].sigma2.data)
            else:
                inp = Tensor(features[m])
            cols.append(inference_uncertainty(est, inp).data)
        return np.stack(cols, axis=1)


def build_model(feat_dims: list[int], num_classes: int, config: TrainConfig) -> UdmlModel:
    return UdmlModel(feat_dims, num_classes, config.embed_dim, config.hidden_dim,
                     config.strategy, config.est_input_mode)


def model_state(model: UdmlModel, dep: DependencyState) -> dict[str, np.ndarray]:
    state = {name: p.data.copy() for name, p in model.named_parameters()}
    state["dependency.alpha"] = dep.alpha.copy()
    state["dependency.raw_d_ema"] = dep.raw_d_ema.copy()
    return state


def load_model_state(model: UdmlModel, state: dict[str, np.ndarray]) -> np.ndarray:
    """Load parameters in place; returns the stored alpha vector."""
    for name, p in model.named_parameters():
        arr = state[name]
        if arr.shape != p.data.shape:
            raise ValueError(f"checkpoint: {name} has shape {arr.shape}, expected {p.data.shape}")
        p.data[...] = arr
    return state["dependency.alpha"].copy()


@dataclass
class Corruption:
    kind: str  # gaussian | salt
    epsilon: float
    fraction: float = 0.5
    modality: int | None = None
    seed: int = 0


@dataclass
class RunRecord:
    config: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    alpha: np.ndarray | None = None
    state: dict[str, np.ndarray] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    model: "UdmlModel | None" = None  # in-process convenience, never serialized


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def run_csv_lines(record: RunRecord) -> list[str]:
    if not record.rows:
        return []
    cols = list(record.rows[0].keys())
    lines = [",".join(cols)]
    for row in record.rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return lines


def _zeros_like_embed(batch: int, dim: int) -> Tensor:
    return Tensor(np.zeros((batch, dim)))


def evaluate(model: UdmlModel, batch: ModalityBatch, *, strategy: str, alpha,
             nue_off: bool = False, eval_sample: bool = False,
             corruption: Corruption | None = None,
             feature_stats=None, rng: np.random.Generator | None = None) -> dict:
    """Deterministic evaluation with the requested weighting strategy."""
    if corruption is not None:
        crng = np.random.default_rng(corruption.seed)
        batch = corrupt_split(batch, corruption.fraction, corruption.kind,
                              corruption.epsilon, crng, feature_stats,
                              corruption.modality)
    feats = batch.features
    embs = model.encode_features(feats)
    if eval_sample:
        if rng is None:
            rng = np.random.default_rng(0)
        z = [embed_sample(e, "train", rng) for e in embs]
    else:
        z = [Tensor(e.mu.data) for e in embs]
    sigma2 = [e.sigma2.data for e in embs]
    if nue_off:
        rho = np.stack([s.mean(axis=1) for s in sigma2], axis=1)
    else:
        rho = model.rho(feats, embs)
    alpha = np.asarray(alpha, dtype=np.float64)
    if strategy == "static":
        w = fusion.uniform_weights(batch.size, model.num_modalities)
    elif strategy == "pe":
        w = fusion.pe_baseline_weights(sigma2)
    elif strategy == "udml":
        w = fusion.unbiased_weights(rho, alpha)
    else:
        raise ValueError(f"evaluate: unknown strategy {strategy!r}")
    logits = fusion.fuse(model.head, z, w).data
    pred = logits.argmax(axis=1)
    ce = ad.softmax_cross_entropy(Tensor(logits), batch.labels).item()
    return {
        "accuracy": accuracy(pred, batch.labels),
        "macro_f1": macro_f1(pred, batch.labels, model.num_classes),
        "loss": ce,
        "mean_w": w.mean(axis=0),
        "mean_rho": rho.mean(axis=0),
        "pred": pred,
        "logits": logits,
    }


def _static_val_loss(model: UdmlModel, batch: ModalityBatch) -> float:
    """Strategy-independent validation loss used for the plateau scheduler."""
    embs = model.encode_features(batch.features)
    z = [Tensor(e.mu.data) for e in embs]
    logits = fusion.fuse(model.head, z, None)
    return ad.softmax_cross_entropy(Tensor(logits.data), batch.labels).item()


def _eval_pass_scores(model: UdmlModel, batch: ModalityBatch) -> np.ndarray:
    feats = batch.features
    all_keep = list(range(model.num_modalities))
    pi_full = model.modality_logits(feats, all_keep)
    pi_dropped = [model.modality_logits(feats, [k for k in all_keep if k != m])
                  for m in all_keep]
    return dependency_scores(pi_full, pi_dropped)


class _Trainer:
    def __init__(self, config: TrainConfig, dataset: SyntheticDataset):
        config.validate()
        self.config = config
        self.dataset = dataset
        ss = np.random.SeedSequence(config.seed)
        init_s, shuffle_s, embed_s, noise_s = ss.spawn(4)
        self.rng_shuffle = np.random.default_rng(shuffle_s)
        self.rng_embed = np.random.default_rng(embed_s)
        self.rng_noise = np.random.default_rng(noise_s)
        self.model = build_model(dataset.feat_dims, dataset.num_classes, config)
        self.model.init(np.random.default_rng(init_s))
        self.main_params = [p for _, p in self.model.main_named_parameters()]
        self.est_params = [p for _, p in self.model.estimator_named_parameters()]
        self.opt = make_optimizer(config.optimizer, self.main_params, config.lr,
                                  config.momentum, config.weight_decay)
        # The estimator is a small regression net; Adam fits it reliably
        # regardless of how the main parameters are optimized.
        self.opt_est = make_optimizer("adam", self.est_params, config.est_lr)
        self.scheduler = ReduceOnPlateau(self.opt, patience=config.plateau_patience)
        self.dep = DependencyState(self.model.num_modalities, config.alpha_decay)
        self.grid = NoiseGrid(config.noise_levels)

    def applied_alpha(self) -> np.ndarray:
        if self.config.mc_off:
            return np.ones(self.model.num_modalities)
        return self.dep.alpha.copy()

    def _task_weights(self, stage2: bool, embs, feats) -> np.ndarray | None:
        cfg = self.config
        if not (stage2 and cfg.stage2_dynamic_task and cfg.strategy == "udml"
                and not cfg.nue_off):
            return None
        rho = self.model.rho(feats, embs)
        return fusion.unbiased_weights(rho, self.applied_alpha())

    def train_step(self, feats: list[np.ndarray], labels: np.ndarray, stage2: bool) -> dict:
        cfg = self.config
        model = self.model
        m_count = model.num_modalities
        batch = feats[0].shape[0]

        task_feats = feats
        if stage2 and cfg.stage2_noisy_task:
            task_feats = []
            for x in feats:
                sig = self.grid.sample(self.rng_noise, batch)
                task_feats.append(x + sig[:, None] * self.rng_noise.standard_normal(x.shape))

        embs = model.encode_features(task_feats)
        z = [embed_sample(e, "train", self.rng_embed) for e in embs]
        w = self._task_weights(stage2, embs, task_feats)
        pi_full = fusion.fuse(model.head, z, w)
        loss_task = ad.softmax_cross_entropy(pi_full, labels)

        # Unimodal terms use the mean embeddings: the deterministic unimodal
        # paths match how modality dropout is evaluated at inference.
        keep_logits = []
        loss_uni = None
        for m in range(m_count):
            zm = [embs[k].mu if k == m else _zeros_like_embed(batch, model.embed_dim)
                  for k in range(m_count)]
            lm = fusion.fuse(model.head, zm, None)
            keep_logits.append(lm)
            term = ad.softmax_cross_entropy(lm, labels)
            loss_uni = term if loss_uni is None else ad.add(loss_uni, term)

        loss_main = ad.add(loss_task, loss_uni)
        ad.backward(loss_main)
        self.opt.step()
        zero_grad(self.main_params)

        if cfg.alpha_mode == "ema":
            if m_count == 2:
                pi_dropped = [keep_logits[1].data, keep_logits[0].data]
            else:
                z_vals = [Tensor(e.mu.data) for e in embs]
                pi_dropped = []
                for m in range(m_count):
                    zm = [z_vals[k] if k != m else _zeros_like_embed(batch, model.embed_dim)
                          for k in range(m_count)]
                    pi_dropped.append(fusion.fuse(model.head, zm, None).data)
            self.dep.update(dependency_scores(pi_full.data, pi_dropped))

        loss_est_val = 0.0
        if stage2 and not cfg.nue_off:
            # Two estimator updates per step, each with fresh noise draws:
            # the regression branch is cheap and benefits from the coverage.
            for _ in range(2):
                loss_est = None
                for m in range(m_count):
                    sig = self.grid.sample(self.rng_noise, batch)
                    noisy = feats[m] + sig[:, None] * self.rng_noise.standard_normal(feats[m].shape)
                    if cfg.est_input_mode == "variance":
                        emb_noisy = model.encoders[m].encode(Tensor(noisy))
                        inp = ad.detach(emb_noisy.sigma2)
                    else:
                        inp = Tensor(noisy)
                    term = estimator_loss(model.estimators[m], inp, sig)
                    loss_est = term if loss_est is None else ad.add(loss_est, term)
                ad.backward(loss_est)
                self.opt_est.step()
                zero_grad(self.est_params)
                loss_est_val = loss_est.item()

        return {"task": loss_task.item(), "uni": loss_uni.item(),
                "main": loss_main.item(), "est": loss_est_val}

    def run(self) -> RunRecord:
        cfg = self.config
        ds = self.dataset
        n = ds.train.size
        stage1 = cfg.stage1_epochs()
        record = RunRecord()
        for epoch in range(cfg.epochs):
            stage2 = epoch >= stage1
            order = self.rng_shuffle.permutation(n)
            losses = []
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                feats = [f[idx] for f in ds.train.features]
                step = self.train_step(feats, ds.train.labels[idx], stage2)
                losses.append(step["main"] + step["est"])
            if cfg.alpha_mode == "eval_pass" and (epoch == stage1 - 1 or epoch == cfg.epochs - 1):
                d = _eval_pass_scores(self.model, ds.val)
                self.dep.raw_d_ema = d
                self.dep.alpha = normalize_alpha(d, self.model.num_modalities)

            alpha = self.applied_alpha()
            val = evaluate(self.model, ds.val, strategy=cfg.strategy, alpha=alpha,
                           nue_off=cfg.nue_off, eval_sample=cfg.eval_sample)
            val_static_loss = _static_val_loss(self.model, ds.val)
            self.scheduler.step(val_static_loss)
            row = {
                "epoch": epoch,
                "stage": 2 if stage2 else 1,
                "lr": float(self.opt.lr),
                "train_loss": float(np.mean(losses)),
                "val_loss": float(val_static_loss),
                "val_acc": float(val["accuracy"]),
                "val_f1": float(val["macro_f1"]),
            }
            for m in range(self.model.num_modalities):
                row[f"alpha_m{m + 1}"] = float(alpha[m])
            for m in range(self.model.num_modalities):
                row[f"rho_m{m + 1}"] = float(val["mean_rho"][m])
            record.rows.append(row)

        record.alpha = self.applied_alpha()
        record.state = model_state(self.model, self.dep)
        record.model = self.model
        final_val = record.rows[-1]
        record.summary = {
            "strategy": cfg.strategy,
            "epochs": cfg.epochs,
            "stage1_epochs": stage1,
            "seed": cfg.seed,
            "nue_off": cfg.nue_off,
            "mc_off": cfg.mc_off,
            "pos_off": cfg.pos_off,
            "final_val_acc": final_val["val_acc"],
            "final_val_f1": final_val["val_f1"],
            "final_val_loss": final_val["val_loss"],
        }
        for m in range(self.model.num_modalities):
            record.summary[f"alpha_m{m + 1}"] = float(record.alpha[m])
        return record


def train(config: TrainConfig, dataset: SyntheticDataset) -> RunRecord:
    """Run the progressive two-stage schedule and return the full record."""
    trainer = _Trainer(config, dataset)
    return trainer.run()
