"""Two-stage classifier: 3D-CNN backbone, then label-embedding fusion.

Stage 1 trains the backbone as an ordinary patch classifier:
conv(32) -> pool -> conv(64) -> conv(128) -> pool -> flatten ->
fc1(128)+relu+dropout -> fc2(64)+relu -> classifier(U)+softmax,
minimizing mean patch cross-entropy plus an L2 weight penalty with Adam.

Stage 2 freezes the backbone, taps the 64-dim fc2 features, projects them
through a ReLU MLP to the label-embedding dimension, and scores each class
by the dot product with its embedding vector; only projection weights
train. Image-level predictions majority-vote the per-patch argmaxes, with
ties broken by the highest summed patch probability, then the lowest
class index.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cube import DatasetManifest, HsiCube, LabelSet, load_cube
from .embeddings import LabelEmbeddingSet
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    NumericError,
    ShapeError,
    ValidationError,
)
from .metrics import EvalReport, confusion_matrix, summarize
from .nn import (
    LayerParams,
    adam_step,
    avgpool3d_backward,
    avgpool3d_forward,
    check_tensor4,
    conv3d_backward,
    conv3d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    init_adam,
    l2_penalty,
    load_params,
    relu_backward,
    relu_forward,
    save_params,
    softmax,
)
from .patches import PatchDataset, augment_scale, extract_patches
from .pca import PcaModel, transform

log = logging.getLogger(__name__)

MODES = ("standalone_cnn", "label_only", "full_s3fn")
CONV_FILTERS = (32, 64, 128)
FC1_UNITS = 128
FC2_UNITS = 64
POOL_WINDOW = 2

# Sub-stream tags so every consumer of the run seed draws independently.
_STREAM_BACKBONE_INIT = 0
_STREAM_SHUFFLE = 1
_STREAM_DROPOUT = 2
_STREAM_AUGMENT = 3
_STREAM_HEAD_INIT = 4
_STREAM_FUSE_SHUFFLE = 5
_STREAM_FUSE_AUGMENT = 6


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults follow the reference setup."""

    epochs: int = 100
    batch_size: int = 4
    lr: float = 1e-3
    lam: float = 1e-2
    dropout: float = 0.5
    seed: int = 0
    augment: bool = True
    augment_lo: float = 0.9
    augment_hi: float = 1.1
    proj_hidden: tuple[int, ...] = ()
    feature_tap: str = "fc2"
    normalize_embeddings: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0 or self.lam < 0:
            raise ConfigError("epochs/batch_size/lr/lambda out of range")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.augment_lo > self.augment_hi:
            raise ConfigError("augment_lo must be <= augment_hi")
        if self.feature_tap not in ("fc1", "fc2"):
            raise ConfigError(f"feature_tap must be fc1 or fc2, got {self.feature_tap}")
        self.proj_hidden = tuple(int(h) for h in self.proj_hidden)


@dataclass
class Backbone:
    conv1: LayerParams
    conv2: LayerParams
    conv3: LayerParams
    fc1: LayerParams
    fc2: LayerParams
    classifier: LayerParams
    reduced_bands: int
    num_classes: int
    patch_size: int = 32
    dropout_rate: float = 0.5
    feature_tap: str = "fc2"

    def layers(self) -> list[LayerParams]:
        return [self.conv1, self.conv2, self.conv3, self.fc1, self.fc2, self.classifier]

    def param_arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers() for a in layer.arrays()]

    @property
    def feature_dim(self) -> int:
        return FC1_UNITS if self.feature_tap == "fc1" else FC2_UNITS


@dataclass
class FusionHead:
    """Projection MLP from backbone features to the embedding space."""

    layers: list[LayerParams]
    feature_dim: int
    embed_dim: int

    def param_arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.arrays()]


@dataclass(frozen=True)
class ClassProbabilities:
    probs: np.ndarray  # (U,), softmax of scores
    scores: np.ndarray  # (U,), raw similarities or logits


@dataclass(frozen=True)
class ImagePrediction:
    label: int
    votes: np.ndarray  # (M,) per-patch argmax classes
    probs: np.ndarray  # (M, U) per-patch probabilities


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _pooled(dim: int, window: int = POOL_WINDOW) -> int:
    return dim // window if dim >= window else 1


def flattened_size(patch_size: int, reduced_bands: int) -> int:
    """Flatten width after conv/pool given the fixed topology."""
    h = _pooled(_pooled(patch_size))
    d = _pooled(_pooled(reduced_bands))
    return h * h * d * CONV_FILTERS[2]


def build_backbone(
    reduced_bands: int,
    num_classes: int,
    seed: int,
    patch_size: int = 32,
    dropout: float = 0.5,
    feature_tap: str = "fc2",
) -> Backbone:
    """He-uniform initialized backbone; deterministic for a given seed."""
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    if reduced_bands < 1:
        raise ConfigError(f"reduced_bands must be >= 1, got {reduced_bands}")
    rng = _stream(seed, _STREAM_BACKBONE_INIT)

    def conv(cin: int, cout: int) -> LayerParams:
        fan = 27 * cin
        return LayerParams(_he_uniform(rng, (3, 3, 3, cin, cout), fan), np.zeros(cout))

    def dense(n_in: int, n_out: int) -> LayerParams:
        return LayerParams(_he_uniform(rng, (n_out, n_in), n_in), np.zeros(n_out))

    flat = flattened_size(patch_size, reduced_bands)
    return Backbone(
        conv1=conv(1, CONV_FILTERS[0]),
        conv2=conv(CONV_FILTERS[0], CONV_FILTERS[1]),
        conv3=conv(CONV_FILTERS[1], CONV_FILTERS[2]),
        fc1=dense(flat, FC1_UNITS),
        fc2=dense(FC1_UNITS, FC2_UNITS),
        classifier=dense(FC2_UNITS, num_classes),
        reduced_bands=reduced_bands,
        num_classes=num_classes,
        patch_size=patch_size,
        dropout_rate=dropout,
        feature_tap=feature_tap,
    )


def build_fusion_head(
    feature_dim: int, embed_dim: int, seed: int, hidden: tuple[int, ...] = ()
) -> FusionHead:
    rng = _stream(seed, _STREAM_HEAD_INIT)
    sizes = [feature_dim, *hidden, embed_dim]
    layers = [
        LayerParams(_he_uniform(rng, (sizes[i + 1], sizes[i]), sizes[i]),
                    np.zeros(sizes[i + 1]))
        for i in range(len(sizes) - 1)
    ]
    return FusionHead(layers=layers, feature_dim=feature_dim, embed_dim=embed_dim)


# --------------------------------------------------------------------------
# Forward / backward
# --------------------------------------------------------------------------


def _check_batch(backbone: Backbone, xb: np.ndarray) -> np.ndarray:
    xb = np.asarray(xb, dtype=np.float64)
    ps, cb = backbone.patch_size, backbone.reduced_bands
    if xb.ndim != 4 or xb.shape[1:] != (ps, ps, cb):
        raise ShapeError(
            f"expected batch of ({ps}, {ps}, {cb}) reduced patches, got {xb.shape}"
        )
    return check_tensor4(xb[..., None])


def _stage1_forward(
    backbone: Backbone,
    xb: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
):
    """Returns (logits, features, cache); features are at the configured tap."""
    t = _check_batch(backbone, xb)
    b = t.shape[0]
    c1, cc1 = conv3d_forward(t, backbone.conv1)
    r1, m1 = relu_forward(c1)
    p1, cp1 = avgpool3d_forward(r1, POOL_WINDOW)
    c2, cc2 = conv3d_forward(p1, backbone.conv2)
    r2, m2 = relu_forward(c2)
    c3, cc3 = conv3d_forward(r2, backbone.conv3)
    r3, m3 = relu_forward(c3)
    p2, cp2 = avgpool3d_forward(r3, POOL_WINDOW)
    v = p2.reshape(b, -1)
    f1, cf1 = dense_forward(v, backbone.fc1)
    rf1, mf1 = relu_forward(f1)
    d1, cdrop = dropout_forward(rf1, backbone.dropout_rate, training, rng)
    f2, cf2 = dense_forward(d1, backbone.fc2)
    rf2, mf2 = relu_forward(f2)
    logits, ccl = dense_forward(rf2, backbone.classifier)
    features = rf1 if backbone.feature_tap == "fc1" else rf2
    cache = (cc1, m1, cp1, cc2, m2, cc3, m3, cp2, p2.shape, cf1, mf1, cdrop,
             cf2, mf2, ccl)
    return logits, features, cache


def _stage1_backward(backbone: Backbone, dlogits: np.ndarray, cache):
    """Gradients of the cross-entropy term for every backbone parameter."""
    (cc1, m1, cp1, cc2, m2, cc3, m3, cp2, p2_shape, cf1, mf1, cdrop,
     cf2, mf2, ccl) = cache
    d_rf2, dw_cls, db_cls = dense_backward(dlogits, ccl)
    d_f2 = relu_backward(d_rf2, mf2)
    d_d1, dw_fc2, db_fc2 = dense_backward(d_f2, cf2)
    d_rf1 = dropout_backward(d_d1, cdrop)
    d_f1 = relu_backward(d_rf1, mf1)
    d_v, dw_fc1, db_fc1 = dense_backward(d_f1, cf1)
    d_p2 = d_v.reshape(p2_shape)
    d_r3 = avgpool3d_backward(d_p2, cp2)
    d_c3 = relu_backward(d_r3, m3)
    d_r2, dw_c3, db_c3 = conv3d_backward(d_c3, cc3)
    d_c2 = relu_backward(d_r2, m2)
    d_p1, dw_c2, db_c2 = conv3d_backward(d_c2, cc2)
    d_r1 = avgpool3d_backward(d_p1, cp1)
    d_c1 = relu_backward(d_r1, m1)
    d_t, dw_c1, db_c1 = conv3d_backward(d_c1, cc1)
    grads = [dw_c1, db_c1, dw_c2, db_c2, dw_c3, db_c3,
             dw_fc1, db_fc1, dw_fc2, db_fc2, dw_cls, db_cls]
    return grads, d_t[..., 0]


def stage1_loss_and_grads(
    backbone: Backbone,
    xb: np.ndarray,
    yb: np.ndarray,
    lam: float,
    rng: np.random.Generator | None,
    training: bool = True,
):
    """Mean patch cross-entropy plus L2 penalty, with exact gradients."""
    logits, _, cache = _stage1_forward(backbone, xb, training=training, rng=rng)
    probs = softmax(logits)
    b = xb.shape[0]
    ce = float(-np.mean(np.log(probs[np.arange(b), yb] + 1e-12)))
    loss = ce + l2_penalty(backbone.layers(), lam)
    dlogits = probs.copy()
    dlogits[np.arange(b), yb] -= 1.0
    dlogits /= b
    grads, _ = _stage1_backward(backbone, dlogits, cache)
    for layer_index, layer in enumerate(backbone.layers()):
        grads[2 * layer_index] += lam * layer.weights
    return loss, grads


def _batches(
    dataset: PatchDataset,
    pca_model: PcaModel,
    cfg: TrainConfig,
    shuffle_rng: np.random.Generator,
    augment_rng: np.random.Generator,
):
    """Shuffled minibatches of PCA-reduced (optionally augmented) patches."""
    order = shuffle_rng.permutation(len(dataset))
    for start in range(0, len(order), cfg.batch_size):
        chunk = [dataset.patches[i] for i in order[start : start + cfg.batch_size]]
        if cfg.augment:
            chunk = [
                augment_scale(p, augment_rng, cfg.augment_lo, cfg.augment_hi)
                for p in chunk
            ]
        xb = np.stack([transform(pca_model, p).values for p in chunk])
        yb = np.array([p.label for p in chunk], dtype=np.int64)
        yield xb, yb


def dataset_loss(
    backbone: Backbone,
    dataset: PatchDataset,
    pca_model: PcaModel,
    lam: float,
    batch_size: int = 16,
) -> float:
    """Mean cross-entropy over a dataset plus L2 penalty, in eval mode."""
    total = 0.0
    for start in range(0, len(dataset), batch_size):
        chunk = dataset.patches[start : start + batch_size]
        xb = np.stack([transform(pca_model, p).values for p in chunk])
        yb = np.array([p.label for p in chunk], dtype=np.int64)
        logits, _, _ = _stage1_forward(backbone, xb)
        probs = softmax(logits)
        total += float(-np.sum(np.log(probs[np.arange(len(chunk)), yb] + 1e-12)))
    return total / len(dataset) + l2_penalty(backbone.layers(), lam)


def pretrain_backbone(
    backbone: Backbone,
    train: PatchDataset,
    pca_model: PcaModel,
    cfg: TrainConfig,
) -> list[float]:
    """Stage-1 training; returns the loss history.

    history[0] is the untrained baseline (roughly ln U plus the initial L2
    penalty for a balanced random init); history[1:] are per-epoch means of
    the minibatch losses.
    """
    if len(train) == 0:
        raise DataError("cannot pretrain on an empty patch dataset")
    bad = [int(l) for l in train.labels if not 0 <= l < backbone.num_classes]
    if bad:
        raise ValidationError(f"patch labels out of range for U={backbone.num_classes}")
    params = backbone.param_arrays()
    state = init_adam(params)
    shuffle_rng = _stream(cfg.seed, _STREAM_SHUFFLE)
    dropout_rng = _stream(cfg.seed, _STREAM_DROPOUT)
    augment_rng = _stream(cfg.seed, _STREAM_AUGMENT)
    history: list[float] = [dataset_loss(backbone, train, pca_model, cfg.lam)]
    for _ in range(cfg.epochs):
        losses = []
        for xb, yb in _batches(train, pca_model, cfg, shuffle_rng, augment_rng):
            loss, grads = stage1_loss_and_grads(
                backbone, xb, yb, cfg.lam, dropout_rng
            )
            if not np.isfinite(loss):
                raise NumericError(f"stage-1 loss diverged to {loss}")
            adam_step(params, grads, state, cfg.lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return history


def extract_features(backbone: Backbone, reduced) -> np.ndarray:
    """Deterministic feature vector of one reduced patch (dropout disabled)."""
    values = reduced.values if hasattr(reduced, "values") else reduced
    _, features, _ = _stage1_forward(backbone, np.asarray(values)[None, ...])
    return features[0]


def _features_batch(backbone: Backbone, xb: np.ndarray) -> np.ndarray:
    _, features, _ = _stage1_forward(backbone, xb)
    return features


def _head_forward(head: FusionHead, z: np.ndarray):
    """ReLU MLP projection; returns (z_prime, caches)."""
    caches = []
    out = z
    for layer in head.layers:
        pre, cd = dense_forward(out, layer)
        out, mask = relu_forward(pre)
        caches.append((cd, mask))
    return out, caches


def _head_backward(head: FusionHead, d_out: np.ndarray, caches):
    grads: list[np.ndarray] = []
    grad = d_out
    for (cd, mask) in reversed(caches):
        grad = relu_backward(grad, mask)
        grad, dw, db = dense_backward(grad, cd)
        grads[:0] = [dw, db]
    return grads


def train_fusion(
    backbone: Backbone,
    head: FusionHead,
    train: PatchDataset,
    pca_model: PcaModel,
    emb: LabelEmbeddingSet,
    labels: LabelSet,
    cfg: TrainConfig,
) -> list[float]:
    """Stage-2 training of the projection head; the backbone stays frozen."""
    if len(train) == 0:
        raise DataError("cannot train fusion on an empty patch dataset")
    if head.feature_dim != backbone.feature_dim:
        raise ShapeError(
            f"head expects {head.feature_dim}-dim features, "
            f"backbone taps {backbone.feature_dim}"
        )
    emb_matrix = emb.matrix(labels)  # validates the class sets match
    if emb_matrix.shape[1] != head.embed_dim:
        raise ShapeError(
            f"embeddings are {emb_matrix.shape[1]}-dim, head projects to "
            f"{head.embed_dim}"
        )
    params = head.param_arrays()
    state = init_adam(params)
    shuffle_rng = _stream(cfg.seed, _STREAM_FUSE_SHUFFLE)
    augment_rng = _stream(cfg.seed, _STREAM_FUSE_AUGMENT)
    history: list[float] = []
    for _ in range(cfg.epochs):
        losses = []
        for xb, yb in _batches(train, pca_model, cfg, shuffle_rng, augment_rng):
            b = xb.shape[0]
            feats = _features_batch(backbone, xb)
            z_prime, caches = _head_forward(head, feats)
            scores = z_prime @ emb_matrix.T
            probs = softmax(scores)
            ce = float(-np.mean(np.log(probs[np.arange(b), yb] + 1e-12)))
            loss = ce + l2_penalty(head.layers, cfg.lam)
            if not np.isfinite(loss):
                raise NumericError(f"stage-2 loss diverged to {loss}")
            dscores = probs.copy()
            dscores[np.arange(b), yb] -= 1.0
            dscores /= b
            grads = _head_backward(head, dscores @ emb_matrix, caches)
            for layer_index, layer in enumerate(head.layers):
                grads[2 * layer_index] += cfg.lam * layer.weights
            adam_step(params, grads, state, cfg.lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return history


# --------------------------------------------------------------------------
# Inference
# --------------------------------------------------------------------------


def patch_probabilities(
    backbone: Backbone,
    head: FusionHead | None,
    emb_matrix: np.ndarray | None,
    reduced,
) -> ClassProbabilities:
    """Similarity-based class distribution for one reduced patch.

    With head and embeddings, scores are dot products between the projected
    feature and each class embedding; without them (standalone mode) the
    stage-1 classifier logits are used.
    """
    values = reduced.values if hasattr(reduced, "values") else reduced
    xb = np.asarray(values)[None, ...]
    logits, feats, _ = _stage1_forward(backbone, xb)
    if head is None:
        scores = logits[0]
    else:
        emb_matrix = _check_emb_matrix(head, emb_matrix)
        z_prime, _ = _head_forward(head, feats)
        scores = (z_prime @ emb_matrix.T)[0]
    return ClassProbabilities(probs=softmax(scores), scores=scores)


def _check_emb_matrix(head: FusionHead, emb_matrix) -> np.ndarray:
    if emb_matrix is None:
        raise ConfigError("fusion-mode inference needs label embeddings")
    emb_matrix = np.asarray(emb_matrix, dtype=np.float64)
    if emb_matrix.ndim != 2 or emb_matrix.shape[1] != head.embed_dim:
        raise ShapeError(
            f"embedding matrix shape {emb_matrix.shape} does not match the "
            f"head's {head.embed_dim}-dim projection"
        )
    return emb_matrix


def majority_vote(probs: np.ndarray) -> tuple[int, np.ndarray]:
    """Modal class of per-patch argmaxes from an (M, U) probability matrix.

    Ties go to the tied class with the highest probability mass summed over
    all patches; remaining ties go to the lowest class index.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise ShapeError(f"need an (M, U) probability matrix, got {probs.shape}")
    votes = probs.argmax(axis=1)
    counts = np.bincount(votes, minlength=probs.shape[1])
    tied = np.flatnonzero(counts == counts.max())
    if tied.size == 1:
        return int(tied[0]), votes
    sums = probs.sum(axis=0)[tied]
    tied = tied[np.flatnonzero(sums == sums.max())]
    return int(tied.min()), votes


def classify_image(
    backbone: Backbone,
    pca_model: PcaModel,
    cube: HsiCube,
    head: FusionHead | None = None,
    emb_matrix: np.ndarray | None = None,
) -> ImagePrediction:
    """Patch the cube, score every patch, and majority-vote the image label."""
    raw = extract_patches(cube, backbone.patch_size)
    xb = np.stack([transform(pca_model, p).values for p in raw])
    logits, feats, _ = _stage1_forward(backbone, xb)
    if head is None:
        scores = logits
    else:
        emb_matrix = _check_emb_matrix(head, emb_matrix)
        z_prime, _ = _head_forward(head, feats)
        scores = z_prime @ emb_matrix.T
    probs = softmax(scores)
    winner, votes = majority_vote(probs)
    return ImagePrediction(label=winner, votes=votes, probs=probs)


# --------------------------------------------------------------------------
# Orchestration, evaluation, checkpoints
# --------------------------------------------------------------------------


@dataclass
class TrainedModel:
    backbone: Backbone
    pca_model: PcaModel
    labels: LabelSet
    mode: str
    head: FusionHead | None = None
    embeddings: LabelEmbeddingSet | None = None
    stage1_history: list[float] = field(default_factory=list)
    stage2_history: list[float] = field(default_factory=list)

    @property
    def emb_matrix(self) -> np.ndarray | None:
        if self.embeddings is None:
            return None
        return self.embeddings.matrix(self.labels)

    def classify(self, cube: HsiCube) -> ImagePrediction:
        return classify_image(
            self.backbone, self.pca_model, cube, self.head, self.emb_matrix
        )


def run_mode(
    mode: str,
    train: PatchDataset,
    labels: LabelSet,
    pca_model: PcaModel,
    cfg: TrainConfig,
    embeddings: LabelEmbeddingSet | None = None,
) -> TrainedModel:
    """Train one of the supported configurations end to end."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    if mode == "standalone_cnn" and embeddings is not None:
        log.warning("standalone_cnn ignores the provided embedding set")
    if mode != "standalone_cnn" and embeddings is None:
        raise ConfigError(f"mode {mode!r} requires a label embedding set")
    backbone = build_backbone(
        pca_model.reduced_bands,
        len(labels),
        cfg.seed,
        patch_size=train.patches[0].values.shape[0] if train.patches else 32,
        dropout=cfg.dropout,
        feature_tap=cfg.feature_tap,
    )
    stage1 = pretrain_backbone(backbone, train, pca_model, cfg)
    if mode == "standalone_cnn":
        return TrainedModel(
            backbone=backbone,
            pca_model=pca_model,
            labels=labels,
            mode=mode,
            stage1_history=stage1,
        )
    emb = embeddings.normalized() if cfg.normalize_embeddings else embeddings
    head = build_fusion_head(
        backbone.feature_dim, emb.dim, cfg.seed, cfg.proj_hidden
    )
    stage2 = train_fusion(backbone, head, train, pca_model, emb, labels, cfg)
    return TrainedModel(
        backbone=backbone,
        pca_model=pca_model,
        labels=labels,
        mode=mode,
        head=head,
        embeddings=emb,
        stage1_history=stage1,
        stage2_history=stage2,
    )


def evaluate(
    model: TrainedModel, manifest: DatasetManifest, split: str = "test"
) -> tuple[EvalReport, list[int]]:
    """Image-level evaluation over one manifest split."""
    items = manifest.for_split(split)
    if not items:
        raise DataError(f"manifest has no {split!r} images to evaluate")
    preds, truths = [], []
    for _, entry in items:
        cube = load_cube(entry.cube_path)
        preds.append(model.classify(cube).label)
        truths.append(model.labels.index_of(entry.label))
    cm = confusion_matrix(preds, truths, len(model.labels))
    encoder = model.embeddings.source_tag if model.embeddings is not None else "none"
    report = summarize(
        cm, metadata={"mode": model.mode, "encoder": encoder, "split": split}
    )
    return report, preds


_BACKBONE_SECTIONS = ("conv1", "conv2", "conv3", "fc1", "fc2", "classifier")


def save_backbone(backbone: Backbone, path: str | Path) -> None:
    sections = {
        name: {"weights": layer.weights, "biases": layer.biases}
        for name, layer in zip(_BACKBONE_SECTIONS, backbone.layers())
    }
    meta = {
        "kind": "backbone",
        "num_classes": str(backbone.num_classes),
        "reduced_bands": str(backbone.reduced_bands),
        "patch_size": str(backbone.patch_size),
        "dropout": repr(backbone.dropout_rate),
        "feature_tap": backbone.feature_tap,
    }
    save_params(path, sections, meta)


def load_backbone(path: str | Path) -> Backbone:
    sections, meta = load_params(path)
    if meta.get("kind") != "backbone":
        raise FormatError(f"{path}: not a backbone checkpoint")
    missing = [s for s in _BACKBONE_SECTIONS if s not in sections]
    if missing:
        raise FormatError(f"{path}: missing sections {missing}")
    layers = {
        name: LayerParams(sections[name]["weights"], sections[name]["biases"])
        for name in _BACKBONE_SECTIONS
    }
    return Backbone(
        **layers,
        reduced_bands=int(meta["reduced_bands"]),
        num_classes=int(meta["num_classes"]),
        patch_size=int(meta["patch_size"]),
        dropout_rate=float(meta["dropout"]),
        feature_tap=meta["feature_tap"],
    )


def save_head(head: FusionHead, path: str | Path, meta: dict[str, str]) -> None:
    sections = {
        f"proj{i}": {"weights": layer.weights, "biases": layer.biases}
        for i, layer in enumerate(head.layers)
    }
    full_meta = {
        "kind": "fusion-head",
        "feature_dim": str(head.feature_dim),
        "embed_dim": str(head.embed_dim),
        "num_layers": str(len(head.layers)),
        **meta,
    }
    save_params(path, sections, full_meta)


def load_head(path: str | Path) -> tuple[FusionHead, dict[str, str]]:
    sections, meta = load_params(path)
    if meta.get("kind") != "fusion-head":
        raise FormatError(f"{path}: not a fusion-head checkpoint")
    n = int(meta["num_layers"])
    layers = [
        LayerParams(sections[f"proj{i}"]["weights"], sections[f"proj{i}"]["biases"])
        for i in range(n)
    ]
    head = FusionHead(
        layers=layers,
        feature_dim=int(meta["feature_dim"]),
        embed_dim=int(meta["embed_dim"]),
    )
    return head, meta


def backbone_checksum(backbone: Backbone) -> str:
    """SHA-256 over the raw parameter bytes; detects any drift."""
    digest = hashlib.sha256()
    for arr in backbone.param_arrays():
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()
