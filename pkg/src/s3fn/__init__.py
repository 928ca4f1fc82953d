"""Spectral-spatial fusion network for hyperspectral cube classification."""

from .cube import (
    DatasetManifest,
    HsiCube,
    LabelSet,
    SpectralCurve,
    load_cube,
    load_labels,
    load_manifest,
    mean_reflectance,
    save_cube,
    save_labels,
    save_manifest,
)
from .embeddings import (
    LabelEmbeddingSet,
    load_embeddings,
    save_embeddings,
    synth_orthogonal_embeddings,
    validate_against_labels,
)
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    NumericError,
    S3FNError,
    ShapeError,
    TruncationError,
    ValidationError,
)
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    confusion_matrix,
    read_report,
    summarize,
    write_report,
)
from .model import (
    Backbone,
    ClassProbabilities,
    FusionHead,
    ImagePrediction,
    TrainConfig,
    TrainedModel,
    build_backbone,
    build_fusion_head,
    classify_image,
    evaluate,
    extract_features,
    load_backbone,
    load_head,
    majority_vote,
    patch_probabilities,
    pretrain_backbone,
    run_mode,
    save_backbone,
    save_head,
    train_fusion,
)
from .patches import (
    Patch,
    PatchDataset,
    augment_scale,
    build_patch_dataset,
    extract_patches,
)
from .pca import (
    PcaModel,
    ReducedPatch,
    explained_variance,
    fit_pca,
    fit_pca_pixels,
    load_pca,
    save_pca,
    transform,
)
from .synth import SynthSpec, default_signatures, generate_dataset, parse_spec_file

__version__ = "0.1.0"
