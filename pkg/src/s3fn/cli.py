"""Pipeline CLI: synth -> pca -> pretrain -> fuse -> eval, plus reflectance.

Each stage reads the previous stage's artifacts from a run directory and
writes its own artifact next to a ``<stage>.meta`` file echoing the
configuration (no timestamps, so reruns with the same seed are
byte-identical). Options may come from a key=value config file via
``--config``; explicit flags win over the file, which wins over defaults.

Exit codes: 0 success, 2 usage/configuration, 3 data or format problem,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from .cube import (
    load_cube,
    load_labels,
    load_manifest,
    mean_reflectance,
    save_labels,
)
from .embeddings import load_embeddings, validate_against_labels
from .errors import (
    EXIT_DATA,
    ConfigError,
    DataError,
    FormatError,
    S3FNError,
    exit_code_for,
)
from .metrics import format_report_table, write_report
from .model import (
    MODES,
    TrainConfig,
    TrainedModel,
    build_backbone,
    build_fusion_head,
    evaluate,
    load_backbone,
    load_head,
    pretrain_backbone,
    save_backbone,
    save_head,
    train_fusion,
)
from .patches import build_patch_dataset
from .pca import fit_pca, load_pca, save_pca
from .synth import generate_dataset, parse_spec_file

log = logging.getLogger("s3fn")


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_hidden(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(v) for v in raw.split(","))


_CONFIG_KEYS = {
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "lambda": float,
    "dropout": float,
    "seed": int,
    "augment": _parse_bool,
    "augment_lo": float,
    "augment_hi": float,
    "patch_size": int,
    "variance_target": float,
    "feature_tap": str,
    "normalize_embeddings": _parse_bool,
    "proj_hidden": _parse_hidden,
}

_DEFAULTS = {
    "epochs": 100,
    "batch_size": 4,
    "lr": 1e-3,
    "lambda": 1e-2,
    "dropout": 0.5,
    "seed": 0,
    "augment": True,
    "augment_lo": 0.9,
    "augment_hi": 1.1,
    "patch_size": 32,
    "variance_target": 0.99,
    "feature_tap": "fc2",
    "normalize_embeddings": False,
    "proj_hidden": (),
}


def _read_config_file(path: str | Path) -> dict:
    values = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](raw)
        except (ValueError, KeyError):
            raise FormatError(f"{path}:{lineno}: bad value {raw!r} for {key}")
    return values


def _resolve_options(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_read_config_file(args.config))
    flag_names = {
        "epochs": "epochs",
        "batch_size": "batch_size",
        "lr": "lr",
        "lambda": "lam_flag",
        "dropout": "dropout",
        "seed": "seed",
        "augment": "augment",
        "augment_lo": "augment_lo",
        "augment_hi": "augment_hi",
        "patch_size": "patch_size",
        "variance_target": "variance_target",
        "feature_tap": "feature_tap",
        "normalize_embeddings": "normalize_embeddings",
        "proj_hidden": "proj_hidden",
    }
    for key, attr in flag_names.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    return merged


def _train_config(options: dict) -> TrainConfig:
    return TrainConfig(
        epochs=options["epochs"],
        batch_size=options["batch_size"],
        lr=options["lr"],
        lam=options["lambda"],
        dropout=options["dropout"],
        seed=options["seed"],
        augment=options["augment"],
        augment_lo=options["augment_lo"],
        augment_hi=options["augment_hi"],
        proj_hidden=options["proj_hidden"],
        feature_tap=options["feature_tap"],
        normalize_embeddings=options["normalize_embeddings"],
    )


def _write_meta(path: Path, mapping: dict) -> None:
    lines = [f"{k}={v}" for k, v in sorted(mapping.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _config_echo(cfg: TrainConfig, options: dict) -> dict:
    return {
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "lr": repr(cfg.lr),
        "lambda": repr(cfg.lam),
        "dropout": repr(cfg.dropout),
        "seed": cfg.seed,
        "augment": cfg.augment,
        "augment_lo": repr(cfg.augment_lo),
        "augment_hi": repr(cfg.augment_hi),
        "patch_size": options["patch_size"],
        "feature_tap": cfg.feature_tap,
        "normalize_embeddings": cfg.normalize_embeddings,
        "proj_hidden": ",".join(str(h) for h in cfg.proj_hidden),
    }


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise DataError(f"missing artifact {path}; run `s3fn {produced_by}` first")
    return path


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    spec = parse_spec_file(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest, labels = generate_dataset(spec, out)
    _write_meta(
        out / "synth.meta",
        {
            "num_classes": spec.num_classes,
            "train_cubes_per_class": spec.train_cubes_per_class,
            "test_cubes_per_class": spec.test_cubes_per_class,
            "val_cubes_per_class": spec.val_cubes_per_class,
            "height": spec.height,
            "width": spec.width,
            "bands": spec.bands,
            "separation": repr(spec.separation),
            "spatial_noise_sd": repr(spec.spatial_noise_sd),
            "pixel_mix": repr(spec.pixel_mix),
            "seed": spec.seed,
            "num_cubes": len(manifest.entries),
        },
    )
    log.info(
        "wrote %d cubes (%d classes) under %s", len(manifest.entries), len(labels), out
    )
    return 0


def cmd_pca(args: argparse.Namespace) -> int:
    options = _resolve_options(args)
    manifest, labels = load_manifest(args.manifest)
    train = build_patch_dataset(manifest, labels, "train", options["patch_size"])
    if len(train) == 0:
        raise DataError("manifest has no train split to fit PCA on")
    model = fit_pca(train.patches, options["variance_target"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pca(model, out / "pca.txt")
    save_labels(labels, out / "labels.txt")
    _write_meta(
        out / "pca.meta",
        {
            "bands": model.bands,
            "reduced_bands": model.reduced_bands,
            "variance_target": repr(options["variance_target"]),
            "patch_size": options["patch_size"],
            "train_patches": len(train),
            "train_pixels": len(train) * options["patch_size"] ** 2,
        },
    )
    log.info("PCA kept %d of %d bands", model.reduced_bands, model.bands)
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    options = _resolve_options(args)
    cfg = _train_config(options)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pca_path = Path(args.pca) if args.pca else _require(out / "pca.txt", "pca")
    pca_model = load_pca(pca_path)
    manifest, manifest_labels = load_manifest(args.manifest)
    labels_path = out / "labels.txt"
    labels = load_labels(labels_path) if labels_path.exists() else manifest_labels
    train = build_patch_dataset(manifest, labels, "train", options["patch_size"])
    backbone = build_backbone(
        pca_model.reduced_bands,
        len(labels),
        cfg.seed,
        patch_size=options["patch_size"],
        dropout=cfg.dropout,
        feature_tap=cfg.feature_tap,
    )
    history = pretrain_backbone(backbone, train, pca_model, cfg)
    save_backbone(backbone, out / "backbone.txt")
    meta = _config_echo(cfg, options)
    meta.update(
        {
            "stage": "pretrain",
            "reduced_bands": pca_model.reduced_bands,
            "train_patches": len(train),
            "epoch_losses": ",".join(repr(v) for v in history),
        }
    )
    _write_meta(out / "pretrain.meta", meta)
    if history:
        log.info("pretrained %d epochs, final loss %.4f", cfg.epochs, history[-1])
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    options = _resolve_options(args)
    cfg = _train_config(options)
    if args.mode == "standalone_cnn":
        raise ConfigError("standalone_cnn has no fusion stage; use `s3fn eval`")
    if not args.embeddings:
        raise ConfigError(f"mode {args.mode!r} requires --embeddings")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    backbone_path = (
        Path(args.backbone) if args.backbone else _require(out / "backbone.txt", "pretrain")
    )
    pca_path = Path(args.pca) if args.pca else _require(out / "pca.txt", "pca")
    labels_path = Path(args.labels) if args.labels else _require(out / "labels.txt", "pca")
    backbone = load_backbone(backbone_path)
    pca_model = load_pca(pca_path)
    labels = load_labels(labels_path)
    manifest, _ = load_manifest(args.manifest)
    train = build_patch_dataset(manifest, labels, "train", backbone.patch_size)
    emb = load_embeddings(args.embeddings)
    validate_against_labels(emb, labels)
    if cfg.normalize_embeddings:
        emb = emb.normalized()
    head = build_fusion_head(backbone.feature_dim, emb.dim, cfg.seed, cfg.proj_hidden)
    history = train_fusion(backbone, head, train, pca_model, emb, labels, cfg)
    head_out = Path(args.head_out) if args.head_out else out / "head.txt"
    save_head(
        head,
        head_out,
        meta={
            "mode": args.mode,
            "normalize_embeddings": str(cfg.normalize_embeddings),
            "embeddings_file": Path(args.embeddings).name,
            "seed": str(cfg.seed),
        },
    )
    bundled = out / "embeddings.txt"
    if Path(args.embeddings).resolve() != bundled.resolve():
        shutil.copyfile(args.embeddings, bundled)
    meta = _config_echo(cfg, options)
    meta.update(
        {
            "stage": "fuse",
            "mode": args.mode,
            "embeddings_file": Path(args.embeddings).name,
            "embedding_dim": emb.dim,
            "encoder": emb.source_tag,
            "head_file": head_out.name,
            "epoch_losses": ",".join(repr(v) for v in history),
        }
    )
    _write_meta(out / "fuse.meta", meta)
    if history:
        log.info("fusion head trained, final loss %.4f", history[-1])
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    out = Path(args.out)
    backbone = load_backbone(_require(out / "backbone.txt", "pretrain"))
    pca_model = load_pca(_require(out / "pca.txt", "pca"))
    labels = load_labels(_require(out / "labels.txt", "pca"))
    manifest, _ = load_manifest(args.manifest)

    head_path = Path(args.head) if args.head else out / "head.txt"
    mode = args.mode
    if mode is None:
        mode = "standalone_cnn" if not head_path.exists() else None
    head = None
    embeddings = None
    if mode == "standalone_cnn":
        if args.embeddings:
            log.warning("standalone_cnn ignores --embeddings %s", args.embeddings)
    else:
        head, head_meta = load_head(_require(head_path, "fuse"))
        recorded = head_meta.get("mode", "full_s3fn")
        if mode is None:
            mode = recorded
        elif mode != recorded:
            raise ConfigError(
                f"--mode {mode} does not match the head checkpoint's mode {recorded}"
            )
        emb_path = (
            Path(args.embeddings)
            if args.embeddings
            else _require(out / "embeddings.txt", "fuse")
        )
        embeddings = load_embeddings(emb_path)
        validate_against_labels(embeddings, labels)
        if _parse_bool(head_meta.get("normalize_embeddings", "false")):
            embeddings = embeddings.normalized()
    model = TrainedModel(
        backbone=backbone,
        pca_model=pca_model,
        labels=labels,
        mode=mode,
        head=head,
        embeddings=embeddings,
    )
    report, _ = evaluate(model, manifest, split=args.split)
    prefix = Path(args.report_prefix) if args.report_prefix else out / "report"
    write_report(report, prefix.with_suffix(".kv"), "machine")
    write_report(report, prefix.with_suffix(".txt"), "human", class_names=labels.names)
    _write_meta(
        out / "eval.meta",
        {
            "stage": "eval",
            "mode": mode,
            "split": args.split,
            "images": report.confusion.total,
            "accuracy": repr(report.accuracy),
            "report_prefix": prefix.name,
        },
    )
    sys.stdout.write(format_report_table(report, labels.names))
    return 0


def cmd_reflectance(args: argparse.Namespace) -> int:
    cube = load_cube(args.cube)
    curve = mean_reflectance(cube)
    rows = [f"{band},{value!r}" for band, value in enumerate(curve.means.tolist())]
    Path(args.out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    log.info("wrote %d band means to %s", len(rows), args.out)
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda", dest="lam_flag", type=float,
                   help="L2 regularization coefficient")
    p.add_argument("--dropout", type=float)
    p.add_argument("--seed", type=int)
    augment = p.add_mutually_exclusive_group()
    augment.add_argument("--augment", dest="augment", action="store_true",
                         default=None)
    augment.add_argument("--no-augment", dest="augment", action="store_false",
                         default=None)
    p.add_argument("--augment-lo", dest="augment_lo", type=float)
    p.add_argument("--augment-hi", dest="augment_hi", type=float)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--feature-tap", dest="feature_tap", choices=("fc1", "fc2"))
    p.add_argument("--proj-hidden", dest="proj_hidden", type=_parse_hidden,
                   help="comma-separated hidden sizes for the projection MLP")
    p.add_argument("--normalize-embeddings", dest="normalize_embeddings",
                   action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s3fn",
        description="Spectral-spatial fusion pipeline for hyperspectral cubes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="key=value dataset spec file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the spec file's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pca", help="fit the spectral projection on train patches")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="run directory for artifacts")
    p.add_argument("--variance-target", dest="variance_target", type=float)
    _add_train_flags(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("pretrain", help="stage-1 backbone training")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pca", help="PCA model file (default <out>/pca.txt)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("fuse", help="stage-2 fusion-head training")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--embeddings", help="label embedding file")
    p.add_argument("--backbone", help="backbone checkpoint (default <out>/backbone.txt)")
    p.add_argument("--pca", help="PCA model file (default <out>/pca.txt)")
    p.add_argument("--labels", help="label set file (default <out>/labels.txt)")
    p.add_argument("--head-out", dest="head_out",
                   help="head checkpoint path (default <out>/head.txt)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="image-level evaluation of a trained bundle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="run directory holding the bundle")
    p.add_argument("--mode", choices=MODES,
                   help="default: the head checkpoint's mode, else standalone_cnn")
    p.add_argument("--split", default="test", choices=("train", "test", "val"))
    p.add_argument("--head", help="head checkpoint (default <out>/head.txt)")
    p.add_argument("--embeddings", help="embedding file (default <out>/embeddings.txt)")
    p.add_argument("--report-prefix", dest="report_prefix",
                   help="report path prefix (default <out>/report)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reflectance", help="per-band mean reflectance of one cube")
    p.add_argument("--cube", required=True)
    p.add_argument("--out", required=True, help="two-column CSV output path")
    p.set_defaults(func=cmd_reflectance)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except S3FNError as exc:
        log.error("%s", exc)
        return exit_code_for(exc)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
