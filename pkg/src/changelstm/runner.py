"""Orchestration of training, evaluation, prediction and gradient-check runs.

Every run writes a manifest (config hash, seed, results) next to its
artifacts; rerunning with the same config and seed reproduces every output
byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import (BiTemporalSample, load_pair_dir, save_comparison_image,
                   save_mask_image, synth_generate)
from .functional import grad_check
from .losses import LossWeights, bce_loss, dice_loss, total_loss
from .metrics import ConfusionCounts, binarize_logits, metrics, update_confusion
from .model import ChangeDetector
from .optim import Adam
from .tensor import Tensor, no_grad
from . import reporting


def build_model(cfg: RunConfig) -> ChangeDetector:
    return ChangeDetector(
        channels=cfg.model.stage_channels,
        assignment=cfg.model.assignment,
        mlstm_heads=cfg.model.mlstm_heads,
        attention_heads=cfg.model.attention_heads,
        seed=cfg.train.seed)


def load_samples(cfg: RunConfig) -> list[BiTemporalSample]:
    if cfg.data.source == "synthetic":
        return synth_generate(cfg.data.synth_config(), cfg.data.count)
    return load_pair_dir(cfg.data.root)


def _batches(samples: list[BiTemporalSample], batch_size: int):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        img1 = np.concatenate([s.img_t1 for s in chunk])
        img2 = np.concatenate([s.img_t2 for s in chunk])
        mask = np.concatenate([s.mask for s in chunk])
        yield Tensor(img1), Tensor(img2), mask


def evaluate_samples(samples: list[BiTemporalSample], predict_logits,
                     batch_size: int = 4) -> dict[str, float]:
    """Five metrics over a sample list; predict_logits maps (img1, img2) arrays
    to a logits array, so an oracle can stand in for the model."""
    counts = ConfusionCounts()
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        img1 = np.concatenate([s.img_t1 for s in chunk])
        img2 = np.concatenate([s.img_t2 for s in chunk])
        mask = np.concatenate([s.mask for s in chunk])
        logits = predict_logits(img1, img2)
        counts = update_confusion(binarize_logits(logits), mask, counts)
    return metrics(counts)


def model_predictor(model: ChangeDetector):
    def predict(img1: np.ndarray, img2: np.ndarray) -> np.ndarray:
        with no_grad():
            return model(Tensor(img1), Tensor(img2)).data
    return predict


def _write_manifest(cfg: RunConfig, out_dir: Path, results: dict,
                    artifacts: dict[str, str]) -> None:
    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.train.seed,
        "config": dict(cfg.flat_items()),
        "results": results,
        "artifacts": artifacts,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_training(cfg: RunConfig, log=print) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    samples = load_samples(cfg)
    weights = LossWeights(cfg.train.lambda_ce, cfg.train.lambda_dice)
    opt = Adam(model.parameter_dict(), lr=cfg.train.lr)
    predictor = model_predictor(model)

    rows = []
    for epoch in range(1, cfg.train.epochs + 1):
        epoch_loss = epoch_bce = epoch_dice = 0.0
        n_batches = 0
        for img1, img2, mask in _batches(samples, cfg.train.batch_size):
            logits = model(img1, img2)
            loss = total_loss(logits, mask, weights)
            opt.zero_grad()
            loss.backward()
            opt.step()
            with no_grad():
                epoch_bce += bce_loss(logits.detach(), mask).item()
                epoch_dice += dice_loss(logits.detach(), mask).item()
            epoch_loss += loss.item()
            n_batches += 1
        scores = evaluate_samples(samples, predictor, cfg.train.batch_size)
        row = {"epoch": epoch, "loss": epoch_loss / n_batches,
               "bce": epoch_bce / n_batches, "dice": epoch_dice / n_batches,
               **scores}
        rows.append(row)
        log(f"epoch {epoch:4d}  loss {row['loss']:.6f}  f1 {row['f1']:.4f}")

    ckpt_path = out_dir / "checkpoint.ckpt"
    save_checkpoint(model, ckpt_path)
    reporting.write_loss_log(rows, out_dir / "train_log.csv")
    reporting.save_loss_figure(rows, out_dir / "train_curves.png")
    reporting.write_metrics_kv(rows[-1], out_dir / "final_metrics.kv")
    _write_manifest(cfg, out_dir, {"final": rows[-1]}, {
        "checkpoint": ckpt_path.name,
        "loss_log": "train_log.csv",
        "figure": "train_curves.png",
    })
    return out_dir


def run_evaluation(cfg: RunConfig, checkpoint: str | Path, log=print) -> dict[str, float]:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    load_checkpoint(model, checkpoint)
    samples = load_samples(cfg)
    scores = evaluate_samples(samples, model_predictor(model),
                              cfg.train.batch_size)
    table = reporting.format_metrics_table(scores)
    log(table, end="")
    (out_dir / "metrics.txt").write_text(table, encoding="utf-8")
    reporting.write_metrics_kv(scores, out_dir / "metrics.kv")
    reporting.save_metrics_figure(scores, out_dir / "metrics.png")
    _write_manifest(cfg, out_dir, {"metrics": scores}, {
        "table": "metrics.txt",
        "kv": "metrics.kv",
        "figure": "metrics.png",
    })
    return scores


def run_prediction(cfg: RunConfig, checkpoint: str | Path,
                   sample: BiTemporalSample, log=print) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    load_checkpoint(model, checkpoint)
    with no_grad():
        logits = model(Tensor(sample.img_t1), Tensor(sample.img_t2)).data
    prob = 1.0 / (1.0 + np.exp(-logits))[0, 0]
    pred = (logits[0, 0] > 0).astype(np.float64)

    prob_path = out_dir / f"{sample.id}_prob.png"
    save_mask_image(prob, prob_path)
    cmp_path = out_dir / f"{sample.id}_comparison.png"
    save_comparison_image(pred, sample.mask[0, 0], cmp_path)
    from PIL import Image
    cmp_img = np.asarray(Image.open(cmp_path))
    panel_path = out_dir / f"{sample.id}_panel.png"
    reporting.save_prediction_panel(
        sample.img_t1[0], sample.img_t2[0], sample.mask[0, 0], prob,
        cmp_img, panel_path)
    counts = update_confusion(pred, sample.mask[0, 0])
    reporting.write_metrics_kv(metrics(counts), out_dir / f"{sample.id}_metrics.kv")
    log(f"wrote {prob_path.name}, {cmp_path.name}, {panel_path.name}")
    return out_dir


def run_gradcheck(cfg: RunConfig, size: int = 32, max_coords: int = 32,
                  log=print) -> float:
    """End-to-end finite-difference check of the full training loss.

    Checks the gradient with respect to a frame input and to one parameter
    from each major submodule, on a subsampled set of coordinates.
    """
    model = build_model(cfg)
    rng = np.random.default_rng(cfg.train.seed + 1)
    img1 = Tensor(rng.uniform(0, 1, (1, 3, size, size)))
    img2_data = rng.uniform(0, 1, (1, 3, size, size))
    mask = (rng.uniform(0, 1, (1, 1, size, size)) > 0.7).astype(np.float64)
    weights = LossWeights(cfg.train.lambda_ce, cfg.train.lambda_dice)

    def loss_wrt_input(x):
        return total_loss(model(x, Tensor(img2_data)), mask, weights)

    worst = grad_check(loss_wrt_input, img1, eps=1e-4, max_coords=max_coords,
                       seed=cfg.train.seed)
    log(f"input gradient: max relative error {worst:.3e}")

    params = model.parameter_dict()
    picks = [name for name in (
        "backbone.stem.weight", "head.fc2.weight",
        "fuse_8_4.proj_q.weight", "enhancers.0.fuse.pointwise.weight",
        "enhancers.3.phi.block.w_q", "enhancers.3.axial.phi_col.block.w_q",
    ) if name in params]
    for name in picks:
        p = params[name]
        err = grad_check(lambda _: loss_wrt_input(img1), p, eps=1e-4,
                         max_coords=8, seed=cfg.train.seed)
        worst = max(worst, err)
        log(f"{name}: max relative error {err:.3e}")
    return worst


def count_parameters(cfg: RunConfig) -> int:
    return build_model(cfg).num_parameters()
