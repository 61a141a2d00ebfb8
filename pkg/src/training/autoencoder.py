"""
Flight Stack - Depth Autoencoder
Convolutional encoder and dense decoder trained on normalized depth images with an L2 reconstruction loss
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..nn import AdamState, Network, adam_step, build_decoder, build_encoder, mse_loss, write_checkpoint
from ..utils import DatasetError, TrainingError, get_logger, get_performance_tracker, get_training_logger
from .dataset import DepthDataset

logger = get_logger("autoencoder")


@dataclass
class AutoencoderResult:
    encoder: Network
    decoder: Network
    history: pd.DataFrame

    def save(self, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        self.history.to_csv(out_dir / "autoencoder_log.csv", index=False, float_format="%.9g", lineterminator="\n")
        return (write_checkpoint(self.encoder, out_dir / "encoder.ckpt"),
                write_checkpoint(self.decoder, out_dir / "decoder.ckpt"))


def reconstruct(encoder: Network, decoder: Network, images: np.ndarray) -> np.ndarray:
    """Normalized images (B, H, W) -> flattened reconstructions (B, H*W)"""
    return decoder.forward(encoder.forward(images[:, None]))


def reconstruction_mse(encoder: Network, decoder: Network, images: np.ndarray, batch_size: int = 256) -> float:
    """Mean squared reconstruction error over every pixel of every image"""
    if len(images) == 0:
        return 0.0
    total = 0.0
    for start in range(0, len(images), batch_size):
        chunk = images[start:start + batch_size]
        recon = reconstruct(encoder, decoder, chunk).astype(np.float64)
        total += float(np.sum(np.square(recon - chunk.reshape(len(chunk), -1))))
    return total / images.size


def _train_step(encoder: Network, decoder: Network, batch: np.ndarray,
                enc_adam: AdamState, dec_adam: AdamState) -> Tuple[float, AdamState, AdamState]:
    z, enc_cache = encoder.forward_with_cache(batch[:, None])
    recon, dec_cache = decoder.forward_with_cache(z)
    loss, grad = mse_loss(recon, batch.reshape(len(batch), -1))
    dec_grad, grad_z = decoder.backward(dec_cache, grad)
    enc_grad, _ = encoder.backward(enc_cache, grad_z)
    dec_params, dec_adam = adam_step(decoder.params, dec_grad, dec_adam)
    enc_params, enc_adam = adam_step(encoder.params, enc_grad, enc_adam)
    decoder.set_params(dec_params)
    encoder.set_params(enc_params)
    return loss, enc_adam, dec_adam


def train_autoencoder(dataset: DepthDataset, epochs: int, seed: int = 0, config=None,
                      encoder: Optional[Network] = None, decoder: Optional[Network] = None) -> AutoencoderResult:
    """
    Minibatch Adam on the pixel-mean L2 reconstruction loss

    History row 0 holds the losses of the untrained networks; row e the losses
    after epoch e. When the dataset has no validation frames the training
    frames are used for validation.

    Args:
        dataset: Collected depth frames
        epochs: Passes over the training split
        seed: Initialisation and shuffling seed
        config: AutoencoderConfig (embedding_dim, batch_size, learning_rate); defaults when None
        encoder, decoder: Optional pre-built networks, trained in place

    Raises:
        DatasetError: If the dataset is empty
        TrainingError: On a non-finite epoch loss; both networks are first
            restored to the parameters of the last finite epoch
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot train an autoencoder on an empty dataset")
    embedding_dim = getattr(config, "embedding_dim", 64)
    batch_size = getattr(config, "batch_size", 64)
    learning_rate = getattr(config, "learning_rate", 1e-3)

    height, width = dataset.image_shape
    encoder = encoder or build_encoder(height, width, embedding_dim, seed=seed)
    decoder = decoder or build_decoder(height, width, encoder.output_shape[0], seed=seed + 1)

    images = dataset.normalized
    train_idx = dataset.indices("train")
    val_idx = dataset.indices("validation")
    if len(val_idx) == 0:
        val_idx = train_idx
    train_images, val_images = images[train_idx], images[val_idx]

    training_logger = get_training_logger()
    tracker = get_performance_tracker()
    tracker.start_timing("autoencoder training")

    enc_adam = AdamState.zeros(encoder.param_count, learning_rate)
    dec_adam = AdamState.zeros(decoder.param_count, learning_rate)
    rows = [{"epoch": 0,
             "train_mse": reconstruction_mse(encoder, decoder, train_images),
             "validation_mse": reconstruction_mse(encoder, decoder, val_images)}]
    training_logger.log_epoch("autoencoder", 0, rows[0]["train_mse"], rows[0]["validation_mse"])

    last_good = (encoder.params.copy(), decoder.params.copy())
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng([int(seed), epoch]).permutation(len(train_images))
        losses = []
        for start in range(0, len(order), batch_size):
            batch = train_images[order[start:start + batch_size]]
            loss, enc_adam, dec_adam = _train_step(encoder, decoder, batch, enc_adam, dec_adam)
            losses.append(loss)
        if not (np.isfinite(np.mean(losses)) and np.all(np.isfinite(encoder.params))
                and np.all(np.isfinite(decoder.params))):
            encoder.set_params(last_good[0])
            decoder.set_params(last_good[1])
            logger.error(f"❌ Autoencoder loss became non-finite at epoch {epoch}")
            raise TrainingError(f"Autoencoder loss became non-finite at epoch {epoch}; "
                                f"parameters restored to epoch {epoch - 1}", epoch=epoch)
        last_good = (encoder.params.copy(), decoder.params.copy())
        row = {"epoch": epoch, "train_mse": float(np.mean(losses)),
               "validation_mse": reconstruction_mse(encoder, decoder, val_images)}
        rows.append(row)
        training_logger.log_epoch("autoencoder", epoch, row["train_mse"], row["validation_mse"])

    history = pd.DataFrame(rows)
    tracker.end_timing("autoencoder training",
                       f"validation MSE {history['validation_mse'].iloc[0]:.5f} -> "
                       f"{history['validation_mse'].iloc[-1]:.5f}")
    return AutoencoderResult(encoder, decoder, history)
