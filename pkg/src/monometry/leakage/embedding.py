"""Per-image feature vectors: visual features, annotation summary, timestamp."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from ..geometry import PixelBox

VISUAL_DIM = 256
NUM_CLASSES = 3
ANNOTATION_DIM = NUM_CLASSES + 1
EMBEDDING_DIM = VISUAL_DIM + ANNOTATION_DIM + 1


class WrongVisualLength(ValueError):
    pass


@dataclass(frozen=True)
class ImageEmbedding:
    image_id: Hashable
    visual: np.ndarray
    annotation_features: np.ndarray
    timestamp: float
    full_vector: np.ndarray

    @property
    def raw_vector(self) -> np.ndarray:
        return np.concatenate([self.visual, self.annotation_features, [self.timestamp]])


def annotation_features(boxes: Sequence[PixelBox]) -> np.ndarray:
    """Per-class counts (classes 0..2) followed by the mean box area (0 when empty)."""
    counts = np.zeros(NUM_CLASSES)
    for b in boxes:
        if b.class_id is not None and 0 <= b.class_id < NUM_CLASSES:
            counts[b.class_id] += 1
    mean_area = float(np.mean([b.area for b in boxes])) if boxes else 0.0
    return np.append(counts, mean_area)


def build_embedding(image_id: Hashable, visual: Sequence[float], annotations: Sequence[PixelBox],
                    timestamp: float) -> ImageEmbedding:
    """Unstandardized embedding; ``standardize`` fills ``full_vector`` dataset-wide."""
    visual = np.asarray(visual, dtype=float)
    if visual.shape != (VISUAL_DIM,):
        raise WrongVisualLength(f"image {image_id!r}: expected {VISUAL_DIM} visual features, "
                                f"got shape {visual.shape}")
    feats = annotation_features(annotations)
    raw = np.concatenate([visual, feats, [float(timestamp)]])
    return ImageEmbedding(image_id, visual, feats, float(timestamp), raw)


def standardize_columns(matrix: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance columns; constant columns become 0."""
    m = np.asarray(matrix, dtype=float)
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    centred = m - mean
    out = np.zeros_like(centred)
    varying = std > 0
    out[:, varying] = centred[:, varying] / std[varying]
    return out


def standardize(embeddings: Sequence[ImageEmbedding]) -> list[ImageEmbedding]:
    if not embeddings:
        return []
    z = standardize_columns(np.stack([e.raw_vector for e in embeddings]))
    return [ImageEmbedding(e.image_id, e.visual, e.annotation_features, e.timestamp, row)
            for e, row in zip(embeddings, z)]
