"""
Sample-quality weights from feature norms with moving-average statistics

w_i = max(0, w_base + (Q_i - mu_q) / (sigma_q / h)) where Q_i is the l2 norm
of a raw feature and mu_q, sigma_q are exponential moving averages.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from src.errors import ConfigurationError, DataError, UsageError

logger = logging.getLogger(__name__)

QUALITY_SOURCES = ("teacher", "student", "min")
SIGMA_FLOOR = 1e-8


@dataclass
class QualityConfig:
    enabled: bool = False
    w_base: float = 1.0
    h: float = 1.0 / 3.0
    ema_decay: float = 0.9
    source: str = "teacher"

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigurationError(f"quality h must be > 0, got {self.h}")
        if self.w_base < 0:
            raise ConfigurationError(f"quality w_base must be >= 0, got {self.w_base}")
        if not 0.0 < self.ema_decay < 1.0:
            raise ConfigurationError(f"quality ema_decay must lie in (0, 1), got {self.ema_decay}")
        if self.source not in QUALITY_SOURCES:
            raise ConfigurationError(f"unknown quality source '{self.source}', expected one of {QUALITY_SOURCES}")


@dataclass(frozen=True)
class RunningStats:
    mu_q: float = 0.0
    sigma_q: float = 0.0
    decay: float = 0.9
    warmed_up: bool = False
    floor_hits: int = 0


def quantify_quality(features):
    """Q_i = l2 norm of each raw feature row"""
    values = getattr(features, "data", features)
    return np.sqrt(np.sum(np.asarray(values, dtype=np.float64) ** 2, axis=-1))


def quality_for_source(source, teacher_features, student_features):
    if source == "teacher":
        return quantify_quality(teacher_features)
    if source == "student":
        return quantify_quality(student_features)
    return np.minimum(quantify_quality(teacher_features), quantify_quality(student_features))


def update_stats(stats, q):
    """Fold one batch of Q into the running mean and standard deviation"""
    q = np.asarray(q, dtype=np.float64)
    if q.size == 0:
        raise DataError("cannot update quality statistics with an empty batch")
    batch_mu, batch_sigma = float(q.mean()), float(q.std())

    if not stats.warmed_up:
        mu, sigma = batch_mu, batch_sigma
    else:
        d = stats.decay
        mu = d * stats.mu_q + (1.0 - d) * batch_mu
        sigma = d * stats.sigma_q + (1.0 - d) * batch_sigma

    floor_hits = stats.floor_hits
    if sigma < SIGMA_FLOOR:
        sigma = SIGMA_FLOOR
        floor_hits += 1
        logger.warning("quality sigma fell below %.0e and was floored", SIGMA_FLOOR)
    return replace(stats, mu_q=mu, sigma_q=sigma, warmed_up=True, floor_hits=floor_hits)


def adaptive_weights(q, stats, config):
    """Per-sample distillation weights, clamped at 0"""
    if not stats.warmed_up:
        raise UsageError("quality weights requested before the running statistics were warmed up")
    q = np.asarray(q, dtype=np.float64)
    raw = config.w_base + (q - stats.mu_q) * config.h / stats.sigma_q
    return np.maximum(raw, 0.0)
