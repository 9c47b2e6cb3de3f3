"""
Training objectives: task cross-entropy, margin-relaxed feature distillation,
shared-classifier distillation, the KD and FitNet baselines, and the total loss
"""
import math
from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigurationError, DataError, InternalError
from src.numeric import constant
from src.quality import QualityConfig

DISTILL_MODES = ("none", "feature", "classifier", "kd-kl", "fitnet-l2")
METRICS = ("cosine", "sq-l2-mean")


@dataclass
class DistillConfig:
    """Method hyperparameters for one run

    For the cosine metric the margin is given as an angle and realized as
    m = 1 - cos(margin_deg); for sq-l2-mean `margin` is used directly.
    """

    mode: str = "feature"
    metric: str = "cosine"
    margin_deg: float = 30.0
    margin: float = 0.04
    alpha: float = 0.6
    beta: float = 0.0
    temperature: float = 4.0
    scale: float = 1.0
    normalize: bool = True
    quality: QualityConfig = field(default_factory=QualityConfig)

    def __post_init__(self):
        if self.mode not in DISTILL_MODES:
            raise ConfigurationError(f"unknown distillation mode '{self.mode}', expected one of {DISTILL_MODES}")
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric '{self.metric}', expected one of {METRICS}")
        if self.margin < 0 or self.margin_deg < 0:
            raise ConfigurationError("margin must be >= 0")
        if self.temperature <= 0:
            raise ConfigurationError(f"temperature must be > 0, got {self.temperature}")
        if self.beta < 0 or self.scale < 0:
            raise ConfigurationError("beta and the distillation scale must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")

    def resolved_margin(self):
        """Margin on the distance scale of the configured metric"""
        if self.metric == "cosine":
            return margin_from_angle(self.margin_deg)
        return self.margin


def margin_from_angle(degrees):
    """Cosine-distance margin that zeroes the loss once features are within `degrees`"""
    return 1.0 - math.cos(math.radians(degrees))


def cross_entropy(tape, logits, labels):
    """Mean over the batch of -log softmax(logits)[y]"""
    return tape.mean(tape.cross_entropy(logits, labels))


def feature_distance(tape, f_s, f_t, metric):
    """Per-sample distance: 1 - cos for cosine, mean squared difference for sq-l2-mean"""
    if metric == "cosine":
        return tape.scale(tape.cosine_similarity(f_s, f_t), -1.0, 1.0)
    if metric == "sq-l2-mean":
        return tape.sq_l2_mean(f_s, f_t)
    raise ConfigurationError(f"unknown metric '{metric}', expected one of {METRICS}")


def margin_feature_loss(tape, f_s, f_t, metric, margin):
    """Per-sample max(d - m, 0)"""
    if margin < 0:
        raise ConfigurationError(f"margin must be >= 0, got {margin}")
    return tape.hinge(feature_distance(tape, f_s, f_t, metric), margin)


def classifier_level_loss(tape, f_s, f_t, y_s, y_t, classifier, beta, reduce=True):
    """CE of the shared classifier over the 2b mixed batch plus beta * logit MSE

    With reduce=False the loss is returned per pair: the mean of the pair's two
    CE terms plus its logit term, whose batch mean equals the reduced value.
    """
    y_s, y_t = np.asarray(y_s), np.asarray(y_t)
    if y_s.shape != y_t.shape or np.any(y_s != y_t):
        raise DataError("student and teacher labels of a pair must match")
    b = f_s.shape[0]
    labels = np.concatenate([y_s, y_t])
    logits = classifier(tape, tape.concat([f_s, f_t]), labels)
    per_sample = tape.cross_entropy(logits, labels)

    logit_term = None
    if beta > 0:
        logit_term = tape.sq_l2_mean(tape.rows(logits, 0, b), tape.rows(logits, b, 2 * b))

    if reduce:
        loss = tape.mean(per_sample)
        if logit_term is not None:
            loss = tape.add(loss, tape.scale(tape.mean(logit_term), beta))
        return loss

    per_pair = tape.scale(tape.add(tape.rows(per_sample, 0, b), tape.rows(per_sample, b, 2 * b)), 0.5)
    if logit_term is not None:
        per_pair = tape.add(per_pair, tape.scale(logit_term, beta))
    return per_pair


def kd_kl_baseline(tape, student_logits, teacher_logits, temperature, reduce=True):
    """T^2 * KL(softmax(t/T) || softmax(s/T)), averaged over the batch"""
    if temperature <= 0:
        raise ConfigurationError(f"temperature must be > 0, got {temperature}")
    per_sample = tape.kl_softened(student_logits, teacher_logits, temperature)
    return tape.mean(per_sample) if reduce else per_sample


def fitnet_l2_baseline(tape, f_s, f_t, reduce=True):
    """Hard feature alignment: the m = 0 case of the sq-l2-mean margin loss"""
    per_sample = margin_feature_loss(tape, f_s, f_t, "sq-l2-mean", 0.0)
    return tape.mean(per_sample) if reduce else per_sample


def total_loss(tape, task_loss, distill_losses, weights=None, scale=1.0):
    """L_task + scale * mean_i(w_i * L_distill,i)"""
    if weights is None:
        weights = np.ones(distill_losses.shape)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != distill_losses.shape:
        raise InternalError(f"{weights.shape} weights for {distill_losses.shape} distillation losses")
    if np.any(weights < 0):
        raise InternalError("distillation weights must be clamped to >= 0 before use")
    weighted = tape.mean(tape.mul(distill_losses, constant(weights)))
    return tape.add(task_loss, tape.scale(weighted, scale))
