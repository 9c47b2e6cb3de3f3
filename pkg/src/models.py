"""
The networks of a distillation run: frozen teacher encoder, projection head,
student encoder and the shared classifier
"""
from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigurationError, UsageError
from src.numeric import ParamSet

# Modes whose distillation term reads the projected teacher feature
PROJECTED_MODES = ("feature", "classifier", "fitnet-l2")

RESIZE_SEED_SALT = 0x5E512E


@dataclass
class EncoderConfig:
    """Shape of a dense encoder"""

    input_dim: int
    hidden_dims: list = field(default_factory=lambda: [64])
    output_dim: int = 32
    activation: str = "relu"

    def __post_init__(self):
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        if any(int(d) < 1 for d in dims):
            raise ConfigurationError(f"encoder dims must all be >= 1, got {dims}")
        if self.activation != "relu":
            raise ConfigurationError(f"unsupported activation '{self.activation}'")


@dataclass
class ModelConfig:
    """Widths of the teacher and student networks"""

    teacher_hidden: list = field(default_factory=lambda: [64])
    teacher_embed_dim: int = 32
    student_hidden: list = field(default_factory=lambda: [64])
    embed_dim: int = 32


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _dense_layers(params, prefix, dims, rng):
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        params.add(f"{prefix}.fc{i}.weight", _uniform(rng, (fan_out, fan_in), fan_in))
        params.add(f"{prefix}.fc{i}.bias", _uniform(rng, (fan_out,), fan_in))
    return len(dims) - 1


def _run_dense(tape, params, prefix, layers, x):
    h = x
    for i in range(layers):
        h = tape.affine(h, params[f"{prefix}.fc{i}.weight"], params[f"{prefix}.fc{i}.bias"])
        if i < layers - 1:
            h = tape.relu(h)
    return h


class Encoder:
    """MLP encoder with ReLU between layers and a linear output"""

    def __init__(self, config, prefix, rng):
        self.config = config
        self.prefix = prefix
        self.params = ParamSet()
        dims = [config.input_dim, *config.hidden_dims, config.output_dim]
        self.layers = _dense_layers(self.params, prefix, dims, rng)

    @property
    def frozen(self):
        return not any(self.params.is_trainable(name) for name in self.params)

    def __call__(self, tape, x):
        if x.shape[-1] != self.config.input_dim:
            raise ConfigurationError(
                f"{self.prefix} encoder expects input dim {self.config.input_dim}, got {x.shape[-1]}"
            )
        return _run_dense(tape, self.params, self.prefix, self.layers, x)


class ProjectionHead:
    """Trainable 2-layer MLP mixed with a frozen skip path: F_T = a*resize(E_T) + (1-a)*MLP(E_T)"""

    def __init__(self, teacher_dim, student_dim, alpha, rng, resize_rng, prefix="head"):
        check_alpha(alpha)
        self.alpha = alpha
        self.prefix = prefix
        self.teacher_dim = teacher_dim
        self.student_dim = student_dim
        self.params = ParamSet()
        self.layers = _dense_layers(self.params, prefix, [teacher_dim, teacher_dim, student_dim], rng)
        self.params.add(f"{prefix}.resize", _resize_matrix(teacher_dim, student_dim, resize_rng), trainable=False)

    def mlp(self, tape, e_t):
        return _run_dense(tape, self.params, self.prefix, self.layers, e_t)

    def __call__(self, tape, e_t, alpha=None):
        alpha = self.alpha if alpha is None else alpha
        check_alpha(alpha)
        if e_t.shape[-1] != self.teacher_dim:
            raise ConfigurationError(f"projection head expects dim {self.teacher_dim}, got {e_t.shape[-1]}")
        skip = tape.affine(e_t, self.params[f"{self.prefix}.resize"])
        return tape.add(tape.scale(skip, alpha), tape.scale(self.mlp(tape, e_t), 1.0 - alpha))


def check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"mix ratio alpha must lie in [0, 1], got {alpha}")


def _resize_matrix(teacher_dim, student_dim, rng):
    if teacher_dim == student_dim:
        return np.eye(student_dim)
    gaussian = rng.standard_normal((student_dim, teacher_dim))
    if student_dim < teacher_dim:
        q, _ = np.linalg.qr(gaussian.T)
        return q.T
    q, _ = np.linalg.qr(gaussian)
    return q


class SharedClassifier:
    """Bias-free linear classifier, logits = F w^T"""

    def __init__(self, num_classes, dim, rng, prefix="classifier"):
        if num_classes < 1 or dim < 1:
            raise ConfigurationError(f"classifier needs >= 1 class and dim, got {num_classes}x{dim}")
        self.prefix = prefix
        self.num_classes = num_classes
        self.dim = dim
        self.params = ParamSet()
        self.params.add(f"{prefix}.weight", _uniform(rng, (num_classes, dim), dim))

    @property
    def weight(self):
        return self.params[f"{self.prefix}.weight"]

    def __call__(self, tape, features, labels=None):
        if features.shape[-1] != self.dim:
            raise ConfigurationError(f"classifier expects embedding dim {self.dim}, got {features.shape[-1]}")
        if labels is not None:
            labels = np.asarray(labels)
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ConfigurationError(
                    f"labels reach class {labels.max()} but the classifier has {self.num_classes} classes"
                )
        return tape.affine(features, self.weight)


class ModelBundle:
    """Teacher encoder (frozen after pretraining), projection head, student encoder, shared classifier"""

    def __init__(self, teacher, teacher_classifier, head, student, classifier):
        if head.student_dim != student.config.output_dim:
            raise ConfigurationError(
                f"projected teacher dim {head.student_dim} != student embedding dim {student.config.output_dim}"
            )
        self.teacher = teacher
        self.teacher_classifier = teacher_classifier
        self.head = head
        self.student = student
        self.classifier = classifier

    def freeze_teacher(self):
        self.teacher.params.freeze()
        self.teacher_classifier.params.freeze()

    def encode_teacher(self, tape, x_teacher):
        """E_T from the frozen teacher"""
        if not self.teacher.frozen:
            raise UsageError("teacher encoder must be frozen before distillation")
        return self.teacher(tape, x_teacher)

    def project(self, tape, e_t, alpha=None):
        return self.head(tape, e_t, alpha)

    def encode_student(self, tape, x_student):
        return self.student(tape, x_student)

    def classify(self, tape, features, labels=None):
        return self.classifier(tape, features, labels)

    def teacher_params(self):
        return ParamSet.merge(self.teacher.params, self.teacher_classifier.params)

    def all_params(self):
        return ParamSet.merge(
            self.teacher.params,
            self.teacher_classifier.params,
            self.head.params,
            self.student.params,
            self.classifier.params,
        )

    def active_params(self, mode):
        """Parameters that receive gradients under a distillation mode"""
        sets = [self.student.params, self.classifier.params]
        if mode in PROJECTED_MODES:
            sets.insert(0, self.head.params)
        return ParamSet.merge(*sets)


def build_bundle(model_config, teacher_input_dim, student_input_dim, num_classes, alpha, seed):
    """Seeded construction of every network in a run"""
    init_seq, resize_seq = np.random.SeedSequence(seed), np.random.SeedSequence([seed, RESIZE_SEED_SALT])
    teacher_rng, head_rng, student_rng, cls_rng, tcls_rng = [
        np.random.default_rng(s) for s in init_seq.spawn(5)
    ]
    teacher = Encoder(
        EncoderConfig(teacher_input_dim, list(model_config.teacher_hidden), model_config.teacher_embed_dim),
        "teacher",
        teacher_rng,
    )
    student = Encoder(
        EncoderConfig(student_input_dim, list(model_config.student_hidden), model_config.embed_dim),
        "student",
        student_rng,
    )
    head = ProjectionHead(
        model_config.teacher_embed_dim, model_config.embed_dim, alpha, head_rng, np.random.default_rng(resize_seq)
    )
    return ModelBundle(
        teacher=teacher,
        teacher_classifier=SharedClassifier(
            num_classes, model_config.teacher_embed_dim, tcls_rng, prefix="teacher_head"
        ),
        head=head,
        student=student,
        classifier=SharedClassifier(num_classes, model_config.embed_dim, cls_rng),
    )
