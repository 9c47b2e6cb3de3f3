"""
Synthetic paired-modality benchmark

Each class has a center in a shared latent space. A sample draws a shared
perturbation around its class center plus independent modality-specific
latents for the teacher and the student observation:

    x_T = A_T [z; sqrt(rho) s_T] + sigma * e_T
    x_S = A_S [z; sqrt(rho) s_S] + sigma * e_S

with fixed seeded mixing matrices. sigma is drawn per sample, log-uniformly,
and is the hidden quality of the pair.

The "test-shifted" split stands in for a second corpus: unseen classes observed
through perturbed mixing matrices and a wider noise range.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from src.errors import ConfigurationError, DataError

SPLITS = ("teacher-pretrain", "train", "val", "test-closed", "test-open", "test-shifted")
SHIFTED_SPLIT = "test-shifted"
_SPLIT_CODES = {name: i + 1 for i, name in enumerate(SPLITS)}
_WORLD_CODE = 0
_SHIFT_CODE = 99


@dataclass
class SyntheticSpec:
    """Generation parameters of the benchmark"""

    num_classes: int = 100
    samples_per_class: int = 40
    val_per_class: int = 10
    test_per_class: int = 10
    open_classes: int = 20
    open_per_class: int = 20
    pretrain_multiplier: int = 4
    train_fraction: float = 1.0
    shared_dim: int = 8
    specific_dim: int = 8
    teacher_dim: int = 32
    student_dim: int = 32
    specificity: float = 0.6
    sigma_lo: float = 0.1
    sigma_hi: float = 1.0
    center_scale: float = 2.0
    intra_class: float = 0.5
    power_normalize: bool = True
    shifted_classes: int = 20
    domain_shift: float = 0.5
    shifted_sigma_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        k, s = self.shared_dim, self.specific_dim
        if k < 1 or s < 1:
            raise ConfigurationError(f"shared_dim and specific_dim must be >= 1, got {k} and {s}")
        if self.teacher_dim < k + s or self.student_dim < k + s:
            raise ConfigurationError(f"observation dims must be >= shared_dim + specific_dim = {k + s}")
        if not 0.0 <= self.specificity <= 1.0:
            raise ConfigurationError(f"specificity must lie in [0, 1], got {self.specificity}")
        if self.sigma_lo < 0 or self.sigma_lo > self.sigma_hi:
            raise ConfigurationError(f"need 0 <= sigma_lo <= sigma_hi, got [{self.sigma_lo}, {self.sigma_hi}]")
        if self.sigma_lo == 0 and self.sigma_hi > 0:
            raise ConfigurationError("log-uniform noise needs sigma_lo > 0 (or sigma_lo = sigma_hi = 0)")
        if self.num_classes < 1 or self.samples_per_class < 1:
            raise ConfigurationError("need at least one class and one sample per class")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigurationError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")
        if self.shifted_classes < 0 or self.domain_shift < 0 or self.shifted_sigma_scale <= 0:
            raise ConfigurationError("shifted_classes and domain_shift must be >= 0, shifted_sigma_scale > 0")

    @property
    def total_classes(self):
        return self.num_classes + self.open_classes

    @property
    def splits(self):
        """Splits this spec can generate; the shifted split needs shifted_classes > 0"""
        return tuple(s for s in SPLITS if s != SHIFTED_SPLIT or self.shifted_classes > 0)

    def to_dict(self):
        return asdict(self)


@dataclass
class PairedSample:
    x_teacher: np.ndarray
    x_student: np.ndarray
    label: int
    noise_sigma: float


@dataclass
class PairedDataset:
    """Column-stored paired samples of one split"""

    spec: SyntheticSpec
    split: str
    x_teacher: np.ndarray
    x_student: np.ndarray
    labels: np.ndarray
    noise_sigma: np.ndarray
    num_classes: int
    class_groups: np.ndarray = field(default=None)

    def __len__(self):
        return self.labels.shape[0]

    def __getitem__(self, index):
        return PairedSample(
            x_teacher=self.x_teacher[index],
            x_student=self.x_student[index],
            label=int(self.labels[index]),
            noise_sigma=float(self.noise_sigma[index]),
        )

    def classes(self):
        return np.unique(self.labels)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return PairedDataset(
            spec=self.spec,
            split=self.split,
            x_teacher=self.x_teacher[indices],
            x_student=self.x_student[indices],
            labels=self.labels[indices],
            noise_sigma=self.noise_sigma[indices],
            num_classes=self.num_classes,
            class_groups=self.class_groups,
        )


@dataclass
class _World:
    mix_teacher: np.ndarray
    mix_student: np.ndarray
    centers: np.ndarray
    power_teacher: float
    power_student: float


def _power(spec, mix):
    """Expected per-dimension power of the noise-free observation"""
    variances = np.concatenate(
        [
            np.full(spec.shared_dim, spec.center_scale ** 2 + spec.intra_class ** 2),
            np.full(spec.specific_dim, spec.specificity),
        ]
    )
    return float(np.mean((mix ** 2) @ variances))


def _world(spec):
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _WORLD_CODE]))
    width = spec.shared_dim + spec.specific_dim
    mix_teacher = rng.standard_normal((spec.teacher_dim, width)) / np.sqrt(width)
    mix_student = rng.standard_normal((spec.student_dim, width)) / np.sqrt(width)
    centers = spec.center_scale * rng.standard_normal((spec.total_classes, spec.shared_dim))
    return _World(mix_teacher, mix_student, centers, _power(spec, mix_teacher), _power(spec, mix_student))


def _shifted_world(spec):
    """Perturbed mixing matrices, with centers for the shifted classes appended"""
    world = _world(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SHIFT_CODE]))
    width = spec.shared_dim + spec.specific_dim
    mix_teacher = world.mix_teacher + spec.domain_shift * rng.standard_normal(world.mix_teacher.shape) / np.sqrt(width)
    mix_student = world.mix_student + spec.domain_shift * rng.standard_normal(world.mix_student.shape) / np.sqrt(width)
    extra = spec.center_scale * rng.standard_normal((spec.shifted_classes, spec.shared_dim))
    return _World(
        mix_teacher,
        mix_student,
        np.vstack([world.centers, extra]),
        _power(spec, mix_teacher),
        _power(spec, mix_student),
    )


def class_groups(spec):
    """Nuisance group of every class: sign of the first shared coordinate of its center"""
    world = _shifted_world(spec) if spec.shifted_classes > 0 else _world(spec)
    return (world.centers[:, 0] > 0).astype(np.int64)


def _split_layout(spec, split):
    if split not in _SPLIT_CODES:
        raise ConfigurationError(f"unknown split '{split}', expected one of {SPLITS}")
    if split == "test-open":
        return np.arange(spec.num_classes, spec.total_classes), spec.open_per_class
    if split == SHIFTED_SPLIT:
        return np.arange(spec.total_classes, spec.total_classes + spec.shifted_classes), spec.open_per_class
    per_class = {
        "teacher-pretrain": spec.samples_per_class * spec.pretrain_multiplier,
        "train": spec.samples_per_class,
        "val": spec.val_per_class,
        "test-closed": spec.test_per_class,
    }[split]
    return np.arange(spec.num_classes), per_class


def generate(spec, split="train"):
    """Deterministic samples of one split"""
    shifted = split == SHIFTED_SPLIT
    world = _shifted_world(spec) if shifted else _world(spec)
    classes, per_class = _split_layout(spec, split)
    if classes.size == 0 or per_class < 1:
        raise ConfigurationError(f"split '{split}' would be empty")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SPLIT_CODES[split]]))

    labels = np.repeat(classes, per_class)
    n = labels.shape[0]
    z = world.centers[labels] + spec.intra_class * rng.standard_normal((n, spec.shared_dim))
    specific_teacher = rng.standard_normal((n, spec.specific_dim))
    specific_student = rng.standard_normal((n, spec.specific_dim))
    sigma_lo, sigma_hi = spec.sigma_lo, spec.sigma_hi
    if shifted:
        sigma_lo, sigma_hi = sigma_lo * spec.shifted_sigma_scale, sigma_hi * spec.shifted_sigma_scale
    if sigma_hi == 0:
        sigma = np.zeros(n)
    else:
        sigma = np.exp(rng.uniform(np.log(sigma_lo), np.log(sigma_hi), size=n))
    noise_teacher = rng.standard_normal((n, spec.teacher_dim))
    noise_student = rng.standard_normal((n, spec.student_dim))

    root_rho = np.sqrt(spec.specificity)
    x_teacher = np.hstack([z, root_rho * specific_teacher]) @ world.mix_teacher.T + sigma[:, None] * noise_teacher
    x_student = np.hstack([z, root_rho * specific_student]) @ world.mix_student.T + sigma[:, None] * noise_student
    if spec.power_normalize:
        x_teacher /= np.sqrt(1.0 + sigma ** 2 / world.power_teacher)[:, None]
        x_student /= np.sqrt(1.0 + sigma ** 2 / world.power_student)[:, None]

    dataset = PairedDataset(
        spec=spec,
        split=split,
        x_teacher=x_teacher,
        x_student=x_student,
        labels=labels.astype(np.int64),
        noise_sigma=sigma,
        num_classes=world.centers.shape[0],
        class_groups=class_groups(spec),
    )
    if split == "train" and spec.train_fraction < 1.0:
        dataset = subsample_per_class(dataset, spec.train_fraction)
    return dataset


def generate_benchmark(spec):
    """Every split of the benchmark, keyed by split name"""
    return {split: generate(spec, split) for split in spec.splits}


def subsample_per_class(dataset, fraction):
    """Keep the first round(fraction * n_c) samples of each class (at least one)"""
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction must lie in (0, 1], got {fraction}")
    keep = []
    for c in dataset.classes():
        members = np.flatnonzero(dataset.labels == c)
        keep.extend(members[: max(1, int(round(fraction * members.size)))])
    return dataset.subset(np.sort(np.asarray(keep)))


def inject_noise(x, delta_db, rng):
    """Add Gaussian noise so that 10 log10(P_signal / P_noise) equals delta_db exactly"""
    x = np.asarray(x, dtype=np.float64)
    signal_power = float(np.mean(x ** 2))
    if signal_power == 0:
        raise DataError("cannot calibrate noise against a zero-power signal")
    noise = rng.standard_normal(x.shape)
    target_power = signal_power / 10.0 ** (delta_db / 10.0)
    noise *= np.sqrt(target_power / np.mean(noise ** 2))
    return x + noise


def inject_noise_rows(matrix, delta_db, rng):
    """inject_noise applied to every row, in row order"""
    return np.vstack([inject_noise(row, delta_db, rng) for row in np.asarray(matrix)])


@dataclass
class Batch:
    indices: np.ndarray
    x_teacher: np.ndarray
    x_student: np.ndarray
    labels: np.ndarray
    noise_sigma: np.ndarray

    def __len__(self):
        return self.indices.shape[0]


def make_batches(dataset, classes_per_batch, samples_per_class, seed):
    """Class-balanced batches of P classes x K pairs; one pass, partial batch dropped"""
    p, k = classes_per_batch, samples_per_class
    if p < 1 or k < 1:
        raise ConfigurationError(f"batch spec needs P, K >= 1, got P={p}, K={k}")
    classes = dataset.classes()
    if p > classes.size:
        raise ConfigurationError(f"P={p} exceeds the {classes.size} classes available")
    if p * k > len(dataset):
        raise ConfigurationError(f"P*K={p * k} exceeds the dataset size {len(dataset)}")

    rng = np.random.default_rng(seed)
    chunks = {}
    for c in classes:
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        usable = members.size - members.size % k
        chunks[int(c)] = [members[i : i + k] for i in range(0, usable, k)]

    while True:
        available = sorted(c for c, pending in chunks.items() if pending)
        if len(available) < p:
            return
        counts = np.array([len(chunks[c]) for c in available], dtype=np.float64)
        chosen = rng.choice(available, size=p, replace=False, p=counts / counts.sum())
        indices = np.concatenate([chunks[int(c)].pop() for c in chosen])
        yield Batch(
            indices=indices,
            x_teacher=dataset.x_teacher[indices],
            x_student=dataset.x_student[indices],
            labels=dataset.labels[indices],
            noise_sigma=dataset.noise_sigma[indices],
        )
