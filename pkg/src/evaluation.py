"""
Verification and classification metrics

Scores follow the "higher = more similar" convention. A threshold t accepts
every score >= t, so FRR(t) = fraction of targets < t and FAR(t) = fraction
of nontargets >= t. The sweep visits every distinct score plus +inf.
"""
import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from src.errors import ConfigurationError, DataError, UsageError

MATCHING_PROTOCOLS = ("original", "hard")
CSV_COLUMNS = ("run_id", "mode", "metric", "value", "seed")


@dataclass
class TrialSet:
    target: np.ndarray
    nontarget: np.ndarray

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64).reshape(-1)
        self.nontarget = np.asarray(self.nontarget, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(self.target)) and np.all(np.isfinite(self.nontarget))):
            raise DataError("trial scores must be finite")

    def __len__(self):
        return self.target.size + self.nontarget.size


def error_rates(trials):
    """(thresholds, FAR, FRR) over the full threshold sweep"""
    if trials.target.size == 0 or trials.nontarget.size == 0:
        raise UsageError(
            f"need target and nontarget trials, got {trials.target.size} and {trials.nontarget.size}"
        )
    targets = np.sort(trials.target)
    nontargets = np.sort(trials.nontarget)
    thresholds = np.append(np.unique(np.concatenate([targets, nontargets])), np.inf)
    frr = np.searchsorted(targets, thresholds, side="left") / targets.size
    far = (nontargets.size - np.searchsorted(nontargets, thresholds, side="left")) / nontargets.size
    return thresholds, far, frr


def compute_eer(trials):
    """Mean of FAR and FRR where they are closest; ties go to the lower threshold"""
    _, far, frr = error_rates(trials)
    index = int(np.argmin(np.abs(far - frr)))
    return float((far[index] + frr[index]) / 2.0)


def compute_min_dcf(trials, p_tar=0.01, c_miss=1.0, c_fa=1.0, normalize=False):
    """Minimum of C_det = c_miss * P_miss * p_tar + c_fa * P_fa * (1 - p_tar)"""
    if not 0.0 < p_tar < 1.0:
        raise ConfigurationError(f"p_tar must lie in (0, 1), got {p_tar}")
    if c_miss < 0 or c_fa < 0:
        raise ConfigurationError("detection costs must be >= 0")
    _, far, frr = error_rates(trials)
    cost = c_miss * frr * p_tar + c_fa * far * (1.0 - p_tar)
    value = float(np.min(cost))
    if normalize:
        value /= min(c_miss * p_tar, c_fa * (1.0 - p_tar))
    return value


def classification_accuracy(logits, labels):
    """Fraction of rows whose argmax (lowest index on ties) equals the label"""
    logits = np.asarray(getattr(logits, "data", logits), dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise UsageError(f"logits {logits.shape} do not match {labels.shape[0]} labels")
    if labels.size == 0:
        raise UsageError("accuracy of an empty set is undefined")
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def unit_rows(embeddings):
    """Rows scaled to unit length; a zero row has no direction"""
    embeddings = np.asarray(getattr(embeddings, "data", embeddings), dtype=np.float64)
    norms = np.linalg.norm(embeddings, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("zero-norm embedding cannot be scored by cosine similarity")
    return embeddings / norms


def _pool_crops(embeddings):
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim == 3:
        # Several crops per sample: average their unit vectors
        return unit_rows(unit_rows(embeddings).mean(axis=1))
    if embeddings.ndim != 2:
        raise UsageError(f"embeddings must be (n, D) or (n, crops, D), got {embeddings.shape}")
    return unit_rows(embeddings)


def _cap(indices, limit, rng):
    if limit is None or indices.size <= limit:
        return indices
    return np.sort(rng.choice(indices, size=limit, replace=False))


def build_trials(embeddings, labels, max_target=None, max_nontarget=None, seed=0, groups=None):
    """All unordered pairs of a split, scored by cosine similarity, each side optionally capped

    With class nuisance groups (``groups[class]``) only nontarget pairs whose
    two classes share a group are kept: the hard trial list.
    """
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise UsageError("verification trials need at least 2 classes")
    units = _pool_crops(embeddings)
    if units.shape[0] != labels.shape[0]:
        raise UsageError(f"{units.shape[0]} embeddings for {labels.shape[0]} labels")

    first, second = np.triu_indices(labels.shape[0], k=1)
    same = labels[first] == labels[second]
    different = ~same
    if groups is not None:
        groups = np.asarray(groups)
        different &= groups[labels[first]] == groups[labels[second]]
        if not np.any(different):
            raise UsageError("no nontarget trials: no two classes share a nuisance group")
    rng = np.random.default_rng(seed)
    target_pairs = _cap(np.flatnonzero(same), max_target, rng)
    nontarget_pairs = _cap(np.flatnonzero(different), max_nontarget, rng)
    if target_pairs.size == 0:
        raise UsageError("no target trials: every class has a single sample")

    def score(pairs):
        return np.sum(units[first[pairs]] * units[second[pairs]], axis=1)

    return TrialSet(target=score(target_pairs), nontarget=score(nontarget_pairs))


def cross_modal_matching(
    anchor_embeddings,
    anchor_labels,
    candidate_embeddings,
    candidate_labels,
    protocol="original",
    n_trials=2000,
    seed=0,
    groups=None,
    unaligned=False,
):
    """Forced choice between a same-class and a distractor candidate from the other modality

    The "hard" protocol draws the distractor class from the anchor's nuisance
    group (``groups[class]``), falling back to any other class when the group
    has no other member. A tie in similarity scores half a point.

    ``unaligned`` marks candidates from a space nothing was trained to align
    with the anchors: each trial then rotates both candidates by a fresh
    random orthogonal matrix, so the score is the average over orientations.
    """
    if protocol not in MATCHING_PROTOCOLS:
        raise ConfigurationError(f"unknown matching protocol '{protocol}', expected one of {MATCHING_PROTOCOLS}")
    if protocol == "hard" and groups is None:
        raise ConfigurationError("the hard matching protocol needs class nuisance groups")
    if n_trials < 1:
        raise ConfigurationError(f"n_trials must be >= 1, got {n_trials}")
    anchors = unit_rows(anchor_embeddings)
    candidates = unit_rows(candidate_embeddings)
    anchor_labels = np.asarray(anchor_labels)
    candidate_labels = np.asarray(candidate_labels)

    classes = np.intersect1d(np.unique(anchor_labels), np.unique(candidate_labels))
    if classes.size < 2:
        raise UsageError("cross-modal matching needs at least 2 classes present in both modalities")
    members = {int(c): np.flatnonzero(candidate_labels == c) for c in classes}
    eligible = np.flatnonzero(np.isin(anchor_labels, classes))

    rng = np.random.default_rng(seed)
    score = 0.0
    for _ in range(n_trials):
        anchor = int(rng.choice(eligible))
        label = int(anchor_labels[anchor])
        others = classes[classes != label]
        if protocol == "hard":
            same_group = others[np.asarray(groups)[others] == groups[label]]
            if same_group.size:
                others = same_group
        distractor = int(rng.choice(others))
        positive = candidates[rng.choice(members[label])]
        negative = candidates[rng.choice(members[distractor])]
        if unaligned:
            rotation = random_rotation(candidates.shape[1], rng)
            positive, negative = rotation @ positive, rotation @ negative
        s_pos = float(anchors[anchor] @ positive)
        s_neg = float(anchors[anchor] @ negative)
        score += 1.0 if s_pos > s_neg else 0.5 if s_pos == s_neg else 0.0
    return score / n_trials


def random_rotation(dim, rng):
    """Haar-distributed orthogonal matrix"""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def prototype_matching_accuracy(query_embeddings, query_labels, reference_embeddings, reference_labels):
    """N-way matching of each query to the class centroids of the other modality"""
    queries = unit_rows(query_embeddings)
    references = unit_rows(reference_embeddings)
    reference_labels = np.asarray(reference_labels)
    classes = np.unique(reference_labels)
    if classes.size < 2:
        raise UsageError("prototype matching needs at least 2 reference classes")
    centroids = unit_rows(np.vstack([references[reference_labels == c].mean(axis=0) for c in classes]))
    predicted = classes[np.argmax(queries @ centroids.T, axis=1)]
    return float(np.mean(predicted == np.asarray(query_labels)))


@dataclass
class MetricsReport:
    """Every number produced by one evaluation of a trained student"""

    run_id: str
    mode: str
    seed: int
    eer: float
    min_dcf: float
    accuracy: float
    matching: dict = field(default_factory=dict)
    noisy: dict = field(default_factory=dict)
    teacher_eer: float = None
    prototype_accuracy: float = None
    eer_hard: float = None
    shifted: dict = field(default_factory=dict)
    val_accuracy: float = None
    val_eer: float = None
    loss_trace: list = field(default_factory=list)
    config_hash: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        known = {name: payload[name] for name in cls.__dataclass_fields__ if name in payload}
        return cls(**known)

    def metrics(self):
        """Flat metric name -> value mapping, in a fixed order"""
        values = {"eer": self.eer, "min_dcf": self.min_dcf, "accuracy": self.accuracy}
        if self.eer_hard is not None:
            values["eer_hard"] = self.eer_hard
        for db, entry in self.noisy.items():
            values[f"eer_db{db}"] = entry["eer"]
            values[f"min_dcf_db{db}"] = entry["min_dcf"]
        for key, value in self.matching.items():
            values[f"matching_{key}"] = value
        if self.teacher_eer is not None:
            values["teacher_eer"] = self.teacher_eer
        if self.prototype_accuracy is not None:
            values["prototype_accuracy"] = self.prototype_accuracy
        for name, value in self.shifted.items():
            values[f"shifted_{name}"] = value
        if self.val_accuracy is not None:
            values["val_accuracy"] = self.val_accuracy
            values["val_eer"] = self.val_eer
        return values

    def csv_rows(self):
        return [
            {"run_id": self.run_id, "mode": self.mode, "metric": name, "value": value, "seed": self.seed}
            for name, value in self.metrics().items()
        ]


def write_metrics_csv(rows, path):
    """Long-format table with one metric value per row"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "value": repr(float(row["value"]))})
    return path
