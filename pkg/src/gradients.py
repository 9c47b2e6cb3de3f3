"""
Finite-difference checks of every training objective on small random problems
"""
import numpy as np

from src.losses import (
    classifier_level_loss,
    cross_entropy,
    fitnet_l2_baseline,
    kd_kl_baseline,
    margin_feature_loss,
    total_loss,
)
from src.models import Encoder, EncoderConfig, ProjectionHead, SharedClassifier
from src.numeric import ParamSet, grad_check

DEFAULT_TOLERANCE = 1e-4


def _problem(seed, batch=4, dim=5, classes=3):
    rng = np.random.default_rng(seed)
    params = ParamSet()
    params.add("f_s", rng.standard_normal((batch, dim)))
    params.add("f_t", rng.standard_normal((batch, dim)))
    params.add("logits_s", rng.standard_normal((batch, classes)))
    params.add("logits_t", rng.standard_normal((batch, classes)))
    labels = rng.integers(0, classes, size=batch)
    weights = rng.uniform(0.1, 2.0, size=batch)
    return params, labels, weights, rng


def objective_graphs(seed):
    """(name, graph, params) for each objective, each on its own seeded problem"""
    graphs = []

    params, labels, _, _ = _problem(seed)
    graphs.append(("task-ce", lambda tape, _, p, y=labels: cross_entropy(tape, p["logits_s"], y), params))

    params, _, _, rng = _problem(seed)
    margin = float(rng.uniform(0.0, 0.2))
    graphs.append(
        (
            "margin-cosine",
            lambda tape, _, p, m=margin: tape.mean(margin_feature_loss(tape, p["f_s"], p["f_t"], "cosine", m)),
            params,
        )
    )

    params, _, _, rng = _problem(seed)
    margin = float(rng.uniform(0.0, 0.5))
    graphs.append(
        (
            "margin-sq-l2",
            lambda tape, _, p, m=margin: tape.mean(margin_feature_loss(tape, p["f_s"], p["f_t"], "sq-l2-mean", m)),
            params,
        )
    )

    params, labels, _, rng = _problem(seed)
    classifier = SharedClassifier(3, 5, rng)
    merged = ParamSet.merge(params, classifier.params)
    graphs.append(
        (
            "classifier-level",
            lambda tape, _, p, y=labels, c=classifier: classifier_level_loss(tape, p["f_s"], p["f_t"], y, y, c, 1.0),
            merged,
        )
    )

    params, _, _, rng = _problem(seed)
    temperature = float(rng.uniform(1.0, 5.0))
    graphs.append(
        (
            "kd-kl",
            lambda tape, _, p, t=temperature: kd_kl_baseline(tape, p["logits_s"], p["logits_t"], t),
            params,
        )
    )

    params, _, _, _ = _problem(seed)
    graphs.append(("fitnet-l2", lambda tape, _, p: fitnet_l2_baseline(tape, p["f_s"], p["f_t"]), params))

    params, labels, weights, _ = _problem(seed)

    def weighted_total(tape, _, p, y=labels, w=weights):
        task = cross_entropy(tape, p["logits_s"], y)
        per_sample = margin_feature_loss(tape, p["f_s"], p["f_t"], "cosine", 0.05)
        return total_loss(tape, task, per_sample, w, scale=0.5)

    graphs.append(("quality-weighted-total", weighted_total, params))

    rng = np.random.default_rng(seed)
    student = Encoder(EncoderConfig(6, [5], 4), "student", rng)
    head = ProjectionHead(4, 4, float(rng.uniform(0.0, 1.0)), rng, np.random.default_rng(seed + 1))
    teacher_out = rng.standard_normal((3, 4))
    x_student = rng.standard_normal((3, 6))

    def projected_feature(tape, inputs, p, s=student, h=head):
        x, e_t = inputs
        return tape.mean(margin_feature_loss(tape, s(tape, x), h(tape, e_t), "cosine", 0.02))

    graphs.append(
        ("projected-feature", projected_feature, ParamSet.merge(student.params, head.params), (x_student, teacher_out))
    )
    return [entry if len(entry) == 4 else (*entry, ()) for entry in graphs]


def check_objectives(seeds, tolerance=DEFAULT_TOLERANCE, step=1e-5):
    """Worst relative error per objective over all seeds, plus skipped-kink counts"""
    summary = {}
    for seed in seeds:
        for name, graph, params, inputs in objective_graphs(seed):
            result = grad_check(graph, params, inputs, seed=seed, step=step)
            entry = summary.setdefault(name, {"max_relative_error": 0.0, "checked": 0, "skipped": 0})
            entry["max_relative_error"] = max(entry["max_relative_error"], result.max_relative_error)
            entry["checked"] += result.checked
            entry["skipped"] += result.warnings
    for entry in summary.values():
        entry["passed"] = entry["max_relative_error"] <= tolerance
    return summary
