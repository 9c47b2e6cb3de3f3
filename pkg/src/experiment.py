"""
Run orchestration for xmd: teacher pretraining, distillation training,
evaluation and hyperparameter sweeps
"""
import csv
import logging
import multiprocessing
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from src.config import ExperimentConfig, config_hash, with_override
from src.console import console
from src.data import SHIFTED_SPLIT, SPLITS, generate_benchmark, inject_noise_rows, make_batches, subsample_per_class
from src.errors import ConfigurationError, NumericError, UsageError
from src.evaluation import (
    MetricsReport,
    build_trials,
    classification_accuracy,
    compute_eer,
    compute_min_dcf,
    cross_modal_matching,
    prototype_matching_accuracy,
    write_metrics_csv,
)
from src.losses import (
    classifier_level_loss,
    cross_entropy,
    fitnet_l2_baseline,
    kd_kl_baseline,
    margin_feature_loss,
    total_loss,
)
from src.models import PROJECTED_MODES, build_bundle
from src.numeric import ParamSet, Tape, constant
from src.optim import OptimizerState, step, step_lr
from src.quality import RunningStats, adaptive_weights, quality_for_source, update_stats
from src.storage import (
    append_jsonl,
    get_run_dir,
    load_checkpoint,
    load_dataset,
    read_jsonl,
    save_checkpoint,
    write_json,
)

logger = logging.getLogger(__name__)

TEACHER_CHECKPOINT = "teacher.ckpt"
STUDENT_CHECKPOINT = "student.ckpt"
LAST_GOOD_CHECKPOINT = "last_good.ckpt"
RUN_LOG = "log.jsonl"
TEACHER_LOG = "teacher.jsonl"
TEACHER_SUMMARY = "teacher.json"

# Val accuracy a default-benchmark teacher is expected to clear; a miss is only logged
TEACHER_TARGET_ACCURACY = 0.9

# Independent random streams of a run, keyed by purpose
_TEACHER_STREAM = 11
_BATCH_STREAM = 12
_NOISE_STREAM = 13
_CROP_STREAM = 14

SWEEP_AXES = ("alpha", "margin", "beta", "h")


# -- data and models ----------------------------------------------------------


def load_splits(config):
    """Every split, generated from config.data or read from config.data_path"""
    if not config.data_path:
        return generate_benchmark(config.data)
    root = Path(config.data_path)
    splits = {}
    for split in SPLITS:
        path = root / f"{split}.bin"
        if not path.exists() and split == SHIFTED_SPLIT:
            continue
        if not path.exists():
            raise ConfigurationError(f"split '{split}' not found in {root} (run gen-data first)")
        splits[split] = load_dataset(path)
    return splits


def _require(splits, name):
    if name not in splits:
        raise ConfigurationError(f"split '{name}' is missing")
    return splits[name]


def closed_class_count(splits):
    """Number of training classes: one past the largest closed-set label"""
    labels = [splits[name].labels for name in ("teacher-pretrain", "train") if name in splits]
    return int(max(int(l.max()) for l in labels)) + 1


def new_bundle(config, splits):
    train = _require(splits, "train")
    return build_bundle(
        config.model,
        teacher_input_dim=train.x_teacher.shape[1],
        student_input_dim=train.x_student.shape[1],
        num_classes=closed_class_count(splits),
        alpha=config.distill.alpha,
        seed=config.seed,
    )


def _optimizer(settings):
    return OptimizerState(
        kind=settings.kind, lr=settings.lr, momentum=settings.momentum, weight_decay=settings.weight_decay
    )


def student_embeddings(bundle, x_student):
    tape = Tape()
    return bundle.encode_student(tape, constant(x_student)).data


def teacher_embeddings(bundle, x_teacher, project=False):
    """E_T, or the projected F_T when project is set"""
    tape = Tape()
    e_t = bundle.encode_teacher(tape, constant(x_teacher))
    return bundle.project(tape, e_t).data if project else e_t.data


def student_logits(bundle, x_student):
    tape = Tape()
    return bundle.classify(tape, bundle.encode_student(tape, constant(x_student))).data


def run_label(distill):
    """Mode name, suffixed with +quality when quality weights are active"""
    active = distill.quality.enabled and distill.mode != "none"
    return distill.mode + ("+quality" if active else "")


def _fresh_log(out_dir, name):
    path = Path(out_dir) / name
    if path.exists():
        path.unlink()
    return path


# -- teacher ------------------------------------------------------------------


@dataclass
class TeacherResult:
    bundle: object
    arrays: dict
    val_accuracy: float
    history: list = field(default_factory=list)
    checkpoint: Path = None


def train_teacher(config, splits=None, out_dir=None):
    """Pretrain the teacher encoder with its own classifier, then freeze it"""
    splits = splits if splits is not None else load_splits(config)
    pretrain = _require(splits, "teacher-pretrain")
    if config.teacher.data_fraction < 1.0:
        pretrain = subsample_per_class(pretrain, config.teacher.data_fraction)

    bundle = new_bundle(config, splits)
    params = ParamSet.merge(bundle.teacher.params, bundle.teacher_classifier.params)
    settings = config.teacher.optimizer
    optimizer = _optimizer(settings)
    rng = np.random.default_rng([config.seed, _TEACHER_STREAM])
    log_path = None
    if out_dir is not None:
        out_dir = get_run_dir(out_dir)
        write_json(out_dir / "config.json", config.to_dict())
        log_path = _fresh_log(out_dir, TEACHER_LOG)

    console.print(f"🚀 Training teacher on {len(pretrain)} pairs for {config.teacher.epochs} epochs")
    history = []
    batch_size = config.teacher.batch_size
    for epoch in range(config.teacher.epochs):
        optimizer.lr = step_lr(settings.lr, epoch, settings.lr_gamma, settings.lr_every)
        order = rng.permutation(len(pretrain))
        losses, correct = [], 0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            labels = pretrain.labels[idx]
            tape = Tape()
            logits = bundle.teacher_classifier(tape, bundle.teacher(tape, constant(pretrain.x_teacher[idx])), labels)
            loss = cross_entropy(tape, logits, labels)
            tape.backward(loss)
            step(optimizer, params)
            losses.append(loss.item())
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
        record = {
            "kind": "teacher_epoch",
            "epoch": epoch,
            "lr": optimizer.lr,
            "loss": float(np.mean(losses)),
            "train_accuracy": correct / len(order),
        }
        history.append(record)
        if log_path is not None:
            append_jsonl(log_path, record)

    bundle.freeze_teacher()
    val = _require(splits, "val")
    tape = Tape()
    val_logits = bundle.teacher_classifier(tape, bundle.encode_teacher(tape, constant(val.x_teacher)))
    val_accuracy = classification_accuracy(val_logits.data, val.labels)
    console.print(f"✅ Teacher val accuracy: {val_accuracy:.2%}")
    if val_accuracy < TEACHER_TARGET_ACCURACY:
        logger.warning(
            "teacher val accuracy %.2f%% is below %.0f%%; distillation gains may not show",
            100 * val_accuracy,
            100 * TEACHER_TARGET_ACCURACY,
        )

    result = TeacherResult(bundle, bundle.teacher_params().snapshot(), val_accuracy, history)
    if out_dir is not None:
        append_jsonl(log_path, {"kind": "teacher", "val_accuracy": val_accuracy})
        write_json(
            out_dir / TEACHER_SUMMARY,
            {
                "val_accuracy": val_accuracy,
                "target_accuracy": TEACHER_TARGET_ACCURACY,
                "pretrain_pairs": len(pretrain),
                "epochs": config.teacher.epochs,
                "final_train_accuracy": history[-1]["train_accuracy"] if history else None,
            },
        )
        result.checkpoint = save_checkpoint(bundle.teacher_params(), out_dir / TEACHER_CHECKPOINT)
    return result


def load_teacher_arrays(path):
    path = Path(path)
    if not path.exists():
        raise UsageError(f"teacher checkpoint not found: {path} (run train-teacher first)")
    return load_checkpoint(path)


# -- distillation ---------------------------------------------------------------


def _distill_terms(tape, bundle, distill, f_s, logits, e_t, labels):
    """Per-sample distillation losses for the configured mode"""
    mode = distill.mode
    if mode == "kd-kl":
        teacher_logits = bundle.teacher_classifier(tape, e_t)
        return kd_kl_baseline(tape, logits, teacher_logits, distill.temperature, reduce=False)

    f_t = bundle.project(tape, e_t)
    if mode == "classifier":
        return classifier_level_loss(tape, f_s, f_t, labels, labels, bundle.classifier, distill.beta, reduce=False)

    a, b = f_s, f_t
    if distill.normalize and (mode == "fitnet-l2" or distill.metric == "sq-l2-mean"):
        a, b = tape.l2_normalize(f_s), tape.l2_normalize(f_t)
    if mode == "fitnet-l2":
        return fitnet_l2_baseline(tape, a, b, reduce=False)
    return margin_feature_loss(tape, a, b, distill.metric, distill.resolved_margin())


@dataclass
class DistillResult:
    bundle: object
    history: list = field(default_factory=list)
    quality: RunningStats = None
    checkpoint: Path = None


def _validate(bundle, val, config):
    embeddings = student_embeddings(bundle, val.x_student)
    trials = build_trials(
        embeddings,
        val.labels,
        max_target=config.eval.val_max_trials,
        max_nontarget=config.eval.val_max_trials,
        seed=config.seed,
    )
    logits = student_logits(bundle, val.x_student)
    return classification_accuracy(logits, val.labels), compute_eer(trials)


def distill_train(config, teacher_arrays, splits=None, out_dir=None):
    """Train the student (and head/classifier) under config.distill"""
    splits = splits if splits is not None else load_splits(config)
    train, val = _require(splits, "train"), _require(splits, "val")
    distill = config.distill
    quality = distill.quality

    bundle = new_bundle(config, splits)
    bundle.teacher_params().load(teacher_arrays)
    bundle.freeze_teacher()
    params = bundle.active_params(distill.mode)
    every_param = bundle.all_params()
    optimizer = _optimizer(config.optimizer)
    stats = RunningStats(decay=quality.ema_decay)

    log_path = None
    if out_dir is not None:
        out_dir = get_run_dir(out_dir)
        write_json(out_dir / "config.json", config.to_dict())
        log_path = _fresh_log(out_dir, RUN_LOG)

    console.print(f"🚀 Distilling student ({run_label(distill)}) for {config.epochs} epochs")
    history = []
    for epoch in range(config.epochs):
        optimizer.lr = step_lr(config.optimizer.lr, epoch, config.optimizer.lr_gamma, config.optimizer.lr_every)
        sums = {"loss": 0.0, "task_loss": 0.0, "distill_loss": 0.0, "weight": 0.0}
        correct = seen = batches = 0
        for batch_index, batch in enumerate(
            make_batches(
                train,
                config.batch.classes_per_batch,
                config.batch.samples_per_class,
                seed=[config.seed, _BATCH_STREAM, epoch],
            )
        ):
            last_good = every_param.snapshot()
            try:
                tape = Tape()
                f_s = bundle.encode_student(tape, constant(batch.x_student))
                logits = bundle.classify(tape, f_s, batch.labels)
                task = cross_entropy(tape, logits, batch.labels)
                if distill.mode == "none":
                    loss, distill_value, mean_weight = task, 0.0, 1.0
                else:
                    e_t = bundle.encode_teacher(tape, constant(batch.x_teacher))
                    per_sample = _distill_terms(tape, bundle, distill, f_s, logits, e_t, batch.labels)
                    weights = None
                    if quality.enabled:
                        q = quality_for_source(quality.source, e_t, f_s)
                        stats = update_stats(stats, q)
                        weights = adaptive_weights(q, stats, quality)
                    loss = total_loss(tape, task, per_sample, weights, distill.scale)
                    distill_value = float(np.mean(per_sample.data))
                    mean_weight = 1.0 if weights is None else float(np.mean(weights))
                tape.backward(loss)
                step(optimizer, params)
                if not all(np.all(np.isfinite(p.data)) for _, p in params.items()):
                    raise NumericError("parameter update produced a non-finite value")
            except NumericError as e:
                _abort(every_param, last_good, out_dir, log_path, epoch, batch_index, e)

            sums["loss"] += loss.item()
            sums["task_loss"] += task.item()
            sums["distill_loss"] += distill_value
            sums["weight"] += mean_weight
            correct += int(np.sum(np.argmax(logits.data, axis=1) == batch.labels))
            seen += len(batch)
            batches += 1

        if batches == 0:
            raise ConfigurationError("batch spec yields no batches from the train split")
        val_accuracy, val_eer = _validate(bundle, val, config)
        record = {
            "kind": "epoch",
            "epoch": epoch,
            "lr": optimizer.lr,
            **{key: value / batches for key, value in sums.items() if key != "weight"},
            "train_accuracy": correct / seen,
            "val_accuracy": val_accuracy,
            "val_eer": val_eer,
        }
        if quality.enabled and distill.mode != "none":
            record["quality"] = {
                "mu_q": stats.mu_q,
                "sigma_q": stats.sigma_q,
                "mean_weight": sums["weight"] / batches,
                "floor_hits": stats.floor_hits,
            }
        history.append(record)
        logger.debug("epoch %d: %s", epoch, record)
        if log_path is not None:
            append_jsonl(log_path, record)

    if history:
        last = history[-1]
        console.print(f"✅ Val accuracy {last['val_accuracy']:.2%}, val EER {last['val_eer']:.2%}")
    result = DistillResult(bundle, history, stats)
    if out_dir is not None:
        result.checkpoint = save_checkpoint(every_param, out_dir / STUDENT_CHECKPOINT)
    return result


def _abort(every_param, last_good, out_dir, log_path, epoch, batch_index, error):
    where = f"epoch {epoch}, batch {batch_index}"
    message = f"{error} at {where}"
    every_param.load(last_good)
    if out_dir is not None:
        saved = save_checkpoint(every_param, Path(out_dir) / LAST_GOOD_CHECKPOINT)
        append_jsonl(log_path, {"kind": "abort", "epoch": epoch, "batch": batch_index, "error": str(error)})
        message += f"; last good parameters saved to {saved}"
    aborted = NumericError(message, node_id=getattr(error, "node_id", None))
    aborted.last_good = last_good
    raise aborted from error


def load_student(config, path, splits):
    """A bundle with every parameter restored from a full checkpoint"""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"student checkpoint not found: {path} (run distill first)")
    bundle = new_bundle(config, splits)
    bundle.all_params().load(load_checkpoint(path))
    bundle.freeze_teacher()
    return bundle


# -- evaluation -----------------------------------------------------------------


def _open_set_embeddings(bundle, x_student, config):
    if config.eval.crops == 1:
        return student_embeddings(bundle, x_student)
    rng = np.random.default_rng([config.seed, _CROP_STREAM])
    crops = [
        student_embeddings(bundle, inject_noise_rows(x_student, config.eval.crop_db, rng))
        for _ in range(config.eval.crops)
    ]
    return np.stack(crops, axis=1)


def _verification(bundle, x_student, labels, config, groups=None):
    trials = build_trials(
        _open_set_embeddings(bundle, x_student, config),
        labels,
        max_target=config.eval.max_target,
        max_nontarget=config.eval.max_nontarget,
        seed=config.seed,
        groups=groups,
    )
    eer = compute_eer(trials)
    settings = config.eval
    min_dcf = compute_min_dcf(trials, settings.p_tar, settings.c_miss, settings.c_fa, normalize=settings.normalize_dcf)
    return eer, min_dcf


def evaluate(config, bundle, splits=None, run_id=None, history=None, out_dir=None):
    """Closed-set accuracy, open-set EER/minDCF (clean, hard, noisy, shifted), cross-modal matching"""
    splits = splits if splits is not None else load_splits(config)
    closed, open_set = _require(splits, "test-closed"), _require(splits, "test-open")

    accuracy = classification_accuracy(student_logits(bundle, closed.x_student), closed.labels)
    eer, min_dcf = _verification(bundle, open_set.x_student, open_set.labels, config)
    eer_hard = None
    if open_set.class_groups is not None:
        try:
            eer_hard, _ = _verification(bundle, open_set.x_student, open_set.labels, config, open_set.class_groups)
        except UsageError as e:
            logger.warning("hard trial list skipped: %s", e)

    shifted = {}
    if SHIFTED_SPLIT in splits:
        target = splits[SHIFTED_SPLIT]
        shifted["eer"], shifted["min_dcf"] = _verification(bundle, target.x_student, target.labels, config)

    noisy = {}
    for db in config.eval.noise_db:
        rng = np.random.default_rng([config.seed, _NOISE_STREAM, int(round(float(db) * 1000))])
        x_noisy = inject_noise_rows(open_set.x_student, float(db), rng)
        noisy_eer, noisy_dcf = _verification(bundle, x_noisy, open_set.labels, config)
        noisy[str(db)] = {"eer": noisy_eer, "min_dcf": noisy_dcf}

    s_emb = student_embeddings(bundle, open_set.x_student)
    t_emb = teacher_embeddings(bundle, open_set.x_teacher, project=True)
    # Modes that never train the head have no map from the teacher space into the student space
    unaligned = config.distill.mode not in PROJECTED_MODES
    matching = {}
    protocols = [("original", "O")]
    if open_set.class_groups is not None:
        protocols.append(("hard", "H"))
    for protocol, tag in protocols:
        for direction, (anchors, candidates) in (("S-T", (s_emb, t_emb)), ("T-S", (t_emb, s_emb))):
            matching[f"{direction}({tag})"] = cross_modal_matching(
                anchors,
                open_set.labels,
                candidates,
                open_set.labels,
                protocol=protocol,
                n_trials=config.eval.matching_trials,
                seed=config.seed,
                groups=open_set.class_groups,
                unaligned=unaligned,
            )

    teacher_trials = build_trials(
        teacher_embeddings(bundle, open_set.x_teacher),
        open_set.labels,
        max_target=config.eval.max_target,
        max_nontarget=config.eval.max_nontarget,
        seed=config.seed,
    )

    if history is None and out_dir is not None and (Path(out_dir) / RUN_LOG).exists():
        records, _ = read_jsonl(Path(out_dir) / RUN_LOG)
        history = [r for r in records if r.get("kind") == "epoch"]
    last_epoch = history[-1] if history else {}

    report = MetricsReport(
        run_id=run_id or (Path(out_dir).name if out_dir is not None else f"{config.distill.mode}-seed{config.seed}"),
        mode=run_label(config.distill),
        seed=config.seed,
        eer=eer,
        min_dcf=min_dcf,
        accuracy=accuracy,
        matching=matching,
        noisy=noisy,
        teacher_eer=compute_eer(teacher_trials),
        prototype_accuracy=prototype_matching_accuracy(s_emb, open_set.labels, t_emb, open_set.labels),
        eer_hard=eer_hard,
        shifted=shifted,
        val_accuracy=last_epoch.get("val_accuracy"),
        val_eer=last_epoch.get("val_eer"),
        loss_trace=[r["loss"] for r in (history or [])],
        config_hash=config_hash(config),
        config=config.to_dict(),
    )
    if out_dir is not None:
        out_dir = get_run_dir(out_dir)
        append_jsonl(out_dir / RUN_LOG, {"kind": "metrics", **report.to_dict()})
        write_json(out_dir / "metrics.json", report.to_dict())
        write_metrics_csv(report.csv_rows(), out_dir / "metrics.csv")
    return report


def run_experiment(config, teacher_arrays, splits=None, out_dir=None):
    """distill_train followed by evaluate"""
    splits = splits if splits is not None else load_splits(config)
    result = distill_train(config, teacher_arrays, splits, out_dir)
    return evaluate(config, result.bundle, splits, history=result.history, out_dir=out_dir)


# -- sweeps ---------------------------------------------------------------------


def sweep_key(config, axis):
    """Dotted config key varied by a sweep axis; margins are angles under cosine"""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis '{axis}', expected one of {SWEEP_AXES}")
    if axis == "h" and not (config.distill.quality.enabled and config.distill.mode != "none"):
        raise ConfigurationError("sweeping h needs distill.quality.enabled=true and a distillation mode")
    if axis == "margin":
        return "distill.margin_deg" if config.distill.metric == "cosine" else "distill.margin"
    return {"alpha": "distill.alpha", "beta": "distill.beta", "h": "distill.quality.h"}[axis]


@dataclass
class SweepResult:
    axis: str
    values: list
    seeds: list
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    table_path: Path = None


def _run_child(job):
    """Worker entry point: one (value, seed) run; failures are returned, not raised"""
    value, seed, config_dict, teacher_path, child_dir = job
    try:
        config = ExperimentConfig.from_dict(config_dict)
        report = run_experiment(config, load_checkpoint(teacher_path), out_dir=child_dir)
        return value, seed, report.to_dict(), None
    except Exception as e:  # noqa: BLE001
        return value, seed, None, f"{type(e).__name__}: {e}"


def sweep(config, axis, values, seeds=None, workers=1, out_dir=None):
    """One full run per value per seed; child failures are recorded and the sweep goes on"""
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    seeds = list(seeds) if seeds else [config.seed]
    key = sweep_key(config, axis)
    root = get_run_dir(out_dir or config.out_dir)

    sweep_log = _fresh_log(root, "sweep.jsonl")
    jobs, cached, rejected = [], {}, []
    for seed in seeds:
        seed_config = replace(config, seed=seed)
        splits = load_splits(seed_config)
        teacher = train_teacher(seed_config, splits, out_dir=root / f"seed{seed}" / "teacher")
        cached[seed] = (splits, teacher.arrays)
        for value in values:
            try:
                child = with_override(seed_config, f"{key}={value}")
            except ConfigurationError as e:
                rejected.append((value, seed, None, f"{type(e).__name__}: {e}"))
                continue
            child = replace(child, out_dir=str(root / f"{axis}={value}" / f"seed{seed}"))
            jobs.append((value, seed, child.to_dict(), str(teacher.checkpoint), child.out_dir))

    console.print(f"🚀 Sweeping {key} over {list(values)} with seeds {seeds} ({len(jobs)} runs)")
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            outcomes = pool.map(_run_child, jobs)
    else:
        outcomes = []
        for value, seed, config_dict, _, child_dir in jobs:
            splits, teacher_arrays = cached[seed]
            try:
                report = run_experiment(ExperimentConfig.from_dict(config_dict), teacher_arrays, splits, child_dir)
                outcomes.append((value, seed, report.to_dict(), None))
            except Exception as e:  # noqa: BLE001
                outcomes.append((value, seed, None, f"{type(e).__name__}: {e}"))
    outcomes.extend(rejected)

    result = SweepResult(axis=axis, values=list(values), seeds=seeds)
    for value, seed, _, error in outcomes:
        if error is not None:
            logger.warning("sweep child %s=%s seed %d failed: %s", key, value, seed, error)
            result.failures.append({"value": value, "seed": seed, "error": error})
            append_jsonl(sweep_log, {"kind": "failure", "value": value, "seed": seed, "error": error})
    for value, seed, report, _ in outcomes:
        if report is not None:
            append_jsonl(sweep_log, {"kind": "child", "value": value, "seed": seed, "metrics": report})

    result.rows = sweep_table(outcomes, values, seeds)
    result.table_path = write_sweep_csv(result.rows, seeds, root / "sweep.csv")
    return result


SWEEP_METRICS = ("eer", "min_dcf", "accuracy")


def sweep_table(outcomes, values, seeds):
    """Rows of (value, metric mean, metric per seed) in value order"""
    by_run = {(value, seed): report for value, seed, report, _ in outcomes if report is not None}
    rows = []
    for value in values:
        row = {"value": value, "failed": sum(1 for s in seeds if (value, s) not in by_run)}
        for metric in SWEEP_METRICS:
            per_seed = {s: by_run[(value, s)][metric] for s in seeds if (value, s) in by_run}
            row[f"mean_{metric}"] = float(np.mean(list(per_seed.values()))) if per_seed else None
            for s in seeds:
                row[f"{metric}_seed{s}"] = per_seed.get(s)
        rows.append(row)
    return rows


def write_sweep_csv(rows, seeds, path):
    columns = ["value"]
    for metric in SWEEP_METRICS:
        columns += [f"mean_{metric}"] + [f"{metric}_seed{s}" for s in seeds]
    columns.append("failed")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return path
