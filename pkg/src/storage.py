"""
File formats and run directories for xmd

Dataset file: magic "XMDDATA1", u32 LE (num samples, d_T, d_S, num_classes),
then per sample: label u32 LE, noise_sigma f64 LE, x_T f64 LE[d_T], x_S f64 LE[d_S].
A sidecar "<name>.meta.json" records the split and the generation parameters.

Checkpoint file: magic "XMDCKPT1", then per parameter: name length u16 LE,
UTF-8 name, rank u8, dims u32 LE each, data f64 LE.
"""
import json
import logging
import struct
from pathlib import Path

import numpy as np

from src.data import PairedDataset, SyntheticSpec, class_groups
from src.errors import ConfigurationError, FormatError

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"XMDDATA1"
CHECKPOINT_MAGIC = b"XMDCKPT1"
_DATASET_HEADER = struct.Struct("<8sIIII")


def get_xmd_root():
    """Get the root directory where xmd is installed"""
    # Go up from src/ to find the root directory
    return Path(__file__).parent.parent


def get_presets_dir():
    return get_xmd_root() / "presets"


def get_run_dir(out_dir, *parts):
    """Get a run directory, creating it if needed"""
    run_dir = Path(out_dir).joinpath(*parts)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def meta_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


# -- datasets ---------------------------------------------------------------


def _record_dtype(d_t, d_s):
    return np.dtype([("label", "<u4"), ("sigma", "<f8"), ("x_t", "<f8", (d_t,)), ("x_s", "<f8", (d_s,))])


def save_dataset(dataset, path):
    """Write a dataset and its provenance sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, d_t = dataset.x_teacher.shape
    d_s = dataset.x_student.shape[1]
    records = np.zeros(n, dtype=_record_dtype(d_t, d_s))
    records["label"] = dataset.labels
    records["sigma"] = dataset.noise_sigma
    records["x_t"] = dataset.x_teacher
    records["x_s"] = dataset.x_student
    with open(path, "wb") as f:
        f.write(_DATASET_HEADER.pack(DATASET_MAGIC, n, d_t, d_s, dataset.num_classes))
        f.write(records.tobytes())

    meta = {
        "split": dataset.split,
        "spec": dataset.spec.to_dict(),
        "class_groups": [int(g) for g in dataset.class_groups] if dataset.class_groups is not None else None,
    }
    write_json(meta_path(path), meta)
    return path


def _read_meta(path):
    if not path.exists():
        return {}
    try:
        meta = read_json(path)
    except UnicodeDecodeError as e:
        raise FormatError(f"{path.name}: not UTF-8 text", offset=e.start) from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{path.name}: invalid JSON, {e.msg}", offset=e.pos) from None
    if not isinstance(meta, dict):
        raise FormatError(f"{path.name}: expected a JSON object, got {type(meta).__name__}", offset=0)
    return meta


def _meta_spec(path, meta):
    if "spec" not in meta:
        return None
    try:
        return SyntheticSpec(**meta["spec"])
    except (TypeError, ConfigurationError) as e:
        raise FormatError(f"{path.name}: unusable generation parameters: {e}", offset=0) from None


def load_dataset(path):
    """Read a dataset file; a truncated or foreign file raises FormatError"""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _DATASET_HEADER.size:
        raise FormatError(f"{path.name}: truncated header", offset=len(blob))
    magic, n, d_t, d_s, num_classes = _DATASET_HEADER.unpack_from(blob, 0)
    if magic != DATASET_MAGIC:
        raise FormatError(f"{path.name}: bad magic {magic!r}, expected {DATASET_MAGIC.decode()!r}", offset=0)
    dtype = _record_dtype(d_t, d_s)
    expected = _DATASET_HEADER.size + n * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"{path.name}: expected {expected} bytes for {n} samples, found {len(blob)}",
            offset=min(len(blob), expected),
        )
    records = np.frombuffer(blob, dtype=dtype, count=n, offset=_DATASET_HEADER.size)

    meta = _read_meta(meta_path(path))
    spec = _meta_spec(meta_path(path), meta)
    groups = meta.get("class_groups")
    if groups is None and spec is not None:
        groups = class_groups(spec)
    return PairedDataset(
        spec=spec,
        split=meta.get("split", "train"),
        x_teacher=records["x_t"].astype(np.float64),
        x_student=records["x_s"].astype(np.float64),
        labels=records["label"].astype(np.int64),
        noise_sigma=records["sigma"].astype(np.float64),
        num_classes=int(num_classes),
        class_groups=None if groups is None else np.asarray(groups, dtype=np.int64),
    )


# -- checkpoints ------------------------------------------------------------


def save_checkpoint(params, path):
    """Write every parameter of a ParamSet (frozen ones included)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        for name, tensor in params.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", tensor.data.ndim))
            f.write(struct.pack(f"<{tensor.data.ndim}I", *tensor.shape))
            f.write(tensor.data.astype("<f8").tobytes())
    return path


def load_checkpoint(path):
    """Read a checkpoint into an ordered name -> array mapping"""
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(
            f"{path.name}: bad magic {blob[:8]!r}, expected {CHECKPOINT_MAGIC.decode()!r}", offset=0
        )
    offset = len(CHECKPOINT_MAGIC)
    arrays = {}

    def take(size):
        nonlocal offset
        if offset + size > len(blob):
            raise FormatError(f"{path.name}: truncated checkpoint", offset=offset)
        chunk = blob[offset : offset + size]
        offset += size
        return chunk

    while offset < len(blob):
        (name_len,) = struct.unpack("<H", take(2))
        start = offset
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{path.name}: parameter name is not valid UTF-8", offset=start) from None
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)
        arrays[name] = values.reshape(dims)
    return arrays


# -- JSON and JSONL -----------------------------------------------------------


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def append_jsonl(path, record):
    """Append one JSON object as a line"""
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path):
    """Parse a JSONL file, returning (records, malformed line count)"""
    records, malformed = [], 0
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                malformed += 1
                logger.warning("%s:%d is not valid JSON, skipped", path, line_number)
    return records, malformed
