"""Embedding dataset model, file formats, synthetic generation, ID/OOD splits.

A dataset is an ordered collection of (id, vector, label, tokens) records
sharing one embedding dimension and one integer label set.  Two on-disk
formats are supported: JSONL (one object per line, diff-friendly) and a
versioned little-endian binary format (bit-exact, compact).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import seeds
from .clustering import ClusterAssignment

BINARY_MAGIC = b"SCIS"
BINARY_VERSION = 1

VECTOR_DTYPE = np.float32  # canonical storage dtype; computation may upcast


class DatasetError(ValueError):
    """Raised for malformed dataset files or invariant violations."""


@dataclass(frozen=True)
class EmbeddingRecord:
    """One sample: id, embedding vector, class label, optional token list."""

    id: str
    vector: np.ndarray
    label: int
    tokens: list[str] | None = None


@dataclass
class EmbeddingDataset:
    """Immutable embedding dataset with validated invariants.

    Vectors are stored as a contiguous (n, dim) float32 matrix; `labels` is
    the declared label set (at least two labels), `label_of` the per-record
    label array.  Record order is preserved everywhere.
    """

    dim: int
    labels: tuple[int, ...]
    ids: list[str]
    vectors: np.ndarray
    label_of: np.ndarray
    tokens: list[list[str] | None] | None = None

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=VECTOR_DTYPE)
        self.label_of = np.asarray(self.label_of, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise DatasetError(
                f"vectors must have shape (n, {self.dim}), got {self.vectors.shape}"
            )
        if len(self.ids) != self.vectors.shape[0] or len(self.label_of) != len(self.ids):
            raise DatasetError("ids, vectors and labels must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise DatasetError("record ids must be unique")
        if len(set(self.labels)) < 2:
            raise DatasetError("label set must contain at least 2 labels")
        if not np.isfinite(self.vectors).all():
            bad = int(np.argwhere(~np.isfinite(self.vectors).all(axis=1))[0][0])
            raise DatasetError(f"non-finite value in vector of record {self.ids[bad]!r}")
        label_set = set(int(y) for y in self.labels)
        stray = set(int(y) for y in self.label_of) - label_set
        if stray:
            raise DatasetError(f"labels outside the declared label set: {sorted(stray)}")
        if self.tokens is not None and len(self.tokens) != len(self.ids):
            raise DatasetError("tokens list must align with records")
        object.__setattr__(self, "labels", tuple(sorted(label_set)))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def record(self, i: int) -> EmbeddingRecord:
        toks = self.tokens[i] if self.tokens is not None else None
        return EmbeddingRecord(self.ids[i], self.vectors[i], int(self.label_of[i]), toks)

    def records(self):
        for i in range(len(self.ids)):
            yield self.record(i)

    @classmethod
    def from_records(
        cls, records: list[EmbeddingRecord], labels: tuple[int, ...] | None = None
    ) -> "EmbeddingDataset":
        if not records:
            raise DatasetError("empty dataset")
        dim = len(records[0].vector)
        for r in records:
            if len(r.vector) != dim:
                raise DatasetError(
                    f"dimension mismatch: record {r.id!r} has length {len(r.vector)}, expected {dim}"
                )
        vectors = np.stack([np.asarray(r.vector, dtype=VECTOR_DTYPE) for r in records])
        label_of = np.array([r.label for r in records], dtype=np.int64)
        if labels is None:
            labels = tuple(sorted(set(int(y) for y in label_of)))
        any_tokens = any(r.tokens is not None for r in records)
        tokens = [list(r.tokens) if r.tokens is not None else None for r in records] if any_tokens else None
        return cls(dim, labels, [r.id for r in records], vectors, label_of, tokens)


@dataclass(frozen=True)
class BlobSpec:
    """One synthetic cluster: sample count, label skew, noise scale, majority label."""

    size: int
    skew: float
    std: float
    majority_label: int | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a planted-bias dataset of Gaussian blobs.

    Each blob sits at a center drawn uniformly from [-center_scale,
    center_scale]^dim with isotropic Gaussian noise.  A point takes its blob's
    majority label with probability `skew` and a uniformly random other label
    otherwise, so skew 0.5 means a balanced blob and 1.0 a label-pure one.

    `label_signal` optionally adds a label-aligned offset (+/- signal along a
    fixed random unit direction) to every vector, planting a genuine,
    cluster-independent feature next to the cluster-position shortcut.  With
    the default 0.0 the blobs are exactly isotropic and labels carry no
    geometric trace beyond cluster membership.

    `max_center_cos` caps the pairwise cosine similarity between blob centers
    (rejection sampling), which controls how separable the blobs are for a
    cosine-based clustering; 1.0 disables the constraint.  `center_offset`
    shifts every center coordinate by a constant, moving the whole dataset
    into a cone the way encoder embeddings concentrate away from the origin;
    0.0 keeps the centered box [-center_scale, center_scale]^dim.
    """

    dim: int
    label_count: int
    blobs: tuple[BlobSpec, ...]
    center_scale: float = 1.0
    label_signal: float = 0.0
    max_center_cos: float = 1.0
    center_offset: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.label_count < 2 or not self.blobs:
            raise DatasetError("dim >= 1, label_count >= 2 and at least one blob required")
        for b in self.blobs:
            if b.size < 2:
                raise DatasetError("blob sizes must be >= 2")
            if not 0.5 <= b.skew <= 1.0:
                raise DatasetError("skew fraction must lie in [0.5, 1.0]")
            if b.majority_label is not None and not 0 <= b.majority_label < self.label_count:
                raise DatasetError("majority_label outside label range")


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train / in-distribution test / out-of-distribution test ids."""

    train_ids: tuple[str, ...]
    id_test_ids: tuple[str, ...]
    ood_test_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        groups = (set(self.train_ids), set(self.id_test_ids), set(self.ood_test_ids))
        total = sum(len(g) for g in groups)
        if len(groups[0] | groups[1] | groups[2]) != total:
            raise DatasetError("split id lists must be pairwise disjoint")


def generate_synthetic(spec: SyntheticSpec) -> tuple[EmbeddingDataset, ClusterAssignment]:
    """Sample a planted-bias dataset; returns (dataset, ground-truth assignment).

    Deterministic in spec.seed.  The ground truth maps each record to its
    generating blob.
    """
    rng = np.random.default_rng(seeds.derive(spec.seed, "synthetic"))
    centers = _draw_centers(
        rng, len(spec.blobs), spec.dim, spec.center_scale, spec.max_center_cos, spec.center_offset
    )
    signal_dir = rng.standard_normal(spec.dim)
    signal_dir /= np.linalg.norm(signal_dir)

    ids: list[str] = []
    vecs: list[np.ndarray] = []
    labels: list[int] = []
    truth: list[int] = []
    for b_idx, blob in enumerate(spec.blobs):
        majority = blob.majority_label if blob.majority_label is not None else b_idx % spec.label_count
        points = centers[b_idx] + blob.std * rng.standard_normal((blob.size, spec.dim))
        take_majority = rng.random(blob.size) < blob.skew
        others = [y for y in range(spec.label_count) if y != majority]
        alt = rng.integers(0, len(others), size=blob.size)
        for j in range(blob.size):
            y = majority if take_majority[j] else others[alt[j]]
            ids.append(f"b{b_idx}_{j}")
            vecs.append(points[j])
            labels.append(y)
            truth.append(b_idx)

    vectors = np.asarray(vecs, dtype=np.float64)
    labels_arr = np.asarray(labels, dtype=np.int64)
    if spec.label_signal:
        # map label index to a signed coefficient spread over [-1, 1]
        coeff = 2.0 * labels_arr / max(1, spec.label_count - 1) - 1.0
        vectors = vectors + spec.label_signal * coeff[:, None] * signal_dir[None, :]

    dataset = EmbeddingDataset(
        dim=spec.dim,
        labels=tuple(range(spec.label_count)),
        ids=ids,
        vectors=vectors.astype(VECTOR_DTYPE),
        label_of=labels_arr,
    )
    return dataset, ClusterAssignment(np.asarray(truth, dtype=np.int64), len(spec.blobs))


def _draw_centers(
    rng: np.random.Generator,
    count: int,
    dim: int,
    scale: float,
    max_cos: float,
    offset: float = 0.0,
) -> np.ndarray:
    centers = np.empty((count, dim))
    for i in range(count):
        for _ in range(10_000):
            c = offset + rng.uniform(-scale, scale, size=dim)
            if i == 0:
                break
            prev = centers[:i]
            cos = prev @ c / (np.linalg.norm(prev, axis=1) * np.linalg.norm(c))
            if cos.max() <= max_cos:
                break
        else:
            raise DatasetError(
                f"could not place {count} centers with pairwise cosine <= {max_cos}"
            )
        centers[i] = c
    return centers


def split_id_ood(
    dataset: EmbeddingDataset,
    imbalanced_members: np.ndarray,
    balanced_members: np.ndarray,
    id_test_size: int,
    seed: int,
) -> DatasetSplit:
    """Carve train / ID-test from the imbalanced group; OOD test = balanced group.

    The imbalanced group loses a random holdout of `id_test_size` samples to
    the ID test set; the remaining members form the train set.  Deterministic
    per seed.
    """
    imb = np.asarray(imbalanced_members, dtype=np.int64)
    bal = np.asarray(balanced_members, dtype=np.int64)
    if len(imb) == 0 or len(bal) == 0:
        raise DatasetError("both cluster groups must be non-empty")
    if id_test_size > len(imb):
        raise DatasetError(
            f"id_test_size {id_test_size} exceeds imbalanced-group size {len(imb)}"
        )
    if id_test_size == len(imb):
        raise DatasetError("id_test_size leaves an empty train set")
    rng = np.random.default_rng(seeds.derive(seed, "split"))
    holdout = rng.choice(len(imb), size=id_test_size, replace=False)
    mask = np.zeros(len(imb), dtype=bool)
    mask[holdout] = True
    ids = dataset.ids
    return DatasetSplit(
        train_ids=tuple(ids[i] for i in imb[~mask]),
        id_test_ids=tuple(ids[i] for i in imb[mask]),
        ood_test_ids=tuple(ids[i] for i in bal),
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_dataset(dataset: EmbeddingDataset, path: str, format: str = "jsonl") -> None:
    if format == "jsonl":
        _write_jsonl(dataset, path)
    elif format == "binary":
        _write_binary(dataset, path)
    else:
        raise DatasetError(f"unknown format {format!r}; expected 'jsonl' or 'binary'")


def read_dataset(path: str, format: str = "jsonl") -> EmbeddingDataset:
    if format == "jsonl":
        return _read_jsonl(path)
    if format == "binary":
        return _read_binary(path)
    raise DatasetError(f"unknown format {format!r}; expected 'jsonl' or 'binary'")


def _write_jsonl(dataset: EmbeddingDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in dataset.records():
            obj = {
                "id": rec.id,
                "vector": [float(x) for x in rec.vector],
                "label": rec.label,
            }
            if rec.tokens is not None:
                obj["tokens"] = rec.tokens
            fh.write(json.dumps(obj) + "\n")


def _read_jsonl(path: str) -> EmbeddingDataset:
    records: list[EmbeddingRecord] = []
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            try:
                rid = str(obj["id"])
                vector = np.asarray(obj["vector"], dtype=VECTOR_DTYPE)
                label = int(obj["label"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"line {lineno}: missing or malformed field ({exc})") from exc
            if vector.ndim != 1:
                raise DatasetError(f"line {lineno}: vector of record {rid!r} is not flat")
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise DatasetError(
                    f"line {lineno}: dimension mismatch for record {rid!r} "
                    f"(got {len(vector)}, expected {dim})"
                )
            if not np.isfinite(vector).all():
                raise DatasetError(f"line {lineno}: non-finite value in record {rid!r}")
            tokens = obj.get("tokens")
            if tokens is not None:
                tokens = [str(t) for t in tokens]
            records.append(EmbeddingRecord(rid, vector, label, tokens))
    if not records:
        raise DatasetError("empty dataset")
    return EmbeddingDataset.from_records(records)


def _write_binary(dataset: EmbeddingDataset, path: str) -> None:
    n, u = dataset.vectors.shape
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IQII", BINARY_VERSION, n, u, len(dataset.labels)))
        fh.write(np.asarray(dataset.labels, dtype="<i4").tobytes())
        fh.write(dataset.vectors.astype("<f4", copy=False).tobytes())
        fh.write(dataset.label_of.astype("<i4").tobytes())
        id_blob = "\n".join(dataset.ids).encode("utf-8")
        fh.write(struct.pack("<Q", len(id_blob)))
        fh.write(id_blob)


def _read_binary(path: str) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 + struct.calcsize("<IQII"):
        raise DatasetError("binary file truncated or empty")
    if raw[:4] != BINARY_MAGIC:
        raise DatasetError(f"bad magic bytes {raw[:4]!r}; not a dataset file")
    off = 4
    version, n, u, n_labels = struct.unpack_from("<IQII", raw, off)
    off += struct.calcsize("<IQII")
    if version != BINARY_VERSION:
        raise DatasetError(f"unsupported format version {version}")
    if n == 0:
        raise DatasetError("empty dataset")
    labels = np.frombuffer(raw, dtype="<i4", count=n_labels, offset=off)
    off += 4 * n_labels
    vectors = np.frombuffer(raw, dtype="<f4", count=n * u, offset=off).reshape(n, u)
    off += 4 * n * u
    label_of = np.frombuffer(raw, dtype="<i4", count=n, offset=off)
    off += 4 * n
    (id_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    ids = raw[off : off + id_len].decode("utf-8").split("\n")
    if len(ids) != n:
        raise DatasetError(f"id table holds {len(ids)} entries, expected {n}")
    return EmbeddingDataset(
        dim=int(u),
        labels=tuple(int(y) for y in labels),
        ids=ids,
        vectors=vectors.copy(),
        label_of=label_of.astype(np.int64),
    )
