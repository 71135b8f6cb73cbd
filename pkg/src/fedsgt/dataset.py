"""Synthetic federated datasets and CSV ingestion.

Feature vectors are Gaussian around one of ``classes`` well-separated means
(scaled basis vectors, unit noise). In Non-IID mode each client draws its
label proportions from a symmetric Dirichlet(alpha); IID mode uses uniform
proportions. Each client's samples are split into equal contiguous slices
after a per-client shuffle, so slices share the client's distribution.

Everything is reproducible from (spec, seed): generation uses dedicated
PCG64 substreams and never touches global RNG state.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TrainingError
from .grouping import SliceRef

_MEAN_SCALE = 3.0


@dataclass
class Dataset:
    """Per-client, per-slice training arrays plus a shared test split."""

    dim: int
    classes: int
    train_x: list[list[np.ndarray]]  # [client][slice] -> (n, dim)
    train_y: list[list[np.ndarray]]  # [client][slice] -> (n,)
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def client_count(self) -> int:
        return len(self.train_x)

    def slices_of(self, client: int) -> int:
        return len(self.train_x[client])

    def slice_data(self, ref: SliceRef) -> tuple[np.ndarray, np.ndarray]:
        return (self.train_x[ref.client_id][ref.slice_idx],
                self.train_y[ref.client_id][ref.slice_idx])

    def slice_catalog(self) -> list[tuple[SliceRef, int]]:
        """All slices with sample counts, in lexicographic order."""
        catalog = []
        for c in range(self.client_count):
            for s in range(self.slices_of(c)):
                catalog.append((SliceRef(c, s), len(self.train_y[c][s])))
        return catalog

    @property
    def total_samples(self) -> int:
        return sum(n for _, n in self.slice_catalog())

    def client_label_histogram(self, client: int) -> np.ndarray:
        labels = np.concatenate(self.train_y[client])
        return np.bincount(labels, minlength=self.classes)


def _class_means(dim: int, classes: int) -> np.ndarray:
    if classes > dim:
        raise ValueError(f"need classes <= dim for separated means "
                         f"({classes} > {dim})")
    means = np.zeros((classes, dim))
    means[np.arange(classes), np.arange(classes)] = _MEAN_SCALE
    return means


def synth_dataset(clients: int, samples_per_client: int, dim: int, classes: int,
                  alpha: float | None, seed: int, slices_per_client: int = 1,
                  test_samples: int = 500) -> Dataset:
    """Generate a synthetic federated dataset.

    alpha is the Dirichlet concentration for per-client label proportions;
    None selects IID (uniform) proportions. The test split is global and
    label-balanced. Slice sizes within a client differ by at most one sample.
    """
    if clients < 1 or samples_per_client < 1 or slices_per_client < 1:
        raise ValueError("clients, samples_per_client, slices_per_client must be >= 1")
    if samples_per_client < slices_per_client:
        raise ValueError(
            f"cannot cut {samples_per_client} samples into {slices_per_client} slices")
    if alpha is not None and alpha <= 0:
        raise ValueError(f"alpha must be positive or None, got {alpha}")
    means = _class_means(dim, classes)

    train_x: list[list[np.ndarray]] = []
    train_y: list[list[np.ndarray]] = []
    for c in range(clients):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, 0xDA7A, c))))
        if alpha is None:
            props = np.full(classes, 1.0 / classes)
        else:
            props = rng.dirichlet(np.full(classes, alpha))
        counts = rng.multinomial(samples_per_client, props)
        labels = np.repeat(np.arange(classes), counts)
        rng.shuffle(labels)
        feats = means[labels] + rng.standard_normal((samples_per_client, dim))
        xs, ys = [], []
        base, extra = divmod(samples_per_client, slices_per_client)
        cursor = 0
        for s in range(slices_per_client):
            take = base + (1 if s < extra else 0)
            xs.append(np.ascontiguousarray(feats[cursor:cursor + take]))
            ys.append(labels[cursor:cursor + take].copy())
            cursor += take
        train_x.append(xs)
        train_y.append(ys)

    test_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((seed, 0x7E57))))
    base, extra = divmod(test_samples, classes)
    test_counts = [base + (1 if j < extra else 0) for j in range(classes)]
    test_y = np.repeat(np.arange(classes), test_counts)
    test_rng.shuffle(test_y)
    test_x = means[test_y] + test_rng.standard_normal((test_samples, dim))

    return Dataset(dim=dim, classes=classes, train_x=train_x, train_y=train_y,
                   test_x=test_x, test_y=test_y)


# ---------------------------------------------------------------------------
# CSV ingestion: rows are `label,f0,f1,...`; a JSON manifest maps data rows
# (0-based, header excluded) to clients, slices, and the test split.
# ---------------------------------------------------------------------------


def save_csv_dataset(dataset: Dataset, csv_path: str | Path,
                     manifest_path: str | Path) -> None:
    csv_path = Path(csv_path)
    manifest_path = Path(manifest_path)
    rows_written = 0
    clients_doc = []
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(dataset.dim)])
        for c in range(dataset.client_count):
            slices_doc = []
            for s in range(dataset.slices_of(c)):
                x, y = dataset.train_x[c][s], dataset.train_y[c][s]
                start = rows_written
                for i in range(len(y)):
                    writer.writerow([int(y[i])] + [repr(float(v)) for v in x[i]])
                rows_written += len(y)
                slices_doc.append([start, rows_written])
            clients_doc.append({"client": c, "slices": slices_doc})
        test_start = rows_written
        for i in range(len(dataset.test_y)):
            writer.writerow([int(dataset.test_y[i])] +
                            [repr(float(v)) for v in dataset.test_x[i]])
            rows_written += 1
    manifest = {
        "format": "fedsgt-dataset",
        "version": 1,
        "dim": dataset.dim,
        "classes": dataset.classes,
        "clients": clients_doc,
        "test": [test_start, rows_written],
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")


def load_csv_dataset(csv_path: str | Path, manifest_path: str | Path) -> Dataset:
    """Load a dataset saved by save_csv_dataset. Structural problems in the
    csv or manifest raise TrainingError; missing files raise FileNotFoundError."""
    csv_path = Path(csv_path)
    manifest_path = Path(manifest_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"dataset csv not found: {csv_path}")
    if not manifest_path.exists():
        raise FileNotFoundError(f"dataset manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "fedsgt-dataset" or manifest.get("version") != 1:
        raise TrainingError("not a version-1 fedsgt dataset manifest")
    dim = int(manifest["dim"])
    classes = int(manifest["classes"])

    labels = []
    feats = []
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["label"] or len(header) != dim + 1:
            raise TrainingError(f"csv header must be label,f0..f{dim - 1}")
        for line, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise TrainingError(f"csv row {line}: expected {dim + 1} fields")
            try:
                labels.append(int(row[0]))
                feats.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise TrainingError(f"csv row {line}: {exc}") from exc
    all_y = np.asarray(labels, dtype=np.int64)
    all_x = np.asarray(feats, dtype=np.float64).reshape(len(labels), dim)
    if all_y.size and (all_y.min() < 0 or all_y.max() >= classes):
        raise TrainingError("csv labels outside [0, classes)")

    def rows(span):
        lo, hi = int(span[0]), int(span[1])
        if not (0 <= lo <= hi <= len(all_y)):
            raise TrainingError(f"manifest row span {span} out of bounds")
        return all_x[lo:hi], all_y[lo:hi]

    train_x: list[list[np.ndarray]] = []
    train_y: list[list[np.ndarray]] = []
    for entry in manifest["clients"]:
        xs, ys = [], []
        for span in entry["slices"]:
            x, y = rows(span)
            if len(y) == 0:
                raise TrainingError(f"empty slice in manifest for client {entry['client']}")
            xs.append(x)
            ys.append(y)
        train_x.append(xs)
        train_y.append(ys)
    test_x, test_y = rows(manifest["test"])
    return Dataset(dim=dim, classes=classes, train_x=train_x, train_y=train_y,
                   test_x=test_x, test_y=test_y)
