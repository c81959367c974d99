"""Client datasets: Dirichlet partitioning, synthetic domain-shift generators, CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

TASKS = ("classification", "regression", "binary")


@dataclass
class ClientDataset:
    features: np.ndarray
    labels: np.ndarray
    task: str = "classification"
    client_id: int = 0
    num_classes: Optional[int] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        n = self.features.shape[0]
        if n < 1:
            raise ValueError("a client dataset needs at least one sample")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"client {self.client_id}: non-finite features")
        if self.task == "regression":
            self.labels = np.asarray(self.labels, dtype=np.float64)
        else:
            self.labels = np.asarray(self.labels).astype(int)
            if self.task == "binary":
                self.num_classes = 2
            elif self.num_classes is None:
                self.num_classes = int(self.labels.max()) + 1
            if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
                raise ValueError(f"client {self.client_id}: label out of range")
        if self.labels.shape[0] != n:
            raise ValueError("features and labels differ in length")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def batch(self):
        return self.features, self.labels


@dataclass
class FederationSplit:
    in_federation: List[ClientDataset]
    out_of_federation: List[ClientDataset]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a = {d.client_id for d in self.in_federation}
        b = {d.client_id for d in self.out_of_federation}
        if a & b:
            raise ValueError(f"client ids in both IF and OOF sets: {sorted(a & b)}")


def largest_remainder(total: int, proportions) -> np.ndarray:
    """Integer counts summing to ``total`` that best match ``total * proportions``."""
    p = np.asarray(proportions, dtype=np.float64)
    quota = total * p / p.sum()
    counts = np.floor(quota).astype(int)
    short = total - counts.sum()
    # stable order keeps ties deterministic
    order = np.argsort(-(quota - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def dirichlet_indices(labels, n_clients: int, alpha: float = 0.1, seed=0) -> List[List[int]]:
    """Sample indices per client; each class is spread by Dirichlet(alpha) shares.

    Shares are rounded by largest remainder, so the output is an exact
    partition of ``range(len(labels))``. A client left empty takes one sample
    from the currently largest client.
    """
    labels = np.asarray(labels).astype(int)
    n = labels.shape[0]
    if n_clients < 1:
        raise ValueError("need at least one client")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if n_clients > n:
        raise ValueError(f"cannot split {n} samples over {n_clients} clients")
    rng = np.random.default_rng(seed)
    owned: List[List[int]] = [[] for _ in range(n_clients)]
    for c in range(int(labels.max()) + 1):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        counts = largest_remainder(idx.size, rng.dirichlet(np.full(n_clients, alpha)))
        for k, part in enumerate(np.split(idx, np.cumsum(counts)[:-1])):
            owned[k].extend(part.tolist())
    while True:
        sizes = [len(o) for o in owned]
        empty = [k for k, s in enumerate(sizes) if s == 0]
        if not empty:
            return owned
        donor = int(np.argmax(sizes))
        owned[empty[0]].append(owned[donor].pop())


def dirichlet_partition(features, labels, n_clients: int, alpha: float = 0.1,
                        seed=0) -> List[ClientDataset]:
    """Label-skewed client datasets built from :func:`dirichlet_indices`."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    num_classes = int(labels.max()) + 1
    owned = dirichlet_indices(labels, n_clients, alpha, seed)
    return [ClientDataset(features[o], labels[o], "classification", k, num_classes)
            for k, o in enumerate(owned)]


def class_means(num_classes: int, angle_degrees: float, radius: float = 1.0) -> np.ndarray:
    base = 2 * np.pi * np.arange(num_classes) / num_classes + np.deg2rad(angle_degrees)
    return radius * np.column_stack([np.cos(base), np.sin(base)])


def sample_rotated_domain(n: int, num_classes: int, angle_degrees: float, noise_sigma: float,
                          rng) -> tuple:
    """Balanced 2-D Gaussian classes whose means sit on the unit circle, rotated."""
    rng = np.random.default_rng(rng)
    y = rng.permutation(np.arange(n) % num_classes)
    x = class_means(num_classes, angle_degrees)[y] + noise_sigma * rng.standard_normal((n, 2))
    return x, y


def _split_domains(groups, holdout, metadata):
    holdout = range(len(groups))[holdout]
    inside = [d for i, g in enumerate(groups) if i != holdout for d in g]
    return FederationSplit(inside, list(groups[holdout]), metadata)


def make_rotated_domains(num_domains: int = 4, clients_per_domain: int = 5,
                         samples_per_client: int = 40, num_classes: int = 3,
                         rotation_step_degrees: float = 30.0, noise_sigma: float = 0.1,
                         seed=0, holdout: int = -1) -> FederationSplit:
    """Domains that differ by a rotation of the class-mean layout.

    Domain ``i`` rotates every class mean by ``i * rotation_step_degrees``;
    the ``holdout`` domain (the last by default) supplies the unseen clients.
    """
    if num_domains < 2:
        raise ValueError("need at least two domains")
    rng = np.random.default_rng(seed)
    groups = []
    for d in range(num_domains):
        angle = d * rotation_step_degrees
        group = []
        for j in range(clients_per_domain):
            x, y = sample_rotated_domain(samples_per_client, num_classes, angle, noise_sigma, rng)
            group.append(ClientDataset(x, y, "classification", d * clients_per_domain + j, num_classes))
        groups.append(group)
    meta = dict(generator="rotated_domains", num_domains=num_domains,
                clients_per_domain=clients_per_domain, samples_per_client=samples_per_client,
                num_classes=num_classes, rotation_step_degrees=rotation_step_degrees,
                noise_sigma=noise_sigma, seed=seed, holdout=holdout)
    return _split_domains(groups, holdout, meta)


def make_regional_regression(num_regions: int = 4, clients_per_region: int = 5,
                             series_len: int = 12, region_offset: float = 1.0, seed=0,
                             samples_per_client: int = 32, noise_sigma: float = 0.1,
                             holdout: int = -1) -> FederationSplit:
    """Seasonal series forecasting: predict the second half from the first.

    Each series is ``level + A sin(2 pi t / 12 + phase) + noise`` with random
    amplitude and phase; region ``r`` has level ``r * region_offset``.
    """
    if num_regions < 2:
        raise ValueError("need at least two regions")
    if series_len < 2 or series_len % 2:
        raise ValueError("series_len must be an even number >= 2")
    rng = np.random.default_rng(seed)
    half = series_len // 2
    t = np.arange(series_len)
    groups = []
    for r in range(num_regions):
        group = []
        for j in range(clients_per_region):
            amp = rng.uniform(0.5, 1.5, size=(samples_per_client, 1))
            phase = rng.uniform(0, 2 * np.pi, size=(samples_per_client, 1))
            series = (r * region_offset + amp * np.sin(2 * np.pi * t / 12 + phase)
                      + noise_sigma * rng.standard_normal((samples_per_client, series_len)))
            group.append(ClientDataset(series[:, :half], series[:, half:], "regression",
                                       r * clients_per_region + j))
        groups.append(group)
    meta = dict(generator="regional_regression", num_regions=num_regions,
                clients_per_region=clients_per_region, series_len=series_len,
                region_offset=region_offset, samples_per_client=samples_per_client,
                noise_sigma=noise_sigma, seed=seed, holdout=holdout)
    return _split_domains(groups, holdout, meta)


@dataclass(frozen=True)
class CsvSchema:
    feature_cols: Sequence[str]
    label_col: str
    client_col: str
    task: str = "classification"


def _sort_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def load_csv(path, schema: CsvSchema) -> List[ClientDataset]:
    """One dataset per distinct client value, ordered by client id.

    Client ids that parse as numbers sort numerically and become ints; other
    ids sort as strings and are replaced by their position.
    """
    path = Path(path)
    if schema.task not in TASKS:
        raise ValueError(f"unknown task {schema.task!r}; expected one of {TASKS}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        wanted = list(schema.feature_cols) + [schema.label_col, schema.client_col]
        for col in wanted:
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r}")
        pos = {h: i for i, h in enumerate(header)}
        feat_pos = [pos[c] for c in schema.feature_cols]
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x = [float(row[i]) for i in feat_pos]
                y = float(row[pos[schema.label_col]])
            except (ValueError, IndexError) as err:
                raise ValueError(f"{path}: row {lineno}: non-numeric or missing cell ({err})") from None
            key = row[pos[schema.client_col]].strip()
            rows.setdefault(key, ([], []))
            rows[key][0].append(x)
            rows[key][1].append(y)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    keys = sorted(rows, key=_sort_key)
    numeric = all(_sort_key(k)[0] == 0 for k in keys)
    num_classes = None
    if schema.task != "regression":
        num_classes = int(max(max(v[1]) for v in rows.values())) + 1
    out = []
    for i, key in enumerate(keys):
        cid = int(float(key)) if numeric and float(key).is_integer() else i
        x, y = rows[key]
        out.append(ClientDataset(np.array(x), np.array(y), schema.task, cid, num_classes))
    return out


def write_csv(datasets: Sequence[ClientDataset], path, label_col: str = "label",
              client_col: str = "client") -> CsvSchema:
    """Write datasets in the layout ``load_csv`` reads; single-output labels only.

    Floats are written with ``repr`` so a reload is bitwise identical.
    """
    d = datasets[0].features.shape[1]
    cols = [f"x{i}" for i in range(d)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + [label_col, client_col])
        for ds in datasets:
            if ds.labels.ndim != 1:
                raise ValueError("write_csv supports one label column")
            for xrow, y in zip(ds.features, ds.labels):
                w.writerow([repr(float(v)) for v in xrow] + [repr(y.item()), ds.client_id])
    return CsvSchema(cols, label_col, client_col, datasets[0].task)


def pooled(datasets: Sequence[ClientDataset]):
    return (np.concatenate([d.features for d in datasets]),
            np.concatenate([d.labels for d in datasets]))

