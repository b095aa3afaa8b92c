"""Dataset ingestion, synthetic generation, normalization, splits, and prefix views.

Datasets are immutable collections of sparse feature rows with labels in
{-1, +1}, stored as a CSR matrix plus a label vector.  Growing nested
subsets S_m < S_n are realized as prefix views over a once-shuffled sample
order, so subset construction is O(1) and the nesting property holds by
construction.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit


class SparseTextError(ValueError):
    """Malformed sparse-text input; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    """One labelled example: 1-based strictly increasing indices, no stored zeros."""

    indices: np.ndarray  # 1-based feature indices, strictly increasing
    values: np.ndarray
    label: float


class Dataset:
    """Immutable ordered sample collection over a fixed feature dimension."""

    def __init__(self, x: sparse.csr_matrix, y: np.ndarray, name: str = "", dim: int | None = None):
        x = sparse.csr_matrix(x)
        x.sort_indices()
        y = np.asarray(y, dtype=np.float64)
        if x.shape[0] != y.shape[0]:
            raise ValueError("feature matrix and labels disagree on sample count")
        if y.size and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be exactly -1 or +1")
        if dim is not None and dim < x.shape[1]:
            raise ValueError(f"dim={dim} smaller than max feature index {x.shape[1]}")
        if dim is not None and dim != x.shape[1]:
            x = sparse.csr_matrix((x.data, x.indices, x.indptr), shape=(x.shape[0], dim))
        for arr in (x.data, x.indices, x.indptr, y):
            arr.setflags(write=False)
        self.x = x
        self.y = y
        self.name = name

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.n_samples

    def sample(self, i: int) -> Sample:
        lo, hi = self.x.indptr[i], self.x.indptr[i + 1]
        return Sample(self.x.indices[lo:hi] + 1, self.x.data[lo:hi], float(self.y[i]))

    def prefix(self, n: int) -> "DatasetView":
        return DatasetView(self, n)

    def full_view(self) -> "DatasetView":
        return DatasetView(self, self.n_samples)

    def row_norms(self) -> np.ndarray:
        sq = np.asarray(self.x.multiply(self.x).sum(axis=1)).ravel()
        return np.sqrt(sq)

    def to_sparse_text(self) -> str:
        out = io.StringIO()
        for i in range(self.n_samples):
            s = self.sample(i)
            fields = ["+1" if s.label > 0 else "-1"]
            fields.extend(f"{int(j)}:{v:.17g}" for j, v in zip(s.indices, s.values))
            out.write(" ".join(fields))
            out.write("\n")
        return out.getvalue()

    def __eq__(self, other) -> bool:
        # name is metadata; equality is over samples and dimension
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.n_samples == other.n_samples
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x.indptr, other.x.indptr)
            and np.array_equal(self.x.indices, other.x.indices)
            and np.array_equal(self.x.data, other.x.data)
        )

    def __repr__(self) -> str:
        return f"Dataset(name={self.name!r}, n={self.n_samples}, dim={self.dim})"


class DatasetView:
    """Read-only view of the first `count` samples of a dataset.

    Views over the same base with counts m <= n are nested: the first view's
    samples are a prefix of the second's.
    """

    def __init__(self, base: Dataset, count: int):
        if not 1 <= count <= base.n_samples:
            raise ValueError(f"view count {count} out of range [1, {base.n_samples}]")
        self.base = base
        self.count = count
        self._x: sparse.csr_matrix | None = None

    @property
    def x(self) -> sparse.csr_matrix:
        if self._x is None:
            b = self.base.x
            nnz = b.indptr[self.count]
            self._x = sparse.csr_matrix(
                (b.data[:nnz], b.indices[:nnz], b.indptr[: self.count + 1]),
                shape=(self.count, self.base.dim),
                copy=False,
            )
        return self._x

    @property
    def y(self) -> np.ndarray:
        return self.base.y[: self.count]

    @property
    def dim(self) -> int:
        return self.base.dim

    def sample_arrays(self, i: int):
        """(0-based indices, values, label) of sample i, no copies."""
        b = self.base.x
        lo, hi = b.indptr[i], b.indptr[i + 1]
        return b.indices[lo:hi], b.data[lo:hi], float(self.base.y[i])

    def __repr__(self) -> str:
        return f"DatasetView({self.base.name!r}, count={self.count})"


def parse_sparse_text(text, label_map: dict | None = None, dim: int | None = None,
                      name: str = "parsed") -> Dataset:
    """Parse SVMlight-style sparse text: `<label> <idx>:<val> ...` per line.

    Indices are 1-based and must be strictly increasing within a line.  `#`
    starts a comment running to end of line.  Raw labels are converted via
    `label_map` (keyed by the numeric raw label); without a map, labels must
    already be -1 or +1.  `dim` overrides the inferred dimensionality (the
    max index observed).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lmap = None
    if label_map is not None:
        lmap = {float(k): float(v) for k, v in label_map.items()}
        if not all(v in (-1.0, 1.0) for v in lmap.values()):
            raise ValueError("label_map must map onto {-1, +1}")

    data: list[float] = []
    indices: list[int] = []
    indptr: list[int] = [0]
    labels: list[float] = []
    max_idx = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            raw_label = float(fields[0])
        except ValueError:
            raise SparseTextError(line_no, f"invalid label {fields[0]!r}") from None
        if lmap is not None:
            if raw_label not in lmap:
                raise SparseTextError(line_no, f"unmapped raw label {fields[0]!r}")
            label = lmap[raw_label]
        else:
            if raw_label not in (-1.0, 1.0):
                raise SparseTextError(
                    line_no, f"label {fields[0]!r} is not -1/+1 and no label_map given")
            label = raw_label

        prev = 0
        for tok in fields[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise SparseTextError(line_no, f"invalid feature token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise SparseTextError(line_no, f"invalid feature token {tok!r}") from None
            if idx < 1:
                raise SparseTextError(line_no, f"feature index {idx} is not 1-based")
            if idx <= prev:
                raise SparseTextError(line_no, f"indices not strictly increasing at {idx}")
            prev = idx
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(data))
        labels.append(label)

    if not labels:
        raise EmptyDatasetError("no samples in input")
    use_dim = max_idx if dim is None else dim
    if use_dim < max_idx:
        raise ValueError(f"dim={use_dim} smaller than max feature index {max_idx}")
    x = sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(labels), max(use_dim, 1)),
    )
    return Dataset(x, np.asarray(labels), name=name)


def generate_synthetic(n: int, dim: int, sparsity: float = 1.0, seed: int = 0,
                       margin_scale: float = 2.5, feature_decay: float = 0.0,
                       name: str = "synthetic") -> tuple[Dataset, np.ndarray]:
    """Draw a ground-truth weight vector, features, and logistic-model labels.

    Samples are i.i.d.: each feature vector is standard normal with entries
    kept with probability `sparsity`, and labels follow
    P(y=+1|x) = sigmoid(w_true . x).  `feature_decay` > 0 scales feature j
    by (j+1)^-decay, giving the power-law column spread typical of text
    data.  w_true is scaled so the margin standard deviation is
    `margin_scale`: large enough for an informative classifier, small
    enough that label noise keeps the problem non-separable.  Fully
    deterministic in `seed`.
    """
    if n < 1 or dim < 1:
        raise ValueError(f"need n >= 1 and dim >= 1, got n={n}, dim={dim}")
    if not 0.0 < sparsity <= 1.0:
        raise ValueError(f"sparsity must be in (0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    col_scale = (np.arange(1, dim + 1)) ** -float(feature_decay)
    w_true = rng.standard_normal(dim)
    margin_sd = np.sqrt(sparsity * float(np.sum((w_true * col_scale) ** 2)))
    w_true *= margin_scale / margin_sd
    feats = rng.standard_normal((n, dim)) * col_scale
    if sparsity < 1.0:
        feats = np.where(rng.random((n, dim)) < sparsity, feats, 0.0)
    probs = expit(feats @ w_true)
    y = np.where(rng.random(n) < probs, 1.0, -1.0)
    return Dataset(sparse.csr_matrix(feats), y, name=name), w_true


def normalize(d: Dataset) -> Dataset:
    """Scale each sample to unit Euclidean norm; zero rows pass through unchanged."""
    if d.n_samples == 0:
        raise EmptyDatasetError("cannot normalize an empty dataset")
    norms = d.row_norms()
    scale = np.where(norms > 0.0, norms, 1.0)
    x = d.x.copy()
    per_entry = np.repeat(scale, np.diff(x.indptr))
    x.data = x.data / per_entry
    return Dataset(x, d.y, name=d.name)


def shuffle_and_split(d: Dataset, train_count: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Apply one seeded uniform permutation, then split into (train, test).

    Prefixes of the returned training set are exchangeable i.i.d. subsets,
    which is what the nested-subset growth scheme needs.
    """
    if not 1 <= train_count <= d.n_samples:
        raise ValueError(f"train_count {train_count} out of range [1, {d.n_samples}]")
    perm = np.random.default_rng(seed).permutation(d.n_samples)
    x = d.x[perm]
    y = d.y[perm]
    train = Dataset(x[:train_count], y[:train_count], name=f"{d.name}-train", dim=d.dim)
    test = Dataset(x[train_count:], y[train_count:], name=f"{d.name}-test", dim=d.dim)
    return train, test


def prefix(d: Dataset, n: int) -> DatasetView:
    """View of the first n samples; prefixes nest for increasing n."""
    return d.prefix(n)
