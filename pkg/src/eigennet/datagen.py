"""Synthetic correlated-feature classification data and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .linalg_eigen import Dataset

__all__ = [
    "FixedValue",
    "RandomSameSign",
    "Group",
    "SynthSpec",
    "group_indices",
    "generate_correlated",
    "generate_independent",
    "load_csv",
    "save_csv",
    "split",
    "CSVFormatError",
]


class CSVFormatError(ValidationError):
    pass


@dataclass(frozen=True)
class FixedValue:
    """Every weight in the group equals ``value``."""

    value: float = 5.0

    def draw(self, size, rng):
        return np.full(size, float(self.value))


@dataclass(frozen=True)
class RandomSameSign:
    """Magnitudes uniform on ``[low, high]``, all carrying ``sign``."""

    sign: int = 1
    low: float = 1.0
    high: float = 5.0

    def draw(self, size, rng):
        return math.copysign(1.0, self.sign) * rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class Group:
    size: int
    correlation: float
    weight_rule: object = field(default_factory=FixedValue)


def _fixed_groups():
    return (Group(4, 0.81, FixedValue(5.0)), Group(4, 0.81, FixedValue(-5.0)))


@dataclass(frozen=True)
class SynthSpec:
    """Layout of a synthetic problem.

    Groups occupy the leading columns in order; the remaining features are
    independent noise with zero weight.
    """

    p: int = 40
    groups: tuple = field(default_factory=_fixed_groups)
    n_train: int = 80
    n_test: int = 2000
    seed: int = 0
    labels: str = "logistic"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.p < 1:
            raise ValidationError("p must be positive")
        if sum(g.size for g in self.groups) > self.p:
            raise ValidationError("group sizes exceed the number of features")
        for g in self.groups:
            if g.size < 1:
                raise ValidationError("group size must be positive")
            if not 0.0 <= g.correlation < 1.0:
                raise ValidationError(f"correlation {g.correlation} outside [0, 1)")
        if self.n_train < 1 or self.n_test < 1:
            raise ValidationError("n_train and n_test must be >= 1")
        if self.labels not in ("logistic", "sign"):
            raise ValidationError("labels must be 'logistic' or 'sign'")

    @classmethod
    def random_weights(cls, **kw) -> "SynthSpec":
        """Two correlated groups with same-sign random weights (+ then -)."""
        kw.setdefault("groups", (Group(4, 0.81, RandomSameSign(1)), Group(4, 0.81, RandomSameSign(-1))))
        return cls(**kw)


def group_indices(spec: SynthSpec) -> list:
    out, start = [], 0
    for g in spec.groups:
        out.append(np.arange(start, start + g.size))
        start += g.size
    return out


def _features(spec: SynthSpec, n: int, rng) -> np.ndarray:
    X = rng.standard_normal((n, spec.p))
    for g, idx in zip(spec.groups, group_indices(spec)):
        if g.correlation > 0:
            shared = rng.standard_normal((n, 1))
            X[:, idx] = math.sqrt(g.correlation) * shared + math.sqrt(1.0 - g.correlation) * X[:, idx]
    return X


def _labels(X, w, b, mode, rng):
    score = X @ w + b
    if mode == "sign":
        return np.where(score >= 0, 1.0, -1.0)
    prob = 1.0 / (1.0 + np.exp(-score))
    return np.where(rng.random(X.shape[0]) < prob, 1.0, -1.0)


def generate_correlated(spec: SynthSpec):
    """Draw ``(train, test, true_w, true_b)``.

    Within a group ``x = sqrt(rho) g + sqrt(1 - rho) e`` with a shared
    ``g``, giving unit variances and pairwise correlation ``rho``.  Labels are
    Bernoulli draws from the logistic model (or noiseless signs when
    ``spec.labels == "sign"``).
    """
    rng = np.random.default_rng(spec.seed)
    w = np.zeros(spec.p)
    for g, idx in zip(spec.groups, group_indices(spec)):
        w[idx] = g.weight_rule.draw(g.size, rng)
    b = float(rng.standard_normal())
    X = _features(spec, spec.n_train + spec.n_test, rng)
    y = _labels(X, w, b, spec.labels, rng)
    n = spec.n_train
    return Dataset(X[:n], y[:n]), Dataset(X[n:], y[n:]), w, b


def generate_independent(spec: SynthSpec):
    """Same as :func:`generate_correlated` with every group correlation set to 0."""
    groups = tuple(replace(g, correlation=0.0) for g in spec.groups)
    return generate_correlated(replace(spec, groups=groups))


def _parse_label(raw, label_map, where):
    if label_map is not None:
        if raw not in label_map:
            raise CSVFormatError(f"{where}: unmapped label {raw!r}")
        val = float(label_map[raw])
    else:
        try:
            val = float(raw)
        except ValueError:
            raise CSVFormatError(f"{where}: unmapped label {raw!r}") from None
    if val not in (-1.0, 1.0):
        raise CSVFormatError(f"{where}: label {raw!r} does not map to -1 or +1")
    return val


def _is_number(cell) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1, label_map=None, header=None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    ``label_column`` is a column index (negative counts from the end) or a
    header name.  ``header=None`` treats the first row as a header when the
    label column is given by name or when none of its cells is numeric.
    Errors name the offending row and column (1-based rows as they appear in
    the file).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header is None:
        header = isinstance(label_column, str) or bool(rows and not any(_is_number(c) for c in rows[0]))
    if header:
        if not rows:
            raise CSVFormatError(f"{path}: empty file")
        names, rows, first = [c.strip() for c in rows[0]], rows[1:], 2
    else:
        names, first = None, 1
    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    width = len(rows[0]) if names is None else len(names)
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise CSVFormatError(f"{path}: no column named {label_column!r}")
        li = names.index(label_column)
    else:
        li = int(label_column)
        if not -width <= li < width:
            raise CSVFormatError(f"{path}: label column {li} out of range for {width} columns")
        li %= width

    feats, labels = [], []
    for r, row in enumerate(rows, start=first):
        if len(row) != width:
            raise CSVFormatError(f"row {r}: expected {width} columns, found {len(row)}")
        vals = []
        for c, cell in enumerate(row):
            if c == li:
                continue
            name = names[c] if names else str(c)
            try:
                v = float(cell)
            except ValueError:
                raise CSVFormatError(f"row {r}, column {name}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise CSVFormatError(f"row {r}, column {name}: non-finite value {cell!r}")
            vals.append(v)
        labels.append(_parse_label(row[li].strip(), label_map, f"row {r}, column {names[li] if names else li}"))
        feats.append(vals)
    return Dataset(np.array(feats, dtype=float).reshape(len(feats), width - 1), np.array(labels))


def save_csv(data: Dataset, path, header: bool = True) -> None:
    """Write features then a final ``label`` column, 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        if header:
            wr.writerow([f"x{j}" for j in range(data.p)] + ["label"])
        for x, y in zip(data.features, data.labels):
            wr.writerow([f"{v:.17g}" for v in x] + [str(int(y))])


def split(data: Dataset, n_train: int, seed=None):
    """Uniformly random train/test partition with ``n_train`` training rows."""
    n = data.n
    if not 1 <= n_train < n:
        raise ValidationError(f"n_train must satisfy 1 <= n_train < n={n}, got {n_train}")
    perm = np.random.default_rng(seed).permutation(n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))
