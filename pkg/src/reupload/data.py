"""Datasets: synthetic generators, worst-case shattering sets, CSV ingestion
and PCA reduction.

Labels are always 1 or 2. Class 1 is the class predicted when the readout
``p0`` is at or above the LDA threshold.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InvalidArgumentError,
    LabelError,
    PrecisionError,
    RankDeficiencyError,
)

TRAIN = "train"
TEST = "test"
MAX_WORST_CASE_N = 40


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        self.split = np.asarray(self.split, dtype=object).ravel()
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.split.shape != (n,):
            raise InvalidArgumentError("features, labels and split must have the same length")
        if not np.all(np.isfinite(self.features)):
            raise InvalidArgumentError("features must be finite")
        if not np.all(np.isin(self.labels, (1, 2))):
            raise LabelError("labels must be 1 or 2")
        if not all(s in (TRAIN, TEST) for s in self.split):
            raise InvalidArgumentError("split tags must be 'train' or 'test'")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def part(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == which
        return self.features[mask], self.labels[mask]

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.part(TRAIN)

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.part(TEST)

    def has_both_classes(self, which: str = TRAIN) -> bool:
        _, y = self.part(which)
        return bool(np.any(y == 1) and np.any(y == 2))


# ---------------------------------------------------------------------------
# splitting and normalisation


def stratified_split(labels, test_fraction: float, rng) -> np.ndarray:
    """Split tags with ``round(test_fraction * n_c)`` test rows per class."""
    labels = np.asarray(labels)
    split = np.full(labels.size, TRAIN, dtype=object)
    for c in (1, 2):
        idx = np.flatnonzero(labels == c)
        n_test = int(round(test_fraction * idx.size))
        split[rng.permutation(idx)[:n_test]] = TEST
    return split


def split_dataset(ds: Dataset, test_fraction: float, seed: int) -> Dataset:
    """Random (non-stratified) train/test split of all rows."""
    if not 0 <= test_fraction < 1:
        raise InvalidArgumentError("test_fraction must lie in [0, 1)")
    n = len(ds.labels)
    n_test = int(round(test_fraction * n))
    order = np.random.default_rng(seed).permutation(n)
    split = np.full(n, TRAIN, dtype=object)
    split[order[:n_test]] = TEST
    meta = dict(ds.meta, split={"test_fraction": test_fraction, "seed": seed, "n_train": n - n_test, "n_test": n_test})
    return Dataset(ds.features, ds.labels, split, meta)


def minmax_fit(features, split) -> tuple[np.ndarray, np.ndarray]:
    train = np.asarray(features)[np.asarray(split) == TRAIN]
    return train.min(axis=0), train.max(axis=0)


def minmax_apply(features, lo, hi) -> np.ndarray:
    """Affine map sending ``[lo, hi]`` onto ``[-1, 1]`` per column."""
    span = np.where(hi > lo, hi - lo, 1.0)
    return 2.0 * (np.asarray(features) - lo) / span - 1.0


def minmax_invert(normalized, lo, hi) -> np.ndarray:
    span = np.where(hi > lo, hi - lo, 1.0)
    return (np.asarray(normalized) + 1.0) * span / 2.0 + lo


def _finish_2d(raw, labels, rng, test_fraction, meta) -> Dataset:
    order = rng.permutation(len(labels))
    raw, labels = raw[order], labels[order]
    split = stratified_split(labels, test_fraction, rng)
    lo, hi = minmax_fit(raw, split)
    meta["normalization"] = {"lo": lo.tolist(), "hi": hi.tolist()}
    return Dataset(minmax_apply(raw, lo, hi), labels, split, meta)


# ---------------------------------------------------------------------------
# synthetic generators


def gen_circles(n: int = 500, factor: float = 0.6, noise_sd: float = 0.05, seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Two concentric circles: radius 1 is class 2, radius ``factor`` class 1.

    Angles are drawn uniformly, isotropic Gaussian noise is added, the split
    is stratified and features are min-max scaled to [-1, 1] using the
    training rows.
    """
    if n < 4:
        raise InvalidArgumentError("gen_circles needs n >= 4")
    rng = np.random.default_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    t_out = rng.uniform(0.0, 2 * np.pi, n_out)
    t_in = rng.uniform(0.0, 2 * np.pi, n_in)
    raw = np.concatenate([
        np.c_[np.cos(t_out), np.sin(t_out)],
        factor * np.c_[np.cos(t_in), np.sin(t_in)],
    ])
    raw = raw + rng.normal(0.0, noise_sd, raw.shape)
    labels = np.r_[np.full(n_out, 2), np.full(n_in, 1)]
    meta = {"generator": "circles", "n": n, "factor": factor, "noise_sd": noise_sd, "seed": seed, "test_fraction": test_fraction}
    return _finish_2d(raw, labels, rng, test_fraction, meta)


def gen_moons(n: int = 500, noise_sd: float = 0.1, seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Two interleaving half circles; the upper one is class 1."""
    if n < 4:
        raise InvalidArgumentError("gen_moons needs n >= 4")
    rng = np.random.default_rng(seed)
    n_up = n // 2
    n_low = n - n_up
    t_up = rng.uniform(0.0, np.pi, n_up)
    t_low = rng.uniform(0.0, np.pi, n_low)
    raw = np.concatenate([
        np.c_[np.cos(t_up), np.sin(t_up)],
        np.c_[1.0 - np.cos(t_low), 0.5 - np.sin(t_low)],
    ])
    raw = raw + rng.normal(0.0, noise_sd, raw.shape)
    labels = np.r_[np.full(n_up, 1), np.full(n_low, 2)]
    meta = {"generator": "moons", "n": n, "noise_sd": noise_sd, "seed": seed, "test_fraction": test_fraction}
    return _finish_2d(raw, labels, rng, test_fraction, meta)


_T_SHAPE = np.array([[1, 1, 1], [0, 1, 0]])
_L_SHAPE = np.array([[1, 0], [1, 0], [1, 1]])


def _orientations(shape: np.ndarray, mirror: bool) -> list[np.ndarray]:
    variants = [shape, np.fliplr(shape)] if mirror else [shape]
    seen = {}
    for v in variants:
        for r in range(4):
            rot = np.rot90(v, r)
            seen[(rot.shape, rot.tobytes())] = rot
    return list(seen.values())


def _placements(shape: np.ndarray) -> list[np.ndarray]:
    out = []
    h, w = shape.shape
    for i, j in itertools.product(range(3 - h + 1), range(3 - w + 1)):
        img = np.zeros((3, 3), dtype=int)
        img[i:i + h, j:j + w] = shape
        out.append(img.ravel())
    return out


def tetromino_patterns() -> tuple[np.ndarray, np.ndarray]:
    """Every noiseless 3x3 "T" (class 1) and "L" (class 2) image and its
    negative, in a fixed order. 8 T and 16 L placements, 48 images total."""
    patterns, labels = [], []
    for shape, mirror, label in ((_T_SHAPE, False, 1), (_L_SHAPE, True, 2)):
        imgs = {tuple(p) for o in _orientations(shape, mirror) for p in _placements(o)}
        for img in sorted(imgs):
            patterns.append(np.array(img, dtype=float))
            labels.append(label)
    patterns = np.array(patterns)
    labels = np.array(labels)
    return np.concatenate([patterns, 1.0 - patterns]), np.concatenate([labels, labels])


def gen_tetromino(n_train: int = 100, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Noisy training draws plus the full noiseless enumeration as test set.

    Training rows pick a pattern uniformly with replacement and add i.i.d.
    uniform pixel noise in ``[-noise, noise]``. Pixels are not rescaled.
    """
    if n_train < 1:
        raise InvalidArgumentError("n_train must be positive")
    rng = np.random.default_rng(seed)
    patterns, labels = tetromino_patterns()
    idx = rng.integers(0, len(patterns), n_train)
    train = patterns[idx] + rng.uniform(-noise, noise, (n_train, 9))
    features = np.concatenate([train, patterns])
    y = np.concatenate([labels[idx], labels])
    split = np.array([TRAIN] * n_train + [TEST] * len(patterns), dtype=object)
    meta = {"generator": "tetromino", "n_train": n_train, "n_test": len(patterns), "noise": noise, "seed": seed}
    return Dataset(features, y, split, meta)


# ---------------------------------------------------------------------------
# worst-case (shattering) sets for the single compressed gate
#
# Binary label y_k means the photon should leave in mode y_k, i.e.
# y_k = 1 iff cos(omega x_k) < 0 (p0 < 1/2). Dataset classes are 1 + y_k.


def worst_case_points(N: int, variant: str = "powers_of_two") -> np.ndarray:
    i = np.arange(N + 1, dtype=float)
    if variant == "powers_of_two":
        return 2.0 ** i
    if variant == "inverse_powers":
        return 2.0 ** (-i)
    raise InvalidArgumentError(f"unknown worst-case variant {variant!r}")


def _bits_to_int(bits) -> int:
    return int("".join(str(b) for b in bits) or "0", 2)


def powers_of_two_frequency(labels) -> float:
    """Frequency shattering ``X_k = 2^k`` under the cosine readout.

    Written as ``omega = 2 pi sum_i b_i / 2^i``. Then
    ``omega X_k / 2 pi mod 1 = 0.b_{k+1} b_{k+2} ...``, whose quadrant is
    fixed by the pair ``(b_{k+1}, b_{k+2})``: the cosine is negative iff the
    two bits differ. The bit string is therefore built with
    ``b_{k+2} = b_{k+1} xor y_k`` and a trailing guard bit keeps every phase
    strictly inside its quadrant.
    """
    y = [int(v) for v in labels]
    N = len(y) - 1
    bits = [0, 0]
    for yk in y:
        bits.append(bits[-1] ^ yk)
    if any(bits):
        bits.append(1)
    # bits[i] has weight 2^-i; bits[0] is an integer multiple of 2 pi
    num = _bits_to_int(bits[1:])
    return 2 * math.pi * num / 2 ** (len(bits) - 1) if num else 0.0


def literal_powers_of_two_frequency(labels) -> float:
    """``2 pi sum_i y_i / 2^i`` with the labels used directly as bits."""
    return 2 * math.pi * sum(int(v) / 2 ** i for i, v in enumerate(labels))


def inverse_powers_frequency(labels) -> float:
    """Frequency shattering ``x_j = 2^-j`` under the cosine readout.

    ``omega / 2 pi = sum_j b_j 2^(j-1) + 1/8`` puts
    ``0.b_j b_{j-1} ... b_0 0 1`` in the fractional part of
    ``omega x_j / 2 pi``; with ``b_j = b_{j-1} xor y_j`` (``b_{-1} = 0``)
    the quadrant encodes ``y_j``.
    """
    prev = 0
    num = 0.0
    for j, yj in enumerate(int(v) for v in labels):
        b = prev ^ yj
        num += b * 2.0 ** (j - 1)
        prev = b
    if num == 0.0:
        return 0.0
    return 2 * math.pi * (num + 0.125)


def compressed_labels(omega: float, points) -> np.ndarray:
    """Binary labels produced by the single compressed gate, simulated.

    Returns -1 where the readout sits on the decision boundary.
    """
    from .model import forward_compressed

    p0 = np.array([forward_compressed(omega, float(x)) for x in points])
    out = np.where(p0 < 0.5, 1, 0)
    out[np.abs(p0 - 0.5) < 1e-12] = -1
    return out


def gen_worst_case(N: int, labels, variant: str = "powers_of_two") -> tuple[Dataset, float]:
    """Points ``2^i`` (or ``2^-i``), ``i = 0..N``, and a frequency that makes
    the single compressed gate reproduce ``labels`` exactly.

    The frequency is checked by simulating the gate at every point; the bit
    convention and whether the plain ``2 pi sum y_i / 2^i`` rule would have
    worked are recorded in ``meta``.
    """
    if N < 0:
        raise InvalidArgumentError("N must be non-negative")
    if N > MAX_WORST_CASE_N:
        raise PrecisionError(f"N={N} exceeds the double-precision bound N <= {MAX_WORST_CASE_N}")
    y = np.asarray(labels, dtype=int).ravel()
    if y.size != N + 1 or not np.all(np.isin(y, (0, 1))):
        raise InvalidArgumentError(f"need N+1={N + 1} labels in {{0, 1}}")
    x = worst_case_points(N, variant)
    if variant == "powers_of_two":
        omega = powers_of_two_frequency(y)
        convention = "xor-pair: bits (b_{k+1}, b_{k+2}) of omega/2pi encode y_k, guard bit appended"
        literal = literal_powers_of_two_frequency(y)
        literal_ok = bool(np.array_equal(compressed_labels(literal, x), y))
    else:
        omega = inverse_powers_frequency(y)
        convention = "xor-pair: bits (b_j, b_{j-1}) of omega x_j/2pi encode y_j, guard 1/8"
        literal_ok = None
    realised = compressed_labels(omega, x)
    validated = bool(np.array_equal(realised, y))
    if not validated:
        raise PrecisionError(f"constructed frequency {omega!r} does not reproduce the labels")
    meta = {
        "generator": "worst_case",
        "variant": variant,
        "N": N,
        "labels": y.tolist(),
        "omega": omega,
        "convention": convention,
        "validated": validated,
        "literal_formula_valid": literal_ok,
        "single_class": bool(np.all(y == y[0])),
    }
    ds = Dataset(x[:, None], 1 + y, np.full(N + 1, TRAIN, dtype=object), meta)
    return ds, omega


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray
    proj_lo: np.ndarray
    proj_hi: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(features, k: int = 20) -> PcaModel:
    """Mean-centred PCA from the covariance eigendecomposition.

    Component signs are fixed so that each component's largest-magnitude
    entry is positive. Projection ranges of the fitted data are stored for
    rescaling to [-1, 1].
    """
    X = np.asarray(features, dtype=float)
    n, d = X.shape
    if k < 1 or k > d:
        raise InvalidArgumentError(f"k must lie in [1, {d}]")
    if n <= k:
        raise InvalidArgumentError(f"need more than k={k} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    rank = int(np.sum(evals > max(evals[0], 0.0) * d * np.finfo(float).eps * 10))
    if k > rank:
        raise RankDeficiencyError(f"requested k={k} components but data rank is {rank}")
    comps = evecs[:, :k].T.copy()
    pivots = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(k), pivots])[:, None]
    proj = Xc @ comps.T
    return PcaModel(mean, comps, np.clip(evals[:k], 0.0, None), proj.min(axis=0), proj.max(axis=0))


def apply_pca(model: PcaModel, features, rescale: bool = True) -> np.ndarray:
    proj = (np.asarray(features, dtype=float) - model.mean) @ model.components.T
    if rescale:
        proj = minmax_apply(proj, model.proj_lo, model.proj_hi)
    return proj


def inverse_pca(model: PcaModel, reduced, rescaled: bool = True) -> np.ndarray:
    reduced = np.asarray(reduced, dtype=float)
    if rescaled:
        reduced = minmax_invert(reduced, model.proj_lo, model.proj_hi)
    return reduced @ model.components + model.mean


def pca_pipeline(ds: Dataset, k: int = 20, test_fraction: float | None = 1 / 9, seed: int = 0) -> tuple[Dataset, PcaModel]:
    """Split (unless already split), fit PCA on the training rows, and
    project both parts. ``test_fraction=None`` keeps the existing split."""
    if test_fraction is not None:
        ds = split_dataset(ds, test_fraction, seed)
    train_X, _ = ds.train
    model = fit_pca(train_X, k)
    reduced = apply_pca(model, ds.features)
    meta = dict(ds.meta, pca={"k": k, "explained_variance": model.explained_variance.tolist()})
    return Dataset(reduced, ds.labels, ds.split, meta), model


# ---------------------------------------------------------------------------
# CSV


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_csv(path, label_column: str = "label", label_map: dict | None = None, split_column: str = "split") -> Dataset:
    """Read a numeric CSV with a header row.

    Every column other than ``label_column`` and ``split_column`` is a
    feature. Labels must be 1 or 2 unless ``label_map`` translates the raw
    strings. A ``split`` column, when present, supplies the split tags;
    otherwise every row is tagged train.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise FormatError(f"{path}: no column named {label_column!r} in header")
        li = header.index(label_column)
        si = header.index(split_column) if split_column in header else None
        fcols = [i for i in range(len(header)) if i not in (li, si)]
        if not fcols:
            raise FormatError(f"{path}: no feature columns")
        rows, labels, split = [], [], []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
            vals = []
            for c in fcols:
                try:
                    v = float(row[c])
                except ValueError:
                    raise FormatError(f"{path}: row {r}, column {header[c]!r}: cannot parse {row[c]!r}") from None
                if not math.isfinite(v):
                    raise FormatError(f"{path}: row {r}, column {header[c]!r}: non-finite value")
                vals.append(v)
            raw = row[li].strip()
            if label_map is not None:
                if raw not in label_map:
                    raise LabelError(f"{path}: row {r}: unknown label {raw!r}")
                lab = int(label_map[raw])
            else:
                try:
                    lab = float(raw)
                except ValueError:
                    raise LabelError(f"{path}: row {r}: unknown label {raw!r}") from None
                if lab not in (1.0, 2.0):
                    raise LabelError(f"{path}: row {r}: label {raw!r} is not 1 or 2")
                lab = int(lab)
            if lab not in (1, 2):
                raise LabelError(f"{path}: row {r}: mapped label {lab} is not 1 or 2")
            rows.append(vals)
            labels.append(lab)
            if si is not None:
                tag = row[si].strip()
                if tag not in (TRAIN, TEST):
                    raise FormatError(f"{path}: row {r}, column {split_column!r}: bad split tag {tag!r}")
                split.append(tag)
            else:
                split.append(TRAIN)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    meta = {"generator": "csv", "path": str(path), "sha256": _sha256(path), "label_column": label_column}
    return Dataset(np.array(rows), np.array(labels), np.array(split, dtype=object), meta)


def save_csv(ds: Dataset, path, write_meta: bool = True) -> Path:
    """Write ``x0..x{d-1},label,split`` rows plus a ``.meta.json`` sidecar."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(ds.n_features)] + ["label", "split"])
        for x, y, s in zip(ds.features, ds.labels, ds.split):
            w.writerow([repr(float(v)) for v in x] + [int(y), s])
    if write_meta:
        meta_path = path.with_suffix(".meta.json")
        meta_path.write_text(json.dumps(ds.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
