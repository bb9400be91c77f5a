"""Cause-effect pair datasets: loaders, direction randomization, synthesis."""

from __future__ import annotations

import csv
import enum
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DatasetError, InvalidConfig, InvalidLabels
from .features import VariableKind, VariablePair

logger = logging.getLogger(__name__)

CATEGORICAL_THRESHOLD = 20


class PairLabel(enum.Enum):
    CAUSAL = "causal"
    ANTICAUSAL = "anticausal"
    CONFOUNDED = "confounded"
    INDEPENDENT = "independent"

    def flipped(self) -> "PairLabel":
        if self is PairLabel.CAUSAL:
            return PairLabel.ANTICAUSAL
        if self is PairLabel.ANTICAUSAL:
            return PairLabel.CAUSAL
        return self


class DataSource(enum.Enum):
    CHALLENGE = "challenge"
    TUEBINGEN = "tuebingen"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class PairDataset:
    pairs: tuple[VariablePair, ...]
    labels: tuple[PairLabel, ...]
    source: DataSource
    skipped: int = 0
    skipped_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "labels", tuple(PairLabel(lab) for lab in self.labels))
        if len(self.pairs) != len(self.labels):
            raise DatasetError("pairs and labels differ in length")
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DatasetError("pair ids are not unique")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def subset(self, indices) -> "PairDataset":
        idx = [int(i) for i in indices]
        return PairDataset(
            tuple(self.pairs[i] for i in idx),
            tuple(self.labels[i] for i in idx),
            self.source,
            self.skipped,
            self.skipped_ids,
        )


def infer_kind(values: np.ndarray, threshold: int = CATEGORICAL_THRESHOLD) -> VariableKind:
    """Integer-coded columns with at most ``threshold`` distinct values are categorical."""
    values = np.asarray(values, dtype=float)
    if np.all(values == np.round(values)) and np.unique(values).size <= threshold:
        return VariableKind.CATEGORICAL
    return VariableKind.NUMERICAL


_TYPE_WORDS = {
    "numerical": VariableKind.NUMERICAL,
    "categorical": VariableKind.CATEGORICAL,
    "binary": VariableKind.CATEGORICAL,
}


def _parse_values(field_text: str, where: str) -> np.ndarray:
    try:
        arr = np.array([float(tok) for tok in field_text.split()], dtype=float)
    except ValueError as exc:
        raise DatasetError(f"{where}: {exc}") from None
    if arr.size < 2:
        raise DatasetError(f"{where}: fewer than two values")
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"{where}: non-finite value")
    return arr


def _target_label(target: str, details: str, where: str) -> PairLabel:
    try:
        t = int(float(target))
    except ValueError:
        raise DatasetError(f"{where}: bad target {target!r}") from None
    if t == 1:
        return PairLabel.CAUSAL
    if t == -1:
        return PairLabel.ANTICAUSAL
    if t != 0:
        raise DatasetError(f"{where}: target must be -1, 0 or 1, got {t}")
    d = details.strip().lower()
    # the original challenge codes details 1..4 as A->B, B->A, A-B, A|B
    if "indep" in d or d == "4" or "|" in d:
        return PairLabel.INDEPENDENT
    if "confound" in d or d == "3" or d == "a-b":
        return PairLabel.CONFOUNDED
    raise DatasetError(f"{where}: target 0 needs details naming confounded or independent, got {details!r}")


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if r]


def load_challenge(
    data_path,
    target_path,
    types_path=None,
    categorical_threshold: int = CATEGORICAL_THRESHOLD,
    source: DataSource = DataSource.CHALLENGE,
) -> PairDataset:
    """Load a cause-effect challenge split.

    ``data_path`` is a CSV with header ``SampleID,A,B`` whose A/B fields hold
    space-separated numbers; ``target_path`` is ``SampleID,Target,Details``.
    An optional ``types_path`` (``SampleID,A type,B type``) overrides the
    per-column kind inference.
    """
    data_path, target_path = Path(data_path), Path(target_path)
    _, data_rows = _read_csv(data_path)
    t_header, t_rows = _read_csv(target_path)
    has_details = len(t_header) >= 3

    targets: dict[str, tuple[str, str]] = {}
    for i, row in enumerate(t_rows, start=1):
        if len(row) < 2:
            raise DatasetError(f"{target_path}: malformed row {i}")
        targets[row[0].strip()] = (row[1], row[2] if has_details and len(row) > 2 else "")

    types: dict[str, tuple[VariableKind, VariableKind]] = {}
    if types_path is not None:
        _, ty_rows = _read_csv(Path(types_path))
        for i, row in enumerate(ty_rows, start=1):
            try:
                types[row[0].strip()] = (_TYPE_WORDS[row[1].strip().lower()], _TYPE_WORDS[row[2].strip().lower()])
            except (KeyError, IndexError):
                raise DatasetError(f"{types_path}: malformed row {i}") from None

    pairs, labels = [], []
    for i, row in enumerate(data_rows, start=1):
        where = f"{data_path}: row {i}"
        if len(row) != 3:
            raise DatasetError(f"{where}: expected 3 fields, got {len(row)}")
        sid = row[0].strip()
        a = _parse_values(row[1], where + " column A")
        b = _parse_values(row[2], where + " column B")
        if a.size != b.size:
            raise DatasetError(f"{where}: A and B lengths differ")
        if sid not in targets:
            raise DatasetError(f"{where}: SampleID {sid!r} has no target")
        label = _target_label(*targets.pop(sid), where=f"{target_path}: {sid}")
        if sid in types:
            ka, kb = types[sid]
        else:
            ka, kb = infer_kind(a, categorical_threshold), infer_kind(b, categorical_threshold)
        pairs.append(VariablePair(a, b, ka, kb, sid))
        labels.append(label)
    if targets:
        raise DatasetError(f"{target_path}: targets without data rows: {sorted(targets)[:5]}")
    return PairDataset(tuple(pairs), tuple(labels), source)


_PAIR_FILE = re.compile(r"pair(\d+)\.txt$")


def _read_matrix(path: Path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            try:
                rows.append([float(t) for t in toks])
            except ValueError:
                raise DatasetError(f"{path}:{line_no}: unparsable numeric cell") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise DatasetError(f"{path}: ragged or empty table")
    return np.array(rows, dtype=float)


def load_tuebingen(directory, meta_name: str = "pairmeta.txt") -> PairDataset:
    """Load Tuebingen pairs with x the cause column and y the effect column.

    The metadata table has one line per pair: ``id cause_first cause_last
    effect_first effect_last [weight]`` with 1-based column indices. Pairs
    whose cause or effect spans several columns are skipped and counted.
    Weights are ignored.
    """
    directory = Path(directory)
    meta_path = directory / meta_name
    if not meta_path.is_file():
        raise DatasetError(f"{meta_path}: metadata table not found")
    meta: dict[int, list[int]] = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            try:
                meta[int(toks[0])] = [int(float(t)) for t in toks[1:5]]
            except ValueError:
                raise DatasetError(f"{meta_path}:{line_no}: malformed metadata row") from None
            if len(meta[int(toks[0])]) != 4:
                raise DatasetError(f"{meta_path}:{line_no}: expected four column indices")

    files = sorted((int(m.group(1)), p) for p in directory.iterdir() if (m := _PAIR_FILE.match(p.name)))
    pairs, skipped = [], []
    for num, path in files:
        if num not in meta:
            raise DatasetError(f"{path}: no metadata row for pair {num}")
        c0, c1, e0, e1 = meta[num]
        pid = f"pair{num:04d}"
        if c0 != c1 or e0 != e1:
            skipped.append(pid)
            continue
        data = _read_matrix(path)
        if max(c0, e0) > data.shape[1]:
            raise DatasetError(f"{path}: metadata names column {max(c0, e0)} but file has {data.shape[1]}")
        pairs.append(VariablePair(data[:, c0 - 1], data[:, e0 - 1], VariableKind.NUMERICAL, VariableKind.NUMERICAL, pid))
    if skipped:
        logger.warning("skipped %d multivariate Tuebingen pairs: %s", len(skipped), ", ".join(skipped))
    return PairDataset(tuple(pairs), (PairLabel.CAUSAL,) * len(pairs), DataSource.TUEBINGEN, len(skipped), tuple(skipped))


def apply_swap_mask(ds: PairDataset, mask: Sequence[bool]) -> PairDataset:
    """Swap x and y (and flip the label) of every pair where ``mask`` is true."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(ds),):
        raise InvalidConfig("swap mask length does not match the dataset")
    bad = [lab for lab in ds.labels if lab not in (PairLabel.CAUSAL, PairLabel.ANTICAUSAL)]
    if bad:
        raise InvalidLabels(f"only causal/anticausal pairs can be reoriented, found {bad[0].value}")
    pairs = tuple(p.swap() if m else p for p, m in zip(ds.pairs, mask))
    labels = tuple(lab.flipped() if m else lab for lab, m in zip(ds.labels, mask))
    return PairDataset(pairs, labels, ds.source, ds.skipped, ds.skipped_ids)


def randomize_directions(ds: PairDataset, seed: int) -> PairDataset:
    """Independently reorient each pair with probability 1/2."""
    if any(lab not in (PairLabel.CAUSAL, PairLabel.ANTICAUSAL) for lab in ds.labels):
        raise InvalidLabels("randomize_directions needs causal/anticausal labels only")
    mask = np.random.default_rng(seed).random(len(ds)) < 0.5
    return apply_swap_mask(ds, mask)


# --- synthetic additive-noise pairs -------------------------------------------------

MECHANISMS = ("linear", "quadratic", "cubic", "sine", "saturating")
CAUSE_DISTS = ("gaussian", "uniform", "mixture")


def _draw_cause(rng: np.random.Generator, n: int) -> np.ndarray:
    dist = CAUSE_DISTS[rng.integers(len(CAUSE_DISTS))]
    if dist == "gaussian":
        x = rng.normal(size=n)
    elif dist == "uniform":
        x = rng.uniform(-1.7, 1.7, size=n)
    else:
        k = int(rng.integers(2, 5))
        centers = rng.normal(0.0, 2.0, size=k)
        scales = rng.uniform(0.2, 1.0, size=k)
        weights = rng.dirichlet(np.ones(k))
        comp = rng.choice(k, size=n, p=weights)
        x = rng.normal(centers[comp], scales[comp])
    return (x - x.mean()) / x.std()


def _draw_mechanism(rng: np.random.Generator):
    name = MECHANISMS[rng.integers(len(MECHANISMS))]
    a = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
    if name == "linear":
        return lambda x: a * x
    if name == "quadratic":
        c = rng.uniform(-1.0, 1.0)
        return lambda x: a * (x - c) ** 2
    if name == "cubic":
        b = rng.uniform(-1.0, 1.0)
        return lambda x: a * x**3 + b * x
    if name == "sine":
        w = rng.uniform(1.0, 3.0)
        p = rng.uniform(0, 2 * np.pi)
        return lambda x: a * np.sin(w * x + p)
    r = rng.uniform(0.5, 2.0)
    return lambda x: a * (1.0 - np.exp(-r * (x - x.min())))


def _noisy(rng: np.random.Generator, fx: np.ndarray) -> np.ndarray:
    scale = rng.uniform(0.1, 0.5) * (fx.std() or 1.0)
    return fx + rng.normal(0.0, scale, size=fx.size)


def _anm_pair(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = _draw_cause(rng, n)
    return x, _noisy(rng, _draw_mechanism(rng)(x))


def _confounded_pair(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    z = _draw_cause(rng, n)
    return _noisy(rng, _draw_mechanism(rng)(z)), _noisy(rng, _draw_mechanism(rng)(z))


def generate_synthetic_anm(n_pairs: int, n_samples: int, seed: int, classes: int = 2) -> PairDataset:
    """Additive-noise cause-effect pairs, ``y = f(x) + noise``.

    With ``classes=2`` the first half are causal and the rest anticausal
    (swapped) before a seeded shuffle. With ``classes=4`` the pairs are split
    into quarters: causal, anticausal, confounded (both variables driven by a
    latent cause) and independent.
    """
    if n_pairs < 1:
        raise InvalidConfig("n_pairs must be at least 1")
    if n_samples < 50:
        raise InvalidConfig("n_samples must be at least 50")
    if classes not in (2, 4):
        raise InvalidConfig("classes must be 2 or 4")
    root = np.random.SeedSequence(seed)
    order_rng = np.random.default_rng(root.spawn(1)[0])
    if classes == 2:
        kinds = [PairLabel.CAUSAL] * (n_pairs - n_pairs // 2) + [PairLabel.ANTICAUSAL] * (n_pairs // 2)
    else:
        kinds = [list(PairLabel)[i * 4 // n_pairs] for i in range(n_pairs)]
    kinds = [kinds[i] for i in order_rng.permutation(n_pairs)]

    pairs = []
    for i, (label, child) in enumerate(zip(kinds, root.spawn(n_pairs))):
        rng = np.random.default_rng(child)
        if label in (PairLabel.CAUSAL, PairLabel.ANTICAUSAL):
            x, y = _anm_pair(rng, n_samples)
            if label is PairLabel.ANTICAUSAL:
                x, y = y, x
        elif label is PairLabel.CONFOUNDED:
            x, y = _confounded_pair(rng, n_samples)
        else:
            x, y = _draw_cause(rng, n_samples), _draw_cause(rng, n_samples)
        pairs.append(VariablePair(x, y, VariableKind.NUMERICAL, VariableKind.NUMERICAL, f"synth{i:05d}"))
    return PairDataset(tuple(pairs), tuple(kinds), DataSource.SYNTHETIC)


_TARGETS = {
    PairLabel.CAUSAL: ("1", "1"),
    PairLabel.ANTICAUSAL: ("-1", "2"),
    PairLabel.CONFOUNDED: ("0", "confounded"),
    PairLabel.INDEPENDENT: ("0", "independent"),
}

CHALLENGE_FILES = {"pairs": "pairs.csv", "targets": "targets.csv", "types": "publicinfo.csv"}


def write_challenge(ds: PairDataset, directory) -> dict[str, Path]:
    """Write a dataset in challenge CSV format; values round-trip exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {k: directory / v for k, v in CHALLENGE_FILES.items()}

    def fmt(col):
        return " ".join(repr(float(v)) for v in col)

    with open(paths["pairs"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["SampleID", "A", "B"])
        for p in ds.pairs:
            w.writerow([p.id, fmt(p.x), fmt(p.y)])
    with open(paths["targets"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["SampleID", "Target", "Details"])
        for p, lab in zip(ds.pairs, ds.labels):
            w.writerow([p.id, *_TARGETS[lab]])
    with open(paths["types"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["SampleID", "A type", "B type"])
        for p in ds.pairs:
            w.writerow([p.id, p.x_kind.value.capitalize(), p.y_kind.value.capitalize()])
    return paths


def load_challenge_dir(directory, source: DataSource = DataSource.CHALLENGE, **kwargs) -> PairDataset:
    """Load ``pairs.csv``/``targets.csv`` (and ``publicinfo.csv`` if present) from a directory."""
    directory = Path(directory)
    types = directory / CHALLENGE_FILES["types"]
    return load_challenge(
        directory / CHALLENGE_FILES["pairs"],
        directory / CHALLENGE_FILES["targets"],
        types if types.is_file() else None,
        source=source,
        **kwargs,
    )
