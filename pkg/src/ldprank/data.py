"""Synthetic ranking generators and strict-order file I/O.

Two generators are provided:

* :func:`mallows_sample` draws genuine rankings from a Mallows model by
  repeated insertion.
* :func:`pairwise_bernoulli_sample` draws every pair independently, agreeing
  with the ground truth with probability ``p_M``. Rows may be intransitive.
  This is the generative model the utility bound is stated for.

Dispersion follows the pairwise reading ``theta = 1 - q_M / p_M`` with
``p_M = 1 / (2 - theta)``. Under a Mallows model with spread ``phi`` the
odds of an adjacent ground-truth pair appearing in the right order are
exactly ``1 / phi`` (swapping the two changes the distance by one), so the
model matching ``p_M`` on adjacent pairs has ``phi = 1 - theta``.
"""

from __future__ import annotations

import csv
import enum
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError, FormatError, ParseError, ValidationError
from .ranking import PairwiseTable, Profile, Ranking, n_pairs, ranking_bits

DATA_DIR_ENV = "LDPRANK_DATA_DIR"
_NAME_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class MallowsParams:
    """Dispersion ``theta`` in ``[0, 1]`` around a ground-truth ranking."""

    theta: float
    ground_truth: Ranking

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not isinstance(self.ground_truth, Ranking):
            object.__setattr__(self, "ground_truth", Ranking(self.ground_truth))

    @classmethod
    def identity(cls, theta: float, m: int) -> "MallowsParams":
        return cls(theta, Ranking(range(m)))

    @classmethod
    def from_phi(cls, phi: float, ground_truth) -> "MallowsParams":
        """Use a raw Mallows spread ``phi`` (``P(s) ~ phi**distance``)."""
        if not 0.0 <= phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {phi}")
        return cls(1.0 - phi, ground_truth)

    @classmethod
    def from_permallows(cls, dispersion: float, ground_truth) -> "MallowsParams":
        """Exponential parametrization ``P(s) ~ exp(-dispersion * distance)``."""
        if dispersion < 0:
            raise ValueError(f"dispersion must be nonnegative, got {dispersion}")
        return cls.from_phi(math.exp(-dispersion), ground_truth)

    @property
    def m(self) -> int:
        return self.ground_truth.m

    @property
    def phi(self) -> float:
        return 1.0 - self.theta

    @property
    def pairwise_p(self) -> float:
        return 1.0 / (2.0 - self.theta)


def mallows_sample(params: MallowsParams, n: int, rng: np.random.Generator) -> Profile:
    """Draw ``n`` rankings with ``P(s)`` proportional to ``phi ** K(s, ground_truth)``.

    Repeated insertion: the ``i``-th ground-truth item is inserted at slot
    ``j`` of the partial list (0 = top) with probability proportional to
    ``phi ** (i - j)``, which creates exactly ``i - j`` inversions.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    m, phi = params.m, params.phi
    gt = params.ground_truth.order
    slots = np.empty((n, m), dtype=np.int64)
    for i in range(m):
        weights = phi ** np.arange(i, -1, -1, dtype=float)
        cdf = np.cumsum(weights)
        u = rng.random(n) * cdf[-1]
        slots[:, i] = np.minimum(np.searchsorted(cdf, u, side="right"), i)
    orders = np.empty((n, m), dtype=np.int64)
    for s, row in enumerate(slots.tolist()):
        ranking: list[int] = []
        for i, j in enumerate(row):
            ranking.insert(j, gt[i])
        orders[s] = ranking
    return Profile(orders)


def pairwise_bernoulli_sample(params: MallowsParams, n: int, rng: np.random.Generator) -> PairwiseTable:
    """Independent per-pair answers agreeing with the ground truth w.p. ``p_M``.

    The returned table uses canonical orientation (1 = prefers ``a_j``); use
    :func:`agreement_bits` to recover the agree/disagree draws.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    agree = (rng.random((n, n_pairs(params.m))) < params.pairwise_p).astype(np.int8)
    truth = ranking_bits(params.ground_truth)
    return PairwiseTable(params.m, np.where(truth == 1, agree, 1 - agree))


def agreement_bits(table: PairwiseTable, ground_truth: Ranking) -> np.ndarray:
    return (table.bits == ranking_bits(ground_truth)).astype(np.int8)


class Format(str, enum.Enum):
    PREFLIB_SOC = "soc"
    RANKING_CSV = "csv"

    @classmethod
    def parse(cls, value) -> "Format":
        if isinstance(value, cls):
            return value
        key = str(value).lower().lstrip(".")
        aliases = {"soc": cls.PREFLIB_SOC, "preflib_soc": cls.PREFLIB_SOC,
                   "csv": cls.RANKING_CSV, "ranking_csv": cls.RANKING_CSV}
        if key not in aliases:
            raise FormatError(f"unknown ranking file format {value!r}")
        return aliases[key]

    @classmethod
    def from_path(cls, path) -> "Format":
        return cls.parse(Path(path).suffix or "?")


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    profile: Profile
    alternative_names: tuple[str, ...]
    provenance: str = ""
    ground_truth: Ranking | None = field(default=None, compare=False)

    def __post_init__(self):
        names = tuple(self.alternative_names)
        if len(names) != self.profile.m or len(set(names)) != len(names):
            raise ValidationError("alternative names must be distinct, one per alternative")
        object.__setattr__(self, "alternative_names", names)

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def m(self) -> int:
        return self.profile.m


def _label_key(label: str):
    return (0, int(label), "") if label.lstrip("-").isdigit() else (1, 0, label)


def _read_soc(path: Path) -> tuple[list[list[str]], list[str], dict[str, str]]:
    declared_m = None
    names: dict[str, str] = {}
    rows: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta = line[1:].strip()
                key, _, value = meta.partition(":")
                key = key.strip().upper()
                if key == "NUMBER ALTERNATIVES":
                    try:
                        declared_m = int(value)
                    except ValueError:
                        raise ParseError(f"bad alternative count {value.strip()!r}", lineno) from None
                elif key.startswith("ALTERNATIVE NAME "):
                    names[key.removeprefix("ALTERNATIVE NAME ").strip()] = value.strip()
                continue
            count_text, sep, body = line.partition(":")
            if not sep:
                raise ParseError(f"expected 'count: alt,alt,...', got {line!r}", lineno)
            try:
                count = int(count_text)
            except ValueError:
                raise ParseError(f"bad multiplicity {count_text.strip()!r}", lineno) from None
            if count < 1:
                raise ParseError(f"multiplicity must be positive, got {count}", lineno)
            if "{" in body or "}" in body:
                raise ValidationError(f"line {lineno}: ties are not a strict order")
            tokens = [t.strip() for t in body.split(",")]
            if any(not t for t in tokens):
                raise ParseError(f"empty alternative in {body.strip()!r}", lineno)
            rows.extend([tokens] * count)
    labels = sorted(names, key=_label_key) if names else None
    if labels is None and declared_m is not None:
        labels = [str(i) for i in range(1, declared_m + 1)]
    if labels is None:
        labels = sorted({t for row in rows for t in row}, key=_label_key)
    if declared_m is not None and len(labels) != declared_m:
        raise ValidationError(f"{declared_m} alternatives declared, {len(labels)} named")
    return rows, labels, names


def _read_csv(path: Path) -> tuple[list[list[str]], list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file: missing header row", 1) from None
        for name in header:
            if not _NAME_RE.match(name):
                raise ParseError(f"invalid alternative name {name!r}", 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            row = [t.strip() for t in row]
            if not row or row == [""]:
                continue
            if any(not t for t in row):
                raise ParseError(f"empty alternative in row {row}", lineno)
            rows.append(row)
    return rows, header


def _to_profile(rows: list[list[str]], labels: list[str]) -> Profile:
    if not rows:
        raise ValidationError("no rankings found")
    index = {label: k for k, label in enumerate(labels)}
    m = len(labels)
    orders = np.empty((len(rows), m), dtype=np.int64)
    for r, row in enumerate(rows):
        unknown = [t for t in row if t not in index]
        if unknown:
            raise ValidationError(f"ranking {r}: unknown alternatives {unknown}")
        if len(row) != m or len(set(row)) != m:
            raise ValidationError(f"ranking {r} is not a complete strict order over {m} alternatives: {row}")
        orders[r] = [index[t] for t in row]
    return Profile(orders)


def load_strict_order(path, format=None, name: str | None = None) -> Dataset:
    """Load complete strict orders from a PrefLib SOC or ranking CSV file.

    Args:
        path: File to read.
        format: ``"soc"`` / ``"csv"`` (or a :class:`Format`); inferred from the
            suffix when omitted.
        name: Dataset name; defaults to the file stem.

    Raises:
        ParseError: malformed line (message carries the line number).
        ValidationError: a ranking is incomplete, tied or repeats an alternative.
        FormatError: unknown format.
        DatasetError: file missing or unreadable.
    """
    path = Path(path)
    fmt = Format.parse(format) if format is not None else Format.from_path(path)
    if not path.is_file():
        raise DatasetError(f"no such ranking file: {path}")
    if fmt is Format.PREFLIB_SOC:
        rows, labels, names = _read_soc(path)
        display = [names.get(label, label) for label in labels]
        if len(set(display)) != len(display):
            display = labels
    else:
        rows, labels = _read_csv(path)
        display = labels
    profile = _to_profile(rows, labels)
    return Dataset(name or path.stem, profile, tuple(display), provenance=f"{fmt.value}:{path}")


def write_strict_order(dataset: Dataset, path, format=None) -> Path:
    """Write a dataset so that :func:`load_strict_order` reproduces it exactly."""
    path = Path(path)
    fmt = Format.parse(format) if format is not None else Format.from_path(path)
    orders = dataset.profile.orders.tolist()
    if fmt is Format.RANKING_CSV:
        for name in dataset.alternative_names:
            if not _NAME_RE.match(name):
                raise ValidationError(f"name {name!r} cannot be written to ranking CSV")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(dataset.alternative_names)
            for row in orders:
                writer.writerow([dataset.alternative_names[a] for a in row])
        return path
    groups: list[tuple[int, list[int]]] = []
    for row in orders:
        if groups and groups[-1][1] == row:
            groups[-1] = (groups[-1][0] + 1, row)
        else:
            groups.append((1, row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# FILE NAME: {path.name}\n")
        fh.write("# DATA TYPE: soc\n")
        fh.write(f"# NUMBER ALTERNATIVES: {dataset.m}\n")
        fh.write(f"# NUMBER VOTERS: {dataset.n}\n")
        fh.write(f"# NUMBER UNIQUE ORDERS: {len({tuple(r) for r in orders})}\n")
        for k, name in enumerate(dataset.alternative_names, start=1):
            fh.write(f"# ALTERNATIVE NAME {k}: {name}\n")
        for count, row in groups:
            fh.write(f"{count}: {','.join(str(a + 1) for a in row)}\n")
    return path


@dataclass(frozen=True)
class KnownDataset:
    name: str
    n: int
    m: int
    fetch_hint: str


KNOWN_DATASETS = {
    "turkdots": KnownDataset(
        "turkdots", 795, 4,
        "Mechanical Turk 'dots' rankings (Mao, Procaccia & Chen 2013), available from PrefLib; "
        "save the complete-order file as turkdots.soc",
    ),
    "turkpuzzle": KnownDataset(
        "turkpuzzle", 793, 4,
        "Mechanical Turk 'puzzle' rankings (Mao, Procaccia & Chen 2013), available from PrefLib; "
        "save the complete-order file as turkpuzzle.soc",
    ),
    "sushi": KnownDataset(
        "sushi", 5000, 10,
        "SUSHI preference data set, 10 items / 5000 respondents (Kamishima 2003), available from "
        "PrefLib; save the complete-order file as sushi.soc",
    ),
}


def load_named(name: str, data_dir=None) -> Dataset:
    """Locate and load one of the real data sets by name.

    Files are looked up as ``<data_dir>/<name>.soc`` or ``.csv``; ``data_dir``
    defaults to ``$LDPRANK_DATA_DIR`` or ``./data``. Loaded shapes are checked
    against the published ``(n, m)``.
    """
    key = name.lower()
    if key not in KNOWN_DATASETS:
        raise DatasetError(f"unknown dataset {name!r}; known: {sorted(KNOWN_DATASETS)}")
    info = KNOWN_DATASETS[key]
    base = Path(data_dir or os.environ.get(DATA_DIR_ENV) or "data")
    for suffix in (".soc", ".csv"):
        candidate = base / f"{key}{suffix}"
        if candidate.is_file():
            dataset = load_strict_order(candidate, name=key)
            if (dataset.n, dataset.m) != (info.n, info.m):
                raise DatasetError(
                    f"{candidate}: expected n={info.n}, m={info.m}, got n={dataset.n}, m={dataset.m}"
                )
            return dataset
    raise DatasetError(f"dataset {key!r} not found under {base}. Fetch hint: {info.fetch_hint}")


def mallows_dataset(params: MallowsParams, n: int, rng: np.random.Generator, name: str | None = None) -> Dataset:
    profile = mallows_sample(params, n, rng)
    label = name or f"mallows(theta={params.theta:g},n={n},m={params.m})"
    return Dataset(label, profile, tuple(str(a) for a in range(params.m)),
                   provenance="synthetic", ground_truth=params.ground_truth)
