"""Experiment harness: metrics, repeated runs and parameter sweeps."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, MallowsParams, load_named, load_strict_order, mallows_dataset, pairwise_bernoulli_sample
from .errors import ConfigError, DimensionError, LdpRankError
from .mechanisms import PrivacyBudget
from .protocol import derive_rng, run_dp_kwiksort, run_kwiksort, run_ldp_kwiksort
from .ranking import CmpProfile, PairwiseTable, avg_kendall_tau, exact_cmp, n_pairs
from .theory import choose_k

SOLUTIONS = ("kwiksort", "dp", "ldp-rr", "ldp-lap")
PRIVATE_SOLUTIONS = ("dp", "ldp-rr", "ldp-lap")
CSV_COLUMNS = (
    "solution", "dataset", "n", "m", "theta", "epsilon", "K_resolved",
    "repeat_index", "error_rate", "avg_kt_norm", "wall_time_s", "seed",
)
METRICS = ("error_rate", "avg_kt_norm", "wall_time_s")
ERROR_RATE_NOTE = (
    "error_rate counts pairs whose exact and estimated margins have strictly "
    "opposite signs; pairs with a zero margin on either side are not errors"
)
_DATASET_KEY = 101
_REPEAT_KEY = 102


def error_rate(exact: CmpProfile, estimated: CmpProfile, count_zeros_as_half: bool = False) -> float:
    """Fraction of canonical pairs whose margins have strictly opposite signs.

    Args:
        exact: Comparison profile of the true data.
        estimated: Noisy or estimated profile over the same alternatives.
        count_zeros_as_half: Diagnostic reading that charges 1/2 for every pair
            where exactly one of the two margins is zero.
    """
    if exact.m != estimated.m:
        raise DimensionError(f"profiles over different m: {exact.m} vs {estimated.m}")
    total = n_pairs(exact.m)
    if total == 0:
        return 0.0
    a, b = np.sign(exact.upper()), np.sign(estimated.upper())
    wrong = np.count_nonzero(a * b < 0)
    if count_zeros_as_half:
        wrong += 0.5 * np.count_nonzero((a == 0) != (b == 0))
    return float(wrong / total)


@dataclass(frozen=True)
class DatasetSpec:
    """Where a configuration's data comes from.

    Textual forms: ``turkdots`` (a known real set), ``file:<path>``,
    ``mallows:theta=0.5,n=5000,m=10[,phi=0.5]`` and
    ``bernoulli:theta=0.5,n=5000,m=10``.
    """

    kind: str
    name: str = ""
    path: str = ""
    theta: float | None = None
    n: int | None = None
    m: int | None = None
    phi: float | None = None

    @classmethod
    def parse(cls, text: str) -> "DatasetSpec":
        text = text.strip()
        kind, sep, rest = text.partition(":")
        kind = kind.lower()
        if sep and kind == "file":
            return cls("file", path=rest)
        if sep and kind in ("mallows", "bernoulli"):
            fields = parse_keyvals(rest)
            unknown = set(fields) - {"theta", "n", "m", "phi"}
            if unknown:
                raise ConfigError(f"unknown {kind} parameters: {sorted(unknown)}")
            try:
                n, m = int(fields["n"]), int(fields["m"])
                phi = float(fields["phi"]) if "phi" in fields else None
                theta = float(fields["theta"]) if "theta" in fields else None
            except KeyError as exc:
                raise ConfigError(f"{kind} spec needs {exc.args[0]}=") from None
            except ValueError as exc:
                raise ConfigError(f"bad {kind} parameter: {exc}") from None
            if theta is None and phi is None:
                raise ConfigError(f"{kind} spec needs theta= or phi=")
            if phi is not None and kind == "bernoulli":
                raise ConfigError("phi= applies to mallows data only")
            if theta is None:
                theta = 1.0 - phi
            if n < 1 or m < 2 or not 0.0 <= theta <= 1.0:
                raise ConfigError(f"invalid {kind} parameters: theta={theta}, n={n}, m={m}")
            return cls(kind, theta=theta, n=n, m=m, phi=phi)
        if sep:
            raise ConfigError(f"unknown dataset kind {kind!r}")
        if text.endswith((".soc", ".csv")):
            return cls("file", path=text)
        return cls("named", name=text.lower())

    def label(self) -> str:
        if self.kind == "named":
            return self.name
        if self.kind == "file":
            return Path(self.path).stem
        extra = f",phi={self.phi:g}" if self.phi is not None else ""
        return f"{self.kind}(theta={self.theta:g},n={self.n},m={self.m}{extra})"

    def __str__(self) -> str:
        if self.kind == "named":
            return self.name
        if self.kind == "file":
            return f"file:{self.path}"
        extra = f",phi={self.phi:g}" if self.phi is not None else ""
        return f"{self.kind}:theta={self.theta:g},n={self.n},m={self.m}{extra}"

    def resolve(self, seed: int, data_dir=None) -> Dataset | PairwiseTable:
        if self.kind == "named":
            return load_named(self.name, data_dir)
        if self.kind == "file":
            return load_strict_order(self.path)
        rng = derive_rng(seed, _DATASET_KEY)
        if self.phi is not None:
            params = MallowsParams.from_phi(self.phi, range(self.m))
        else:
            params = MallowsParams.identity(self.theta, self.m)
        if self.kind == "mallows":
            return mallows_dataset(params, self.n, rng, name=self.label())
        return pairwise_bernoulli_sample(params, self.n, rng)


def parse_keyvals(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {part!r}")
        out[key.strip().lower()] = value.strip()
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    solution: str
    dataset: DatasetSpec
    epsilon: float | None = None
    queries: int | str | None = None
    repeats: int = 30
    seed: int = 0
    out: str | None = None
    data_dir: str | None = None
    count_zeros_as_half: bool = False
    timing: bool = True
    family: str = ""
    x: float | None = None

    def __post_init__(self):
        if isinstance(self.dataset, str):
            object.__setattr__(self, "dataset", DatasetSpec.parse(self.dataset))
        if self.solution not in SOLUTIONS:
            raise ConfigError(f"unknown solution {self.solution!r}; expected one of {SOLUTIONS}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.solution in PRIVATE_SOLUTIONS and (self.epsilon is None or not self.epsilon > 0):
            raise ConfigError(f"{self.solution} needs a positive epsilon, got {self.epsilon}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        q = self.queries
        if isinstance(q, str):
            q = q.strip().lower()
            if q.isdigit():
                q = int(q)
            elif q not in ("auto", "binom"):
                raise ConfigError(f"queries must be an integer, 'auto' or 'binom', got {self.queries!r}")
            object.__setattr__(self, "queries", q)
        if isinstance(q, int) and q < 1:
            raise ConfigError(f"queries must be positive, got {q}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def resolve_k(self, m: int) -> int:
        """Number of pair questions per agent for this configuration."""
        total = n_pairs(m)
        q = self.queries
        if self.solution in ("kwiksort", "dp"):
            if q not in (None, "binom", total):
                raise ConfigError(f"{self.solution} always uses all C(m,2)={total} pairs, got queries={q}")
            return total
        if q is None or q == "auto":
            return choose_k(self.epsilon, m, "rr" if self.solution == "ldp-rr" else "lap")
        if q == "binom":
            return total
        if q > total:
            raise ConfigError(f"queries={q} exceeds C({m},2)={total}")
        return q

    def repeat_seed(self, r: int) -> int:
        state = np.random.SeedSequence(self.seed, spawn_key=(_REPEAT_KEY, r)).generate_state(2, np.uint32)
        return int(state[0]) << 32 | int(state[1])


@dataclass
class RunResult:
    config: ExperimentConfig
    dataset_label: str
    n: int
    m: int
    k: int
    rows: list[dict] = field(default_factory=list)

    def column(self, metric: str) -> np.ndarray:
        values = [row[metric] for row in self.rows]
        if any(v is None for v in values):
            return np.array([])
        return np.array(values, dtype=float)

    def mean(self, metric: str) -> float | None:
        values = self.column(metric)
        return float(values.mean()) if values.size else None

    def std(self, metric: str) -> float | None:
        values = self.column(metric)
        if not values.size:
            return None
        return float(values.std(ddof=1)) if values.size > 1 else 0.0

    def csv_rows(self) -> list[dict]:
        cfg = self.config
        theta = cfg.dataset.theta if cfg.dataset.kind in ("mallows", "bernoulli") else None
        base = {
            "solution": cfg.solution,
            "dataset": self.dataset_label,
            "n": self.n,
            "m": self.m,
            "theta": theta,
            "epsilon": cfg.epsilon if cfg.solution in PRIVATE_SOLUTIONS else None,
            "K_resolved": self.k,
        }
        out = []
        for row in self.rows:
            out.append({**base, **row})
        for tag, fn in (("mean", self.mean), ("std", self.std)):
            summary = {**base, "repeat_index": tag, "seed": cfg.seed}
            for metric in METRICS:
                summary[metric] = fn(metric)
            out.append(summary)
        return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows: Iterable[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def write_header(fh) -> None:
    csv.writer(fh, lineterminator="\n").writerow(CSV_COLUMNS)


def _solve(solution: str, data, epsilon, k: int, seed: int):
    if solution == "kwiksort":
        return run_kwiksort(data, seed)
    if solution == "dp":
        return run_dp_kwiksort(data, epsilon, seed)
    mechanism = "rr" if solution == "ldp-rr" else "lap"
    return run_ldp_kwiksort(data, mechanism, PrivacyBudget(epsilon, k), seed)


def run_experiment(cfg: ExperimentConfig, data=None, write: bool = True) -> RunResult:
    """Run one configuration ``cfg.repeats`` times and collect both metrics.

    Args:
        cfg: The configuration.
        data: Pre-resolved dataset (skips resolution; used by sweeps and tests).
        write: Append rows to ``cfg.out`` when it is set.

    Raises:
        DatasetError: the dataset cannot be found or read.
        ConfigError: invalid solution / parameter combination.
    """
    if data is None:
        data = cfg.dataset.resolve(cfg.seed, cfg.data_dir)
    if isinstance(data, Dataset):
        label, source = data.name, data.profile
    else:
        label, source = cfg.dataset.label(), data
    table = source.pairwise_table()
    k = cfg.resolve_k(table.m)
    exact = exact_cmp(table) if cfg.solution in PRIVATE_SOLUTIONS else None
    result = RunResult(cfg, label, table.n, table.m, k)
    for r in range(cfg.repeats):
        seed = cfg.repeat_seed(r)
        start = time.perf_counter()
        ranking, estimated = _solve(cfg.solution, source, cfg.epsilon, k, seed)
        elapsed = time.perf_counter() - start
        result.rows.append({
            "repeat_index": r,
            "error_rate": (error_rate(exact, estimated, cfg.count_zeros_as_half)
                           if exact is not None else None),
            "avg_kt_norm": avg_kendall_tau(ranking, table, normalized=True),
            "wall_time_s": elapsed if cfg.timing else None,
            "seed": seed,
        })
    if write and cfg.out:
        append_result(result, cfg.out)
    return result


def append_result(result: RunResult, path) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        if new:
            write_header(fh)
        write_rows(result.csv_rows(), fh)
    write_metadata(path, [result.config])


def write_metadata(path, configs: Sequence[ExperimentConfig], failures=()) -> Path:
    meta_path = Path(str(path) + ".meta.json")
    payload = {
        "columns": list(CSV_COLUMNS),
        "notes": {
            "error_rate": ERROR_RATE_NOTE,
            "std": "sample standard deviation across repeats (ddof=1)",
            "wall_time_s": "protocol execution only (agents + curator); dataset loading excluded",
        },
        "configs": [_config_dict(c) for c in configs],
        "failures": [{"config_index": i, "error": msg} for i, msg in failures],
    }
    meta_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return meta_path


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["dataset"] = str(cfg.dataset)
    return d


@dataclass
class SweepResult:
    results: list[RunResult]
    failures: list[tuple[int, str]]
    path: Path | None = None
    plot_files: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_sweep(grid: Sequence[ExperimentConfig], out, plot_dir=None) -> SweepResult:
    """Run every configuration into one combined CSV plus per-family plot data.

    Failing configurations are skipped and listed in a ``#``-prefixed trailer
    of the CSV; the remaining ones still run.
    """
    if not grid:
        raise ConfigError("empty sweep grid")
    out = Path(out)
    cache: dict[tuple, object] = {}
    results, failures = [], []
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_header(fh)
        for i, cfg in enumerate(grid):
            try:
                key = (str(cfg.dataset), cfg.seed, cfg.data_dir)
                if key not in cache:
                    cache[key] = cfg.dataset.resolve(cfg.seed, cfg.data_dir)
                result = run_experiment(cfg, data=cache[key], write=False)
            except (LdpRankError, ValueError) as exc:
                failures.append((i, f"{type(exc).__name__}: {exc}"))
                continue
            results.append(result)
            write_rows(result.csv_rows(), fh)
        if failures:
            fh.write("# failures\n")
            for i, msg in failures:
                fh.write(f"# config {i}: {msg}\n")
    write_metadata(out, grid, failures)
    plot_files = write_plot_data(results, Path(plot_dir) if plot_dir else out.parent, out.stem)
    return SweepResult(results, failures, out, plot_files)


def series_label(result: RunResult) -> str:
    cfg = result.config
    parts = [cfg.solution, result.dataset_label]
    if cfg.family not in ("epsilon", "time") and cfg.solution in PRIVATE_SOLUTIONS:
        parts.append(f"eps={cfg.epsilon:g}")
    return " ".join(parts)


def write_plot_data(results: Sequence[RunResult], directory: Path, stem: str) -> list[Path]:
    """One ``x,series,mean,stddev`` file per (figure family, metric)."""
    by_family: dict[str, list[RunResult]] = {}
    for result in results:
        if result.config.family and result.config.x is not None:
            by_family.setdefault(result.config.family, []).append(result)
    written = []
    directory.mkdir(parents=True, exist_ok=True)
    for family, members in by_family.items():
        for metric in METRICS:
            rows = [(r.config.x, series_label(r), r.mean(metric), r.std(metric)) for r in members]
            rows = [row for row in rows if row[2] is not None]
            if not rows:
                continue
            path = directory / f"{stem}.{family}.{metric}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(("x", "series", "mean", "stddev"))
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
            written.append(path)
    return written


def preset_grid(name: str, repeats: int = 30, seed: int = 0, timing: bool = True) -> list[ExperimentConfig]:
    """Desk-scale versions of the query-count, budget, agent-count, dispersion and time sweeps."""
    common = dict(repeats=repeats, seed=seed, timing=timing)
    ldp = ("ldp-rr", "ldp-lap")
    grid: list[ExperimentConfig] = []
    if name == "k":
        m = 10
        for eps in (1.0, 2.0, 4.0, 10.0):
            for k in (1, 2, 3, 4, m + 1, n_pairs(m)):
                for sol in ldp:
                    grid.append(ExperimentConfig(sol, f"mallows:theta=0.5,n=5000,m={m}", eps, k,
                                                 family="k", x=k, **common))
    elif name == "epsilon":
        for eps in (0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0):
            for sol in SOLUTIONS:
                if sol == "kwiksort":
                    grid.append(ExperimentConfig(sol, "mallows:theta=0.5,n=5000,m=15", None, None,
                                                 family="epsilon", x=eps, **common))
                else:
                    grid.append(ExperimentConfig(sol, "mallows:theta=0.5,n=5000,m=15", eps, "auto"
                                                 if sol in ldp else None, family="epsilon", x=eps, **common))
    elif name == "n":
        for n in (100, 500, 1000, 2500, 5000, 10000):
            for sol in SOLUTIONS:
                eps = None if sol == "kwiksort" else 2.0
                grid.append(ExperimentConfig(sol, f"mallows:theta=0.5,n={n},m=15", eps,
                                             "auto" if sol in ldp else None, family="n", x=n, **common))
    elif name == "theta":
        for theta in (0.25, 0.5, 0.75):
            for sol in SOLUTIONS:
                eps = None if sol == "kwiksort" else 2.0
                grid.append(ExperimentConfig(sol, f"mallows:theta={theta},n=5000,m=15", eps,
                                             "auto" if sol in ldp else None, family="theta", x=theta, **common))
    elif name == "time":
        for m in (5, 10, 15, 30, 45):
            for sol in SOLUTIONS:
                eps = None if sol == "kwiksort" else 2.0
                grid.append(ExperimentConfig(sol, f"mallows:theta=0.5,n=5000,m={m}", eps,
                                             "auto" if sol in ldp else None, family="time", x=m, **common))
    else:
        raise ConfigError(f"unknown preset {name!r}; expected k, epsilon, n, theta or time")
    return grid


def load_grid(path) -> list[ExperimentConfig]:
    """Read a JSON list of configuration objects."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read grid file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid file is not valid JSON: {exc}") from None
    if not isinstance(raw, list) or not raw:
        raise ConfigError("grid file must hold a nonempty JSON list")
    return [ExperimentConfig.from_dict(item) for item in raw]
