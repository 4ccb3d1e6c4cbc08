"""Monte Carlo experiments over the density model, with exact cross-checks.

Every trial draws its relators from a seed derived as
``mix_seed(seed, L, trial)`` (splitmix64 folding, see
:func:`randfa.words.mix_seed`), so outcomes do not depend on how trials are
spread over worker threads.

The exact probabilities assume relators are drawn independently *with
replacement*: a relator set of size ``N`` misses a language containing
``m`` of the ``M`` admissible words with probability ``(1 - m/M)^N``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .automata import (
    BAutomaton,
    automaton_from_json,
    automaton_to_json,
    count_cyclically_reduced_words,
    count_reduced_words,
    random_large_automaton,
)
from .blocks import BlockAlphabet, BlockEncodedPresentation, associated_presentation
from .certificate import (
    CYCLIC_EPS,
    DEFAULT_BUDGET,
    CertificateVerdict,
    Status,
    fa_certificate,
    fa_certificate_cyclic,
)
from .words import (
    ModelParams,
    Presentation,
    as_fraction,
    count_cyclically_reduced,
    count_reduced,
    mix_seed,
    relator_count,
    sample_words,
)

CSV_COLUMNS = ("experiment", "L", "trial", "derived_seed", "outcome", "detail", "wall_ms")
EXPERIMENTS = ("intersect", "certify")


class ExperimentError(ValueError):
    pass


def derived_seed(seed: int, L: int, trial: int) -> int:
    return mix_seed(seed, L, trial)


@dataclass
class ExperimentConfig:
    experiment: str
    n: int
    d: Fraction
    L_values: list[int]
    trials: int
    seed: int = 0
    model: str = "reduced"
    B: int | None = None
    lam: Fraction = Fraction(1, 3)
    budget: int = DEFAULT_BUDGET
    output_path: str | None = None
    threads: int = 1
    automaton: dict | None = None
    record_timing: bool = False

    def __post_init__(self):
        self.d = as_fraction(self.d)
        self.lam = as_fraction(self.lam)
        if self.experiment not in EXPERIMENTS:
            raise ExperimentError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if not self.L_values:
            raise ExperimentError("L_values must not be empty")
        if self.experiment == "certify" and not self.B:
            raise ExperimentError("certificate experiments need a block length B")
        for L in self.L_values:
            ModelParams(self.n, self.d, L, self.model)

    @property
    def cyclic(self) -> bool:
        return self.model == "cyclically_reduced"

    def to_json(self) -> dict:
        out = asdict(self)
        out["d"] = str(self.d)
        out["lambda"] = str(out.pop("lam"))
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = cls.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise ExperimentError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    L: int
    trial: int
    derived_seed: int
    outcome: str
    detail: str = ""
    wall_ms: int = 0

    def row(self) -> list:
        return [self.experiment, self.L, self.trial, self.derived_seed, self.outcome, self.detail, self.wall_ms]


# -- exact probabilities


def miss_probability(m: int, N: int, relators: int) -> float:
    """``(1 - m/N)^relators`` in floating point."""
    if m >= N:
        return 0.0 if relators else 1.0
    return math.exp(relators * math.log1p(-m / N))


def miss_probability_exact(m: int, N: int, relators: int) -> Fraction:
    return (1 - Fraction(m, N)) ** relators


def language_share(a: BAutomaton, n: int, L: int, model: str) -> tuple[int, int]:
    """``(m_L, N_L)``: admissible words of length ``L`` in the language, and all of them."""
    if model == "cyclically_reduced":
        return count_cyclically_reduced_words(a, L), count_cyclically_reduced(n, L)
    return count_reduced_words(a, L), count_reduced(n, L)


def exact_intersection_probability(a: BAutomaton, n: int, d, L: int, model: str = "reduced") -> float:
    m, N = language_share(a, n, L, model)
    return 1.0 - miss_probability(m, N, relator_count(n, d, L))


# -- trials


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, int(round((time.perf_counter() - t0) * 1000))


def _accept_table(a: BAutomaton) -> tuple[np.ndarray, np.ndarray]:
    m = 2 * a.n
    start = np.array([(a.sigma_empty >> x) & 1 for x in range(m)], dtype=bool)
    step = np.array([[(a.sigma[s] >> t) & 1 for t in range(m)] for s in range(m)], dtype=bool)
    return start, step


def _intersect_trial(cfg: ExperimentConfig, tables, L: int, count: int, trial: int) -> TrialRecord:
    seed = derived_seed(cfg.seed, L, trial)

    def work():
        words = sample_words(cfg.n, L, cfg.model, seed, count)
        start, step = tables
        ok = start[words[:, 0]]
        for i in range(L - 1):
            ok &= step[words[:, i], words[:, i + 1]]
        return ok

    ok, ms = _timed(work)
    hits = np.nonzero(ok)[0]
    outcome = "hit" if len(hits) else "miss"
    detail = str(int(hits[0])) if len(hits) else ""
    return TrialRecord("intersect", L, trial, seed, outcome, detail, ms if cfg.record_timing else 0)


def sample_presentation(cfg: ExperimentConfig, L: int, trial: int) -> Presentation:
    params = ModelParams(cfg.n, cfg.d, L, cfg.model)
    words = sample_words(cfg.n, L, cfg.model, derived_seed(cfg.seed, L, trial), params.relator_count)
    return Presentation(cfg.n, tuple(map(tuple, words.tolist())))


def _certify_trial(cfg: ExperimentConfig, ba: BlockAlphabet, L: int, trial: int) -> TrialRecord:
    seed = derived_seed(cfg.seed, L, trial)

    def work():
        encoded = associated_presentation(sample_presentation(cfg, L, trial), ba)
        if cfg.cyclic:
            verdict = fa_certificate_cyclic(encoded.presentation, cfg.budget)
        else:
            verdict = fa_certificate(encoded.presentation, cfg.budget)
        return encoded, verdict

    (encoded, verdict), ms = _timed(work)
    detail = f"P={encoded.P};relators_hat={len(encoded.relators_hat)};pairs={len(encoded.pairing_log)};nodes={verdict.budget_spent}"
    return TrialRecord("certify", L, trial, seed, verdict.status.value, detail, ms if cfg.record_timing else 0)


def _run_trials(cfg: ExperimentConfig, job, L: int) -> list[TrialRecord]:
    trials = range(cfg.trials)
    if cfg.threads <= 1:
        return [job(L, t) for t in trials]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(lambda t: job(L, t), trials))


# -- summaries


@dataclass(frozen=True)
class IntersectionSummary:
    L: int
    trials: int
    hits: int
    relators: int
    m_L: int
    N_L: int
    exact: float

    @property
    def empirical(self) -> float:
        return self.hits / self.trials

    @property
    def sigma(self) -> float:
        return math.sqrt(self.exact * (1 - self.exact) / self.trials)

    def within(self, k: float = 3.0) -> bool:
        return abs(self.empirical - self.exact) <= k * self.sigma


@dataclass(frozen=True)
class CertificateSummary:
    L: int
    trials: int
    counts: dict[str, int]
    mean_relators_hat: float
    mean_pairs: float
    block_ok: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    summaries: list = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def experiment_automaton(cfg: ExperimentConfig) -> BAutomaton:
    if cfg.automaton is not None:
        a = automaton_from_json(cfg.automaton)
        if a.n != cfg.n:
            raise ExperimentError("automaton and config disagree on n")
        return a
    return random_large_automaton(cfg.n, cfg.lam, np.random.default_rng(cfg.seed))


def run_intersection_experiment(cfg: ExperimentConfig, automaton: BAutomaton | None = None) -> ExperimentResult:
    a = automaton if automaton is not None else experiment_automaton(cfg)
    tables = _accept_table(a)
    result = ExperimentResult(cfg, [])
    for L in cfg.L_values:
        count = relator_count(cfg.n, cfg.d, L)
        recs = _run_trials(cfg, lambda L, t: _intersect_trial(cfg, tables, L, count, t), L)
        m, N = language_share(a, cfg.n, L, cfg.model)
        hits = sum(r.outcome == "hit" for r in recs)
        exact = 1.0 - miss_probability(m, N, count)
        result.records.extend(recs)
        result.summaries.append(IntersectionSummary(L, cfg.trials, hits, count, m, N, exact))
    return result


def block_length_ok(n: int, d, B: int, cyclic: bool = False) -> bool:
    """``k^(1/B) < (2n-1)^d`` with ``k = 12`` (or ``2/eps = 36`` in the cyclic model)."""
    d = as_fraction(d)
    k = Fraction(2) / CYCLIC_EPS if cyclic else Fraction(12)
    p, q = d.numerator, d.denominator
    return k**q < Fraction(2 * n - 1) ** (p * B)


def minimal_block_length(n: int, d, cyclic: bool = False, limit: int = 10_000) -> int:
    for B in range(2, limit):
        if block_length_ok(n, d, B, cyclic):
            return B
    raise ExperimentError("no block length below the search limit")


def many_generators_regime(n: int, d) -> bool:
    """Whether ``(2n-1)^d >= 6``, where no block re-encoding is needed."""
    d = as_fraction(d)
    return Fraction(6) ** d.denominator <= Fraction(2 * n - 1) ** d.numerator


def run_certificate_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    ba = BlockAlphabet(cfg.n, cfg.B)
    ok = block_length_ok(cfg.n, cfg.d, cfg.B, cfg.cyclic)
    result = ExperimentResult(cfg, [])
    if not ok:
        result.warnings.append(
            f"B={cfg.B} does not satisfy the block-length inequality at n={cfg.n}, d={cfg.d}; "
            f"smallest admissible B is {minimal_block_length(cfg.n, cfg.d, cfg.cyclic)}"
        )
    for L in cfg.L_values:
        recs = _run_trials(cfg, lambda L, t: _certify_trial(cfg, ba, L, t), L)
        counts = {s.value: 0 for s in Status}
        hat, pairs = [], []
        for r in recs:
            counts[r.outcome] += 1
            fields = dict(kv.split("=") for kv in r.detail.split(";"))
            hat.append(int(fields["relators_hat"]))
            pairs.append(int(fields["pairs"]))
        result.records.extend(recs)
        result.summaries.append(
            CertificateSummary(L, cfg.trials, counts, float(np.mean(hat)), float(np.mean(pairs)), ok)
        )
    return result


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.experiment == "intersect":
        return run_intersection_experiment(cfg)
    return run_certificate_experiment(cfg)


# -- pipeline


@dataclass(frozen=True)
class PipelineReport:
    encoded: BlockEncodedPresentation
    verdict: CertificateVerdict
    conclusion: str


FA_CONCLUSION = "G has property (FA)"
INCONCLUSIVE = "inconclusive"


def run_pipeline(presentation: Presentation, B: int, budget: int = DEFAULT_BUDGET, cyclic: bool = False) -> PipelineReport:
    """Block-encode, certify the associated group, and pass (FA) back down."""
    encoded = associated_presentation(presentation, BlockAlphabet(presentation.n, B))
    if cyclic:
        verdict = fa_certificate_cyclic(encoded.presentation, budget)
    else:
        verdict = fa_certificate(encoded.presentation, budget)
    conclusion = FA_CONCLUSION if verdict.certified else INCONCLUSIVE
    return PipelineReport(encoded, verdict, conclusion)


# -- persistence


def records_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: (r.experiment, r.L, r.trial)):
        w.writerow(r.row())
    return buf.getvalue()


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def write_results(records: Sequence[TrialRecord], path: str | Path, config: ExperimentConfig,
                  started: str | None = None, finished: str | None = None) -> dict:
    """Write the record CSV and a manifest next to it; returns the manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    now = datetime.now(timezone.utc).isoformat(timespec="seconds")
    manifest = {
        "tool": "randfa",
        "version": __version__,
        "config": config.to_json(),
        "seed": config.seed,
        "records": path.name,
        "columns": list(CSV_COLUMNS),
        "started": started or now,
        "finished": finished or now,
    }
    path.write_text(records_csv(records))
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_records(path: str | Path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ExperimentError(f"unexpected columns {header}")
        out = []
        for row in reader:
            if len(row) != len(CSV_COLUMNS):
                raise ExperimentError(f"malformed row {row}")
            exp, L, trial, seed, outcome, detail, ms = row
            out.append(TrialRecord(exp, int(L), int(trial), int(seed), outcome, detail, int(ms)))
    return out


def run_and_write(cfg: ExperimentConfig, path: str | Path | None = None) -> tuple[ExperimentResult, dict]:
    path = path or cfg.output_path
    if path is None:
        raise ExperimentError("no output path configured")
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    result = run_experiment(cfg)
    manifest = write_results(result.records, path, cfg, started=started)
    return result, manifest


def rerun_from_manifest(manifest_file: str | Path, output: str | Path, threads: int | None = None):
    data = json.loads(Path(manifest_file).read_text())
    cfg = ExperimentConfig.from_json(data["config"])
    if threads is not None:
        cfg.threads = threads
    return run_and_write(cfg, output)


def load_config(path: str | Path) -> ExperimentConfig:
    data = json.loads(Path(path).read_text())
    if "automaton_path" in data:
        auto = Path(data.pop("automaton_path"))
        if not auto.is_absolute():
            auto = Path(path).parent / auto
        data["automaton"] = json.loads(auto.read_text())
    return ExperimentConfig.from_json(data)


def automaton_config_entry(a: BAutomaton) -> dict:
    return automaton_to_json(a)
