"""End-to-end progressive pipeline.

A run has ``stages`` progressive stages:

* stage 1         - bind the oracle to the initial space ("initial supernet
  training"; for the synthetic backends this establishes the baseline
  coupling noise, for the external backend it sends a training directive).
* stages 2..M-1   - constrained search, distribution estimation, threshold
  pruning, rebind + finetune.
* stage M         - final constrained search; the feasible architectures
  with the highest accuracy are returned.

``stages=2`` is the no-pruning baseline (one search, nothing removed);
``stages=3`` prunes once.

Every stage persists a JSON report before the next stage starts, and a
run-state checkpoint makes kill-and-resume reproduce the uninterrupted
run byte for byte. Canonical outputs carry no timestamps; wall-clock
accounting goes to a separate, volatile ``timing.json``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import front_tau, save_front_scatter_csv
from .evolution import CesConfig, InfeasibleBandError, SearchResult, ces_search
from .latency import LatencyBand, LatencyTable, load_latency_table, synth_latency_table
from .oracle import Evaluation, Oracle
from .pruning import (
    estimate_distributions,
    prune_below_threshold,
    select_counting_set,
    structural_constraint_check,
)
from .space import SearchSpace, build_space, sample_uniform
from .wire import EvaluatorClient

DEFAULT_FINETUNE_SCHEDULE = ((120, 0.5), (80, 0.1), (40, 0.1))


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


class CheckpointError(RuntimeError):
    """Missing or incompatible run-state checkpoint."""


def _derive_seed(master: int, *parts) -> int:
    text = "seed|" + str(master) + "|" + "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") % 2**63


@dataclass
class PipelineConfig:
    space_profile: str | dict = "basic"
    stages: int = 4
    p_th: float = 0.01
    rank_cutoff: int = 10
    lat_min: float = 60.0
    lat_max: float = 70.0
    ces: CesConfig = field(default_factory=CesConfig)
    oracle_backend: str = "supernet"
    sigma0: float = 0.1
    tau_decay_epochs: float = 80.0
    finetune_schedule: tuple[tuple[int, float], ...] | None = None
    counting_source: str = "combined"
    top_n: int = 5
    tau_sample_size: int = 30
    seed: int = 0
    lut_path: str | None = None
    external_cmd: list[str] | None = None
    external_host: str | None = None
    external_port: int | None = None

    def __post_init__(self) -> None:
        if self.stages < 2:
            raise ConfigError("stages must be >= 2")
        if not (0.0 <= self.p_th < 1.0):
            raise ConfigError("p_th must be in [0, 1)")
        if self.rank_cutoff < 1:
            raise ConfigError("rank_cutoff must be >= 1")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.finetune_schedule is not None:
            self.finetune_schedule = tuple((int(e), float(lr)) for e, lr in self.finetune_schedule)
            if len(self.finetune_schedule) != self.stages - 1:
                raise ConfigError(
                    f"finetune schedule needs {self.stages - 1} entries, "
                    f"got {len(self.finetune_schedule)}"
                )

    @property
    def band(self) -> LatencyBand:
        return LatencyBand(self.lat_min, self.lat_max)

    def schedule(self) -> tuple[tuple[int, float], ...]:
        if self.finetune_schedule is not None:
            return self.finetune_schedule
        base = list(DEFAULT_FINETUNE_SCHEDULE)
        while len(base) < self.stages - 1:
            base.append(base[-1])
        return tuple(base[: self.stages - 1])

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["ces"] = dataclasses.asdict(self.ces)
        if data["finetune_schedule"] is not None:
            data["finetune_schedule"] = [list(e) for e in data["finetune_schedule"]]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        payload = dict(data)
        if "ces" in payload and isinstance(payload["ces"], dict):
            payload["ces"] = CesConfig(**payload["ces"])
        if payload.get("finetune_schedule") is not None:
            payload["finetune_schedule"] = tuple(
                (int(e), float(lr)) for e, lr in payload["finetune_schedule"]
            )
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from None

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()


@dataclass
class StageReport:
    stage: int
    kind: str  # "init" | "search_prune" | "final_search"
    space_size_in: int
    space_size_out: int
    finetune: dict | None = None
    search_seed: int | None = None
    distributions: list[dict] | None = None
    prune: dict | None = None
    structure: dict | None = None
    front: list[dict] | None = None
    tau: dict | None = None
    accounting: dict | None = None
    sigma_max: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _front_rows(result: SearchResult) -> list[dict]:
    rows = [
        {"arch": list(i.arch.choices), "accuracy": i.accuracy, "latency_ms": i.latency_ms}
        for i in result.population
        if i.rank == 1
    ]
    return sorted(rows, key=lambda r: (r["latency_ms"], r["accuracy"], r["arch"]))


def _accounting(result: SearchResult) -> dict:
    return {
        "queries": result.queries,
        "cache_hits": result.cache_hits,
        "evaluations": result.evaluations,
        "archive_size": len(result.archive),
    }


class Pipeline:
    """One run: owns the space chain, the oracle, and the output directory."""

    def __init__(self, cfg: PipelineConfig, out_dir: str | Path | None = None):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.initial_space = build_space(cfg.space_profile)
        self.table = self._load_table()
        missing = self.table.missing_for(self.initial_space)
        if missing:
            raise ConfigError(f"latency table does not cover the space; missing {missing[:5]}")
        self.space = self.initial_space
        self.oracle: Oracle | None = None
        self.reports: list[StageReport] = []
        self.completed_stage = 0
        self.timings: dict[str, float] = {}
        if self.out_dir is not None:
            (self.out_dir / "stages").mkdir(parents=True, exist_ok=True)

    def _load_table(self) -> LatencyTable:
        if self.cfg.lut_path:
            return load_latency_table(self.cfg.lut_path)
        return synth_latency_table(self.initial_space, rng=_derive_seed(self.cfg.seed, "lut"))

    def _make_oracle(self, space: SearchSpace, version: int = 0, epochs: int = 0) -> Oracle:
        client = None
        if self.cfg.oracle_backend == "external":
            if self.cfg.external_cmd:
                client = EvaluatorClient.spawn(self.cfg.external_cmd)
            elif self.cfg.external_host and self.cfg.external_port:
                client = EvaluatorClient.connect(self.cfg.external_host, self.cfg.external_port)
            else:
                raise ConfigError("external backend needs external_cmd or external_host/port")
            client.hello(_derive_seed(self.cfg.seed, "oracle"), space.to_profile())
        return Oracle(
            space,
            self.table,
            backend=self.cfg.oracle_backend,
            seed=_derive_seed(self.cfg.seed, "oracle"),
            sigma0=self.cfg.sigma0,
            tau_decay_epochs=self.cfg.tau_decay_epochs,
            client=client,
            version=version,
            finetune_epochs=epochs,
        )

    # -- persistence ---------------------------------------------------

    def _persist_stage(self, report: StageReport) -> None:
        self.reports.append(report)
        self.completed_stage = report.stage
        if self.out_dir is None:
            return
        _dump_json(self.out_dir / "stages" / f"stage-{report.stage}.json", report.to_dict())
        _dump_json(
            self.out_dir / "run_state.json",
            {
                "config_hash": self.cfg.config_hash(),
                "completed_stage": self.completed_stage,
                "space_profile": self.space.to_profile(),
                "oracle": {
                    "version": self.oracle.version,
                    "finetune_epochs": self.oracle.finetune_epochs,
                },
                "rng": {"scheme": "sha256-derived per stage", "seed": self.cfg.seed},
            },
        )

    def resume(self, run_dir: str | Path) -> None:
        run_dir = Path(run_dir)
        state_path = run_dir / "run_state.json"
        if not state_path.exists():
            raise CheckpointError(f"no run_state.json in {run_dir}")
        try:
            state = json.loads(state_path.read_text())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt checkpoint: {exc}") from None
        if state.get("config_hash") != self.cfg.config_hash():
            raise CheckpointError("checkpoint was produced by a different configuration")
        self.out_dir = run_dir
        self.space = build_space(state["space_profile"])
        self.oracle = self._make_oracle(
            self.space,
            version=int(state["oracle"]["version"]),
            epochs=int(state["oracle"]["finetune_epochs"]),
        )
        self.completed_stage = int(state["completed_stage"])
        for k in range(1, self.completed_stage + 1):
            payload = json.loads((run_dir / "stages" / f"stage-{k}.json").read_text())
            self.reports.append(StageReport(**payload))

    # -- stages ----------------------------------------------------------

    def _truth_fn(self):
        if self.cfg.oracle_backend == "external":
            return None
        return self.oracle.true_accuracy

    def _stage_init(self) -> None:
        t0 = time.perf_counter()
        epochs, lr = self.cfg.schedule()[0]
        if self.cfg.oracle_backend == "external" and self.oracle.client is not None:
            self.oracle.client.finetune(epochs, lr)
        report = StageReport(
            stage=1,
            kind="init",
            space_size_in=self.space.size(),
            space_size_out=self.space.size(),
            finetune={"epochs": epochs, "lr_analog": lr},
            sigma_max=max(self.oracle.sigmas, default=0.0),
        )
        self.timings["stage-1"] = time.perf_counter() - t0
        self._persist_stage(report)

    def _run_search(self, stage: int) -> tuple[SearchResult, dict | None, int]:
        seed = _derive_seed(self.cfg.seed, "stage", stage)
        cfg = dataclasses.replace(self.cfg.ces, seed=seed)
        result = ces_search(self.space, self.table, self.cfg.band, self.oracle, cfg)
        truth = self._truth_fn()
        tau = None
        if truth is not None:
            # rank agreement along the (near-)front of everything evaluated
            tau = front_tau(result.archive, truth, self.cfg.tau_sample_size)
        return result, tau, seed

    def _stage_search_prune(self, stage: int) -> None:
        t0 = time.perf_counter()
        result, tau, seed = self._run_search(stage)
        counting = select_counting_set(result, self.cfg.rank_cutoff, self.cfg.counting_source)
        dists = estimate_distributions(counting, self.space)
        pruned, prune_report = prune_below_threshold(
            self.space, dists, self.cfg.p_th, rank_cutoff=self.cfg.rank_cutoff
        )
        structure = structural_constraint_check(pruned, reference=self.space)
        epochs, lr = self.cfg.schedule()[stage - 1]
        size_in = self.space.size()
        self.space = pruned
        self.oracle = self.oracle.rebind_space(pruned).finetune(epochs, lr)
        report = StageReport(
            stage=stage,
            kind="search_prune",
            space_size_in=size_in,
            space_size_out=pruned.size(),
            finetune={"epochs": epochs, "lr_analog": lr},
            search_seed=seed,
            distributions=[d.to_dict() for d in dists],
            prune=prune_report.to_dict(),
            structure=structure,
            front=_front_rows(result),
            tau=tau,
            accounting=_accounting(result),
            sigma_max=max(self.oracle.sigmas, default=0.0),
        )
        self.timings[f"stage-{stage}"] = time.perf_counter() - t0
        self._persist_stage(report)

    def _stage_final(self) -> tuple[list[Evaluation], SearchResult]:
        stage = self.cfg.stages
        t0 = time.perf_counter()
        result, tau, seed = self._run_search(stage)
        best = sorted(
            result.archive, key=lambda i: (-i.accuracy, i.latency_ms, i.arch.choices)
        )[: self.cfg.top_n]
        truth = self._truth_fn()
        best_rows = []
        best_evals = []
        for ind in best:
            row = {
                "arch": list(ind.arch.choices),
                "accuracy": ind.accuracy,
                "latency_ms": ind.latency_ms,
            }
            if truth is not None:
                # evaluation-phase analog: re-score the pick on the ground truth
                row["true_accuracy"] = truth(ind.arch)
            best_rows.append(row)
            best_evals.append(
                Evaluation(ind.arch, ind.accuracy, ind.latency_ms, self.oracle.backend)
            )
        report = StageReport(
            stage=stage,
            kind="final_search",
            space_size_in=self.space.size(),
            space_size_out=self.space.size(),
            search_seed=seed,
            front=_front_rows(result),
            tau=tau,
            accounting=_accounting(result),
            sigma_max=max(self.oracle.sigmas, default=0.0),
        )
        self.timings[f"stage-{stage}"] = time.perf_counter() - t0
        self._persist_stage(report)
        if self.out_dir is not None:
            _dump_json(
                self.out_dir / "summary.json",
                {
                    "config_hash": self.cfg.config_hash(),
                    "stages": self.cfg.stages,
                    "best": best_rows,
                    "space_sizes": [r.space_size_out for r in self.reports],
                    "tau_per_stage": [
                        {"stage": r.stage, "tau": r.tau} for r in self.reports if r.tau is not None
                    ],
                },
            )
            front = [i for i in result.population if i.rank == 1]
            save_front_scatter_csv(front, self.out_dir / "fronts.csv")
            _dump_json(self.out_dir / "timing.json", {"seconds": self.timings})
        return best_evals, result

    def run(self, stop_after_stage: int | None = None) -> tuple[list[Evaluation], list[StageReport]]:
        if self.oracle is None:
            self.oracle = self._make_oracle(self.space)
        if self.completed_stage >= self.cfg.stages:
            return [], self.reports
        if self.completed_stage == 0:
            self._stage_init()
            if stop_after_stage == 1:
                return [], self.reports
        for stage in range(max(2, self.completed_stage + 1), self.cfg.stages):
            self._stage_search_prune(stage)
            if stop_after_stage == stage:
                return [], self.reports
        best, _ = self._stage_final()
        if self.cfg.oracle_backend == "external" and self.oracle.client is not None:
            self.oracle.client.close()
        return best, self.reports


def run_pipeline(
    cfg: PipelineConfig,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
    stop_after_stage: int | None = None,
) -> tuple[list[Evaluation], list[StageReport]]:
    """Run (or resume) the progressive pipeline; returns (best, stage reports)."""
    pipe = Pipeline(cfg, out_dir=out_dir)
    if resume_from is not None:
        pipe.resume(resume_from)
    return pipe.run(stop_after_stage=stop_after_stage)


def random_search_baseline(
    space: SearchSpace,
    band: LatencyBand,
    oracle: Oracle,
    n: int,
    rng: np.random.Generator | int | None = None,
    max_draw_factor: int = 100000,
) -> list[Evaluation]:
    """n feasible uniform samples, evaluated; errors if the band is empty."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    out: list[Evaluation] = []
    for _ in range(max_draw_factor * n):
        arch = sample_uniform(space, rng)
        if band.contains(oracle.table.predict(arch)):
            out.append(oracle.evaluate(arch))
            if len(out) == n:
                return out
    from .latency import latency_extremes

    lo, hi = latency_extremes(space, oracle.table)
    raise InfeasibleBandError(band, lo, hi)


def baseline_summary(evals: list[Evaluation], truth_fn=None) -> dict:
    accs = [e.accuracy for e in evals]
    summary = {
        "n": len(evals),
        "mean_accuracy": float(np.mean(accs)),
        "std_accuracy": float(np.std(accs)),
    }
    if truth_fn is not None:
        true = [truth_fn(e.architecture) for e in evals]
        summary["mean_true_accuracy"] = float(np.mean(true))
        summary["std_true_accuracy"] = float(np.std(true))
    return summary
