"""Full run: ingest, constraints, graph, simulate+fit, step one, pairing, step two, evaluate."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import io
from .evaluate import EnergyModel, compare, write_energy_csv, write_energy_json
from .fit import FitSummary, fit_all_trips, write_fit_csv
from .graph import ConstraintGraph, build_graph
from .network import Network, Timetable, enumerate_constraints, validate
from .pairing import TripIndex, closest_partners, compute_offsets, offset_keys, write_pairs_csv
from .profile import ProfileBook
from .step_one import count_constraints, emt_objective, solve_emt
from .step_two import build_step_two_lp, misalignment_report, solve_final, write_sync_csv

log = logging.getLogger(__name__)

STAGES = ("ingest", "constraints", "graph", "fit", "step1", "pairing", "step2", "evaluate")


def bundled(name: str) -> Path:
    return Path(str(resources.files("ecotable") / "data" / name))


@dataclass
class PipelineConfig:
    network: Path = field(default_factory=lambda: bundled("sample_network.json"))
    limits: Path = field(default_factory=lambda: bundled("speed_limits.csv"))
    physics: Path = field(default_factory=lambda: bundled("physics.json"))
    seed_timetable: Path = field(default_factory=lambda: bundled("sample_seed.csv"))
    r: float = 120.0
    fit_width: int = 20  # narrower trip windows are widened to this span for fitting
    fit_step: float = 1.0
    dt: float = 0.1
    out_dir: Path | None = None
    backend: str = "simplex"
    seed: int = 0  # only used by the instance generator

    def check(self) -> None:
        for name in ("network", "limits", "physics", "seed_timetable"):
            p = Path(getattr(self, name))
            if not p.is_file():
                raise io.InputError(f"{name} file not readable: {p}")
        for name in ("r", "fit_step", "dt"):
            if not getattr(self, name) > 0:
                raise io.InputError(f"{name} must be positive")
        if self.fit_width < 0:
            raise io.InputError("fit_width must be nonnegative")


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


@dataclass
class RunState:
    config: PipelineConfig
    network: Network | None = None
    seed: Timetable | None = None
    records: list | None = None
    graph: ConstraintGraph | None = None
    book: ProfileBook | None = None
    fit: FitSummary | None = None
    emt: Timetable | None = None
    index: TripIndex | None = None
    pairs: list | None = None
    offsets: dict | None = None
    lp2: object = None
    final: object = None
    energy: object = None
    manifest: dict = field(default_factory=dict)
    written: list = field(default_factory=list)


def fit_samples(book: ProfileBook, link: str, physics: str, lower: int, upper: int, width: int, step: float):
    """Energy samples over a trip window, widened to ``width`` and kept above the minimum run time."""
    t_min = math.ceil(book.min_time(link, physics) - 1e-6)
    lo, hi = lower, upper
    if hi - lo < width:
        pad = width - (hi - lo)
        lo -= pad // 2
        hi += pad - pad // 2
    if lo < t_min:
        hi += t_min - lo
        lo = t_min
    return book.curve(link, physics, lo, hi, step)


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.cfg = config
        self.state = RunState(config)

    def _out(self, name: str) -> Path | None:
        if self.cfg.out_dir is None:
            return None
        p = Path(self.cfg.out_dir) / name
        self.state.written.append(name)
        return p

    def ingest(self):
        s, cfg = self.state, self.cfg
        cfg.check()
        s.network = io.load_network(cfg.network)
        bad = validate(s.network)
        if bad:
            raise io.InputError(f"network has {len(bad)} violation(s); first: {bad[0]}")
        s.seed = io.read_timetable(cfg.seed_timetable)
        limits = io.load_limits(cfg.limits)
        physics = io.load_physics(cfg.physics)
        for t in s.network.trains:
            if t.physics not in physics:
                raise io.InputError(f"train {t.id} uses unknown physics {t.physics!r}")
        s.book = ProfileBook(limits, physics, dt=cfg.dt)

    def constraints(self):
        s = self.state
        s.records = enumerate_constraints(s.network, s.seed)

    def build(self):
        s = self.state
        s.graph = build_graph(s.network, s.records)

    def fit(self):
        s, cfg = self.state, self.cfg
        g, net = s.graph, s.network

        def curve(k):
            a = g.arcs[k]
            tr = net.train(g.nodes[a.tail].event.train)
            if a.link not in s.book.limits:
                raise io.InputError(f"no speed limits for link {a.link!r}")
            return fit_samples(s.book, a.link, tr.physics, a.lower, a.upper, cfg.fit_width, cfg.fit_step)

        s.graph, s.fit = fit_all_trips(g, curve)
        if (p := self._out("fit_summary.csv")) is not None:
            write_fit_csv(s.graph, s.fit, p)
        s.manifest["fit"] = {"mean_r_squared": round(s.fit.mean_r_squared, 6),
                             "std_r_squared": round(s.fit.std_r_squared, 6),
                             "trips": s.fit.n_trips, "increasing_fits": s.fit.n_increasing}

    def step1(self):
        s = self.state
        t0 = time.perf_counter()
        s.emt, lp, sol = solve_emt(s.graph, s.records, backend=self.cfg.backend)
        secs = time.perf_counter() - t0
        if (p := self._out("emt.csv")) is not None:
            io.write_timetable(s.network, s.emt, p)
        s.manifest["step1"] = {
            "rows": lp.n_rows, "constraints": count_constraints(lp), "variables": lp.n_vars,
            "seconds": round(secs, 3), "iterations": sol.iterations,
            "objective": sol.objective_value, "seed_objective": emt_objective(s.graph, s.seed),
        }

    def pairing(self):
        s = self.state
        s.index = TripIndex(s.network, s.graph)
        right, left = closest_partners(s.emt, s.network.opposite_pairs,
                                       s.index.trains_by_platform(s.network), self.cfg.r)
        s.pairs = right + left
        s.offsets = compute_offsets(s.emt, s.index, lambda ref, T: s.book.profile(ref.link, ref.physics, T),
                                    offset_keys(s.pairs))
        if (p := self._out("pairs.csv")) is not None:
            write_pairs_csv(s.pairs, s.offsets, p)
        s.manifest["pairs"] = {"right": len(right), "left": len(left), "r": self.cfg.r}

    def step2(self):
        s = self.state
        s.lp2 = build_step_two_lp(s.graph, s.emt, s.pairs, s.offsets)
        t0 = time.perf_counter()
        s.final = solve_final(s.lp2, s.graph, s.records, backend=self.cfg.backend)
        secs = time.perf_counter() - t0
        lp = s.lp2.problem
        if (p := self._out("final_exact.csv")) is not None:
            io.write_timetable(s.network, s.final.exact, p)
        if s.final.rounded is not None and (p := self._out("final_rounded.csv")) is not None:
            io.write_timetable(s.network, s.final.rounded, p)
        if (p := self._out("sync_report.csv")) is not None:
            write_sync_csv(s.final.report, p)
        s.manifest["step2"] = {
            "rows": lp.n_rows, "constraints": count_constraints(lp), "variables": lp.n_vars,
            "theta": s.lp2.n_theta, "seconds": round(secs, 3), "iterations": s.final.solution.iterations,
            "objective": s.final.solution.objective_value,
            "l1_seed": misalignment_report(s.lp2, s.graph, s.seed).total_l1,
            "l1_emt": misalignment_report(s.lp2, s.graph, s.emt).total_l1,
            "l1_final": s.final.report.total_l1,
            "aligned_pairs": s.final.report.aligned_count,
            "rounded": s.final.rounded is not None,
            "rounding_violations": [str(v) for v in s.final.rounding_violations[:5]],
        }

    @property
    def final_timetable(self) -> Timetable:
        f = self.state.final
        return f.rounded if f.rounded is not None else f.exact

    def evaluate(self):
        s = self.state
        model = EnergyModel(s.index, s.book)
        final = self.final_timetable
        s.energy = compare(s.seed, final, s.pairs, model)
        vs_emt = compare(s.emt, final, s.pairs, model)
        consumed = {"seed": model.consumed_total(s.seed), "emt": model.consumed_total(s.emt),
                    "final": model.consumed_total(final)}
        extra = {"emt_effective_kwh": round(vs_emt.baseline_total / 3.6e6, 6),
                 "reduction_vs_emt": round(vs_emt.reduction_fraction, 8),
                 "consumed_kwh": {k: round(v / 3.6e6, 6) for k, v in consumed.items()}}
        if (p := self._out("energy_report.csv")) is not None:
            write_energy_csv(s.energy, p)
        if (p := self._out("energy_summary.json")) is not None:
            write_energy_json(s.energy, p, extra)
        s.manifest["energy"] = {**s.energy.summary(), **extra}

    def run(self, until: str = "evaluate") -> RunState:
        steps = {"ingest": self.ingest, "constraints": self.constraints, "graph": self.build,
                 "fit": self.fit, "step1": self.step1, "pairing": self.pairing, "step2": self.step2,
                 "evaluate": self.evaluate}
        if until not in steps:
            raise ValueError(f"unknown stage {until!r}")
        out = Path(self.cfg.out_dir) if self.cfg.out_dir is not None else None
        stale = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            stale = out / "STALE"
            stale.write_text("run in progress\n")
        t_start = time.perf_counter()
        for name in STAGES:
            try:
                log.info("stage %s", name)
                steps[name]()
            except Exception as exc:
                self._finish(out, stale, status="failed", stage=name, error=f"{type(exc).__name__}: {exc}")
                raise StageError(name, exc) from exc
            if name == until:
                break
        self.state.manifest["seconds_total"] = round(time.perf_counter() - t_start, 3)
        self._finish(out, stale, status="ok", stage=until)
        return self.state

    def _finish(self, out, stale, **status):
        s = self.state
        if s.network is not None:
            s.manifest["instance"] = {"name": s.network.name, "trains": len(s.network.trains),
                                      "platforms": len(s.network.platforms), "horizon_m": s.network.horizon_m}
        s.manifest.update(status)
        if out is None:
            return
        (out / "manifest.json").write_text(json.dumps(s.manifest, indent=1, sort_keys=True) + "\n")
        if status["status"] == "ok":
            stale.unlink(missing_ok=True)
        else:
            stale.write_text("".join(f"{n}\n" for n in s.written) or "no artifacts\n")


def run_pipeline(config: PipelineConfig, until: str = "evaluate") -> RunState:
    return Pipeline(config).run(until)
