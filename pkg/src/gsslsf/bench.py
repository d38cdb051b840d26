"""Seeded experiment harness for the three separation benchmarks.

Every trial ``t`` derives its randomness from ``SeedSequence(base_seed + t)``,
spawned into four independent streams: graphs, sources, noise and the
latent excitation. The baseline's gammas are grid-searched against the
ground truth of trial 0 only and then reused for every trial.
"""

from __future__ import annotations

import configparser
import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from . import baseline, lsf
from .errors import DimensionMismatch
from .graphs import Graph, build_laplacian, generate_random_geometric, generate_random_regular
from .signals import (
    Bandlimited,
    HeatKernel,
    MixtureInstance,
    NoiseSpec,
    average_snr,
    gen_source,
    mix,
    snr_db,
    write_instance,
)
from .spectral import EigenPairs, eigendecompose, select_cutoff, truncated_basis

__all__ = [
    "CSV_HEADER",
    "METHODS",
    "ExperimentConfig",
    "TrialResult",
    "SeparationReport",
    "SeparateResult",
    "load_config",
    "trial_streams",
    "run_experiment",
    "run_experiment_1",
    "run_experiment_2",
    "run_experiment_3",
    "run_separate",
    "read_mixture",
    "write_components",
    "emit_report",
]

CSV_HEADER = (
    "experiment,method,nodes,trial,input_snr_db,source_index,"
    "output_snr_db,avg_snr_db,wall_time_s,seed"
)
METHODS = ("GSS-LSF", "GSS-Smooth")
DEFAULT_LAMBDA_RATIO = {1: 0.1, 2: 0.1, 3: 0.5}
INPUT_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)

# (graph kind, source model) per branch
_LAYOUTS = {
    1: [("rgg", Bandlimited(2)), ("regular", Bandlimited(5))],
    2: [("rgg", Bandlimited(2)), ("regular", Bandlimited(4)),
        ("regular", Bandlimited(6)), ("regular", Bandlimited(8))],
    3: [("rgg", None), ("rgg", None)],
}


@dataclass
class ExperimentConfig:
    experiment: int = 1
    nodes: int = 250
    trials: int = 3
    base_seed: int = 0
    lambda_ratio: float | None = None
    solver: str = "gradient"
    gamma_grid: tuple = baseline.DEFAULT_GAMMA_GRID
    gammas: tuple | None = None
    adam: lsf.AdamConfig = field(default_factory=lsf.AdamConfig)
    k_override: tuple | None = None
    input_snrs: tuple = INPUT_SNRS
    sigma: float = 0.2
    tau: float = 10.0
    degree: int = 4
    rgg_radius: float | None = None
    output: str | None = None
    plot: bool = False
    dump_instance: bool = False
    record_timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in (1, 2, 3):
            raise ValueError(f"experiment must be 1, 2 or 3, got {self.experiment}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.nodes < 10:
            raise ValueError(f"nodes must be >= 10, got {self.nodes}")
        if self.lambda_ratio is None:
            self.lambda_ratio = DEFAULT_LAMBDA_RATIO[self.experiment]
        if not (0.0 < self.lambda_ratio <= 1.0):
            raise ValueError(f"lambda_ratio must be in (0, 1], got {self.lambda_ratio}")
        if self.solver not in ("gradient", "closed_form"):
            raise ValueError(f"solver must be 'gradient' or 'closed_form', got {self.solver!r}")
        if self.k_override is not None and len(self.k_override) != self.num_sources:
            raise ValueError(
                f"k_override needs {self.num_sources} values, got {len(self.k_override)}"
            )
        if self.gammas is not None and len(self.gammas) not in (1, self.num_sources):
            raise ValueError(f"need 1 or {self.num_sources} gammas, got {len(self.gammas)}")

    @property
    def num_sources(self) -> int:
        return len(_LAYOUTS[self.experiment])

    @property
    def noise_levels(self) -> list[NoiseSpec]:
        if self.experiment == 1:
            return [NoiseSpec.target(s) for s in self.input_snrs]
        return [NoiseSpec.fixed(self.sigma)]


@dataclass
class TrialResult:
    """Outcome of one method on one mixture."""

    method: str
    trial: int
    seed: int
    input_snr_db: float | None
    source_snrs: list[float]
    wall_time_s: float
    meta: dict = field(default_factory=dict)

    @property
    def avg_snr_db(self) -> float:
        return average_snr(self.source_snrs)


@dataclass
class SeparationReport:
    experiment: int
    nodes: int
    results: list[TrialResult] = field(default_factory=list)
    config: ExperimentConfig | None = None

    def levels(self) -> list:
        seen = []
        for r in self.results:
            if r.input_snr_db not in seen:
                seen.append(r.input_snr_db)
        return seen

    def select(self, method: str, input_snr_db=None) -> list[TrialResult]:
        return [
            r for r in self.results
            if r.method == method and r.input_snr_db == input_snr_db
        ]

    def aggregate(self, method: str, input_snr_db=None) -> tuple[list[float], float]:
        """Per-source and average output SNR, each averaged over trials."""
        rows = self.select(method, input_snr_db)
        if not rows:
            raise KeyError(f"no results for {method} at {input_snr_db}")
        per_source = np.mean([r.source_snrs for r in rows], axis=0).tolist()
        return per_source, float(np.mean([r.avg_snr_db for r in rows]))

    def table(self) -> str:
        """Plain-text summary, one line per (input SNR, method)."""
        lines = []
        for level in self.levels():
            for method in METHODS:
                if not self.select(method, level):
                    continue
                per, avg = self.aggregate(method, level)
                tag = "" if level is None else f"in={level:5.1f} dB  "
                cols = "  ".join(f"S{i + 1}={v:6.2f}" for i, v in enumerate(per))
                lines.append(f"N={self.nodes}  {tag}{method:<10}  {cols}  Avg={avg:6.2f}")
        return "\n".join(lines)


@dataclass
class _Trial:
    index: int
    seed: int
    graphs: list[Graph]
    laplacians: list[np.ndarray]
    eigs: list[EigenPairs]
    instances: list[MixtureInstance]
    latent: lsf.LatentInput


def trial_streams(base_seed: int, trial: int) -> dict[str, np.random.SeedSequence]:
    """Independent seed streams for one trial."""
    names = ("graphs", "sources", "noise", "latent")
    return dict(zip(names, np.random.SeedSequence(base_seed + trial).spawn(len(names))))


def _build_trial(cfg: ExperimentConfig, t: int) -> _Trial:
    streams = trial_streams(cfg.base_seed, t)
    grng = np.random.default_rng(streams["graphs"])
    graphs = []
    for kind, _ in _LAYOUTS[cfg.experiment]:
        if kind == "rgg":
            graphs.append(generate_random_geometric(cfg.nodes, cfg.rgg_radius, grng))
        else:
            graphs.append(generate_random_regular(cfg.nodes, cfg.degree, grng))
    laplacians = [build_laplacian(g) for g in graphs]
    eigs = [eigendecompose(L) for L in laplacians]

    srng = np.random.default_rng(streams["sources"])
    sources = []
    for e, (_, spec) in zip(eigs, _LAYOUTS[cfg.experiment]):
        sources.append(gen_source(e, spec if spec is not None else HeatKernel(cfg.tau), srng))
    # one noise draw per trial, rescaled per level
    instances = [
        mix(sources, level, np.random.default_rng(streams["noise"]), seed=cfg.base_seed + t)
        for level in cfg.noise_levels
    ]
    latent = lsf.LatentInput.draw(cfg.nodes, streams["latent"])
    return _Trial(t, cfg.base_seed + t, graphs, laplacians, eigs, instances, latent)


def _level_key(cfg: ExperimentConfig, inst: MixtureInstance):
    return inst.noise_spec.snr_db if cfg.experiment == 1 else None


def _cutoffs(cfg: ExperimentConfig, eigs: list[EigenPairs]) -> list[int]:
    if cfg.k_override is not None:
        return [int(k) for k in cfg.k_override]
    return [select_cutoff(e.values, cfg.lambda_ratio) for e in eigs]


def _max_abs_mean(components) -> float:
    return max(abs(float(np.mean(c))) for c in components)


def _run_lsf(cfg: ExperimentConfig, trial: _Trial, inst: MixtureInstance) -> TrialResult:
    ks = _cutoffs(cfg, trial.eigs)
    bases = [truncated_basis(e, k) for e, k in zip(trial.eigs, ks)]
    model = lsf.init_model(bases, trial.latent)
    design = lsf.assemble_design_matrix(model)
    _, cf_report = lsf.solve_closed_form(design, inst.mixture)

    start = time.perf_counter()
    if cfg.solver == "gradient":
        fit = lsf.adam_fit(model, inst.mixture, cfg.adam)
    else:
        fit = lsf.fit_closed_form(model, inst.mixture)
    elapsed = time.perf_counter() - start

    comps = lsf.extract_components(model)
    meta = {
        "k": ks,
        "solver": fit.solver,
        "status": fit.status,
        "iterations": fit.iterations_run,
        "final_loss": fit.final_loss,
        "closed_form_loss": cf_report.final_loss,
        "design_rank": cf_report.extra["rank"],
        "max_abs_mean": _max_abs_mean(comps),
        "z_unchanged": bool(np.array_equal(model.latent.z, trial.latent.z)),
    }
    snrs = [snr_db(s, c) for s, c in zip(inst.sources, comps)]
    return TrialResult("GSS-LSF", trial.index, trial.seed, _level_key(cfg, inst),
                       snrs, elapsed, meta)


def _run_smooth(cfg, trial: _Trial, inst: MixtureInstance, smooth: baseline.SmoothConfig) -> TrialResult:
    start = time.perf_counter()
    comps = baseline.gss_smooth_separate(inst.mixture, trial.laplacians, smooth)
    elapsed = time.perf_counter() - start
    res, _ = baseline.stationarity_residuals(comps, inst.mixture, trial.laplacians, smooth.gammas)
    meta = {
        "gammas": list(smooth.gammas),
        "max_abs_mean": _max_abs_mean(comps),
        "stationarity": float(res.max()),
        "mixture_norm": float(np.linalg.norm(inst.mixture)),
    }
    snrs = [snr_db(s, c) for s, c in zip(inst.sources, comps)]
    return TrialResult("GSS-Smooth", trial.index, trial.seed, _level_key(cfg, inst),
                       snrs, elapsed, meta)


def _smooth_configs(cfg: ExperimentConfig, first: _Trial) -> dict:
    # Only trial 0 ever reaches the grid search (and its ground truth).
    if cfg.gammas is not None:
        g = tuple(cfg.gammas) * (cfg.num_sources if len(cfg.gammas) == 1 else 1)
        fixed = baseline.SmoothConfig(g)
        return {_level_key(cfg, inst): fixed for inst in first.instances}
    return {
        _level_key(cfg, inst): baseline.grid_search_gammas(inst, first.laplacians, cfg.gamma_grid)
        for inst in first.instances
    }


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def run_experiment(cfg: ExperimentConfig) -> SeparationReport:
    """Run every trial of ``cfg.experiment`` and collect per-trial results."""
    trials = _pool_map(lambda t: _build_trial(cfg, t), range(cfg.trials), cfg.workers)
    smooth = _smooth_configs(cfg, trials[0])

    def run(trial: _Trial) -> list[TrialResult]:
        out = []
        for inst in trial.instances:
            out.append(_run_lsf(cfg, trial, inst))
            out.append(_run_smooth(cfg, trial, inst, smooth[_level_key(cfg, inst)]))
        return out

    per_trial = _pool_map(run, trials, cfg.workers)
    results = [r for rs in per_trial for r in rs]
    order = {m: i for i, m in enumerate(METHODS)}
    levels = [_level_key(cfg, inst) for inst in trials[0].instances]
    results.sort(key=lambda r: (order[r.method], levels.index(r.input_snr_db), r.trial))
    report = SeparationReport(cfg.experiment, cfg.nodes, results, cfg)

    if cfg.output:
        emit_report(report, cfg.output, plot=cfg.plot, timing=cfg.record_timing)
        if cfg.dump_instance:
            stem = Path(cfg.output)
            for trial in trials:
                for inst in trial.instances:
                    tag = f"_t{trial.index}"
                    if cfg.experiment == 1:
                        tag += f"_snr{inst.noise_spec.snr_db:g}"
                    write_instance(inst, stem.with_name(f"{stem.stem}_instance{tag}.csv"))
    return report


def _expect(cfg: ExperimentConfig, n: int) -> None:
    if cfg.experiment != n:
        raise ValueError(f"config is for experiment {cfg.experiment}, not {n}")


def run_experiment_1(cfg: ExperimentConfig) -> SeparationReport:
    """Two sources (geometric + 4-regular) over the input-SNR sweep."""
    _expect(cfg, 1)
    return run_experiment(cfg)


def run_experiment_2(cfg: ExperimentConfig) -> SeparationReport:
    """Four bandlimited sources of increasing bandwidth, fixed noise level."""
    _expect(cfg, 2)
    return run_experiment(cfg)


def run_experiment_3(cfg: ExperimentConfig) -> SeparationReport:
    """Two heat-kernel sources on geometric graphs, fixed noise level."""
    _expect(cfg, 3)
    return run_experiment(cfg)


# -- reports -----------------------------------------------------------------

def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def report_rows(report: SeparationReport, timing: bool = False) -> list[list[str]]:
    rows = []
    cfg = report.config
    base_seed = cfg.base_seed if cfg is not None else 0
    for level in report.levels():
        for method in METHODS:
            trials = report.select(method, level)
            if not trials:
                continue
            for r in trials:
                for i, v in enumerate(r.source_snrs):
                    rows.append([
                        str(report.experiment), method, str(report.nodes), str(r.trial),
                        _fmt(level), str(i + 1), _fmt(v), _fmt(r.avg_snr_db),
                        _fmt(r.wall_time_s) if timing else "", str(r.seed),
                    ])
            per, avg = report.aggregate(method, level)
            wall = float(np.mean([r.wall_time_s for r in trials]))
            for i, v in enumerate(per):
                rows.append([
                    str(report.experiment), method, str(report.nodes), "-1",
                    _fmt(level), str(i + 1), _fmt(v), _fmt(avg),
                    _fmt(wall) if timing else "", str(base_seed),
                ])
    return rows


def emit_report(report: SeparationReport, path: str | PathLike, plot: bool = False,
                timing: bool = False) -> list[Path]:
    """Write the results CSV (and an SVG chart when ``plot``); returns the paths written.

    Timings are left blank unless ``timing`` is set, so reruns are byte-identical.
    """
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    w.writerows(report_rows(report, timing))
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    written = [path]
    if plot and report.results:
        svg = path.with_suffix(".svg")
        _plot(report, svg)
        written.append(svg)
    return written


def _plot(report: SeparationReport, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "gsslsf"
    fig, ax = plt.subplots(figsize=(5, 4))
    levels = report.levels()
    if levels != [None]:
        for method, style in zip(METHODS, ("-", "--")):
            per = [report.aggregate(method, lv) for lv in levels]
            ax.plot(levels, [a for _, a in per], style, marker="o", label=f"{method} Avg.")
            for i in range(len(per[0][0])):
                ax.plot(levels, [p[i] for p, _ in per], style, alpha=0.5, label=f"{method} S{i + 1}")
        ax.set_xlabel("input SNR (dB)")
    else:
        P = len(report.results[0].source_snrs)
        x = np.arange(P + 1)
        for j, method in enumerate(METHODS):
            per, avg = report.aggregate(method)
            ax.bar(x + 0.4 * j - 0.2, per + [avg], width=0.4, label=method)
        ax.set_xticks(x, [f"S{i + 1}" for i in range(P)] + ["Avg."])
    ax.set_ylabel("output SNR (dB)")
    ax.set_title(f"Experiment {report.experiment}, N={report.nodes}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- user data -----------------------------------------------------------------

@dataclass
class SeparateResult:
    components: list[np.ndarray]
    fit: lsf.FitReport
    k: list[int]
    baseline_components: list[np.ndarray] | None = None
    gammas: tuple | None = None


def read_mixture(path: str | PathLike) -> np.ndarray:
    """Load a mixture: one value per line, or a CSV with a ``mixture`` column."""
    path = Path(path)
    text = path.read_text()
    first = text.lstrip().split("\n", 1)[0]
    if "mixture" in first.split(","):
        rows = list(csv.DictReader(io.StringIO(text)))
        return np.array([float(r["mixture"]) for r in rows])
    return np.atleast_1d(np.loadtxt(io.StringIO(text), dtype=float))


def write_components(path: str | PathLike, components, prefix: str = "component",
                     extra: dict | None = None) -> None:
    cols = {f"{prefix}_{p + 1}": c for p, c in enumerate(components)}
    cols.update(extra or {})
    n = len(next(iter(cols.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", *cols])
        for i in range(n):
            w.writerow([i, *(repr(float(c[i])) for c in cols.values())])


def run_separate(mixture, graphs: list[Graph], lambda_ratio: float = 0.1,
                 solver: str = "gradient", k_override=None, gammas=None,
                 with_baseline: bool = False, adam: lsf.AdamConfig | None = None,
                 latent_seed: int = 0, output: str | PathLike | None = None) -> SeparateResult:
    """Separate a user-supplied mixture over user-supplied graphs.

    Raises
    ------
    DimensionMismatch
        If the mixture length differs from a graph's node count.
    DisconnectedGraph
        If any graph is disconnected.
    """
    m = np.asarray(mixture, dtype=float)
    for p, g in enumerate(graphs):
        if g.num_nodes != m.shape[0]:
            raise DimensionMismatch(f"graph {p} has {g.num_nodes} nodes, mixture has {m.shape[0]}")
    laps = [build_laplacian(g) for g in graphs]
    eigs = [eigendecompose(L) for L in laps]
    if k_override is not None:
        if len(k_override) != len(graphs):
            raise ValueError(f"k_override needs {len(graphs)} values")
        ks = [int(k) for k in k_override]
    else:
        ks = [select_cutoff(e.values, lambda_ratio) for e in eigs]
    model = lsf.init_model([truncated_basis(e, k) for e, k in zip(eigs, ks)],
                           lsf.LatentInput.draw(m.shape[0], latent_seed))
    if solver == "gradient":
        fit = lsf.adam_fit(model, m, adam)
    else:
        fit = lsf.fit_closed_form(model, m)
    result = SeparateResult(lsf.extract_components(model), fit, ks)

    if with_baseline:
        g = tuple(gammas) if gammas is not None else (1.0,)
        if len(g) == 1:
            g = g * len(graphs)
        smooth = baseline.SmoothConfig(g)
        result.baseline_components = baseline.gss_smooth_separate(m, laps, smooth)
        result.gammas = smooth.gammas

    if output is not None:
        extra = {}
        if result.baseline_components is not None:
            extra = {f"baseline_{p + 1}": c for p, c in enumerate(result.baseline_components)}
        write_components(output, result.components, extra=extra)
    return result


# -- config files ------------------------------------------------------------

def _floats(text: str) -> tuple:
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _solver(text: str) -> str:
    v = str(text).strip().lower().replace("-", "_")
    return {"adam": "gradient", "gradient": "gradient", "closed_form": "closed_form"}[v]


_KEYS = {
    "experiment": ("experiment", int),
    "nodes": ("nodes", int),
    "trials": ("trials", int),
    "seed": ("base_seed", int),
    "base_seed": ("base_seed", int),
    "lambda_ratio": ("lambda_ratio", float),
    "solver": ("solver", _solver),
    "gamma": ("gammas", _floats),
    "gammas": ("gammas", _floats),
    "gamma_grid": ("gamma_grid", _floats),
    "k_override": ("k_override", _ints),
    "input_snrs": ("input_snrs", _floats),
    "sigma": ("sigma", float),
    "tau": ("tau", float),
    "degree": ("degree", int),
    "rgg_radius": ("rgg_radius", float),
    "out": ("output", str),
    "output": ("output", str),
    "plot": ("plot", _bool),
    "dump_instance": ("dump_instance", _bool),
    "timing": ("record_timing", _bool),
    "workers": ("workers", int),
}
_ADAM_KEYS = {
    "lr": float, "lr_min": float, "schedule": str, "beta1": float, "beta2": float,
    "eps": float, "max_iter": int, "tol": float, "patience": int,
}


def load_config(path: str | PathLike) -> dict:
    """Parse a flat ``key = value`` file into ``ExperimentConfig`` keyword arguments.

    Blank lines and ``#`` comments are ignored; optimizer keys
    (``lr``, ``max_iter``, ...) are gathered under ``"adam"``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        parser.read_string("[config]\n" + fh.read(), source=str(path))
    out: dict = {}
    adam: dict = {}
    for key, raw in parser["config"].items():
        key = key.replace("-", "_")
        if key in _KEYS:
            name, conv = _KEYS[key]
            out[name] = conv(raw)
        elif key in _ADAM_KEYS:
            adam[key] = _ADAM_KEYS[key](raw)
        else:
            raise ValueError(f"{path}: unknown config key {key!r}")
    if adam:
        out["adam"] = adam
    return out
