"""Replication studies and the ACF diagnostic.

Each study simulates tracks at known parameters, optionally rounds the
coordinates, fits one or more models per replicate, and aggregates
mean / empirical SD / bootstrap SE / coverage / convergence summaries.
Replicates are seeded as base seed + replicate index, so aggregates do
not depend on execution order or worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .composite import CLMethod
from .errors import ValidationError
from .estimation import FitOptions, bootstrap, fit, fit_mr
from .mr_density import ModelParams
from .mrme_model import round_track, simulate_mrme
from ._validate import check_positive

__all__ = ["StudySpec", "StudyReport", "study_preset", "load_study_spec", "run_study", "acf"]

_PARAM_NAMES = ("lambda1", "lambda0", "sigma", "sigma_eps")
_STUDIES = ("bias_table1", "study1", "study2", "study3", "acf")
_METHODS = ("two_piece", "marginal", "mr")


@dataclass(frozen=True)
class StudySpec:
    """Configuration of one replication study."""

    study: str
    replicates: int = 100
    seed: int = 20230817
    params: ModelParams = field(default_factory=lambda: ModelParams(1.0, 0.5, 1.0, 0.01))
    horizon: float = 500.0
    interval: float = 1.0
    dim: int = 2
    methods: tuple[str, ...] = ("two_piece",)
    rounding: float | None = None
    bootstrap_m: int = 0
    intervals: tuple[float, ...] | None = None  # acf study only

    def __post_init__(self):
        if self.study not in _STUDIES:
            raise ValidationError(f"study must be one of {_STUDIES}, got {self.study!r}")
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        for m in self.methods:
            if m not in _METHODS:
                raise ValidationError(f"unknown method {m!r}")
        check_positive("horizon", self.horizon)
        check_positive("interval", self.interval)
        if self.rounding is not None:
            check_positive("rounding", self.rounding)
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")


_PRESETS = {
    # Noise fed to the noise-free likelihood; the headline bias demo.
    "table1-caption": dict(
        study="bias_table1",
        horizon=500.0,
        interval=1.0,
        params=ModelParams(1.0, 0.5, 1.0, 0.05),
        methods=("mr",),
        replicates=100,
    ),
    "table1-text": dict(
        study="bias_table1",
        horizon=1000.0,
        interval=5.0,
        params=ModelParams(1.0, 0.5, 1.0, 0.05),
        methods=("mr",),
        replicates=100,
    ),
    "study1": dict(
        study="study1",
        horizon=1000.0,
        interval=5.0,
        params=ModelParams(1.0, 0.5, 1.0, 0.01),
        methods=("two_piece", "marginal"),
        replicates=200,
    ),
    "study2": dict(
        study="study2",
        horizon=500.0,
        interval=1.0,
        params=ModelParams(1.0, 0.5, 1.0, 0.01),
        methods=("two_piece", "marginal"),
        bootstrap_m=50,
        replicates=200,
    ),
    "study3": dict(
        study="study3",
        horizon=200.0,
        interval=0.1,
        params=ModelParams(1.0, 0.1, 1.0, 0.01),
        methods=("two_piece", "marginal"),
        replicates=200,
    ),
    "acf": dict(
        study="acf",
        horizon=1e5,
        interval=5.0,
        params=ModelParams(1.0, 0.5, 1.0, 0.01),
        intervals=(5.0, 0.8, 0.1),
        replicates=1,
        methods=(),
    ),
}


def study_preset(name: str, **overrides) -> StudySpec:
    """Named study configuration, optionally overridden field by field."""
    if name in _PRESETS:
        base = dict(_PRESETS[name])
    elif name == "bias_table1":
        base = dict(_PRESETS["table1-caption"])
    else:
        raise ValidationError(
            f"unknown preset {name!r}; choose from {sorted(_PRESETS) + ['bias_table1']}"
        )
    base.update(overrides)
    return StudySpec(**base)


def load_study_spec(path) -> StudySpec:
    """Read a StudySpec from a JSON config file mirroring its fields."""
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if "preset" in raw:
        name = raw.pop("preset")
        params = raw.pop("params", None)
        if params is not None:
            raw["params"] = ModelParams(**params)
        for key in ("methods", "intervals"):
            if key in raw and raw[key] is not None:
                raw[key] = tuple(raw[key])
        return study_preset(name, **raw)
    if "params" in raw:
        raw["params"] = ModelParams(**raw["params"])
    for key in ("methods", "intervals"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key])
    try:
        return StudySpec(**raw)
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


@dataclass
class StudyReport:
    """Aggregates plus per-replicate records for one study run."""

    spec: StudySpec
    rows: list[dict]
    records: list[dict]

    def human_table(self) -> str:
        if not self.rows:
            return "(no results)"
        keys = list(self.rows[0].keys())
        widths = {k: max(len(k), *(len(_fmt(r.get(k))) for r in self.rows)) for k in keys}
        lines = ["  ".join(k.ljust(widths[k]) for k in keys)]
        lines.append("  ".join("-" * widths[k] for k in keys))
        for r in self.rows:
            lines.append("  ".join(_fmt(r.get(k)).ljust(widths[k]) for k in keys))
        return "\n".join(lines)

    def to_json(self) -> str:
        payload = {
            "spec": _jsonable(asdict(self.spec)),
            "rows": _jsonable(self.rows),
            "records": _jsonable(self.records),
        }
        return json.dumps(payload, indent=2)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _study_grid(spec: StudySpec) -> np.ndarray:
    n = int(round(spec.horizon / spec.interval))
    return np.linspace(0.0, n * spec.interval, n + 1)


def _one_replicate(spec: StudySpec, idx: int) -> dict:
    """Simulate, optionally round, and fit one replicate (never raises)."""
    rng = np.random.default_rng(spec.seed + idx)
    times = _study_grid(spec)
    record: dict = {"replicate": idx}
    try:
        sim = simulate_mrme(spec.params, times, dim=spec.dim, init="stationary", rng=rng)
        track = sim.track
        if spec.rounding is not None:
            track = round_track(track, spec.rounding)
        for mi, method in enumerate(spec.methods):
            entry: dict = {}
            try:
                if method == "mr":
                    result = fit_mr(track)
                else:
                    opts = FitOptions(method=CLMethod(method))
                    result = fit(track, opts)
                entry["estimate"] = result.estimate.as_array()
                entry["converged"] = result.converged
                entry["objective"] = result.objective
                entry["n_evals"] = result.n_evals
                if spec.bootstrap_m > 0 and method != "mr" and result.converged:
                    boot = bootstrap(
                        times,
                        result.estimate,
                        M=spec.bootstrap_m,
                        opts=FitOptions(method=CLMethod(method)),
                        rng=np.random.default_rng([spec.seed, idx, mi]),
                        dim=spec.dim,
                    )
                    entry["se"] = boot.se
                    entry["ci"] = boot.ci
                    entry["boot_failed"] = boot.n_failed
                    entry["degraded"] = boot.degraded
                    truth = spec.params.as_array()
                    est = result.estimate.as_array()
                    half = 1.959963984540054 * boot.se
                    entry["cover"] = (np.abs(est - truth) <= half).astype(float)
            except Exception as exc:  # record, never abort the sweep
                entry["error"] = f"{type(exc).__name__}: {exc}"
            record[method] = entry
    except Exception as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def _aggregate(spec: StudySpec, records: list[dict]) -> list[dict]:
    rows = []
    truth = spec.params.as_array()
    for method in spec.methods:
        entries = [r.get(method, {}) for r in records]
        done = [e for e in entries if "estimate" in e]
        conv = [e for e in done if e.get("converged")]
        n_conv = len(conv)
        conv_pct = 100.0 * n_conv / max(1, len(records))
        # Summaries cover converged fits only; a diverged fit's estimate
        # sits at the search boundary and would swamp the moments.  The
        # raw estimates stay available in the per-replicate records.
        ests = np.array([e["estimate"] for e in conv]) if conv else np.empty((0, 4))
        ses = [e["se"] for e in conv if "se" in e]
        covers = [e["cover"] for e in conv if "cover" in e]
        n_params_m = 3 if method == "mr" else 4
        for k in range(n_params_m):
            row = {
                "method": method,
                "parameter": _PARAM_NAMES[k],
                "true": float(truth[k]),
                "mean": float(ests[:, k].mean()) if conv else None,
                "ese": float(ests[:, k].std(ddof=1)) if n_conv > 1 else None,
                "ase": float(np.mean([s[k] for s in ses])) if ses else None,
                "cr": float(np.mean([c[k] for c in covers])) if covers else None,
                "convergence_pct": conv_pct,
                "n_converged": n_conv,
                "n_replicates": len(records),
            }
            rows.append(row)
    return rows


def run_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Execute a replication study; failures are recorded per replicate."""
    if spec.study == "acf":
        return _run_acf_study(spec)
    indices = range(spec.replicates)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_one_replicate, [spec] * spec.replicates, indices))
    else:
        records = [_one_replicate(spec, i) for i in indices]
    records.sort(key=lambda r: r["replicate"])
    return StudyReport(spec=spec, rows=_aggregate(spec, records), records=records)


def acf(params: ModelParams, horizon, interval, rng=None, dim: int = 2):
    """Lag-1 and lag-2 autocorrelation of |increment| on a regular grid.

    Simulates one long track and averages the per-coordinate sample
    autocorrelations.  Needs at least 1e4 increments for a stable
    estimate.
    """
    horizon = check_positive("horizon", horizon)
    interval = check_positive("interval", interval)
    n = int(round(horizon / interval))
    if n < 10_000:
        raise ValidationError(
            f"horizon/interval gives {n} increments; at least 10000 are required"
        )
    times = np.linspace(0.0, n * interval, n + 1)
    sim = simulate_mrme(params, times, dim=dim, init="stationary", rng=rng)
    inc = np.abs(np.diff(sim.track.locations, axis=0))
    out = []
    for lag in (1, 2):
        cors = []
        for d in range(inc.shape[1]):
            x = inc[:, d]
            a, b = x[:-lag], x[lag:]
            cors.append(float(np.corrcoef(a, b)[0, 1]))
        out.append(float(np.mean(cors)))
    return out[0], out[1]


def _run_acf_study(spec: StudySpec) -> StudyReport:
    intervals = spec.intervals or (spec.interval,)
    rows = []
    for i, interval in enumerate(intervals):
        rng = np.random.default_rng(spec.seed + i)
        acf1, acf2 = acf(spec.params, spec.horizon, interval, rng=rng, dim=spec.dim)
        rows.append({"interval": float(interval), "acf1": acf1, "acf2": acf2})
    return StudyReport(spec=spec, rows=rows, records=[])
