"""End-to-end run: audit -> features -> CV -> conformal -> shift -> policy."""

from __future__ import annotations

import json
import logging
import math
import platform
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from . import __version__
from .conformal import MODES, POOLED, ConformalResult, conformal_cv
from .datamodel import PM25_MAX, PM25_MIN, SUBREGIONS, AuditSummary, Dataset, Subregion
from .errors import ConfigError, DataError, GeoconformError, StageError
from .evaluation import CvResult, make_random_folds, make_spatial_folds, run_cv
from .features import build_features
from .models import spec_from_dict
from .policy import RankedSite, RegionFlags, flag_regions, rank_sites
from .shift import ShiftReport, regional_shift
from .synth import SynthConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
CV_KINDS = ("spatial", "random")

DEFAULT_MODELS = (
    {"kind": "seasonal_naive"},
    {"kind": "ridge", "alpha": 1.0},
    {"kind": "gbt"},
)


@dataclass
class RunConfig:
    models: tuple = DEFAULT_MODELS
    interval_model: str = "gbt"
    folds: int = 5
    alpha: float = 0.1
    cv: str = "spatial"
    conformal_mode: str = POOLED
    cal_fraction: float = 0.2
    seed: int = 0
    top_sites: int = 20

    def __post_init__(self):
        self.models = tuple(dict(m) for m in self.models)
        self.validate()

    def validate(self) -> None:
        if not self.models:
            raise ConfigError("at least one model is required")
        kinds = [spec_from_dict(m).kind for m in self.models]
        if len(set(kinds)) != len(kinds):
            raise ConfigError(f"duplicate model kinds: {kinds}")
        if self.interval_model not in kinds:
            raise ConfigError(f"interval_model {self.interval_model!r} is not among {kinds}")
        if int(self.folds) < 2:
            raise ConfigError("folds must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.cv not in CV_KINDS:
            raise ConfigError(f"cv must be one of {CV_KINDS}")
        if self.conformal_mode not in MODES:
            raise ConfigError(f"conformal_mode must be one of {MODES}")
        if not 0.0 < self.cal_fraction < 1.0:
            raise ConfigError("cal_fraction must lie in (0, 1)")
        if int(self.top_sites) < 1:
            raise ConfigError("top_sites must be >= 1")

    def specs(self) -> list:
        return [spec_from_dict(m) for m in self.models]

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = [dict(m) for m in self.models]
        return d


def load_config(path) -> tuple[dict, RunConfig, SynthConfig | None]:
    """Read a JSON config with optional ``run`` and ``synth`` sections."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(data) - {"run", "synth"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    run = RunConfig.from_dict(data.get("run", {}))
    synth = SynthConfig.from_dict(data["synth"]) if "synth" in data else None
    return data, run, synth


@dataclass
class RunResult:
    config: RunConfig
    dataset: Dataset
    audit: AuditSummary
    cv: list[CvResult]
    conformal: ConformalResult
    shift: dict[str, ShiftReport]
    flags: dict[str, RegionFlags]
    ranking: list[RankedSite]
    source: dict = field(default_factory=dict)

    def interval_cv(self) -> CvResult:
        return next(r for r in self.cv if r.model == self.config.interval_model)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (GeoconformError, ValueError, KeyError, ArithmeticError) as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


@_stage("folds")
def _folds_stage(dataset, cfg):
    if len(dataset) == 0:
        raise DataError("no accepted rows")
    if cfg.cv == "spatial":
        return make_spatial_folds(dataset, cfg.folds, cfg.seed)
    return make_random_folds(dataset, cfg.folds, cfg.seed)


@_stage("cv")
def _cv_stage(dataset, cfg, plan, fm):
    return [run_cv(dataset, spec, plan, seed=cfg.seed, features=fm) for spec in cfg.specs()]


@_stage("conformal")
def _conformal_stage(dataset, cfg, plan, fm):
    spec = next(s for s in cfg.specs() if s.kind == cfg.interval_model)
    return conformal_cv(dataset, spec, plan, alpha=cfg.alpha, mode=cfg.conformal_mode,
                        cal_fraction=cfg.cal_fraction, seed=cfg.seed, features=fm)


@_stage("shift")
def _shift_stage(dataset):
    present = dataset.by_subregion
    if len(present) < 2:
        return {}
    return {r.value: regional_shift(dataset, r) for r in Subregion if r in present}


@_stage("policy")
def _policy_stage(dataset, cfg, cv_res, conf):
    widths = conf.intervals.width
    flags = flag_regions(dataset, cv_res.oof, widths)
    sites = []
    rho = dataset.predictor("population_density")
    for loc, rows in sorted(dataset.by_location.items()):
        w = widths[rows]
        w = w[np.isfinite(w)]
        if w.size:
            sites.append((loc, float(np.mean(w)) / 2.0, float(np.mean(rho[rows]))))
    return flags, rank_sites(sites)


def run_pipeline(dataset: Dataset, cfg: RunConfig, audit: AuditSummary | None = None,
                 source: dict | None = None) -> RunResult:
    if audit is None:
        audit = AuditSummary(accepted=len(dataset))
    plan = _folds_stage(dataset, cfg)
    fm = _stage("features")(build_features)(dataset)
    cv = _cv_stage(dataset, cfg, plan, fm)
    conf = _conformal_stage(dataset, cfg, plan, fm)
    shift = _shift_stage(dataset)
    cv_res = next(r for r in cv if r.model == cfg.interval_model)
    flags, ranking = _policy_stage(dataset, cfg, cv_res, conf)
    return RunResult(cfg, dataset, audit, cv, conf, shift, flags, ranking, source or {})


# -- report ------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def versions() -> dict:
    import matplotlib
    import numba

    return {"geoconform": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__,
            "matplotlib": matplotlib.__version__}


def build_report(result: RunResult, timestamp: str) -> dict:
    ds = result.dataset
    cfg = result.config
    regions = {r.value: int(len(rows)) for r, rows in ds.by_subregion.items()}
    report = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": timestamp,
        "versions": versions(),
        "seeds": {"run": cfg.seed, "folds": cfg.seed, "models": cfg.seed,
                  "calibration_split": f"{cfg.seed} * 1000 + fold"},
        "config": {"run": cfg.to_dict(), **result.source},
        "data": {
            "audit": result.audit.to_dict(),
            "n_rows": len(ds),
            "n_locations": len(ds.by_location),
            "rows_per_region": regions,
        },
        "cv": {"kind": cfg.cv, "k": cfg.folds,
               "models": [r.to_dict() for r in result.cv]},
        "conformal": {"model": cfg.interval_model, **result.conformal.to_dict()},
        "shift": {region: rep.to_dict() for region, rep in result.shift.items()},
        "policy": {
            "flags": {region: f.to_dict() for region, f in result.flags.items()},
            "ranking": [s.to_dict() for s in result.ranking[: cfg.top_sites]],
        },
    }
    return _clean(report)


def table_rows(result: RunResult) -> dict[str, tuple[list[str], list[list]]]:
    """Flat tables written next to the report as CSV."""
    tables = {}
    rows = []
    for r in result.cv:
        for m, (mu, sd) in r.summary.items():
            rows.append([r.model, m, mu, sd, r.pooled[m]])
    tables["cv_metrics"] = (["model", "metric", "fold_mean", "fold_std", "pooled_oof"], rows)
    rows = [[region, c.picp, c.mpiw, c.half_width, c.n, c.n_infinite]
            for region, c in result.conformal.coverage.items()]
    tables["conformal_coverage"] = (["region", "picp", "mpiw", "half_width", "n", "n_infinite"], rows)
    rows = [[region, e.feature, e.ks, e.severity.label, e.n_train, e.n_test]
            for region, rep in result.shift.items() for e in rep.entries]
    tables["shift"] = (["region", "feature", "ks", "severity", "n_rest", "n_region"], rows)
    rows = [[region, f.flag.label, f.r2, f.half_width, f.n_locations]
            + [f.histogram[g] for g in sorted(f.histogram, reverse=True)]
            for region, f in result.flags.items()]
    tables["flags"] = (["region", "flag", "r2", "half_width", "n_locations",
                        "frac_high", "frac_medium", "frac_low", "frac_unreliable"], rows)
    rows = [[s.rank, s.site_id, s.half_width, s.pop_density, s.score] for s in result.ranking]
    tables["ranking"] = (["rank", "site_id", "half_width", "pop_density", "score"], rows)
    # raw bounds are what coverage is computed on; display bounds are clamped to
    # the physical range for plotting only
    ds, iv = result.dataset, result.conformal.intervals
    lo_disp = np.clip(iv.lower, PM25_MIN, PM25_MAX)
    hi_disp = np.clip(iv.upper, PM25_MIN, PM25_MAX)
    rows = [[i, ds.location_id[i], SUBREGIONS[ds.subregion[i]].value, ds.pm25[i], iv.point[i],
             iv.lower[i], iv.upper[i], lo_disp[i], hi_disp[i]] for i in range(len(ds))]
    tables["intervals"] = (["row", "location_id", "subregion", "pm25", "point", "lower", "upper",
                            "display_lower", "display_upper"], rows)
    return tables


__all__ = ["RunConfig", "RunResult", "load_config", "run_pipeline", "build_report",
           "table_rows", "SCHEMA_VERSION"]
