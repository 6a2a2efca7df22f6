"""Writing run outputs: report.json, CSV tables and SVG figures, atomically."""

from __future__ import annotations

import csv
import json
import os
import shutil
import tempfile
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .policy import ReliabilityFlag

SCHEMA_FILE = "report_schema.json"
# excluded when comparing two runs for determinism
VOLATILE_KEYS = ("generated_at",)


def load_schema() -> dict:
    return json.loads(resources.files("geoconform").joinpath(SCHEMA_FILE).read_text("utf-8"))


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())


def strip_volatile(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# -- figures -----------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "geoconform"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()


def figure_scatter(y, yhat, path, title="") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(y, yhat, s=4, alpha=0.4, color="tab:blue", rasterized=False)
    hi = float(max(np.max(y), np.max(yhat)))
    ax.plot([0, hi], [0, hi], color="black", lw=1, ls="--")
    ax.set_xlabel("observed PM2.5 (ug/m3)")
    ax.set_ylabel("predicted PM2.5 (ug/m3)")
    ax.set_title(title)
    _save(fig, path)
    plt.close(fig)


def figure_picp(coverage: dict, alpha: float, path) -> None:
    plt = _pyplot()
    names = list(coverage)
    vals = [coverage[n].picp for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, vals, color=["tab:gray" if n == "overall" else "tab:blue" for n in names])
    ax.axhline(1 - alpha, color="tab:red", ls="--", lw=1, label=f"nominal {1 - alpha:.2f}")
    ax.set_ylim(0, 1)
    ax.set_ylabel("PICP")
    ax.legend(loc="lower right")
    _save(fig, path)
    plt.close(fig)


def figure_flags(flags: dict, path) -> None:
    plt = _pyplot()
    names = list(flags)
    fig, ax = plt.subplots(figsize=(6, 4))
    bottom = np.zeros(len(names))
    colors = {ReliabilityFlag.HIGH: "tab:green", ReliabilityFlag.MEDIUM: "tab:olive",
              ReliabilityFlag.LOW: "tab:orange", ReliabilityFlag.UNRELIABLE: "tab:red"}
    for flag in sorted(ReliabilityFlag, reverse=True):
        frac = np.array([flags[n].histogram[flag] for n in names])
        ax.bar(names, frac, bottom=bottom, color=colors[flag], label=flag.label)
        bottom += frac
    ax.set_ylabel("fraction of locations")
    ax.legend(loc="upper right", fontsize="small")
    _save(fig, path)
    plt.close(fig)


# -- atomic output directory ---------------------------------------------------

class OutputDir:
    """Collect files in a scratch directory; move them into place only on commit."""

    def __init__(self, target):
        self.target = Path(target)
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.target.name}.", dir=self.target.parent))

    def path(self, name: str) -> Path:
        return self.tmp / name

    def commit(self) -> list[Path]:
        self.target.mkdir(parents=True, exist_ok=True)
        out = []
        for f in sorted(self.tmp.iterdir()):
            dest = self.target / f.name
            os.replace(f, dest)
            out.append(dest)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return out

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False
