from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geoconform.datamodel import PREDICTORS, SUBREGIONS, Dataset
from geoconform.synth import SynthConfig, generate

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_dataset(counts, seed=0, regions=None, years=(2020,), pm25=None) -> Dataset:
    """Tiny hand-shaped dataset: ``counts[i]`` records for location ``i``.

    Locations cycle through sub-regions unless ``regions`` is given.
    """
    rng = np.random.default_rng(seed)
    loc, reg, ts = [], [], []
    for i, c in enumerate(counts):
        r = regions[i] if regions is not None else i % len(SUBREGIONS)
        for j in range(c):
            loc.append(f"L{i:03d}")
            reg.append(r)
            year = years[j % len(years)]
            ts.append(np.datetime64(datetime(year, j % 12 + 1, 1, tzinfo=timezone.utc)
                                    .replace(tzinfo=None), "us"))
    n = len(loc)
    y = rng.uniform(1, 200, n) if pm25 is None else np.asarray(pm25, dtype=float)
    return Dataset(
        location_id=loc,
        country=["X"] * n,
        subregion=reg,
        latitude=rng.uniform(-30, 30, n).round(4),
        longitude=rng.uniform(-15, 40, n).round(4),
        timestamp=ts,
        pm25=y,
        predictors=rng.uniform(0.1, 10, (n, len(PREDICTORS))),
    )


@pytest.fixture(scope="session")
def small_synth() -> Dataset:
    return generate(SynthConfig(n_locations=6, records_per_location=60, seed=3))


# acceptance verdicts, echoed once at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
