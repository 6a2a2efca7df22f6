"""Seeded synthetic PM2.5 corpus with planted regional covariate shift.

Each predictor is generated on a latent standard-normal scale::

    z = seasonal(month) + loc_sd * location_offset + record_sd * noise + shift[region, predictor]

and mapped to physical units by a fixed strictly increasing transform, so a
shift of ``s`` moves the latent distribution by ``s`` standard deviations and
KS statistics are the same on either scale. ``seasonal``, ``loc_sd`` and
``record_sd`` are chosen so that the unshifted latent variance is 1.

The concentration is ``response(x) + location_effect + noise`` where the noise
standard deviation is ``noise_scale * response(x) / 40``: heteroscedastic,
``noise_scale`` being the spread at a 40 ug/m3 response level.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .datamodel import PM25_MAX, PREDICTORS, SUBREGIONS, Dataset, Subregion
from .errors import ConfigError

RESPONSES = ("linear", "nonlinear", "aot-only")

REFERENCE_LEVEL = 40.0

# (lat_min, lat_max, lon_min, lon_max)
REGION_BOXES = {
    Subregion.NORTH: (24.0, 34.0, -8.0, 32.0),
    Subregion.WEST: (5.0, 15.0, -17.0, 10.0),
    Subregion.CENTRAL: (-5.0, 8.0, 10.0, 28.0),
    Subregion.EAST: (-8.0, 12.0, 30.0, 45.0),
    Subregion.SOUTHERN: (-34.0, -18.0, 15.0, 35.0),
}

REGION_COUNTRIES = {
    Subregion.NORTH: ("Egypt", "Morocco", "Algeria", "Tunisia"),
    Subregion.WEST: ("Nigeria", "Ghana", "Senegal", "Burkina Faso"),
    Subregion.CENTRAL: ("Cameroon", "Chad", "Gabon", "DR Congo"),
    Subregion.EAST: ("Kenya", "Uganda", "Ethiopia", "Tanzania"),
    Subregion.SOUTHERN: ("South Africa", "Zimbabwe", "Botswana", "Zambia"),
}

# latent model: amplitude of the annual cycle, phase in months
SEASONAL_AMPLITUDE = 0.3
SEASONAL_PHASE = {
    "sat_aot": 1.0, "sat_no2": 0.0, "sat_pblh": 7.0, "temperature": 4.0,
    "humidity": 8.0, "pressure": 1.0, "wind_speed": 2.0, "precipitation": 8.0,
    "clouds": 8.0, "population_density": 0.0,
}
LOCATION_SD = 0.25
RECORD_SD = math.sqrt(1.0 - SEASONAL_AMPLITUDE**2 / 2.0 - LOCATION_SD**2)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _softplus(z):
    return np.logaddexp(0.0, z)


# strictly increasing latent -> physical maps
TRANSFORMS = {
    "sat_aot": lambda z: 0.4 * np.exp(0.5 * z),                 # optical depth
    "sat_no2": lambda z: 3.0 * np.exp(0.4 * z),                 # 1e15 molec/cm2
    "sat_pblh": lambda z: 900.0 * np.exp(0.3 * z),              # m
    "temperature": lambda z: 26.0 + 5.0 * z,                    # degC
    "humidity": lambda z: 100.0 * _sigmoid(0.2 + 0.9 * z),      # %
    "pressure": lambda z: 1005.0 + 6.0 * z,                     # hPa
    "wind_speed": lambda z: 3.5 * np.exp(0.35 * z),             # m/s
    "precipitation": lambda z: 3.0 * _softplus(z - 0.5),        # mm/day
    "clouds": lambda z: 100.0 * _sigmoid(0.8 * z),              # %
    "population_density": lambda z: 300.0 * np.exp(0.9 * z),    # persons/km2
}

LINEAR_INTERCEPT = -50.0
LINEAR_COEFS = {
    "sat_aot": 40.0,
    "sat_no2": 2.0,
    "sat_pblh": -0.01,
    "temperature": 0.3,
    "humidity": 0.15,
    "pressure": 0.07,
    "wind_speed": -1.5,
    "precipitation": -0.8,
    "clouds": 0.02,
    "population_density": 0.002,
}

AOT_ONLY_INTERCEPT = 5.0
AOT_ONLY_SLOPE = 60.0


@dataclass
class SynthConfig:
    n_locations: int = 8
    records_per_location: int = 120
    years: tuple[int, int] = (2017, 2022)
    shift: dict[str, dict[str, float]] = field(default_factory=dict)
    noise_scale: float = 8.0
    location_effect: float = 8.0
    response: str = "nonlinear"
    subregions: tuple[str, ...] = tuple(r.value for r in SUBREGIONS)
    seed: int = 0

    def __post_init__(self):
        self.years = tuple(self.years)
        self.subregions = tuple(self.subregions)
        self.validate()

    def validate(self) -> None:
        if int(self.n_locations) < 1 or int(self.records_per_location) < 1:
            raise ConfigError("n_locations and records_per_location must be >= 1")
        if len(self.years) != 2 or self.years[0] > self.years[1]:
            raise ConfigError(f"years must be an inclusive (first, last) pair, got {self.years}")
        if not (self.noise_scale >= 0 and math.isfinite(self.noise_scale)):
            raise ConfigError("noise_scale must be finite and >= 0")
        if not (self.location_effect >= 0 and math.isfinite(self.location_effect)):
            raise ConfigError("location_effect must be finite and >= 0")
        if self.response not in RESPONSES:
            raise ConfigError(f"response must be one of {RESPONSES}, got {self.response!r}")
        if not self.subregions:
            raise ConfigError("at least one subregion is required")
        for name in self.subregions:
            _region(name)
        for name, per_pred in self.shift.items():
            _region(name)
            for pred, value in per_pred.items():
                if pred not in PREDICTORS:
                    raise ConfigError(f"unknown predictor in shift: {pred!r}")
                if not (value >= 0 and math.isfinite(value)):
                    raise ConfigError(f"shift strength must be finite and >= 0, got {value!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data.get("synth", data))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["years"] = list(self.years)
        d["subregions"] = list(self.subregions)
        return d


def _region(name) -> Subregion:
    try:
        return name if isinstance(name, Subregion) else Subregion.parse(str(name))
    except ValueError:
        raise ConfigError(f"unknown subregion {name!r}") from None


def _as_columns(predictors) -> dict[str, np.ndarray]:
    if isinstance(predictors, Mapping):
        return {p: np.asarray(predictors[p], dtype=float) for p in PREDICTORS}
    arr = np.asarray(predictors, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return {p: arr[:, j] for j, p in enumerate(PREDICTORS)}


def ground_truth_fn(config: SynthConfig | str, predictors) -> np.ndarray:
    """Noise-free concentration for raw predictor values.

    ``predictors`` is either a mapping name -> values or an (n, 10) array in
    ``PREDICTORS`` order. ``config`` may be a config or a response name.

    * ``linear``: ``LINEAR_INTERCEPT + sum(LINEAR_COEFS[p] * x_p)``; all-zero
      predictors give exactly ``LINEAR_INTERCEPT``.
    * ``nonlinear``: aerosol loading amplified by hygroscopic growth and diluted
      by boundary-layer depth, plus smaller additive terms, floored smoothly at 2.
    * ``aot-only``: ``AOT_ONLY_INTERCEPT + AOT_ONLY_SLOPE * sat_aot``.
    """
    response = config if isinstance(config, str) else config.response
    x = _as_columns(predictors)
    if response == "linear":
        out = np.full_like(x["sat_aot"], LINEAR_INTERCEPT)
        for p in PREDICTORS:
            out = out + LINEAR_COEFS[p] * x[p]
        return out
    if response == "aot-only":
        return AOT_ONLY_INTERCEPT + AOT_ONLY_SLOPE * x["sat_aot"]
    if response == "nonlinear":
        rh = np.clip(x["humidity"], 0.0, 95.0)
        growth = (1.0 - rh / 100.0) ** -0.5
        dilution = np.sqrt(900.0 / np.maximum(x["sat_pblh"], 50.0))
        raw = (
            4.0
            + 40.0 * x["sat_aot"] * growth * dilution
            + 1.5 * x["sat_no2"]
            + 0.4 * np.maximum(x["temperature"] - 20.0, 0.0)
            - 1.2 * x["wind_speed"]
            - 0.8 * x["precipitation"]
            + 3.0 * np.log1p(np.maximum(x["population_density"], 0.0) / 100.0)
        )
        return 2.0 + _softplus(raw - 2.0)
    raise ConfigError(f"unknown response {response!r}")


def noise_sd(config: SynthConfig, response: np.ndarray) -> np.ndarray:
    return config.noise_scale * np.abs(response) / REFERENCE_LEVEL


def _latent(month: np.ndarray, pred: str, loc_offset: float, rng) -> np.ndarray:
    phase = SEASONAL_PHASE[pred]
    seasonal = SEASONAL_AMPLITUDE * np.sin(2.0 * np.pi * (month - phase) / 12.0)
    return seasonal + LOCATION_SD * loc_offset + RECORD_SD * rng.standard_normal(len(month))


def _timestamps(config: SynthConfig, rng, n: int) -> np.ndarray:
    start = np.datetime64(f"{config.years[0]:04d}-01-01T00:00:00", "s")
    stop = np.datetime64(f"{config.years[1] + 1:04d}-01-01T00:00:00", "s")
    span_hours = int((stop - start) / np.timedelta64(1, "h"))
    hours = np.sort(rng.integers(0, span_hours, size=n))
    return start + hours.astype("timedelta64[h]")


def generate(config: SynthConfig) -> Dataset:
    """Pure function of the config (including its seed)."""
    config.validate()
    regions = [_region(r) for r in config.subregions]
    shift = {_region(r): dict(v) for r, v in config.shift.items()}

    cols: dict[str, list] = {k: [] for k in
                             ("location_id", "country", "subregion", "lat", "lon", "ts", "pm25", "pred")}
    n_rec = int(config.records_per_location)
    for region in regions:
        r_idx = SUBREGIONS.index(region)
        lat0, lat1, lon0, lon1 = REGION_BOXES[region]
        countries = REGION_COUNTRIES[region]
        for k in range(int(config.n_locations)):
            rng = np.random.default_rng(np.random.SeedSequence(int(config.seed), spawn_key=(r_idx, k)))
            lat = float(np.round(rng.uniform(lat0, lat1), 4))
            lon = float(np.round(rng.uniform(lon0, lon1), 4))
            loc_offsets = rng.standard_normal(len(PREDICTORS))
            loc_effect = config.location_effect * rng.standard_normal()
            ts = _timestamps(config, rng, n_rec)
            month = ts.astype("datetime64[M]").astype(np.int64) % 12 + 1
            raw = np.empty((n_rec, len(PREDICTORS)))
            for j, pred in enumerate(PREDICTORS):
                z = _latent(month, pred, loc_offsets[j], rng)
                z = z + shift.get(region, {}).get(pred, 0.0)
                raw[:, j] = TRANSFORMS[pred](z)
            f = ground_truth_fn(config, raw)
            pm25 = _emit(f + loc_effect, noise_sd(config, f), rng)

            cols["location_id"] += [f"{region.value[:2].upper()}{k:03d}"] * n_rec
            cols["country"] += [countries[k % len(countries)]] * n_rec
            cols["subregion"] += [r_idx] * n_rec
            cols["lat"] += [lat] * n_rec
            cols["lon"] += [lon] * n_rec
            cols["ts"].append(ts)
            cols["pm25"].append(pm25)
            cols["pred"].append(raw)

    return Dataset(
        location_id=cols["location_id"],
        country=cols["country"],
        subregion=cols["subregion"],
        latitude=cols["lat"],
        longitude=cols["lon"],
        timestamp=np.concatenate(cols["ts"]).astype("datetime64[us]"),
        pm25=np.concatenate(cols["pm25"]),
        predictors=np.vstack(cols["pred"]),
    )


def _emit(mean: np.ndarray, sd: np.ndarray, rng, max_tries: int = 64) -> np.ndarray:
    """Add noise, resampling draws that leave (0, 1000)."""
    out = mean + sd * rng.standard_normal(len(mean))
    for _ in range(max_tries):
        bad = ~((out > 0.0) & (out < PM25_MAX))
        if not bad.any():
            return out
        out[bad] = mean[bad] + sd[bad] * rng.standard_normal(int(bad.sum()))
    # means far outside the physical range: pin into it
    bad = ~((out > 0.0) & (out < PM25_MAX))
    out[bad] = np.clip(mean[bad], 0.5, PM25_MAX - 0.5)
    return out
