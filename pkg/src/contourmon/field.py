"""
Synthetic field generation and sensor observation.

The ground-truth signal is a sum of isotropic Gaussian bumps over a
rectangular area: a "wide" component set and a "narrow" component set,
each with positive random amplitudes. Sensors are scattered uniformly
over the rectangle and read the field value plus zero-mean Gaussian
noise; a moving-average filter over repeated readings reduces the
effective noise power by the number of taps.

All operations are pure functions of their inputs plus an explicit seed:
identical inputs and seed give bit-identical outputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np


class InsufficientHistoryError(ValueError):
    """Raised when a moving average is requested over too few observation sets."""


@dataclass(frozen=True)
class GaussianComponent:
    """One unnormalized Gaussian bump: peak value equals ``amplitude``."""

    amplitude: float
    mean_x: float
    mean_y: float
    sigma: float

    def __post_init__(self):
        if not (self.amplitude > 0):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not all(np.isfinite([self.amplitude, self.mean_x, self.mean_y, self.sigma])):
            raise ValueError("component parameters must be finite")


@dataclass(frozen=True)
class SyntheticFieldModel:
    """Sum-of-Gaussians ground truth over the rectangle [0, W] x [0, H]."""

    components_a: tuple
    components_b: tuple
    field_width: float
    field_height: float

    def __post_init__(self):
        if self.field_width <= 0 or self.field_height <= 0:
            raise ValueError("field dimensions must be positive")
        for c in (*self.components_a, *self.components_b):
            if not (0.0 <= c.mean_x <= self.field_width and 0.0 <= c.mean_y <= self.field_height):
                raise ValueError(
                    f"component mean ({c.mean_x}, {c.mean_y}) outside "
                    f"[0, {self.field_width}] x [0, {self.field_height}]"
                )

    def evaluate(self, x, y):
        return evaluate_field(self, x, y)


@dataclass(frozen=True, eq=False)
class SensorDeployment:
    """Localized sensors: unique integer ids with known coordinates."""

    sensor_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if not (len(self.sensor_ids) == len(self.x) == len(self.y)):
            raise ValueError("sensor_ids, x, y must have equal length")
        if len(np.unique(self.sensor_ids)) != len(self.sensor_ids):
            raise ValueError("sensor ids must be unique")

    def __len__(self):
        return len(self.sensor_ids)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """One reading per sensor at a single time index."""

    sensor_ids: np.ndarray
    values: np.ndarray
    timestamp_index: int = 0

    def __post_init__(self):
        if len(self.sensor_ids) != len(self.values):
            raise ValueError("sensor_ids and values must have equal length")
        if len(np.unique(self.sensor_ids)) != len(self.sensor_ids):
            raise ValueError("at most one reading per sensor per timestamp")
        if self.timestamp_index < 0:
            raise ValueError("timestamp_index must be non-negative")

    def __len__(self):
        return len(self.sensor_ids)


def evaluate_field(model: SyntheticFieldModel, x, y):
    """Evaluate the synthetic field at (x, y).

    The kernel is the unnormalized isotropic Gaussian
    exp(-((x-mx)^2 + (y-my)^2) / (2 sigma^2)), so each bump peaks at its
    amplitude. Accepts scalars or broadcastable arrays; scalar inputs
    return a float.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for comp in (*model.components_a, *model.components_b):
        d2 = (x - comp.mean_x) ** 2 + (y - comp.mean_y) ** 2
        out += comp.amplitude * np.exp(-d2 / (2.0 * comp.sigma**2))
    if out.ndim == 0:
        return float(out)
    return out


def synthesize_field(
    n1: int,
    n2: int,
    sigma_a: float,
    sigma_b: float,
    field_width: float,
    field_height: float,
    rng_seed: int,
    amp_min: float = 0.0,
    amp_max: float = 1.0,
) -> SyntheticFieldModel:
    """Draw a random field: means uniform over the rectangle, amplitudes
    uniform in (amp_min, amp_max]."""
    if n1 < 0 or n2 < 0:
        raise ValueError("component counts must be non-negative")
    if not amp_max > amp_min:
        raise ValueError("need amp_max > amp_min")
    rng = np.random.default_rng(rng_seed)

    def draw(count, sigma):
        # amp_max - u*(amp_max - amp_min) with u in [0,1) lands in (amp_min, amp_max]
        amps = amp_max - rng.uniform(size=count) * (amp_max - amp_min)
        mxs = rng.uniform(0.0, field_width, size=count)
        mys = rng.uniform(0.0, field_height, size=count)
        return tuple(
            GaussianComponent(float(a), float(mx), float(my), float(sigma))
            for a, mx, my in zip(amps, mxs, mys)
        )

    return SyntheticFieldModel(
        components_a=draw(n1, sigma_a),
        components_b=draw(n2, sigma_b),
        field_width=float(field_width),
        field_height=float(field_height),
    )


def shift_components(model: SyntheticFieldModel, dx: float, which: str = "b") -> SyntheticFieldModel:
    """Shift one component set horizontally by dx, wrapping modulo field width.

    Wrapping keeps the component count and total energy constant across
    time steps. ``which`` selects the drifting set ("a" or "b").
    """
    if which not in ("a", "b"):
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    if not np.isfinite(dx):
        raise ValueError("dx must be finite")

    def shifted(comps):
        return tuple(replace(c, mean_x=float(np.mod(c.mean_x + dx, model.field_width))) for c in comps)

    if which == "a":
        return replace(model, components_a=shifted(model.components_a))
    return replace(model, components_b=shifted(model.components_b))


def deploy_uniform(count: int, field_width: float, field_height: float, rng_seed: int) -> SensorDeployment:
    """Scatter ``count`` sensors uniformly over the rectangle."""
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(rng_seed)
    return SensorDeployment(
        sensor_ids=np.arange(count, dtype=np.int64),
        x=rng.uniform(0.0, field_width, size=count),
        y=rng.uniform(0.0, field_height, size=count),
    )


def observe(
    model: SyntheticFieldModel,
    deployment: SensorDeployment,
    noise_sigma: float,
    rng_seed: int,
    timestamp_index: int = 0,
) -> ObservationSet:
    """One noisy reading per sensor: field value plus iid N(0, noise_sigma^2)."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    values = evaluate_field(model, deployment.x, deployment.y)
    rng = np.random.default_rng(rng_seed)
    values = values + rng.normal(0.0, noise_sigma, size=len(deployment))
    return ObservationSet(
        sensor_ids=deployment.sensor_ids.copy(),
        values=values,
        timestamp_index=timestamp_index,
    )


def moving_average(series, m: int) -> ObservationSet:
    """Per-sensor mean of the last ``m`` observation sets.

    Residual noise variance drops to sigma^2 / m in expectation. The field
    is assumed static over the averaging window. Raises
    InsufficientHistoryError when fewer than m sets are available.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    if len(series) < m:
        raise InsufficientHistoryError(f"need at least {m} observation sets, got {len(series)}")
    window = series[-m:]
    ids = window[0].sensor_ids
    for obs in window[1:]:
        if not np.array_equal(obs.sensor_ids, ids):
            raise ValueError("observation sets cover different deployments")
    values = np.mean([obs.values for obs in window], axis=0)
    return ObservationSet(
        sensor_ids=ids.copy(),
        values=values,
        timestamp_index=window[-1].timestamp_index,
    )


# -- plain-text serialization ------------------------------------------------
#
# Field model schema (one item per line, '#' starts a comment):
#   field <width> <height>
#   a <amplitude> <mean_x> <mean_y> <sigma>
#   b <amplitude> <mean_x> <mean_y> <sigma>
# Floats are written with repr() so a round trip is exact.


def save_field_model(model: SyntheticFieldModel, path) -> None:
    lines = ["# contourmon field model v1"]
    lines.append(f"field {model.field_width!r} {model.field_height!r}")
    for tag, comps in (("a", model.components_a), ("b", model.components_b)):
        for c in comps:
            lines.append(f"{tag} {c.amplitude!r} {c.mean_x!r} {c.mean_y!r} {c.sigma!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field_model(path) -> SyntheticFieldModel:
    width = height = None
    comps = {"a": [], "b": []}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "field" and len(parts) == 3:
                    width, height = float(parts[1]), float(parts[2])
                elif parts[0] in ("a", "b") and len(parts) == 5:
                    comps[parts[0]].append(GaussianComponent(*(float(p) for p in parts[1:])))
                else:
                    raise ValueError("unrecognized record")
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from err
    if width is None:
        raise ValueError(f"{path}: missing 'field' record")
    return SyntheticFieldModel(
        components_a=tuple(comps["a"]),
        components_b=tuple(comps["b"]),
        field_width=width,
        field_height=height,
    )


def observations_to_csv(obs: ObservationSet, deployment: SensorDeployment, path) -> None:
    """Rows: timestamp_index, sensor_id, x, y, value."""
    if not np.array_equal(obs.sensor_ids, deployment.sensor_ids):
        raise ValueError("observation set does not match deployment")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_index", "sensor_id", "x", "y", "value"])
        for sid, x, y, v in zip(obs.sensor_ids, deployment.x, deployment.y, obs.values):
            writer.writerow([obs.timestamp_index, sid, repr(float(x)), repr(float(y)), repr(float(v))])
