"""Run configuration: the plain-text key = value format and its parser.

A config file holds dimensionless keys grouped into optional [sections];
keys are globally unique, so the sections are organizational only.  Unknown
keys and malformed values are hard errors carrying the line number.  A
minimal file only needs the physics row:

    re = 4667
    tau = 0.05
    h_over_H = 0.5
    L = 5
    hx = 0.00833
    T0 = 120
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .geometry import StepGeometry, UniformGrid, build_grid
from .solver import DEFAULT_CS_OVER_U0, SolverParams

log = logging.getLogger(__name__)

DEFAULT_PROBES = ((1.0, 0.75), (2.0, 0.75), (3.0, 0.75), (4.0, 0.75))


@dataclass(frozen=True)
class RunConfig:
    """Complete dimensionless description of one numerical experiment."""

    re: float
    tau: float
    step_height_ratio: float
    channel_length: float
    hx: float
    t_end: float
    label: str = "run"
    step_x: float = 0.0
    dt: float = 1e-4
    field_interval: float = 0.5
    probe_interval: float = 0.05
    probes: tuple = DEFAULT_PROBES
    seed: int = 1234
    perturbation: float = 1e-3
    upwind: float = 0.0
    cs_over_u0: float = DEFAULT_CS_OVER_U0
    avg_window: tuple | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(
                "tau must be strictly positive: the pressure equation scales "
                "with tau (use the solver's tau=0 verification mode directly)"
            )
        for name in ("re", "hx", "dt", "t_end", "field_interval",
                     "probe_interval"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("probe_interval", "field_interval"):
            interval = getattr(self, name)
            steps = round(interval / self.dt)
            if steps < 1 or abs(steps * self.dt - interval) > 1e-12:
                raise ConfigError(
                    f"{name} = {interval} is not a whole number of dt = "
                    f"{self.dt} steps; recording must align with steps"
                )
        if self.avg_window is not None:
            t1, t2 = self.avg_window
            if not 0.0 <= t1 < t2 <= self.t_end + 1e-9:
                raise ConfigError(f"avg window [{t1}, {t2}] outside the run")

    # --- derived builders -------------------------------------------------

    def geometry(self) -> StepGeometry:
        return StepGeometry(step_height_ratio=self.step_height_ratio,
                            channel_length=self.channel_length,
                            step_x=self.step_x)

    def make_grid(self) -> UniformGrid:
        return build_grid(self.geometry(), self.hx)

    def make_params(self, grid: UniformGrid | None = None) -> SolverParams:
        return SolverParams(
            grid=grid if grid is not None else self.make_grid(),
            re=self.re, tau=self.tau, dt=self.dt, upwind=self.upwind,
            cs_over_u0=self.cs_over_u0,
        )

    def averaging_window(self) -> tuple[float, float]:
        """Configured window, or the trailing half of the run capped at 50."""
        if self.avg_window is not None:
            return self.avg_window
        t1 = max(self.t_end / 2.0, self.t_end - 50.0)
        return (t1, self.t_end)

    def rescaled(self, t0_factor=1.0, coarsen=1) -> "RunConfig":
        """Desk-scale variant: shorter run and optionally coarser grid."""
        changes = {"t_end": self.t_end * t0_factor}
        if coarsen != 1:
            changes["hx"] = self.hx * coarsen
        if self.avg_window is not None:
            t1, t2 = self.avg_window
            changes["avg_window"] = (t1 * t0_factor, t2 * t0_factor)
        return replace(self, **changes)

    def to_text(self) -> str:
        lines = [
            "[run]",
            f"label = {self.label}",
            "",
            "[geometry]",
            f"h_over_H = {self.step_height_ratio!r}",
            f"L = {self.channel_length!r}",
            f"step_x = {self.step_x!r}",
            "",
            "[physics]",
            f"re = {self.re!r}",
            f"tau = {self.tau!r}",
            f"cs_over_u0 = {self.cs_over_u0!r}",
            "",
            "[numerics]",
            f"hx = {self.hx!r}",
            f"dt = {self.dt!r}",
            f"T0 = {self.t_end!r}",
            f"upwind = {self.upwind!r}",
            "",
            "[recording]",
            f"field_interval = {self.field_interval!r}",
            f"probe_interval = {self.probe_interval!r}",
        ]
        if self.avg_window is not None:
            lines.append(f"avg_t1 = {self.avg_window[0]!r}")
            lines.append(f"avg_t2 = {self.avg_window[1]!r}")
        lines += [
            "",
            "[initial]",
            f"seed = {self.seed}",
            f"perturbation = {self.perturbation!r}",
            "",
            "[probes]",
        ]
        for n, (x, y) in enumerate(self.probes, start=1):
            lines.append(f"p{n} = {x!r}, {y!r}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_SECTIONS = ("run", "geometry", "physics", "numerics", "recording",
             "initial", "probes")

# key -> (config attribute, converter)
_KEYS = {
    "label": ("label", str),
    "h_over_H": ("step_height_ratio", float),
    "L": ("channel_length", float),
    "step_x": ("step_x", float),
    "re": ("re", float),
    "tau": ("tau", float),
    "cs_over_u0": ("cs_over_u0", float),
    "hx": ("hx", float),
    "dt": ("dt", float),
    "T0": ("t_end", float),
    "upwind": ("upwind", float),
    "field_interval": ("field_interval", float),
    "probe_interval": ("probe_interval", float),
    "avg_t1": ("_avg_t1", float),
    "avg_t2": ("_avg_t2", float),
    "seed": ("seed", int),
    "perturbation": ("perturbation", float),
}

_REQUIRED = ("re", "tau", "h_over_H", "L", "hx", "T0")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a config file; emits the soft tau warnings."""
    values = {}
    seen = set()
    probes = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "probes":
            parts = value.split(",")
            if len(parts) != 2:
                raise ConfigError(
                    f"line {lineno}: probe {key!r} needs 'x, y', got {value!r}"
                )
            try:
                probes.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: non-numeric probe coordinates {value!r}"
                ) from None
            continue
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: non-numeric value {value!r} for key {key!r}"
            ) from None

    missing = [k for k in _REQUIRED if _KEYS[k][0] not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    t1 = values.pop("_avg_t1", None)
    t2 = values.pop("_avg_t2", None)
    if (t1 is None) != (t2 is None):
        raise ConfigError("avg_t1 and avg_t2 must be given together")
    if t1 is not None:
        values["avg_window"] = (t1, t2)
    if probes:
        values["probes"] = tuple(probes)

    cfg = RunConfig(**values)
    if cfg.tau > 1.0:
        log.warning("tau = %g violates the tau <= 1 heuristic", cfg.tau)
    lower = cfg.hx / cfg.cs_over_u0
    if cfg.tau < lower:
        log.warning(
            "tau = %g is below the perturbation-spreading bound hx/c_s = %g",
            cfg.tau, lower,
        )
    return cfg
