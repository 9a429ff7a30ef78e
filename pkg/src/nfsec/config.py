"""Flat key/value experiment configuration.

Config files are plain text: one `dotted.key = value` pair per line,
blank lines and `#` comments ignored. Units cross the boundary here
(GHz, dBm, degrees) and are converted to SI on load. Any key can be
overridden by an environment variable named NFSEC_<KEY> with dots
mapped to underscores and uppercased, and a few keys can be overridden
again by CLI flags; precedence is flags > environment > file > default.
"""

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .geometry import ReceiverGeometry, ScenarioGeometry
from .units import dbm_to_watts

ENV_PREFIX = "NFSEC_"

VARIANT_TAGS = (
    "fa-an-digital", "fa-an-hybrid",
    "fa-bf-digital", "fa-bf-hybrid",
    "fpa-an-digital", "fpa-an-hybrid",
    "fpa-bf-digital", "fpa-bf-hybrid",
)


@dataclass(frozen=True)
class Variant:
    """One experiment arm: array type, AN on/off, implementation."""

    tag: str

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ConfigurationError(
                f"unknown variant {self.tag!r}; choose from "
                f"{', '.join(VARIANT_TAGS)}")

    @property
    def fluid(self) -> bool:
        return self.tag.startswith("fa-")

    @property
    def an_enabled(self) -> bool:
        return self.tag.split("-")[1] == "an"

    @property
    def hybrid(self) -> bool:
        return self.tag.endswith("-hybrid")

    @property
    def cell(self) -> str:
        """Array/AN cell shared by digital and hybrid arms."""
        return self.tag.rsplit("-", 1)[0]


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}") from exc


def _strings(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


_DEFAULT_POWER_GRID = "-10,-7.5,-5,-2.5,0,2.5,5,7.5,10"
_DEFAULT_EVE_GRID = ",".join(str(d) for d in range(1, 31))

# key -> (caster, default-as-text); empty default means "auto".
_SCHEMA: dict[str, tuple] = {
    "scenario.carrier_freq_ghz": (float, "2.8"),
    "scenario.num_ports": (int, "64"),
    "scenario.num_active": (int, "16"),
    "scenario.port_spacing_m": (float, ""),
    "scenario.bob.distance_m": (float, "15"),
    "scenario.bob.azimuth_deg": (float, "45"),
    "scenario.bob.num_elements": (int, "8"),
    "scenario.bob.element_spacing_m": (float, ""),
    "scenario.eve.distance_m": (float, "5"),
    "scenario.eve.azimuth_deg": (float, "45"),
    "scenario.eve.num_elements": (int, "8"),
    "scenario.eve.element_spacing_m": (float, ""),
    "scenario.noise_power_dbm": (float, "-105"),
    "scenario.num_streams": (int, "4"),
    "scenario.num_rf_chains": (int, "8"),
    "channel.model": (str, "fresnel"),
    "sweep.power_dbm": (_floats, _DEFAULT_POWER_GRID),
    "sweep.eve_distance_m": (_floats, _DEFAULT_EVE_GRID),
    "power_dbm": (float, "10"),
    "trials": (int, "100"),
    "seed": (int, "1234"),
    "variants": (_strings,
                 "fa-an-digital,fa-bf-digital,fpa-an-digital,fpa-bf-digital"),
    "output_dir": (str, "runs"),
    "workers": (int, "1"),
    "bcd.max_iters": (int, "200"),
    "bcd.tol_rel": (float, "1e-4"),
    "select.eta": (float, "0.5"),
    "select.m_min": (int, "1"),
    "select.refit_iters": (int, "30"),
    "select.final_iters": (int, "200"),
    "fieldmap.restarts": (int, "3"),
    "grid.x_min_m": (float, "0.5"),
    "grid.x_max_m": (float, "20"),
    "grid.num_x": (int, "201"),
    "grid.y_min_m": (float, "0"),
    "grid.y_max_m": (float, "20"),
    "grid.num_y": (int, "201"),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> value strings from a flat config file."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


def apply_env_overrides(raw: dict[str, str],
                        environ: dict[str, str]) -> dict[str, str]:
    out = dict(raw)
    for key in _SCHEMA:
        name = env_name(key)
        if name in environ:
            out[key] = environ[name]
    return out


def resolve(raw: dict[str, str]) -> dict[str, str]:
    """Fill defaults; the result is the canonical config for hashing."""
    resolved = {}
    for key, (_, default) in _SCHEMA.items():
        resolved[key] = raw.get(key, default)
    return resolved


def config_hash(resolved: dict[str, str]) -> str:
    canon = "\n".join(f"{k} = {resolved[k]}" for k in sorted(resolved))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of a resolved config."""

    scenario: ScenarioGeometry
    channel_model: str
    power_grid_dbm: tuple[float, ...]
    eve_distance_grid_m: tuple[float, ...]
    power_dbm: float
    trials: int
    seed: int
    variants: tuple[Variant, ...]
    output_dir: str
    workers: int
    bcd_max_iters: int
    bcd_tol_rel: float
    select_eta: float
    select_m_min: int
    select_refit_iters: int
    select_final_iters: int
    fieldmap_restarts: int
    grid_x: tuple[float, float, int]
    grid_y: tuple[float, float, int]
    resolved: tuple[tuple[str, str], ...]

    @property
    def sha256(self) -> str:
        return config_hash(dict(self.resolved))

    def with_eve_distance(self, distance_m: float) -> ScenarioGeometry:
        eve = replace(self.scenario.eve, distance_m=distance_m)
        return replace(self.scenario, eve=eve)

    def grid_points(self) -> np.ndarray:
        """Cartesian field grid, x fastest, shape (num_x * num_y, 2)."""
        x0, x1, nx = self.grid_x
        y0, y1, ny = self.grid_y
        xs = np.linspace(x0, x1, nx)
        ys = np.linspace(y0, y1, ny)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])


# Keys where an empty value means "derive it from the geometry".
_AUTO_KEYS = frozenset({
    "scenario.port_spacing_m",
    "scenario.bob.element_spacing_m",
    "scenario.eve.element_spacing_m",
})


def _typed(resolved: dict[str, str]) -> dict:
    typed = {}
    for key, (caster, _) in _SCHEMA.items():
        text = resolved[key]
        if text == "":
            if key not in _AUTO_KEYS:
                raise ConfigurationError(f"{key} cannot be empty")
            typed[key] = None
            continue
        try:
            typed[key] = caster(text)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad value for {key}: {text!r}") from exc
    return typed


def build_config(raw: dict[str, str]) -> ExperimentConfig:
    resolved = resolve(raw)
    t = _typed(resolved)

    freq_hz = t["scenario.carrier_freq_ghz"] * 1e9
    if freq_hz <= 0:
        raise ConfigurationError("carrier frequency must be positive")
    wavelength = 299_792_458.0 / freq_hz

    def receiver(side: str) -> ReceiverGeometry:
        spacing = t[f"scenario.{side}.element_spacing_m"]
        if spacing is None:
            spacing = 0.5 * wavelength
        return ReceiverGeometry(
            distance_m=t[f"scenario.{side}.distance_m"],
            azimuth_rad=float(np.deg2rad(t[f"scenario.{side}.azimuth_deg"])),
            num_elements=t[f"scenario.{side}.num_elements"],
            element_spacing_m=spacing)

    scenario = ScenarioGeometry.create(
        carrier_freq_hz=freq_hz,
        num_ports=t["scenario.num_ports"],
        num_active=t["scenario.num_active"],
        bob=receiver("bob"),
        eve=receiver("eve"),
        noise_power_w=dbm_to_watts(t["scenario.noise_power_dbm"]),
        num_streams=t["scenario.num_streams"],
        num_rf_chains=t["scenario.num_rf_chains"],
        port_spacing_m=t["scenario.port_spacing_m"])

    if t["channel.model"] not in ("fresnel", "exact"):
        raise ConfigurationError("channel.model must be fresnel or exact")
    if t["trials"] < 1:
        raise ConfigurationError("trials must be at least 1")
    if t["seed"] < 0:
        raise ConfigurationError("seed must be nonnegative")
    if t["workers"] < 1:
        raise ConfigurationError("workers must be at least 1")
    if t["fieldmap.restarts"] < 1:
        raise ConfigurationError("fieldmap.restarts must be at least 1")
    for grid_key in ("grid.num_x", "grid.num_y"):
        if t[grid_key] < 2:
            raise ConfigurationError(f"{grid_key} must be at least 2")
    if not t["sweep.power_dbm"] or not t["sweep.eve_distance_m"]:
        raise ConfigurationError("sweep grids cannot be empty")

    variants = tuple(Variant(tag) for tag in t["variants"])
    if not variants:
        raise ConfigurationError("variants cannot be empty")

    return ExperimentConfig(
        scenario=scenario,
        channel_model=t["channel.model"],
        power_grid_dbm=t["sweep.power_dbm"],
        eve_distance_grid_m=t["sweep.eve_distance_m"],
        power_dbm=t["power_dbm"],
        trials=t["trials"],
        seed=t["seed"],
        variants=variants,
        output_dir=t["output_dir"],
        workers=t["workers"],
        bcd_max_iters=t["bcd.max_iters"],
        bcd_tol_rel=t["bcd.tol_rel"],
        select_eta=t["select.eta"],
        select_m_min=t["select.m_min"],
        select_refit_iters=t["select.refit_iters"],
        select_final_iters=t["select.final_iters"],
        fieldmap_restarts=t["fieldmap.restarts"],
        grid_x=(t["grid.x_min_m"], t["grid.x_max_m"], t["grid.num_x"]),
        grid_y=(t["grid.y_min_m"], t["grid.y_max_m"], t["grid.num_y"]),
        resolved=tuple(sorted(resolved.items())))


def load_config(path: str | None, cli_overrides: dict[str, str] | None = None,
                environ: dict[str, str] | None = None) -> ExperimentConfig:
    """Read, override, and type a config file (None = all defaults)."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(
                f"cannot read config {path}: {exc}") from exc
    if environ is not None:
        raw = apply_env_overrides(raw, environ)
    for key, value in (cli_overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigurationError(f"unknown override key {key!r}")
        raw[key] = value
    return build_config(raw)
