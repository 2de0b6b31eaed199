"""Physical configuration, link geometry and the RF power budget."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

USERS = ("T", "R")


class ConfigError(ValueError):
    """Configuration failed validation. ``problems`` maps field names to messages."""

    def __init__(self, problems: dict[str, str]):
        self.problems = dict(problems)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.problems.items()))


@dataclass(frozen=True)
class ScenarioConfig:
    # geometry [m]
    h_ogs: float = 50.0
    h_hap: float = 18_000.0
    h_es: float = 50.0
    h_star: float = 100.0
    h_user_t: float = 100.0
    h_user_r: float = 2.0
    d_es_star: float = 500.0
    d_star_t: float = 10.0
    d_star_r: float = 500.0
    # angles [rad]
    theta_i: float = math.pi / 6
    theta_r: float = math.pi / 7
    phi_r: float = math.pi
    theta_rl: float = 0.0
    # optics
    wavelength: float = 1550e-9
    beam_radius: float = 1e-3
    waist_hap: float = 0.1
    waist_mode: str = "direct"
    focal_length: float | None = None  # None = collimated (infinite)
    wind_rms: float = 30.0
    hv_a: float = 1.7e-13
    aperture: float = 0.025
    jitter_source: float = 0.0125
    jitter_oirs: float = 0.0125
    jitter_lens: float = 0.0125
    reflection_eff: float = 1.0
    absorption: float = 0.43e-3
    series_terms: int = 5
    n_f: int = 3
    detection: int = 1
    # relay and RF
    relay_c: float = 1.0
    m_a: float = 1.5
    m_t: float = 2.5
    m_r: float = 1.5
    omega_a: float = 1.0
    omega_t: float = 1.0
    omega_r: float = 1.0
    rho_t: float = 0.8
    rho_r: float = 0.6
    noise_rf: float = 1e-10
    p_r_db: float = 0.0
    carrier_hz: float = 5e9
    g_tx_db: float = 2.0
    g_rx_db: float = 2.0
    n_r: int = 16
    kg_fit: str = "modulus"
    gamma_th_db: float = 2.0
    gamma_r_override_db_t: float | None = None
    gamma_r_override_db_r: float | None = None

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def user_params(self, user: str):
        """(horizontal distance, height, Nakagami shape, spread, power split) of a user."""
        if user == "T":
            return self.d_star_t, self.h_user_t, self.m_t, self.omega_t, self.rho_t
        if user == "R":
            return self.d_star_r, self.h_user_r, self.m_r, self.omega_r, self.rho_r
        raise ValueError(f"user must be 'T' or 'R', got {user!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ScenarioConfig))
FLOAT_FIELDS = tuple(f.name for f in dataclasses.fields(ScenarioConfig)
                     if f.name not in ("series_terms", "n_f", "n_r", "detection", "waist_mode", "kg_fit"))


def validate(cfg: ScenarioConfig) -> None:
    bad: dict[str, str] = {}
    if not abs(cfg.rho_t ** 2 + cfg.rho_r ** 2 - 1.0) < 1e-9:
        bad["rho_t"] = (f"power split must satisfy rho_t^2 + rho_r^2 = 1, "
                        f"got {cfg.rho_t ** 2 + cfg.rho_r ** 2:.6g}")
    if not cfg.h_ogs < cfg.h_hap:
        bad["h_ogs"] = "OGS must be below the HAP"
    if not cfg.h_es < cfg.h_hap:
        bad["h_es"] = "ES must be below the HAP"
    for name in ("d_es_star", "d_star_t", "d_star_r", "wavelength", "beam_radius",
                 "waist_hap", "aperture", "carrier_hz", "relay_c", "noise_rf",
                 "m_a", "m_t", "m_r", "omega_a", "omega_t", "omega_r"):
        if not getattr(cfg, name) > 0:
            bad[name] = "must be positive"
    for name in ("theta_i", "theta_r"):
        v = getattr(cfg, name)
        if not 0 <= v < math.pi / 2:
            bad[name] = "incidence/zenith angle must lie in [0, pi/2)"
    if cfg.detection not in (1, 2):
        bad["detection"] = "detection order r must be 1 (heterodyne) or 2 (IM/DD)"
    if not 0 < cfg.reflection_eff <= 1:
        bad["reflection_eff"] = "must lie in (0, 1]"
    if cfg.absorption < 0:
        bad["absorption"] = "must be non-negative"
    if min(cfg.jitter_source, cfg.jitter_oirs, cfg.jitter_lens) < 0:
        bad["jitter_source"] = "jitter standard deviations must be non-negative"
    if cfg.series_terms < 0:
        bad["series_terms"] = "must be >= 0"
    if cfg.n_f < 1:
        bad["n_f"] = "need at least one optical path"
    if cfg.n_r < 1:
        bad["n_r"] = "need at least one STAR-IRS element"
    if cfg.kg_fit not in ("strict", "modulus"):
        bad["kg_fit"] = "must be 'strict' or 'modulus'"
    if cfg.waist_mode not in ("direct", "propagate"):
        bad["waist_mode"] = "must be 'direct' or 'propagate'"
    if cfg.focal_length is not None and cfg.focal_length == 0:
        bad["focal_length"] = "use null for a collimated beam"
    if bad:
        raise ConfigError(bad)


# ---------------------------------------------------------------------------
# JSON config files

def schema() -> dict:
    return json.loads(resources.files("ntnlink.data").joinpath("scenario.schema.json").read_text())


def from_dict(data: dict) -> ScenarioConfig:
    """Build a config from parsed JSON, reporting every schema problem by field."""
    validator = jsonschema.Draft202012Validator(schema())
    problems = {}
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.path)):
        if err.validator == "required":
            for name in sorted(set(err.validator_value) - set(data)):
                problems[name] = "missing field"
        elif err.validator == "additionalProperties":
            for name in sorted(set(data) - set(err.schema["properties"])):
                problems[name] = "unknown key"
        else:
            name = ".".join(str(v) for v in err.path) or "<root>"
            problems.setdefault(name, err.message)
    if problems:
        raise ConfigError(problems)
    kwargs = {k: v for k, v in data.items() if not k.startswith("$")}
    for k in FLOAT_FIELDS:
        if kwargs[k] is not None:
            kwargs[k] = float(kwargs[k])
    return ScenarioConfig(**kwargs)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError({"<file>": f"invalid JSON: {exc}"}) from None
    if not isinstance(data, dict):
        raise ConfigError({"<file>": "top level must be an object"})
    return from_dict(data)


def table2() -> ScenarioConfig:
    """The reference scenario shipped with the package."""
    data = json.loads(resources.files("ntnlink.data").joinpath("table2.json").read_text())
    return from_dict(data)


# ---------------------------------------------------------------------------
# geometry and RF budget

@dataclass(frozen=True)
class LinkGeometry:
    d_oh: float
    d_he: float
    d_es: float
    d_s: dict = field(default_factory=dict)  # user -> STAR-IRS to user distance

    def d_star_user(self, user: str) -> float:
        return self.d_s[user]


def derive_geometry(cfg: ScenarioConfig) -> LinkGeometry:
    ci, cr = math.cos(cfg.theta_i), math.cos(cfg.theta_r)
    if ci <= 0 or cr <= 0:
        raise ConfigError({"theta_i": "slant path undefined at grazing incidence"})
    d_oh = (cfg.h_hap - cfg.h_ogs) / ci
    d_he = (cfg.h_hap - cfg.h_es) / cr
    d_es = math.hypot(cfg.d_es_star, cfg.h_star - cfg.h_es)
    d_s = {u: math.hypot(cfg.user_params(u)[0], cfg.h_star - cfg.user_params(u)[1]) for u in USERS}
    if min(d_oh, d_he, d_es, *d_s.values()) <= 0:
        raise ConfigError({"geometry": "degenerate link geometry"})
    return LinkGeometry(d_oh, d_he, d_es, d_s)


@dataclass(frozen=True)
class RfBudget:
    path_loss_db: float
    received_db: float
    gamma_bar_db: float
    gamma_bar: float
    overridden: bool = False


def path_loss_db(distance_m: float, carrier_hz: float) -> float:
    """40 log10(d) + 20 log10(f), with f expressed in GHz."""
    return 40.0 * math.log10(distance_m) + 20.0 * math.log10(carrier_hz / 1e9)


def rf_mean_snr(cfg: ScenarioConfig, geom: LinkGeometry, user: str) -> RfBudget:
    """Mean RF SNR per unit cascade power for user ``user``.

    An override in the config pins the linear value directly.
    """
    rho = cfg.user_params(user)[4]
    override = cfg.gamma_r_override_db_t if user == "T" else cfg.gamma_r_override_db_r
    loss = path_loss_db(geom.d_es + geom.d_star_user(user), cfg.carrier_hz)
    p_db = cfg.p_r_db - loss + cfg.g_tx_db + cfg.g_rx_db
    if override is not None:
        g_db = float(override)
        return RfBudget(loss, p_db, g_db, 10 ** (g_db / 10), overridden=True)
    g = 10 ** (p_db / 10) * rho ** 2 / cfg.noise_rf
    return RfBudget(loss, p_db, 10 * math.log10(g), g)


def db2lin(x_db):
    return 10.0 ** (x_db / 10.0)


def lin2db(x):
    return 10.0 * math.log10(x)
