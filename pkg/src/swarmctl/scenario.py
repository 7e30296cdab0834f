"""Strict JSON scenario files.

Every key is optional; omitted keys take the default configuration (control
gains, formation geometry, radio parameters). Unknown keys and derived
quantities are rejected, and error messages carry the dotted key path.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .dde import DEFAULT_PERIOD, DEFAULT_STEP, scenario_digest
from .errors import ConfigError
from .formation import FormationTargets
from .stability import DEFAULT_K, ControlGains
from .wireless import WirelessParams

DERIVED_KEYS = {
    "targets": {"x_bar_23", "x_bar_32", "y_bar_23", "y_bar_32"},
    "radio": {"eta", "noise_power"},
}


@dataclass(frozen=True)
class SimSettings:
    step: float = DEFAULT_STEP          # s
    horizon: float = 30.0               # s
    delay_resample: float = DEFAULT_PERIOD  # s


@dataclass(frozen=True)
class Scenario:
    gains: ControlGains = field(default_factory=ControlGains)
    targets: FormationTargets = field(default_factory=FormationTargets)
    radio: WirelessParams = field(default_factory=WirelessParams)
    k: float = DEFAULT_K
    sim: SimSettings = field(default_factory=SimSettings)
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "gains": asdict(self.gains),
            "targets": asdict(self.targets),
            "radio": asdict(self.radio),
            "k": self.k,
            "sim": asdict(self.sim),
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return scenario_digest(json.dumps(self.to_dict(), sort_keys=True))

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(self.gains, self.targets, self.radio, self.k, self.sim, _seed(seed, "seed"))


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _seed(value: Any, path: str) -> int:
    v = _integer(value, path)
    if not 0 <= v < 2 ** 64:
        raise ConfigError(f"{path}: must be in [0, 2^64)")
    return v


def _section(raw: Any, cls, path: str, integer_keys=()) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        where = f"{path}.{key}"
        if key in DERIVED_KEYS.get(path, ()):
            raise ConfigError(f"{where}: derived field, computed from the other inputs and must not be given")
        if key not in known:
            raise ConfigError(f"{where}: unknown key")
        kwargs[key] = _integer(value, where) if key in integer_keys else _number(value, where)
    return kwargs


def scenario_from_dict(raw: Any) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    top = {"gains", "targets", "radio", "k", "sim", "seed"}
    for key in raw:
        if key not in top:
            raise ConfigError(f"{key}: unknown key")

    gains_kw = _section(raw.get("gains", {}), ControlGains, "gains")
    gains = ControlGains(**gains_kw)
    for name, value in asdict(gains).items():
        if value <= 0:
            raise ConfigError(f"gains.{name}: must be > 0 (got {value})")

    targets = FormationTargets(**_section(raw.get("targets", {}), FormationTargets, "targets"))

    radio_kw = _section(raw.get("radio", {}), WirelessParams, "radio", integer_keys=("beta",))
    checks = {
        "beta": (lambda v: v >= 1, "must be a positive integer"),
        "alpha": (lambda v: v > 2, "must be > 2"),
        "density_lambda": (lambda v: v >= 0, "must be >= 0"),
        "p_t": (lambda v: v > 0, "must be > 0"),
        "noise_psd": (lambda v: v >= 0, "must be >= 0"),
        "bandwidth_omega": (lambda v: v > 0, "must be > 0"),
        "packet_bits_s": (lambda v: v > 0, "must be > 0"),
    }
    for key, value in radio_kw.items():
        ok, msg = checks[key]
        if not ok(value):
            raise ConfigError(f"radio.{key}: {msg} (got {value})")
    radio = WirelessParams(**radio_kw)

    k = _number(raw["k"], "k") if "k" in raw else DEFAULT_K
    if not k > 1:
        raise ConfigError(f"k: must be > 1 (got {k})")

    sim = SimSettings(**_section(raw.get("sim", {}), SimSettings, "sim"))
    for name, value in asdict(sim).items():
        if not value > 0:
            raise ConfigError(f"sim.{name}: must be > 0 (got {value})")
    if sim.step > 1e-3:
        raise ConfigError(f"sim.step: must be <= 0.001 s (got {sim.step})")
    for name in ("horizon", "delay_resample"):
        ratio = getattr(sim, name) / sim.step
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"sim.{name}: must be an integer multiple of sim.step")

    seed = _seed(raw["seed"], "seed") if "seed" in raw else 0
    return Scenario(gains, targets, radio, k, sim, seed)


def _reject_constant(token: str):
    raise ValueError(f"non-finite literal {token}")


def _nearest_key(text: str, pos: int) -> str | None:
    keys = re.findall(r'"([^"\\]+)"\s*:', text[:pos])
    return keys[-1] if keys else None


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        key = _nearest_key(text, exc.pos)
        near = f" near key '{key}'" if key else ""
        raise ConfigError(f"{source}: parse error{near} (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    except ValueError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    return scenario_from_dict(raw)


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read scenario file ({exc.strerror})") from None
    return loads_scenario(text, str(p))
