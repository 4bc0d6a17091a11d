"""Scenario configuration files.

Grammar, one statement per line::

    # comment            (also ';')
    [section]            optional: scenario, qkd or noise
    key = value          value: number, bare word, or 'none'

Keys are unique across the whole file; inside a section only that section's
keys are accepted. A JSON object with the same flat keys (or a summary.json
holding one under "config") is accepted as well.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .harness import ScenarioConfig
from .noise import PhaseNoiseConfig
from .security import QKDParams, normalize_mode


class ConfigError(ValueError):
    pass


_VARIANT_ALIASES = {
    "biased": "biased",
    "biasedcascade": "biased",
    "symmetric": "symmetric",
    "symmetricsingle": "symmetric",
}

SCENARIO_KEYS = {
    "name": str,
    "distance_km": float,
    "voa_variant": str,
    "symmetric_target_db": float,
    "skr_mode": str,
    "noise_target_std_db": float,
    "duration_sec": float,
    "block_sec": float,
    "sample_rate_hz": float,
    "seed": int,
    "input_power_dbm": float,
    "reference_power_dbm": float,
    "reference_variance_snu": float,
    "reference_mode": str,
    "block_skr_mode": str,
    "shared_trace_with": str,
}
QKD_KEYS = {
    "modulation_variance_snu": float,
    "loss_coeff_db_per_km": float,
    "transmittance": float,
    "excess_noise_snu": float,
    "detector_efficiency": float,
    "electronic_noise_snu": float,
    "reconciliation_efficiency": float,
    "block_length": float,
    "pe_fraction": float,
    "epsilon_smooth": float,
    "epsilon_pe": float,
}
NOISE_KEYS = {
    "slow_sigma_rad": float,
    "slow_tau_sec": float,
    "fast_sigma_rad": float,
}
SECTIONS = {"scenario": SCENARIO_KEYS, "qkd": QKD_KEYS, "noise": NOISE_KEYS}
ALL_KEYS = {**SCENARIO_KEYS, **QKD_KEYS, **NOISE_KEYS}
NULLABLE = {"transmittance", "shared_trace_with"}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


@dataclass
class LoadedConfig:
    scenario: ScenarioConfig
    explicit: dict
    defaults_used: list
    source: str | None = None


def _coerce(key, raw, where):
    kind = ALL_KEYS[key]
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("none", "null")):
        if key in NULLABLE:
            return None
        raise ConfigError(f"{where}: '{key}' cannot be none")
    try:
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            value = int(raw) if not isinstance(raw, str) else int(raw.strip())
        elif kind is float:
            if isinstance(raw, bool):
                raise ValueError
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = str(raw).strip()
    except ValueError:
        raise ConfigError(f"{where}: invalid value {raw!r} for '{key}'") from None
    return value


def parse_text(text: str, source: str = "<string>") -> dict:
    """Parse the flat key/value grammar into {key: (value, line_number)}."""
    section = None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        where = f"{source}:{lineno}"
        m = _SECTION.match(stripped)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        m = _LINE.match(stripped)
        if not m:
            raise ConfigError(f"{where}: cannot parse '{stripped}'")
        key, raw = m.group(1).lower(), m.group(2)
        raw = re.split(r"\s[#;]", raw, maxsplit=1)[0].strip()
        allowed = SECTIONS[section] if section else ALL_KEYS
        if key not in allowed:
            scope = f"section [{section}]" if section else "config"
            raise ConfigError(f"{where}: unknown key '{key}' in {scope}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key '{key}' (first set on line {out[key][1]})")
        out[key] = (_coerce(key, raw, where), lineno)
    return out


def _from_mapping(mapping: dict, source: str) -> dict:
    out = {}
    for key, raw in mapping.items():
        if key not in ALL_KEYS:
            raise ConfigError(f"{source}: unknown key '{key}'")
        out[key] = (_coerce(key, raw, source), None)
    return out


def build_config(values: dict, seed_override: int | None = None, source: str | None = None) -> LoadedConfig:
    """Validated ScenarioConfig from {key: value}; records which defaults were used."""
    values = dict(values)
    if seed_override is not None:
        values["seed"] = int(seed_override)
    where = source or "config"
    if "voa_variant" in values:
        v = _VARIANT_ALIASES.get(str(values["voa_variant"]).lower())
        if v is None:
            raise ConfigError(f"{where}: voa_variant must be biased or symmetric")
        values["voa_variant"] = v
    for key in ("reference_mode", "block_skr_mode"):
        if key in values:
            values[key] = str(values[key]).lower()
    try:
        if "skr_mode" in values:
            values["skr_mode"] = normalize_mode(values["skr_mode"])
        qkd_kw = {k: values[k] for k in QKD_KEYS if k in values}
        if "block_length" in qkd_kw and qkd_kw["block_length"] < 1:
            raise ValueError("block_length must be >= 1")
        qkd = QKDParams(distance_km=values.get("distance_km", 30.0), **qkd_kw)
        scen_kw = {k: values[k] for k in SCENARIO_KEYS if k in values}
        noise_kw = {k: values[k] for k in NOISE_KEYS if k in values}
        if noise_kw:
            noise_kw.setdefault("slow_tau_sec", PhaseNoiseConfig.slow_tau_sec)
            noise_kw.update(
                duration_sec=values.get("duration_sec", ScenarioConfig.duration_sec),
                sample_rate_hz=values.get("sample_rate_hz", ScenarioConfig.sample_rate_hz),
            )
            scen_kw["noise"] = PhaseNoiseConfig(**noise_kw)
        cfg = ScenarioConfig(qkd=qkd, **scen_kw)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    defaults = sorted(k for k in ALL_KEYS if k not in values and not (k in NOISE_KEYS and cfg.noise is None))
    if cfg.noise is None:
        defaults.append("noise (calibrated to noise_target_std_db)")
    return LoadedConfig(cfg, values, defaults, source)


def load_config(path, seed_override: int | None = None) -> LoadedConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
        if isinstance(data, dict) and isinstance(data.get("config"), dict):
            data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: expected a JSON object")
        parsed = _from_mapping(data, str(p))
    else:
        parsed = parse_text(text, str(p))
    return build_config({k: v for k, (v, _) in parsed.items()}, seed_override, str(p))


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved flat config; feeding it back reproduces the run exactly."""
    out = {k: getattr(cfg, k) for k in SCENARIO_KEYS}
    q = cfg.qkd
    for k in QKD_KEYS:
        out[k] = getattr(q, k)
    if cfg.noise is not None:
        for k in NOISE_KEYS:
            out[k] = getattr(cfg.noise, k)
    return out

