"""Config files, frequency-table CSV and small artifact helpers.

Config format: ``[section]`` headers and ``key = value`` lines, ``#``
comments. See docs/formats.md for the schema.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .planner import PulsePlan
from .readout import ReadoutSettings
from .spin_model import SPECIES_PRESETS, ChainConfig, FrequencyTable, IonSpecies

# section -> key -> (type, required)
SCHEMA = {
    "species": {"name": (str, True), "g_e": (float, False), "gamma_n_over_2pi": (float, False), "A_over_h": (float, False)},
    "chain": {
        "n_ions": (int, True),
        "a": (float, True),
        "B0": (float, True),
        "dBdx": (float, True),
        "T": (float, True),
        "theta": (float, False),
    },
    "plan": {"f_nR_onequbit": (float, False), "f_nR_gate": (float, False), "f_eR": (float, False), "t1e": (float, False)},
    "readout": {
        "depth": (float, False),
        "noise": (float, False),
        "resolution_factor": (float, False),
        "n_samples": (int, False),
        "snr_threshold": (float, False),
    },
}


class ConfigError(ValueError):
    def __init__(self, source: str, line: int | None, key: str | None, message: str):
        where = f"{source}:{line}" if line is not None else source
        field = f" [{key}]" if key else ""
        super().__init__(f"{where}{field}: {message}")
        self.source, self.line, self.key = source, line, key


@dataclass(frozen=True)
class LoadedConfig:
    chain: ChainConfig
    plan: PulsePlan | None
    t1e: float
    readout: ReadoutSettings
    values: dict
    sha256: str


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """{"section.key": (raw value, line number)}."""
    values: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(source, lineno, None, f"malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(source, lineno, None, f"unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(source, lineno, None, f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            raise ConfigError(source, lineno, key, "key outside any section")
        if key not in SCHEMA[section]:
            raise ConfigError(source, lineno, f"{section}.{key}", "unknown field")
        full = f"{section}.{key}"
        if full in values:
            raise ConfigError(source, lineno, full, f"duplicate field (first set on line {values[full][1]})")
        values[full] = (value, lineno)
    return values


def _resolve_key(key: str) -> str:
    if "." in key:
        section, name = key.split(".", 1)
        if section in SCHEMA and name in SCHEMA[section]:
            return key
        raise KeyError(key)
    hits = [f"{s}.{key}" for s, fields in SCHEMA.items() if key in fields]
    if len(hits) != 1:
        raise KeyError(key)
    return hits[0]


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    out = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", None, item, "override must be key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        try:
            full = _resolve_key(key)
        except KeyError:
            raise ConfigError("--set", None, key, "unknown or ambiguous field") from None
        out[full] = (value, None)
    return out


def _typed(values: dict, full: str, source: str):
    section, name = full.split(".", 1)
    typ, _ = SCHEMA[section][name]
    raw, line = values[full]
    try:
        if typ is int:
            number = float(raw)
            if number != int(number):
                raise ValueError
            return int(number)
        return typ(raw)
    except ValueError:
        raise ConfigError(source if line is not None else "--set", line, full, f"cannot parse {raw!r} as {typ.__name__}") from None


def build_config(values: dict, source: str = "<config>") -> LoadedConfig:
    def get(full, default=None):
        if full in values:
            return _typed(values, full, source)
        section, name = full.split(".", 1)
        if SCHEMA[section][name][1]:
            raise ConfigError(source, None, full, "missing required field")
        return default

    def line_of(full):
        return values.get(full, (None, None))[1]

    name = get("species.name")
    preset = SPECIES_PRESETS.get(name)
    species_fields = {}
    for key, attr in (("g_e", "g_e"), ("gamma_n_over_2pi", "gamma_n_over_2pi"), ("A_over_h", "hyperfine_A_over_h")):
        value = get(f"species.{key}")
        if value is None:
            if preset is None:
                raise ConfigError(source, None, f"species.{key}", f"missing required field (no preset named {name!r})")
            value = getattr(preset, attr)
        species_fields[attr] = value
    try:
        species = IonSpecies(name=name, **species_fields)
    except ValueError as exc:
        raise ConfigError(source, line_of("species.name"), "species", str(exc)) from None

    chain_kwargs = dict(
        n_ions=get("chain.n_ions"),
        spacing_a=get("chain.a"),
        b0=get("chain.B0"),
        gradient_dB0_dx=get("chain.dBdx"),
        temperature=get("chain.T"),
        species=species,
        chain_axis_angle_theta=get("chain.theta", math.pi / 2),
    )
    try:
        chain = ChainConfig(**chain_kwargs)
    except ValueError as exc:
        msg = str(exc)
        field = next((k for k in ("n_ions", "spacing_a", "b0", "temperature") if msg.startswith(k)), None)
        key = {"n_ions": "chain.n_ions", "spacing_a": "chain.a", "b0": "chain.B0", "temperature": "chain.T"}.get(field)
        raise ConfigError(source, line_of(key) if key else None, key, msg) from None

    plan_values = [get("plan.f_nR_onequbit"), get("plan.f_nR_gate"), get("plan.f_eR")]
    plan = None
    if any(v is not None for v in plan_values):
        from .planner import default_plan

        defaults = default_plan(chain)
        plan = PulsePlan(
            *(v if v is not None else d for v, d in zip(plan_values, (defaults.f_nR_onequbit, defaults.f_nR_gate, defaults.f_eR)))
        )
    t1e = get("plan.t1e", 10e-3)

    base = ReadoutSettings()
    readout = ReadoutSettings(
        modulation_depth=get("readout.depth", base.modulation_depth),
        noise_sigma=get("readout.noise", base.noise_sigma),
        resolution_factor=get("readout.resolution_factor", base.resolution_factor),
        n_samples=get("readout.n_samples", base.n_samples),
        snr_threshold=get("readout.snr_threshold", base.snr_threshold),
    )
    canonical = "\n".join(f"{k}={values[k][0]}" for k in sorted(values))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    return LoadedConfig(chain, plan, t1e, readout, {k: v[0] for k, v in values.items()}, digest)


def load_config(path: str | Path, overrides: list[str] = ()) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), None, None, f"cannot read config: {exc.strerror}") from None
    values = parse_config_text(text, str(path))
    values = apply_overrides(values, list(overrides))
    return build_config(values, str(path))


def config_to_text(config: ChainConfig) -> str:
    s = config.species
    return (
        "[species]\n"
        f"name = {s.name}\n"
        f"g_e = {s.g_e:.17g}\n"
        f"gamma_n_over_2pi = {s.gamma_n_over_2pi:.17g}\n"
        f"A_over_h = {s.hyperfine_A_over_h:.17g}\n\n"
        "[chain]\n"
        f"n_ions = {config.n_ions}\n"
        f"a = {config.spacing_a:.17g}\n"
        f"B0 = {config.b0:.17g}\n"
        f"dBdx = {config.gradient_dB0_dx:.17g}\n"
        f"T = {config.temperature:.17g}\n"
        f"theta = {config.chain_axis_angle_theta:.17g}\n"
    )


# --- frequency-table CSV -------------------------------------------------------

TABLE_COLUMNS = ["k", "B_k", "f_e0", "f_e1", "f_n", "f_nd_k", "f_nd_prime_k"]
_TABLE_SCALARS = ["delta_f_e", "delta_f_n", "f_nd", "f_nd_prime"]


def frequency_table_to_csv(table: FrequencyTable, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={value}\n")
    for key in _TABLE_SCALARS:
        buf.write(f"# {key}={getattr(table, key):.17g}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for k in range(table.n_sites):
        w.writerow(
            [k]
            + [
                f"{v:.17g}"
                for v in (
                    table.field_b[k],
                    table.f_e0[k],
                    table.f_e1[k],
                    table.f_n[k],
                    table.f_nd_site[k],
                    table.f_nd_prime_site[k],
                )
            ]
        )
    return buf.getvalue()


def frequency_table_from_csv(text: str) -> tuple[FrequencyTable, dict]:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.DictReader(body))
    cols = {c: np.array([float(r[c]) for r in rows]) for c in TABLE_COLUMNS[1:]}
    table = FrequencyTable(
        field_b=cols["B_k"],
        f_e0=cols["f_e0"],
        f_e1=cols["f_e1"],
        f_n=cols["f_n"],
        f_nd_site=cols["f_nd_k"],
        f_nd_prime_site=cols["f_nd_prime_k"],
        **{k: float(meta.pop(k)) for k in _TABLE_SCALARS},
    )
    return table, meta
