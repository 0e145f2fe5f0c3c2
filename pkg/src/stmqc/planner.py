"""Frequency budget and addressability checks for a chain configuration.

Works on frequency tables only, so chains of any length are allowed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .spin_model import ChainConfig, build_frequency_table

PASS, FAIL, WARNING = "pass", "fail", "warning"


@dataclass(frozen=True)
class Check:
    name: str
    formula: str
    status: str
    margin: float
    anchor: str
    informational: bool = False


@dataclass
class ConstraintReport:
    checks: list[Check] = field(default_factory=list)
    collisions: list = field(default_factory=list)
    aliasing_offset: float = math.inf

    @property
    def status(self) -> str:
        statuses = {c.status for c in self.checks if not c.informational}
        if FAIL in statuses:
            return FAIL
        if WARNING in statuses:
            return WARNING
        return PASS

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, WARNING: 2}[self.status]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        width = max(len(c.name) for c in self.checks)
        fwidth = max(len(c.formula) for c in self.checks)
        lines = []
        for c in self.checks:
            tag = c.status.upper() + (" (informational)" if c.informational else "")
            lines.append(f"{c.name:<{width}}  {c.formula:<{fwidth}}  margin={c.margin:<12.6g} {tag:<24} [{c.anchor}]")
        lines.append(f"hyperfine aliasing offset: {self.aliasing_offset:.6g} sites")
        lines.append(f"collisions: {len(self.collisions)}")
        for j, k, pair, df in self.collisions[:20]:
            lines.append(f"  sites {j}/{k} {pair}: |df| = {df:.6g} Hz")
        lines.append(f"overall: {self.status.upper()}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "formula", "status", "margin", "anchor", "informational"])
        for c in self.checks:
            w.writerow([c.name, c.formula, c.status, f"{c.margin:.17g}", c.anchor, int(c.informational)])
        return buf.getvalue()


@dataclass(frozen=True)
class PulsePlan:
    f_nR_onequbit: float
    f_nR_gate: float
    f_eR: float


def default_plan(config: ChainConfig) -> PulsePlan:
    """Protocol defaults; a degenerate geometry (zero gradient or a single
    ion) falls back to the reference-chain values."""
    from .protocols import default_electron_rabi, default_gate_rabi, default_onequbit_rabi
    from .spin_model import reference_config

    values = [default_onequbit_rabi(config), default_gate_rabi(config), default_electron_rabi(config)]
    if min(values) <= 0:
        ref = reference_config(3)
        fallback = [default_onequbit_rabi(ref), default_gate_rabi(ref), default_electron_rabi(ref)]
        values = [v if v > 0 else f for v, f in zip(values, fallback)]
    return PulsePlan(*values)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num > 0 else 0.0
    return num / den


def _ratio_check(name, formula, num, den, anchor, on_fail=FAIL) -> Check:
    margin = _ratio(num, den)
    return Check(name, formula, PASS if margin > 1 else on_fail, margin, anchor)


def _transitions(config: ChainConfig, channels) -> list[tuple[float, int, str, str]]:
    """(frequency, site, label, channel) for every transition considered."""
    table = build_frequency_table(config)
    out = []
    for k in range(config.n_ions):
        if "electron" in channels:
            out.append((float(table.f_e0[k]), k, "f_e0", "electron"))
            out.append((float(table.f_e1[k]), k, "f_e1", "electron"))
        if "nuclear" in channels:
            out.append((float(table.f_n[k]), k, "f_n", "nuclear"))
    return out


def scan_frequency_collisions(
    config: ChainConfig,
    linewidth: float | Mapping[str, float],
    channels=("electron", "nuclear"),
) -> list[tuple[int, int, str, float]]:
    """Cross-site transition pairs of the same channel closer than the
    linewidth, sorted by site pair. ``linewidth`` may be given per channel."""
    widths = dict(linewidth) if isinstance(linewidth, Mapping) else {ch: float(linewidth) for ch in channels}
    channels = [ch for ch in channels if ch in widths]
    for ch in channels:
        if not widths[ch] > 0:
            raise ValueError("linewidth must be positive")
    found = []
    for ch in channels:
        trans = sorted(t for t in _transitions(config, (ch,)))
        freqs = np.array([t[0] for t in trans])
        width = widths[ch]
        for i, (f, site, label, _) in enumerate(trans):
            hi = np.searchsorted(freqs, f + width, side="left")
            for j in range(i + 1, hi):
                f2, site2, label2, _ = trans[j]
                if site2 == site:
                    continue
                (a, la), (b, lb) = sorted([(site, label), (site2, label2)])
                found.append((a, b, f"{la}/{lb}", abs(f2 - f)))
    return sorted(found)


def hyperfine_aliasing_offset(config: ChainConfig) -> float:
    """Site offset at which f_e1(x_{k+m}) meets f_e0(x_k): (A/h) / delta_f_e."""
    table = build_frequency_table(config)
    return _ratio(config.species.hyperfine_A_over_h, table.delta_f_e)


def check_budget(config: ChainConfig, plan: PulsePlan | None = None, t1e: float = 10e-3, linewidth=None) -> ConstraintReport:
    plan = default_plan(config) if plan is None else plan
    table = build_frequency_table(config)
    a_hz = config.species.hyperfine_A_over_h
    gate_time = 1.0 / (2.0 * plan.f_nR_gate)
    checks = [
        _ratio_check(
            "a_onequbit_selectivity",
            f"f_nR={plan.f_nR_onequbit:.6g} Hz < delta_f_n={table.delta_f_n:.6g} Hz",
            table.delta_f_n,
            plan.f_nR_onequbit,
            "nuclear Rabi frequency must be less than delta_f_n",
        ),
        _ratio_check(
            "b_gate_conditionality",
            f"f_nR_gate={plan.f_nR_gate:.6g} Hz < f_nd={table.f_nd:.6g} Hz",
            table.f_nd,
            plan.f_nR_gate,
            "CN step 2: f_nR less than f_nd",
            on_fail=WARNING,
        ),
        _ratio_check(
            "c_dipole_vs_gradient",
            f"f_nd={table.f_nd:.6g} Hz < delta_f_n={table.delta_f_n:.6g} Hz",
            table.delta_f_n,
            table.f_nd,
            "CN step 2: f_nd smaller than delta_f_n",
        ),
        _ratio_check(
            "d_electron_selectivity",
            f"f_eR={plan.f_eR:.6g} Hz < delta_f_e={table.delta_f_e:.6g} Hz",
            table.delta_f_e,
            plan.f_eR,
            "CN step 1: f_e1(x_k) unique in the chain",
        ),
        _ratio_check(
            "e_relaxation_budget",
            f"tau=1/(2 f_nR_gate)={gate_time:.6g} s < T1e={t1e:.6g} s",
            t1e,
            gate_time,
            "electron relaxation time must exceed the gate duration",
        ),
    ]
    if linewidth is None:
        # power-broadened linewidth, floored at 1 Hz for degenerate plans
        linewidth = {
            "electron": max(plan.f_eR, 1.0),
            "nuclear": max(plan.f_nR_onequbit, plan.f_nR_gate, 1.0),
        }
    collisions = scan_frequency_collisions(config, linewidth)
    checks.append(
        Check(
            "f_frequency_collisions",
            f"{len(collisions)} cross-site pairs within linewidth",
            PASS if not collisions else FAIL,
            math.inf if not collisions else 0.0,
            "every addressed transition frequency unique in the chain",
        )
    )
    literal = _ratio(table.delta_f_e, a_hz)
    checks.append(
        Check(
            "literal_hyperfine_vs_delta_f_e",
            f"A/h={a_hz:.6g} Hz < delta_f_e={table.delta_f_e:.6g} Hz",
            PASS if literal > 1 else FAIL,
            literal,
            "literal hyperfine-vs-gradient condition; superseded by check f",
            informational=True,
        )
    )
    return ConstraintReport(checks, collisions, hyperfine_aliasing_offset(config))
