"""Command-line entry point: ``stmqc {plan,simulate,gate,readout,init}``.

Exit status: 0 all checks pass, 1 any failure, 2 warnings only,
3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ChainState, PulseSequence, run_sequence
from .fileio import ConfigError, LoadedConfig, frequency_table_to_csv, load_config
from .planner import check_budget, default_plan
from .protocols import GateSpec, cn_gate, cn_truth_table, initialize_chain, reports_to_csv
from .readout import (
    EXCITED,
    GROUND,
    ReadoutConfigError,
    detect_larmor,
    mixdown_for_site,
    site_candidates,
    synthesize_trace,
)
from .spin_model import CapacityError, build_frequency_table

EXIT_OK, EXIT_FAIL, EXIT_WARN, EXIT_USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    config_path: str
    subcommand: str
    seed: int = 0
    out_dir: str = "out"
    overrides: list = field(default_factory=list)


def _header(loaded: LoadedConfig, manifest: RunManifest) -> dict:
    return {"config_sha256": loaded.sha256, "seed": manifest.seed, "subcommand": manifest.subcommand}


def _header_lines(meta: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in meta.items())


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _bits(text: str | None, n: int, what: str) -> list[int]:
    if text is None:
        return [0] * n
    if len(text) != n or set(text) - {"0", "1"}:
        raise ValueError(f"--{what} must be {n} characters of 0/1, got {text!r}")
    return [int(c) for c in text]


def cmd_plan(manifest: RunManifest, loaded: LoadedConfig) -> int:
    config = loaded.chain
    table = build_frequency_table(config)
    plan = loaded.plan or default_plan(config)
    report = check_budget(config, plan, loaded.t1e)
    meta = _header(loaded, manifest)
    out = Path(manifest.out_dir)
    _write(out, "frequency_table.csv", frequency_table_to_csv(table, meta))
    summary = (
        _header_lines(meta)
        + f"delta_f_e_hz: {table.delta_f_e:.17g}\n"
        + f"delta_f_n_hz: {table.delta_f_n:.17g}\n"
        + f"f_nd_hz: {table.f_nd:.17g}\n"
        + f"f_nd_prime_hz: {table.f_nd_prime:.17g}\n"
        + f"hyperfine_A_over_h_hz: {config.species.hyperfine_A_over_h:.17g}\n"
        + report.to_text()
    )
    _write(out, "constraints.txt", summary)
    _write(out, "constraints.csv", _header_lines(meta) + report.to_csv())
    print(summary, end="")
    return report.exit_code


def cmd_simulate(manifest: RunManifest, loaded: LoadedConfig, args) -> int:
    config = loaded.chain
    config.check_capacity()
    n = config.n_ions
    seq_path = Path(args.sequence)
    seq = PulseSequence.from_text(seq_path.read_text(), str(seq_path))
    state = ChainState.from_bits(_bits(args.electron, n, "electron"), _bits(args.nuclear, n, "nuclear"))
    e0, n0 = state.excited_populations()
    final = run_sequence(state, seq, config)
    e1, n1 = final.excited_populations()
    meta = _header(loaded, manifest)
    buf = io.StringIO()
    buf.write(_header_lines(meta))
    buf.write(f"# sequence_duration_s={seq.duration:.17g}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "electron_excited_initial", "electron_excited_final", "nuclear_excited_initial", "nuclear_excited_final"])
    for k in range(n):
        w.writerow([k] + [f"{v:.17g}" for v in (e0[k], e1[k], n0[k], n1[k])])
    text = buf.getvalue()
    _write(Path(manifest.out_dir), "simulate_summary.csv", text)
    print(text, end="")
    return EXIT_OK


def cmd_gate(manifest: RunManifest, loaded: LoadedConfig, args) -> int:
    config = loaded.chain
    config.check_capacity()
    plan = loaded.plan or default_plan(config)
    gate = GateSpec(args.control, args.target, nuclear_rabi=plan.f_nR_gate, electron_rabi=plan.f_eR)
    step3 = args.step3
    corrected = not args.no_phase_correction
    _, report = cn_gate(ChainState.ground(config.n_ions), gate, config, step3, corrected)
    truth = cn_truth_table(config, gate, step3, corrected)
    meta = _header(loaded, manifest)
    buf = io.StringIO()
    buf.write(_header_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["control_in", "target_in", "expected_out", "most_probable_out", "population_fidelity"])
    ok = True
    for (c, t), (pop, best) in sorted(truth.items()):
        expected = (c, t ^ c)
        ok &= best == expected and pop >= 0.99
        w.writerow([c, t, f"{expected[0]}{expected[1]}", f"{best[0]}{best[1]}", f"{pop:.17g}"])
    out = Path(manifest.out_dir)
    _write(out, "truth_table.csv", buf.getvalue())
    text = _header_lines(meta) + report.to_text()
    _write(out, "gate_report.txt", text)
    _write(out, "gate_report.csv", _header_lines(meta) + reports_to_csv([report]))
    print(buf.getvalue() + text, end="")
    if not ok:
        return EXIT_FAIL
    return EXIT_WARN if report.warnings else EXIT_OK


def cmd_readout(manifest: RunManifest, loaded: LoadedConfig, args) -> int:
    config = loaded.chain
    if not 0 <= args.site < config.n_ions:
        raise ValueError(f"--site {args.site} outside chain of {config.n_ions} ions")
    settings = loaded.readout
    cand = site_candidates(config, args.site)
    splitting = config.species.hyperfine_A_over_h
    duration = args.duration if args.duration is not None else settings.resolve(splitting)[0]
    rate = args.sample_rate if args.sample_rate is not None else settings.n_samples / duration
    lo = mixdown_for_site(cand)
    truth = cand["f_e1"] if args.truth == "excited" else cand["f_e0"]
    expected = EXCITED if args.truth == "excited" else GROUND
    noise = settings.noise_sigma if args.noise is None else args.noise
    meta = _header(loaded, manifest)
    out = Path(manifest.out_dir)

    trace = synthesize_trace(truth, settings.modulation_depth, noise, duration, rate, lo, manifest.seed)
    result = detect_larmor(trace, cand, settings.snr_threshold)
    buf = io.StringIO()
    buf.write(_header_lines(meta))
    buf.write(f"# sample_rate_hz={trace.sample_rate:.17g}\n# mixdown_frequency_hz={trace.mixdown_frequency:.17g}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "current"])
    for t, x in zip(trace.times(), trace.samples):
        w.writerow([f"{t:.17g}", f"{x:.17g}"])
    _write(out, "trace.csv", buf.getvalue())
    summary = (
        _header_lines(meta)
        + f"site: {args.site}\ntruth: {expected}\n"
        + f"f_e0_hz: {cand['f_e0']:.17g}\nf_e1_hz: {cand['f_e1']:.17g}\n"
        + f"estimated_frequency_hz: {result.estimated_frequency:.17g}\n"
        + f"decided_state: {result.decided_state}\npeak_snr: {result.peak_snr:.6g}\n"
    )
    if args.noise_sweep:
        rows = ["noise_sigma,correct_rate,indeterminate_rate,trials"]
        for sigma in args.noise_sweep:
            correct = indeterminate = 0
            for i in range(args.trials):
                tr = synthesize_trace(truth, settings.modulation_depth, sigma, duration, rate, lo, manifest.seed + i)
                decided = detect_larmor(tr, cand, settings.snr_threshold).decided_state
                correct += decided == expected
                indeterminate += decided not in (GROUND, EXCITED)
            rows.append(f"{sigma:.17g},{correct / args.trials:.17g},{indeterminate / args.trials:.17g},{args.trials}")
        sweep = _header_lines(meta) + "\n".join(rows) + "\n"
        _write(out, "noise_sweep.csv", sweep)
        summary += "noise sweep:\n" + "\n".join(rows[1:]) + "\n"
    _write(out, "detection.txt", summary)
    print(summary, end="")
    if result.decided_state == expected:
        return EXIT_OK
    return EXIT_WARN if result.bit is None else EXIT_FAIL


def cmd_init(manifest: RunManifest, loaded: LoadedConfig, args) -> int:
    config = loaded.chain
    config.check_capacity()
    n = config.n_ions
    plan = loaded.plan or default_plan(config)
    state = ChainState.from_bits([0] * n, _bits(args.nuclear, n, "nuclear"))
    final, report = initialize_chain(config, state, loaded.readout, manifest.seed, plan.f_nR_onequbit)
    meta = _header(loaded, manifest)
    text = _header_lines(meta) + report.to_text()
    out = Path(manifest.out_dir)
    _write(out, "init_report.txt", text)
    _write(out, "init_report.csv", _header_lines(meta) + reports_to_csv([report]))
    print(text, end="")
    if report.aborted or report.fidelity["all_ground_probability"] <= 0.99:
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="config file (key = value with [sections])")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--set", action="append", dest="overrides", default=argparse.SUPPRESS, metavar="KEY=VALUE")

    parser = _Parser(prog="stmqc", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", default="configs/reference.cfg")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out")
    parser.add_argument("--set", action="append", dest="overrides", default=[], metavar="KEY=VALUE")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("plan", parents=[common], help="frequency table and constraint report")

    p = sub.add_parser("simulate", parents=[common], help="run a pulse-sequence file")
    p.add_argument("sequence")
    p.add_argument("--nuclear", help="initial nuclear bits, site 0 first (default all 0)")
    p.add_argument("--electron", help="initial electron bits (default all 0)")

    p = sub.add_parser("gate", parents=[common], help="Control-Not truth table and fidelity")
    p.add_argument("--control", type=int, default=0)
    p.add_argument("--target", type=int, default=1)
    p.add_argument("--step3", choices=("adjusted", "repeat"), default="adjusted")
    p.add_argument("--no-phase-correction", action="store_true")

    p = sub.add_parser("readout", parents=[common], help="synthesize and detect one readout trace")
    p.add_argument("--site", type=int, default=0)
    p.add_argument("--truth", choices=("ground", "excited"), default="ground")
    p.add_argument("--noise", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--noise-sweep", type=lambda s: [float(x) for x in s.split(",")])
    p.add_argument("--trials", type=int, default=200)

    p = sub.add_parser("init", parents=[common], help="initialize the nuclear chain to ground")
    p.add_argument("--nuclear", help="initial nuclear bits (default all 0)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(args.config, args.command, args.seed, args.out, list(args.overrides))
    try:
        loaded = load_config(manifest.config_path, manifest.overrides)
        if args.command == "plan":
            return cmd_plan(manifest, loaded)
        handler = {"simulate": cmd_simulate, "gate": cmd_gate, "readout": cmd_readout, "init": cmd_init}[args.command]
        return handler(manifest, loaded, args)
    except (ConfigError, CapacityError, ReadoutConfigError, ValueError, IndexError, OSError) as exc:
        print(f"stmqc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
