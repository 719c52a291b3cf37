"""Command-line front end: bed | lag | srbits | dither | trace.

Each subcommand runs one study and writes its CSV artifacts into the
output directory (--out-dir, else $FXPSR_OUTPUT_DIR, else the current
directory), then prints a small summary table.  A flat key=value
config file can pre-set any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import experiments, neuron
from .backends import Backend
from .bed import MUL_CASES
from .esr import SolverKind
from .rng import GeneratorKind
from .rounding import RoundingMode, RoundingSpec
from .simulate import simulate

_ALL_SOLVERS = tuple(s.value for s in SolverKind)
_ALL_NEURONS = neuron.PRESET_NAMES

# Case names are also accepted with the dots elided (s1615xs1615).
_CASE_ALIASES = {name.replace(".", ""): name for name in MUL_CASES}


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_mode(text: str) -> RoundingSpec:
    text = text.strip().lower()
    if text.startswith("sr"):
        bits = int(text[2:]) if len(text) > 2 else 32
        return RoundingSpec(RoundingMode.SR, sr_bits=bits)
    return RoundingSpec(RoundingMode(text))


def _resolve_case(name: str) -> str:
    name = name.strip().lower()
    if name in MUL_CASES:
        return name
    try:
        return _CASE_ALIASES[name]
    except KeyError:
        raise SystemExit(f"error: unknown multiply case {name!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=1, help="base seed")
    p.add_argument("--rng", default="kiss99",
                   choices=[k.value for k in GeneratorKind])
    p.add_argument("--out-dir", default=None,
                   help="output directory (default $FXPSR_OUTPUT_DIR or .)")
    p.add_argument("--config", default=None,
                   help="flat key=value file pre-setting any flag")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fxpsr",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bed", help="multiply error-distribution suite")
    p.add_argument("--case", default="all",
                   help="multiply case name or 'all'")
    p.add_argument("--mode", default="all", help="rd|rn|sr|srK or 'all'")
    p.add_argument("--n", type=int, default=50_000)
    _add_common(p)

    p = sub.add_parser("lag", help="spike-lag study vs double reference")
    p.add_argument("--solver", default="all",
                   help=f"comma list of {'|'.join(_ALL_SOLVERS)} or 'all'")
    p.add_argument("--neuron", default="RS",
                   help=f"comma list of {'|'.join(_ALL_NEURONS)} or 'all'")
    p.add_argument("--backend", default=None,
                   help="comma list, e.g. fxp32:rd,fxp32:rn,fxp32:sr,float "
                        "(required here or in the config file)")
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--spike-index", default="650",
                   help="comma list of spike indices")
    _add_common(p)

    p = sub.add_parser("srbits", help="SR comparison bit-width sweep")
    p.add_argument("--solver", default="all")
    p.add_argument("--neuron", default="all")
    p.add_argument("--bits", default="2,4,6,8,12")
    p.add_argument("--repeats", type=int, default=100)
    _add_common(p)

    p = sub.add_parser("dither", help="input dither sweep")
    p.add_argument("--solver", default="rk2mid")
    p.add_argument("--neuron", default="RS,FS")
    p.add_argument("--backend", default="double,float,fxp32:rn,fxp32:sr")
    p.add_argument("--multipliers",
                   default=",".join(str(m) for m in
                                    experiments.DEFAULT_DITHER_MULTIPLIERS))
    p.add_argument("--repeats", type=int, default=40)
    _add_common(p)

    p = sub.add_parser("trace", help="single run, per-step state trace")
    p.add_argument("--solver", default="rk2mid")
    p.add_argument("--neuron", default="RS")
    p.add_argument("--backend", default=None,
                   help="backend label (required here or in the config file)")
    p.add_argument("--duration-ms", type=float, default=1000.0)
    _add_common(p)
    return ap


def _apply_config(argv: Sequence[str], ap: argparse.ArgumentParser):
    """Parse once to find --config, fold its keys in as defaults."""
    ns, _ = ap.parse_known_args(argv)
    path = getattr(ns, "config", None)
    if not path:
        return _check_required(ap, ap.parse_args(argv))
    defaults = {}
    try:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                if not _:
                    raise ValueError(f"malformed line: {line!r}")
                defaults[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise SystemExit(f"error: cannot read config: {exc}")
    except ValueError as exc:
        raise SystemExit(f"error: bad config file: {exc}")
    for action in ap._subparsers._group_actions[0].choices.values():
        known = {a.dest for a in action._actions}
        action.set_defaults(**{k: v for k, v in defaults.items()
                               if k in known})
    ns = ap.parse_args(argv)
    # Config values arrive as strings; coerce the numeric ones.
    for attr in ("seed", "repeats", "n"):
        if hasattr(ns, attr):
            setattr(ns, attr, int(getattr(ns, attr)))
    if hasattr(ns, "duration_ms"):
        ns.duration_ms = float(ns.duration_ms)
    return _check_required(ap, ns)


def _check_required(ap: argparse.ArgumentParser, ns):
    if getattr(ns, "backend", "") is None:
        sub = ap._subparsers._group_actions[0].choices[ns.command]
        sub.print_usage(sys.stderr)
        print(f"fxpsr {ns.command}: error: the following arguments are "
              "required: --backend", file=sys.stderr)
        raise SystemExit(2)
    return ns


def _solvers(arg: str) -> list[str]:
    return list(_ALL_SOLVERS) if arg == "all" else _split(arg)


def _neurons(arg: str) -> list[str]:
    return list(_ALL_NEURONS) if arg.lower() == "all" else \
        [n.upper() for n in _split(arg)]


def _cmd_bed(ns) -> int:
    out = experiments.output_dir(ns.out_dir)
    cases = list(MUL_CASES) if ns.case == "all" else \
        [_resolve_case(c) for c in _split(ns.case)]
    if ns.mode == "all":
        modes = [_parse_mode(m) for m in ("rd", "rn", "sr")]
    else:
        modes = [_parse_mode(m) for m in _split(ns.mode)]
    results = experiments.run_bed_suite(cases, modes, n=ns.n, seed=ns.seed,
                                        rng_kind=GeneratorKind(ns.rng))
    for r in results:
        name = r.case.replace(".", "")
        experiments.write_bed_samples_csv(
            os.path.join(out, f"bed_{name}_{r.mode}.csv"), r)
    experiments.write_bed_summary_csv(os.path.join(out, "bed_summary.csv"),
                                      results)
    print("case,mode,mean,sd,min,max")
    for r in results:
        print(f"{r.case},{r.mode},{r.mean:.6f},{r.sd:.6f},"
              f"{r.min:.6f},{r.max:.6f}")
    return 0


def _cmd_lag(ns) -> int:
    out = experiments.output_dir(ns.out_dir)
    solvers = _solvers(ns.solver)
    neurons = _neurons(ns.neuron)
    indices = tuple(int(i) for i in _split(ns.spike_index))
    cells = experiments.run_lag_study(
        solvers, neurons, _split(ns.backend), spike_indices=indices,
        repeats=ns.repeats, base_seed=ns.seed,
        rng_kind=GeneratorKind(ns.rng))
    experiments.write_lag_csv(os.path.join(out, "lag.csv"), cells)
    for s in solvers:
        for n in neurons:
            ref = experiments.reference_train(
                SolverKind(s), neuron.NeuronParams.preset(n), max(indices))
            experiments.write_spike_csv(
                os.path.join(out, f"spikes_ref_{s}_{n.lower()}.csv"), ref)
    print("solver,neuron,backend,spike_index,mean_lag_ms,sd_ms,n_runs")
    for c in cells:
        print(f"{c.solver.value},{c.neuron},{c.backend},{c.spike_index},"
              f"{c.mean_lag_ms:.3f},{c.sd_ms:.3f},{c.n_runs}")
    return 0


def _cmd_srbits(ns) -> int:
    out = experiments.output_dir(ns.out_dir)
    cells = experiments.run_sr_bits_sweep(
        _solvers(ns.solver), _neurons(ns.neuron),
        sr_bits=tuple(int(b) for b in _split(ns.bits)),
        repeats=ns.repeats, base_seed=ns.seed,
        rng_kind=GeneratorKind(ns.rng))
    experiments.write_srbits_csv(os.path.join(out, "srbits.csv"), cells)
    print("solver,neuron,k_bits,mean_lag650_ms,sd_ms")
    for c in cells:
        print(f"{c.solver.value},{c.neuron},{c.k_bits},"
              f"{c.mean_lag650_ms:.3f},{c.sd_ms:.3f}")
    return 0


def _cmd_dither(ns) -> int:
    out = experiments.output_dir(ns.out_dir)
    cells = experiments.run_dither_sweep(
        _solvers(ns.solver), _neurons(ns.neuron), _split(ns.backend),
        multipliers=tuple(float(m) for m in _split(ns.multipliers)),
        repeats=ns.repeats, base_seed=ns.seed,
        rng_kind=GeneratorKind(ns.rng))
    experiments.write_dither_csv(os.path.join(out, "dither.csv"), cells)
    print("solver,neuron,backend,multiplier,mean_lag650_ms,sd_ms")
    for c in cells:
        print(f"{c.solver.value},{c.neuron},{c.backend},{c.multiplier:g},"
              f"{c.mean_lag650_ms:.3f},{c.sd_ms:.3f}")
    return 0


def _cmd_trace(ns) -> int:
    out = experiments.output_dir(ns.out_dir)
    res = simulate(SolverKind(ns.solver), neuron.NeuronParams.preset(ns.neuron),
                   Backend.parse(ns.backend), duration_ms=ns.duration_ms,
                   seed=ns.seed, rng_kind=GeneratorKind(ns.rng),
                   record_trace=True)
    tag = f"{ns.solver}_{ns.neuron.lower()}_{ns.backend.replace(':', '-')}"
    experiments.write_trace_csv(os.path.join(out, f"trace_{tag}.csv"), res)
    experiments.write_spike_csv(os.path.join(out, f"spikes_{tag}.csv"), res)
    print(f"steps={res.steps_run} spikes={res.n_spikes} "
          f"draws={res.draws_used} saturations={res.saturations}")
    return 0


_COMMANDS = {"bed": _cmd_bed, "lag": _cmd_lag, "srbits": _cmd_srbits,
             "dither": _cmd_dither, "trace": _cmd_trace}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _build_parser()
    ns = _apply_config(sys.argv[1:] if argv is None else list(argv), ap)
    try:
        return _COMMANDS[ns.command](ns)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
