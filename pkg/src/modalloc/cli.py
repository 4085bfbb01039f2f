"""Command-line entry point: ``modalloc <subcommand> [options]``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, lti, matrix_io, reduction, ringdown
from .allocator import AllocatorConfig, AllocatorState, allocate, fixed_allocate
from .config import DEFAULTS, RunConfig, parse_value, show_config
from .errors import ConfigError, IllConditioned, ModalAllocError, OrderTooLarge
from .matrix_io import fmt

log = logging.getLogger("modalloc")

SUBCOMMANDS = ("bench", "reduce", "modal", "allocate", "simulate", "sweep", "prony")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    log.info("wrote %s", path)


def read_csv(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric CSV data ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: rows do not match the {len(header)}-column header")
    return header, data


# -- builders shared by subcommands ---------------------------------------


def load_design(cfg, plant_prefix=None):
    plant = matrix_io.read_plant(plant_prefix or cfg["plant"])
    return harness.design_plant(plant, cfg.auto("reduced_order"), float(cfg["hankel_threshold"]))


def allocator_config(cfg, effectiveness, modal=None):
    w_v = cfg["w_v"]
    if w_v == "auto":
        if modal is None:
            w_v = 1.0
        else:
            w_v = harness.default_modal_weights(modal)
    return AllocatorConfig(effectiveness, w_u=cfg["w_u"], w_s=cfg["w_s"], w_v=w_v,
                           lam=cfg["lambda"], rho=cfg["rho"], u_min=cfg["u_min"],
                           u_max=cfg["u_max"], t_s=cfg["ts"])


def load_controller(prefix):
    mats = {}
    for key in ("Ak", "Bk", "Ck", "Dk"):
        path = Path(f"{prefix}_{key}{matrix_io.SUFFIX}")
        if not path.exists():
            raise ConfigError(f"controller matrix file not found: {path}")
        mats[key] = matrix_io.read_matrix(path)
    return lti.DynamicController(mats["Ak"], mats["Bk"], mats["Ck"], mats["Dk"])


def parse_disturbance(cfg):
    value = cfg["disturbance"]
    per_cycle = float(cfg["amplitude_per_cycle"])
    if isinstance(value, (int, float)):
        return harness.Disturbance(magnitude=per_cycle * float(value), frequency_hz=float(cfg["critical_hz"]))
    if isinstance(value, dict):
        unknown = set(value) - {"kind", "magnitude", "frequency_hz", "vector", "cycles"}
        if unknown:
            raise ConfigError(f"unknown disturbance field(s): {sorted(unknown)}")
        spec = dict(value)
        if "cycles" in spec:
            spec["magnitude"] = per_cycle * float(spec.pop("cycles"))
        spec.setdefault("frequency_hz", float(cfg["critical_hz"]))
        return harness.Disturbance(**spec)
    raise ConfigError(f"disturbance must be a number of cycles or a dict, got {value!r}")


def parse_failures(value):
    if not isinstance(value, (list, tuple)):
        raise ConfigError("failures must be a list of [actuator, fail_time, recover_time]")
    out = []
    for item in value:
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ConfigError(f"failure entry {item!r} must be [actuator, fail_time, recover_time]")
        out.append((int(item[0]), float(item[1]), float(item[2])))
    return out


def build_scenario(cfg, design, mode=None):
    alloc_cfg = allocator_config(cfg, design.effectiveness, design.modal)
    controller = None
    gain = None
    if cfg["controller"]:
        controller = load_controller(cfg["controller"])
        if controller.d_k.shape[0] != design.modal.lambda_matrix.shape[0]:
            raise ConfigError("controller output size must equal the reduced order")
    else:
        gain = harness.design_gain(design.modal, float(cfg["design_damping"]))
    order = cfg.auto("prony_order")
    return harness.Scenario(
        design=design,
        allocator_cfg=alloc_cfg,
        allocation_mode=mode or cfg["mode"],
        controller=controller,
        gain=gain,
        disturbance=parse_disturbance(cfg),
        fault_schedule=parse_failures(cfg["failures"]),
        t_end=float(cfg["t_end"]),
        critical_hz=float(cfg["critical_hz"]),
        band_hz=float(cfg["band_hz"]),
        prony_start=float(cfg["prony_start"]),
        prony_order=None if order is None else int(order),
        prony_decimate=int(cfg["prony_decimate"]),
    )


# -- subcommands -----------------------------------------------------------


def cmd_bench(cfg, args):
    out = cfg.output_dir
    plant, meta = harness.make_benchmark(seed=int(cfg["seed"]), m_actuators=int(cfg["actuators"]),
                                         bound=float(cfg["u_max"]) if np.isscalar(cfg["u_max"]) else 0.4)
    prefix = out / "plant"
    matrix_io.write_plant(prefix, plant)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s_*.mtx.txt and metadata.json", prefix)
    if args.plot:
        design = harness.design_plant(plant)
        scen = build_scenario(cfg, design, mode="none")
        res = harness.run(scen)
        from .plot import line_plot
        line_plot(out / "bench.svg", res.t, {f"y{i + 1}": res.outputs[:, i] for i in range(res.outputs.shape[1])},
                  title="open-loop ringdown", xlabel="t (s)", ylabel="y")
    return 0


def cmd_reduce(cfg, args):
    out = cfg.output_dir
    plant = matrix_io.read_plant(args.plant or cfg["plant"])
    spectrum = reduction.hankel_singular_values(plant, float(cfg["hankel_threshold"]))
    order = args.order or cfg.auto("reduced_order") or spectrum.suggested_order
    reduced = reduction.balanced_truncate(plant, int(order))
    write_csv(out / "hankel.csv", ["index", "value"],
              [(str(i), v) for i, v in enumerate(spectrum.values)])
    matrix_io.write_plant(out / "reduced", reduced)
    print(f"suggested_order={spectrum.suggested_order} order={int(order)} "
          f"error_bound={fmt(reduction.truncation_error_bound(spectrum, int(order)))}")
    if args.plot:
        from .plot import line_plot
        idx = np.arange(spectrum.values.size)
        line_plot(out / "hankel.svg", idx, {"log10 hsv": np.log10(np.maximum(spectrum.values, 1e-300))},
                  title="Hankel singular values", xlabel="index", ylabel="log10 value")
    return 0


def cmd_modal(cfg, args):
    out = cfg.output_dir
    design = load_design(cfg, args.plant)
    modal = design.modal
    write_csv(out / "modes.csv", ["index", "block_index", "sigma", "omega", "frequency_hz", "damping_pct"],
              [(str(i), str(md.block_index), md.sigma, md.omega, md.frequency_hz, 100 * md.damping_ratio)
               for i, md in enumerate(modal.modes)])
    matrix_io.write_matrix(out / f"psi{matrix_io.SUFFIX}", modal.psi)
    matrix_io.write_matrix(out / f"lambda{matrix_io.SUFFIX}", modal.lambda_matrix)
    matrix_io.write_matrix(out / f"effectiveness{matrix_io.SUFFIX}", design.effectiveness)
    if args.plot:
        from .plot import line_plot
        line_plot(out / "modes.svg", [md.frequency_hz for md in modal.modes],
                  {"damping %": [100 * md.damping_ratio for md in modal.modes]},
                  title="modal damping", xlabel="frequency (Hz)", ylabel="damping (%)")
    return 0


def cmd_allocate(cfg, args):
    out = cfg.output_dir
    modal = None
    if args.effectiveness:
        effectiveness = matrix_io.read_matrix(args.effectiveness)
    else:
        design = load_design(cfg, args.plant)
        effectiveness, modal = design.effectiveness, design.modal
    v = np.atleast_1d(np.array(parse_value(args.v), dtype=float))
    if args.fixed:
        u = fixed_allocate(effectiveness, v)
    else:
        alloc_cfg = allocator_config(cfg, effectiveness, modal)
        state = AllocatorState.initial(alloc_cfg)
        if args.u_prev:
            state.u_prev = np.array(parse_value(args.u_prev), dtype=float).reshape(-1)
        status = np.ones(alloc_cfg.n_actuators, dtype=bool)
        for idx, t_fail, t_rec in parse_failures(cfg["failures"]):
            if t_fail <= 0.0 < t_rec or t_fail == t_rec == 0.0:
                status[idx] = False
        state.set_status(status)
        u = allocate(alloc_cfg, state, v)
    write_csv(out / "command.csv", ["actuator", "u"], [(str(i), x) for i, x in enumerate(u)])
    print(" ".join(fmt(x) for x in u))
    if args.plot:
        from .plot import line_plot
        line_plot(out / "command.svg", np.arange(u.size), {"u": u}, title="allocated command",
                  xlabel="actuator", ylabel="u (pu)")
    return 0


def write_timeseries(path, res):
    p, n, m = res.outputs.shape[1], res.virtual.shape[1], res.commands.shape[1]
    header = ["t"] + [f"y{i + 1}" for i in range(p)] + [f"v{i + 1}" for i in range(n)] \
        + [f"u{i + 1}" for i in range(m)]
    rows = np.column_stack([res.t, res.outputs, res.virtual, res.commands])
    write_csv(path, header, rows)


def cmd_simulate(cfg, args):
    out = cfg.output_dir
    design = load_design(cfg, args.plant)
    scen = build_scenario(cfg, design, args.mode)
    res = harness.run(scen)
    write_timeseries(out / "timeseries.csv", res)
    metrics = res.metrics()
    write_csv(out / "metrics.csv", ["metric", "value"],
              [(k, v if isinstance(v, str) else float(v)) for k, v in metrics.items()])
    print(f"mode={metrics['mode']} critical_damping_pct={fmt(metrics['critical_damping_pct'])}")
    if args.plot:
        from .plot import line_plot
        line_plot(out / "timeseries.svg", res.t, {f"y{i + 1}": res.outputs[:, i] for i in range(res.outputs.shape[1])},
                  title=f"closed-loop response ({metrics['mode']})", xlabel="t (s)", ylabel="y")
    return 0


def cmd_sweep(cfg, args):
    out = cfg.output_dir
    design = load_design(cfg, args.plant)
    scen = build_scenario(cfg, design, "sparse")
    fractions = [float(f) for f in cfg["fractions"]]
    rows = harness.run_failure_sweep(scen, fractions)
    write_csv(out / "sweep.csv", ["failure_pct", "sparse_ca", "fixed_alloc", "no_control"],
              [(r["failure_pct"], r["sparse"], r["fixed"], r["none"]) for r in rows])
    for r in rows:
        print(f"{r['failure_pct']:6.1f}%  sparse={r['sparse']:.3f}  fixed={r['fixed']:.3f}  none={r['none']:.3f}")
    if args.plot:
        from .plot import line_plot
        line_plot(out / "sweep.svg", [r["failure_pct"] for r in rows],
                  {mode: [r[mode] for r in rows] for mode in harness.ALLOCATION_MODES},
                  title="critical-mode damping vs actuator failures",
                  xlabel="actuator failure (%)", ylabel="damping (%)")
    return 0


def cmd_prony(cfg, args):
    out = cfg.output_dir
    header, data = read_csv(args.input)
    if args.column is None:
        col = 1
    elif args.column in header:
        col = header.index(args.column)
    else:
        try:
            col = int(args.column)
        except ValueError as exc:
            raise ConfigError(f"column {args.column!r} not in {header}") from exc
    if not 0 < col < data.shape[1]:
        raise ConfigError(f"column index {col} out of range")
    t_start = float(cfg["prony_start"]) if args.t_start is None else args.t_start
    signal = ringdown.SampledSignal.from_series(data[:, 0], data[:, col], t_start)
    signal = signal.decimate(int(cfg["prony_decimate"]))
    order = args.order or cfg.auto("prony_order") or 2 * args.modes
    est = None
    last = None
    for k in range(int(order), 0, -1):
        try:
            est = ringdown.prony_fit(signal, k)
            break
        except (IllConditioned, OrderTooLarge) as exc:
            last = exc
            if args.order:
                raise
    if est is None:
        raise last
    target = Path(args.output) if args.output else out / "prony_modes.csv"
    write_csv(target, ["freq_hz", "damping_pct", "amplitude", "phase"],
              [(md.frequency_hz, md.damping_ratio_percent, md.amplitude, md.phase) for md in est.modes])
    print(f"order={k} fit_error={fmt(est.fit_error)}")
    if args.plot:
        from .plot import line_plot
        t = signal.start_time + signal.dt * np.arange(signal.values.size)
        line_plot(target.with_suffix(".svg"), t, {header[col]: signal.values},
                  title="Prony input window", xlabel="t (s)", ylabel=header[col])
    return 0


HANDLERS = {
    "bench": cmd_bench,
    "reduce": cmd_reduce,
    "modal": cmd_modal,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "prony": cmd_prony,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--out", default=None, help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, default=None, help="benchmark seed")
    common.add_argument("--plot", action="store_true", help="also write an SVG plot")
    common.add_argument("--show-config", action="store_true", help="print every default and exit")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="modalloc", parents=[common],
                                     description="Modal sparse control allocation toolkit.")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("bench", parents=[common], help="write the seeded benchmark plant")
    p.add_argument("--actuators", type=int, default=None)

    p = sub.add_parser("reduce", parents=[common], help="Hankel spectrum and balanced truncation")
    p.add_argument("--plant", default=None)
    p.add_argument("--order", type=int, default=None)

    p = sub.add_parser("modal", parents=[common], help="real modal form of the reduced model")
    p.add_argument("--plant", default=None)

    p = sub.add_parser("allocate", parents=[common], help="one-shot allocation of a virtual control")
    p.add_argument("--plant", default=None)
    p.add_argument("--effectiveness", default=None, help="psi B_r matrix file instead of a plant")
    p.add_argument("--v", required=True, help="virtual control as a bracketed list")
    p.add_argument("--u-prev", default=None, help="previous command as a bracketed list")
    p.add_argument("--fixed", action="store_true", help="use the pseudo-inverse baseline")

    p = sub.add_parser("simulate", parents=[common], help="closed-loop scenario run")
    p.add_argument("--plant", default=None)
    p.add_argument("--mode", choices=harness.ALLOCATION_MODES, default=None)

    p = sub.add_parser("sweep", parents=[common], help="actuator-failure damping sweep")
    p.add_argument("--plant", default=None)

    p = sub.add_parser("prony", parents=[common], help="Prony modes of a (time, value) CSV")
    p.add_argument("--input", default="timeseries.csv")
    p.add_argument("--column", default=None, help="column name or index (default: second column)")
    p.add_argument("--order", type=int, default=None, help="complex pairs (default 2 x --modes)")
    p.add_argument("--modes", type=int, default=3, help="expected oscillatory modes")
    p.add_argument("--t-start", type=float, default=None)
    p.add_argument("--output", default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.show_config:
        print(show_config())
        return 0
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        print("modalloc: error: a subcommand is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if getattr(args, "actuators", None) is not None:
            overrides.append(f"actuators={args.actuators}")
        out = Path(args.out) if args.out else Path(".")
        out.mkdir(parents=True, exist_ok=True)
        cfg = RunConfig.load(args.config, overrides, subcommand=args.subcommand,
                             output_dir=out, verbosity=args.verbose)
        cfg.seed = int(cfg["seed"])
        return HANDLERS[args.subcommand](cfg, args)
    except ModalAllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
