"""Command line entry point: ``cpdfrac run | preset | validate``."""

import argparse
import logging
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("cpdfrac")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for runtime aborts here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="cpdfrac", description="Continuum-kinematics peridynamics fracture simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--threads", type=int, help="worker threads (overrides simulation.threads)")
    run.add_argument("--steps", type=int)
    run.add_argument("--dt", type=float)
    run.add_argument("--snapshot-every", type=int)

    pre = sub.add_parser("preset", help="write a ready-made scenario config")
    pre.add_argument("name")
    pre.add_argument("--out", required=True, help="directory for config.toml and run output")
    pre.add_argument("--scale", choices=("full", "coarse"), default="full")

    val = sub.add_parser("validate", help="check a config and print derived constants")
    val.add_argument("--config", required=True)
    return p


def _set_threads(n):
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    if n < 1:
        raise ValueError("--threads must be at least 1")
    if n > limit:
        log.warning("requested %d threads, only %d available; using %d", n, limit, limit)
        n = limit
    numba.set_num_threads(n)
    return n


def _load(path):
    from .config import load_config

    return load_config(path)


def cmd_validate(args):
    from .scenario import build_cloud, build_material, describe_material

    cfg = _load(args.config)
    for spec in cfg.bodies:
        cloud = build_cloud(spec, cfg.switches["normal_sign"])
        mat = build_material(spec, cloud.dim)
        print(f"{describe_material(spec['id'], mat)} points={cloud.n_points}")
    print("config OK")
    return EXIT_OK


def cmd_preset(args):
    from .presets import preset_text

    os.makedirs(args.out, exist_ok=True)
    # relative output paths resolve against the config file location
    text = preset_text(args.name, args.scale, out="output")
    path = os.path.join(args.out, "config.toml")
    with open(path, "w") as fh:
        fh.write(text)
    print(path)
    return EXIT_OK


def cmd_run(args):
    from .dynamics import SimulationAbort
    from .scenario import build_simulation
    from .snapshots import SnapshotWriter, write_report

    cfg = _load(args.config)
    sim_cfg = cfg.simulation
    for key, val in (("steps", args.steps), ("snapshot_every", args.snapshot_every)):
        if val is not None:
            if val < 0 or (key == "steps" and val < 1):
                raise ValueError(f"--{key.replace('_', '-')} out of range: {val}")
            sim_cfg[key] = val
    if args.dt is not None and not args.dt > 0:
        raise ValueError(f"--dt must be positive: {args.dt}")
    threads = _set_threads(args.threads if args.threads is not None else sim_cfg["threads"])
    out = args.out or cfg.output["directory"]
    base = os.path.dirname(os.path.abspath(args.config))
    if not os.path.isabs(out):
        out = os.path.join(os.getcwd() if args.out else base, out)

    sim = build_simulation(cfg, base_dir=base, dt=args.dt)
    writer = SnapshotWriter(out, cfg.output["formats"])
    every = sim_cfg["snapshot_every"]
    log.info("running %d steps with %d thread(s), output in %s", sim_cfg["steps"], threads, out)
    try:
        report = sim.run(sim_cfg["steps"], snapshot_every=every, on_snapshot=writer,
                         progress_every=sim_cfg["progress_every"])
    except SimulationAbort as exc:
        log.error("simulation aborted: %s", exc)
        write_report(os.path.join(out, "report.json"),
                     dict(sim.report(0.0), aborted=str(exc), threads=threads))
        return EXIT_RUNTIME
    report["threads"] = threads
    report["snapshots"] = len(writer.written)
    write_report(os.path.join(out, "report.json"), report)
    log.info("done: %d steps, %d broken bonds, max damage %.4g, %.1f s",
             report["steps"], report["broken_bonds"], report["max_damage"], report["wall_clock"])
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    from .config import ConfigError

    handler = {"run": cmd_run, "preset": cmd_preset, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
