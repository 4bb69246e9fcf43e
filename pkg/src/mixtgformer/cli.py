"""Command-line entry point: synth, gradcheck, train, eval, ablate.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 numerical failure.
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import parse_grid
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, format_kv, load_config
from .errors import ConfigError, FormatError, NumericalError
from .gradcheck import run_suite
from .metrics import evaluate, root_relative
from .skeleton import (CameraModel, human36m_topology, load_sequence, save_sequence,
                       synth_sequence)
from .training import evaluate_params, train_loop

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def build_id():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(path, command, config, seed, inputs, outputs, started):
    fields = {
        "command": command,
        "seed": seed,
        "build_id": build_id(),
        "inputs": ",".join(str(p) for p in inputs),
        "outputs": ",".join(str(p) for p in outputs),
        "duration_s": f"{time.monotonic() - started:.3f}",
    }
    if config is not None:
        fields.update({f"config.{k}": v for k, v in
                       (line.split(" = ", 1) for line in config.to_text().splitlines())})
    Path(path).write_text(format_kv(fields), encoding="utf-8")


def load_pairs(data_dir):
    """(name, input2d, gt3d) triples for every ``*_input2d.mtgf`` with a ``*_gt3d.mtgf`` twin."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise UsageError(f"data directory {data_dir} does not exist")
    triples = []
    for path in sorted(data_dir.glob("*_input2d.mtgf")):
        stem = path.name[: -len("_input2d.mtgf")]
        twin = data_dir / f"{stem}_gt3d.mtgf"
        if not twin.exists():
            raise UsageError(f"{path.name} has no matching {twin.name}")
        triples.append((stem, load_sequence(path), load_sequence(twin)))
    if not triples:
        raise UsageError(f"no MTGF sequence pairs in {data_dir}")
    return triples


def check_data_matches(config, triples):
    for name, x, _ in triples:
        for field, have, want in (("frames", x.frames, config.frames),
                                  ("joints", x.joints, config.joints)):
            if have != want:
                raise UsageError(f"config/data mismatch in field '{field}': config has {want}, "
                                 f"{name} has {have}")


def resolve_config(path, seed=None):
    config = load_config(path) if path else ModelConfig()
    return config.replace(seed=seed) if seed is not None else config


# --------------------------------------------------------------------------


def cmd_synth(args):
    started = time.monotonic()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from exc
    topo = human36m_topology()
    cam = CameraModel()
    written = []
    try:
        for i in range(args.count):
            x2d, gt = synth_sequence(args.seed + i, topo, args.frames, cam, args.noise)
            for seq in (x2d, gt):
                path = out / f"seq_{i:04d}_{seq.kind}.mtgf"
                save_sequence(path, seq)
                written.append(path)
        write_manifest(out / "manifest.txt", "synth", None, args.seed, [], written, started)
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from exc
    print(f"wrote {len(written)} sequence files to {out}")
    return EXIT_OK


def cmd_gradcheck(args):
    config = load_config(args.config) if args.config else None
    results = run_suite(config, max_coords=args.max_coords, model_coords=args.max_coords)
    failed = []
    width = max(len(r.name) for r in results)
    for r in results:
        ok = r.passed(args.tolerance)
        print(f"{r.name:<{width}}  {r.kind:<9}  worst_rel_err = {r.error:.3e}  "
              f"({r.worst_tensor})  {'PASS' if ok else 'FAIL'}")
        if not ok:
            failed.append(r.name)
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}")
        return EXIT_VERIFY
    print(f"all {len(results)} components under tolerance {args.tolerance:g}")
    return EXIT_OK


def _trace_text(trace):
    return "".join(f"{r.step} {r.position!r} {r.delta!r} {r.total!r}\n" for r in trace)


def cmd_train(args):
    started = time.monotonic()
    config = resolve_config(args.config, args.seed)
    triples = load_pairs(args.data)
    check_data_matches(config, triples)
    pairs = [(x, y) for _, x, y in triples]
    out = Path(args.out)
    trace_path = out.with_name(out.name + ".loss.txt")
    try:
        result = train_loop(pairs, config, args.steps)
    except NumericalError as exc:
        last = -1 if exc.step is None else exc.step - 1
        print(f"numerical failure: {exc}; last finite step {last}", file=sys.stderr)
        return EXIT_NUMERIC
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, config, result.params)
    trace_path.write_text(f"# step L3D LdA total (reduction={result.reduction})\n"
                          + _trace_text(result.trace), encoding="utf-8")
    write_manifest(out.with_name(out.name + ".manifest.txt"), "train", config, config.seed,
                   [args.data], [out, trace_path], started)
    if result.trace:
        first, last = result.trace[0], result.trace[-1]
        print(f"trained {args.steps} steps: L3D {first.position:.3f} -> {last.position:.3f}")
    else:
        print("0 steps: checkpoint holds the initial parameters")
    return EXIT_OK


def report_text(report):
    rows = [("MPJPE", report.mpjpe, "mm"), ("P-MPJPE", report.p_mpjpe, "mm"),
            ("PCK150", report.pck150, "%"), ("AUC", report.auc, "%")]
    lines = [f"{'metric':<8} {'value':>12}"]
    lines += [f"{name:<8} {value:>12.4f} {unit}" for name, value, unit in rows]
    lines.append("")
    lines += [f"{k} = {v!r}" for k, v in report.as_dict().items()]
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    started = time.monotonic()
    triples = load_pairs(args.data)
    if args.oracle:
        gts = [root_relative(y.values) for _, _, y in triples]
        config = None
        report = evaluate(gts, gts, scale=not args.rigid)
    else:
        if not args.checkpoint:
            raise UsageError("--checkpoint is required unless --oracle is given")
        config, params = load_checkpoint(args.checkpoint)
        check_data_matches(config, triples)
        report = evaluate_params([(x, y) for _, x, y in triples], params, config,
                                 flip=args.flip, scale=not args.rigid)
    text = report_text(report)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        write_manifest(out.with_name(out.name + ".manifest.txt"), "eval", config,
                       config.seed if config else 0, [args.data, args.checkpoint or ""], [out],
                       started)
    return EXIT_OK


def cmd_ablate(args):
    started = time.monotonic()
    rows = parse_grid(args.grid)
    base = resolve_config(args.config, args.seed)
    triples = load_pairs(args.data)
    check_data_matches(base, triples)
    pairs = [(x, y) for _, x, y in triples]
    header = (f"{'variant':<84} {'L3D':>10} {'LdA':>10} {'total':>10} {'MPJPE':>9} "
              f"{'P-MPJPE':>9} {'PCK150':>7} {'AUC':>7}")
    lines = [header]
    print(header)
    for name, overrides in rows:
        config = base.replace(**overrides)
        try:
            result = train_loop(pairs, config, args.steps)
        except NumericalError as exc:
            print(f"variant {name} failed: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        report = evaluate_params(pairs, result.params, config)
        last = result.trace[-1] if result.trace else None
        vals = (last.position, last.delta, last.total) if last else (np.nan,) * 3
        line = (f"{name:<84} {vals[0]:>10.3f} {vals[1]:>10.3f} {vals[2]:>10.3f} "
                f"{report.mpjpe:>9.3f} {report.p_mpjpe:>9.3f} {report.pck150:>7.2f} "
                f"{report.auc:>7.2f}")
        lines.append(line)
        print(line, flush=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_manifest(out / "manifest.txt", "ablate", base, base.seed, [args.data],
                       [out / "ablation.txt"], started)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mixtgformer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic MTGF sequence pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.0, help="2D noise std in pixels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--config")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--max-coords", type=int, default=None,
                   help="difference at most this many coordinates per tensor")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train on a directory of MTGF pairs")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--flip", action="store_true", help="average with the mirrored input")
    p.add_argument("--oracle", action="store_true", help="score ground truth against itself")
    p.add_argument("--rigid", action="store_true", help="P-MPJPE without scale")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate a grid of ablation variants")
    p.add_argument("--grid", required=True,
                   help="presets (table4,table5,table6,table7,all,full) or axis=v1,v2;axis=...")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if getattr(args, "steps", 0) < 0 or getattr(args, "count", 0) < 0:
            raise UsageError("counts must be non-negative")
        return args.func(args)
    except (UsageError, ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
