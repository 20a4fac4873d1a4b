"""Command-line entry point.

Subcommands cover the whole workflow: ``simulate`` a scene into a
dataset, ``train`` a model, ``rollout``/``reverse`` it into new frame
sequences, ``upres`` a low-res guide, ``eval`` against ground truth,
and ``serve`` the interactive HTTP API. All outputs are deterministic
for identical invocations (including --seed).
"""

import argparse
import sys

import numpy as np

from . import model_io
from .dmd import SnapshotMatrix, exact_dmd, optdmd
from .errors import FlowDmdError
from .grid import GridSpec
from .runtime import decode, encode, inverse_step, step_k
from .solver import generate_dataset
from .upres import UpresConfig, guided_rollout


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="flowdmd",
        description="Reduced-order fluid simulation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="run a scene and write a dataset")
    p.add_argument("scene", help="scene configuration file")
    p.add_argument("-o", "--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="fit a reduced model from a dataset")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("-o", "--out", required=True, help="output model file")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--method", choices=("exact", "optdmd"), default="exact")
    p.add_argument("--svd", choices=("full", "randomized"), default="full")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("rollout", help="decode frames from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="dataset supplying the start state")
    p.add_argument("--start-frame", type=int, default=0)
    p.add_argument("--k", type=int, default=1, help="steps advanced per output frame")
    p.add_argument("--frames", type=int, default=1, help="number of output frames")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--edit", default=None, help="edit spec file applied before rollout")
    p.add_argument(
        "--density",
        action="store_true",
        help="advect the start frame's density through the decoded velocities",
    )

    p = sub.add_parser("reverse", help="roll a model backward in time")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--start-frame", type=int, default=0)
    p.add_argument("--frames", type=int, required=True, help="backward frames")
    p.add_argument("--out", required=True)
    p.add_argument("--density", action="store_true")

    p = sub.add_parser("upres", help="upscale a low-res dataset through a model")
    p.add_argument("--low", required=True, help="low-res guide dataset")
    p.add_argument("--model", required=True, help="model trained on the high-res grid")
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--factor", type=int, required=True)
    p.add_argument("--project", choices=("on", "off"), default="on")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="relative-error report against ground truth")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="ground-truth dataset")
    p.add_argument("--stride", type=int, default=1)

    p = sub.add_parser("serve", help="serve a model over HTTP for the editor")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", default=None, help="optional start states")
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _load_model_and_start(args):
    model = model_io.load_model(args.model)
    data = model_io.load_dataset(args.dataset)
    if data.n != model.n:
        raise FlowDmdError(
            f"dataset state length {data.n} does not match model ({model.n})"
        )
    if not 0 <= args.start_frame < data.states.shape[1]:
        raise FlowDmdError(
            f"start frame {args.start_frame} outside dataset (0..{data.states.shape[1] - 1})"
        )
    z0 = encode(model, data.states[:, args.start_frame], frame=args.start_frame)
    return model, data, z0


def _density_start(args, data, model):
    if not args.density:
        return None
    dens = model_io.load_dataset_density(args.dataset)
    if dens is None:
        raise FlowDmdError("--density requested but the dataset has no density frames")
    from .grid import ScalarField

    return ScalarField(model.grid_meta, dens[:, :, args.start_frame])


def _write_frames(path, frames, dt, grid_meta, meta, density=None):
    snap = SnapshotMatrix(frames, dt, grid_meta, meta)
    model_io.save_dataset(path, snap, density)


def cmd_simulate(args):
    scene = model_io.load_scene(args.scene)
    snapshots, density = generate_dataset(scene)
    model_io.save_dataset(args.out, snapshots, density)
    print(f"wrote {snapshots.states.shape[1]} frames to {args.out}")
    return 0


def cmd_train(args):
    data = model_io.load_dataset(args.dataset)
    trainer = exact_dmd if args.method == "exact" else optdmd
    model = trainer(data, args.rank, svd_mode=args.svd, seed=args.seed)
    model_io.save_model(args.out, model)
    resid = model.provenance.get("residual_rel", "n/a")
    print(f"trained r={args.rank} model ({args.method}, {args.svd} svd) -> {args.out}")
    if resid != "n/a":
        print(f"one-step relative residual: {resid:.3e}")
    return 0


def cmd_rollout(args):
    model, data, z0 = _load_model_and_start(args)
    if args.k < 0:
        raise FlowDmdError("--k must be >= 0; use the reverse subcommand")
    if args.frames < 1:
        raise FlowDmdError("--frames must be >= 1")
    edit = model_io.load_edit(args.edit) if args.edit else None
    if edit is not None:
        from .editing import apply_edit

        model = apply_edit(model, edit)
    density = _density_start(args, data, model)
    densities = None
    # column 0 holds the decoded start state so the output is self-contained
    out = np.empty((model.n, args.frames + 1))
    out[:, 0] = decode(model, z0)
    state = z0
    from .solver import advect_semi_lagrangian
    from .grid import unflatten

    if density is not None:
        densities = np.empty(density.values.shape + (args.frames + 1,))
        densities[..., 0] = density.values
    for f in range(1, args.frames + 1):
        state = step_k(model, state, args.k)
        out[:, f] = decode(model, state)
        if density is not None:
            for _ in range(args.k):
                density = advect_semi_lagrangian(
                    unflatten(out[:, f], model.grid_meta), density, model.dt
                )
            densities[..., f] = density.values
    meta = {
        "solver": "reduced_rollout",
        "model_rank": model.r,
        "start_frame": args.start_frame,
        "step_k": args.k,
    }
    _write_frames(args.out, out, model.dt * max(args.k, 1), model.grid_meta, meta, densities)
    print(f"wrote {args.frames + 1} frames to {args.out}")
    return 0


def cmd_reverse(args):
    model, data, z0 = _load_model_and_start(args)
    if args.frames < 1:
        raise FlowDmdError("--frames must be >= 1")
    density = _density_start(args, data, model)
    densities = None
    if density is not None:
        densities = np.empty(density.values.shape + (args.frames + 1,))
        densities[..., 0] = density.values
    out = np.empty((model.n, args.frames + 1))
    out[:, 0] = decode(model, z0)
    state = z0
    from .solver import advect_semi_lagrangian
    from .grid import unflatten

    for f in range(1, args.frames + 1):
        state = inverse_step(model, state)
        out[:, f] = decode(model, state)
        if density is not None:
            density = advect_semi_lagrangian(
                unflatten(out[:, f], model.grid_meta), density, -model.dt
            )
            densities[..., f] = density.values
    meta = {
        "solver": "reduced_reverse",
        "model_rank": model.r,
        "start_frame": args.start_frame,
        "direction": "backward",
    }
    _write_frames(args.out, out, model.dt, model.grid_meta, meta, densities)
    print(f"wrote {args.frames} backward frames to {args.out}")
    return 0


def cmd_upres(args):
    model = model_io.load_model(args.model)
    low = model_io.load_dataset(args.low)
    if not isinstance(model.grid_meta, GridSpec):
        raise FlowDmdError("model carries no grid metadata; cannot upscale")
    cfg = UpresConfig(split=args.split, factor=args.factor)
    inject = cfg.injector(model.grid_meta)
    H0 = inject @ low.states[:, 0]
    fields = guided_rollout(model, H0, low.states, cfg, project=args.project == "on")
    out = np.column_stack([H0, fields])  # column 0 is the initial condition
    meta = {
        "solver": "reduced_upres",
        "model_rank": model.r,
        "split": cfg.effective_split(model),
        "factor": args.factor,
        "project": args.project,
    }
    _write_frames(args.out, out, low.dt, model.grid_meta, meta)
    print(f"wrote {out.shape[1]} upscaled frames to {args.out}")
    return 0


def cmd_eval(args):
    model = model_io.load_model(args.model)
    truth = model_io.load_dataset(args.dataset)
    if truth.n != model.n:
        raise FlowDmdError(
            f"dataset state length {truth.n} does not match model ({model.n})"
        )
    frames = truth.states.shape[1]
    state = encode(model, truth.states[:, 0])
    errs = []
    sq_err = 0.0
    sq_ref = 0.0
    for f in range(1, frames, args.stride):
        state = step_k(model, state, args.stride)
        rec = decode(model, state)
        ref = truth.states[:, f]
        diff = float(np.linalg.norm(rec - ref))
        norm = float(np.linalg.norm(ref))
        errs.append(diff / max(norm, 1e-300))
        sq_err += diff * diff
        sq_ref += norm * norm
    report = {
        "kind": "eval_report",
        "model_rank": model.r,
        "frames_compared": len(errs),
        "stride": args.stride,
        "relative_l2": [round(e, 9) for e in errs],
        "mean_relative_l2": float(np.mean(errs)),
        "max_relative_l2": float(np.max(errs)),
        "final_relative_l2": errs[-1],
        "overall_relative_l2": (sq_err / max(sq_ref, 1e-300)) ** 0.5,
    }
    sys.stdout.write(model_io.kv_dumps({k: model_io.format_value(v) for k, v in report.items()}))
    return 0


def cmd_serve(args):
    from .server import ModelServer

    model = model_io.load_model(args.model)
    dataset = model_io.load_dataset(args.dataset) if args.dataset else None
    density = (
        model_io.load_dataset_density(args.dataset) if args.dataset else None
    )
    server = ModelServer(model, dataset=dataset, density=density, host=args.host, port=args.port)
    port = server.start()
    print(f"serving on http://{args.host}:{port}/api/model", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "rollout": cmd_rollout,
    "reverse": cmd_reverse,
    "upres": cmd_upres,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def cli_main(argv=None):
    """Run one CLI invocation; returns the process exit code."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except FlowDmdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
