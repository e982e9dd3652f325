"""Command-line entry point: ``tvos <subcommand> ...``.

Exit status is 0 on success, 2 on bad input (the message names the file or
flag at fault) and 3 when an iterative solve stops before converging.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import find_sequences, format_ablation_table, run_ablation
from .config import RunConfig
from .embedding import HandcraftedEmbedder, PrecomputedEmbedder, ProjectionHead, load_embeddings
from .flow import displacement_field, flow_to_color, write_flow_text
from .io import FormatError, list_frames, read_head, read_pgm, read_ppm, write_emb1, write_head, \
    write_pgm, write_ppm, ensure_dir
from .metrics import evaluate_sequence, per_frame_series
from .propagation import ProviderError, SequenceTracker
from .sampling import TRAIN_STRATEGIES
from .synth import PRESETS, ScenePreset, generate, load_sequence, save_sequence
from .transduction import (TransductionParams, one_hot_labels, solve_closed_form,
                           solve_iterative)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 2, 3


class InputError(Exception):
    """Bad user input; the message names the offending file or flag."""


# -- shared argument groups ----------------------------------------------------

def _add_tracking_flags(p: argparse.ArgumentParser, with_schedule: bool = True):
    g = p.add_argument_group("tracking configuration")
    d = RunConfig()
    if with_schedule:
        g.add_argument("--strategy", default="sparse-dense+motion",
                       help="prev1 | consec:N | uniform:N:W | sparse-dense[:D:S:W], "
                            "optional +motion / +first suffixes (default: %(default)s)")
    g.add_argument("--sigma-local", type=float, default=d.sigma_local)
    g.add_argument("--sigma-distant", type=float, default=d.sigma_distant)
    g.add_argument("--sigma-units", choices=("cells", "pixels"), default=d.sigma_units)
    g.add_argument("--temperature", type=float, default=d.temperature)
    g.add_argument("--stride", type=int, default=d.stride)
    g.add_argument("--window-radius", type=int, default=None)
    if with_schedule:
        g.add_argument("--harden-history", action="store_true")


def _run_config(args, strategy: str | None = None) -> RunConfig:
    kw = dict(sigma_local=args.sigma_local, sigma_distant=args.sigma_distant,
              sigma_units=args.sigma_units, temperature=args.temperature, stride=args.stride,
              window_radius=args.window_radius,
              harden_history=getattr(args, "harden_history", False))
    text = strategy or getattr(args, "strategy", "sparse-dense+motion")
    try:
        return RunConfig.from_strategy_string(text, **kw)
    except ValueError as exc:
        raise InputError(f"--strategy/config flags: {exc}") from None


def _load_provider(args, stride: int):
    provider = HandcraftedEmbedder(stride)
    if getattr(args, "embeddings", None):
        provider = PrecomputedEmbedder(_read(load_embeddings, args.embeddings, stride))
    if getattr(args, "head", None):
        weight, bias = _read(read_head, args.head)
        provider = ProjectionHead.from_params(weight, bias, base=provider)
    return provider


def _read(fn, path, *a):
    try:
        return fn(path, *a)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except (FormatError, ValueError, OSError) as exc:
        msg = str(exc)
        raise InputError(msg if str(path) in msg else f"{path}: {msg}") from None


# -- subcommands ---------------------------------------------------------------

def cmd_propagate(args) -> int:
    cfg = _run_config(args)
    frame_files = _read(list_frames, args.frames, ".ppm")
    first_mask = _read(read_pgm, args.first_mask)
    provider = _load_provider(args, cfg.stride)
    if args.embeddings:
        n = len(provider.base.grids) if args.head else len(provider.grids)
        if n != len(frame_files):
            raise InputError(f"--embeddings: {n} embedded frames but {len(frame_files)} "
                             f"frames in {args.frames}")
        inputs = range(n)
    else:
        inputs = (_read(read_ppm, f) for f in frame_files)
    out = ensure_dir(args.out)
    tracker = SequenceTracker(provider, cfg.propagation())
    try:
        for t, frame in enumerate(inputs):
            if t == 0:
                if not args.embeddings and frame.shape[:2] != first_mask.shape:
                    raise InputError(f"--first-mask: mask {first_mask.shape} does not match "
                                     f"frame {frame.shape[:2]} of {frame_files[0]}")
                mask = tracker.start(frame, first_mask)
            else:
                mask = tracker.step(frame)
            write_pgm(out / f"{t:05d}.pgm", mask)
    except ProviderError as exc:
        raise InputError(f"{frame_files[exc.index]}: {exc}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.soft_fields:
        write_emb1(args.soft_fields, np.stack(tracker.fields))
    print(f"wrote {len(tracker.fields)} masks to {out}")
    return EXIT_OK


def _read_matrix(path) -> np.ndarray:
    try:
        rows = [[float(v) for v in ln.split()] for ln in Path(path).read_text().splitlines()
                if ln.strip()]
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise InputError(f"{path}: affinity must be a non-empty square matrix")
    return np.array(rows)


def _read_labels(path, n: int, n_classes: int | None) -> np.ndarray:
    labels = np.full(n, -1, dtype=int)
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    for lineno, ln in enumerate(lines, 1):
        if not ln.strip():
            continue
        parts = ln.split()
        try:
            i, c = (int(v) for v in parts)
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected 'index class', got {ln!r}") from None
        if not 0 <= i < n or c < 0:
            raise InputError(f"{path}:{lineno}: index {i} or class {c} out of range")
        labels[i] = c
    try:
        return one_hot_labels(labels, n_classes)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _write_matrix(path, y: np.ndarray):
    text = "\n".join(" ".join(repr(float(v)) for v in row) for row in y) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    w = _read_matrix(args.affinity)
    y0 = _read_labels(args.labels, w.shape[0], args.n_classes)
    try:
        if args.closed_form:
            _write_matrix(args.out, solve_closed_form(w, y0, args.alpha))
            return EXIT_OK
        params = TransductionParams(alpha=args.alpha, tol=args.tol, max_iters=args.max_iters)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = solve_iterative(w, y0, params)
    except ValueError as exc:
        raise InputError(f"{args.affinity}: {exc}") from None
    _write_matrix(args.out, res.labels)
    if not res.converged:
        print(f"warning: no convergence after {res.n_iter} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_corpus(corpus):
    try:
        dirs = find_sequences(corpus)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    seqs = []
    for d in dirs:
        try:
            frames, masks = load_sequence(d)
        except (FileNotFoundError, FormatError, ValueError) as exc:
            raise InputError(f"{d}: {exc}") from None
        if len(frames) != len(masks):
            raise InputError(f"{d}: {len(frames)} frames but {len(masks)} masks")
        seqs.append((list(frames), list(masks)))
    return dirs, seqs


def cmd_train_embed(args) -> int:
    _, seqs = _load_corpus(args.corpus)
    head = ProjectionHead(n_components=args.n_components, init=args.init,
                          learning_rate=args.lr, epochs=args.epochs,
                          snippet_length=args.snippet_length, strategy=args.train_strategy,
                          temperature=args.temperature, seed=args.seed,
                          base=HandcraftedEmbedder(args.stride))
    try:
        head.fit(seqs)
    except FloatingPointError as exc:
        raise InputError(f"--lr {args.lr}: {exc}") from None
    write_head(args.out, head.weight_, head.bias_)
    if args.loss_out:
        Path(args.loss_out).write_text("".join(f"{e} {v!r}\n" for e, v in enumerate(head.loss_curve_)))
    print(f"loss {head.loss_curve_[0]:.6f} -> {head.loss_curve_[-1]:.6f}; head written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        report = evaluate_sequence(args.pred, args.gt, skip_first=not args.include_first,
                                   tolerance_frac=args.tolerance)
    except (FileNotFoundError, FormatError) as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(f"--pred {args.pred}: {exc}") from None
    text = report.to_json(indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.series:
        Path(args.series).write_text(per_frame_series(report))
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = _run_config(args, "prev1")
    if args.embeddings:
        grids = _read(load_embeddings, args.embeddings, cfg.stride)
        if not 0 <= args.index < len(grids) - 1:
            raise InputError(f"--index {args.index}: need 0 <= index < {len(grids) - 1}")
        ga, gb = grids[args.index], grids[args.index + 1]
    else:
        if not (args.frame_a and args.frame_b):
            raise InputError("--frame-a and --frame-b are required without --embeddings")
        fa, fb = _read(read_ppm, args.frame_a), _read(read_ppm, args.frame_b)
        if fa.shape != fb.shape:
            raise InputError(f"--frame-b: shape {fb.shape} differs from --frame-a {fa.shape}")
        emb = HandcraftedEmbedder(cfg.stride)
        ga, gb = emb.embed(fa), emb.embed(fb)
    try:
        flow = displacement_field(ga, gb, cfg.spatial(), use_spatial=not args.no_spatial)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    write_flow_text(args.out, flow)
    if args.color:
        img = flow_to_color(flow.vectors)
        s = flow.stride
        write_ppm(args.color, np.repeat(np.repeat(img, s, axis=0), s, axis=1))
    return EXIT_OK


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise InputError(f"--size {text!r}: expected WxH, e.g. 64x64") from None
    return w, h


def cmd_synth(args) -> int:
    w, h = _parse_size(args.size)
    try:
        preset = ScenePreset(args.preset, args.frames, w, h, args.seed)
    except ValueError as exc:
        raise InputError(f"synth: {exc}") from None
    out = save_sequence(generate(preset), args.out)
    print(f"wrote {args.frames} frames to {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    dirs, seqs = _load_corpus(args.corpus)
    try:
        table = run_ablation(seqs, cfg.spatial(), cfg.stride)
    except ValueError as exc:
        raise InputError(f"--corpus {args.corpus}: {exc}") from None
    text = format_ablation_table(table, [d.name for d in dirs])
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(json.dumps(table, indent=2) + "\n")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="track a sequence from its first-frame mask")
    p.add_argument("--frames", required=True, help="directory of PPM frames")
    p.add_argument("--first-mask", required=True, help="PGM mask of frame 0")
    p.add_argument("--out", required=True, help="output directory for PGM masks")
    p.add_argument("--embeddings", help="EMB1 file of precomputed per-frame features")
    p.add_argument("--head", help="trained projection head (TVOSHEAD text file)")
    p.add_argument("--soft-fields", help="also dump per-frame soft labels as EMB1")
    _add_tracking_flags(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("solve", help="label spreading on an explicit graph")
    p.add_argument("--affinity", required=True, help="square text matrix")
    p.add_argument("--labels", required=True, help="'index class' lines")
    p.add_argument("--n-classes", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--closed-form", action="store_true", help="direct linear solve")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train-embed", help="train a projection head on annotated sequences")
    p.add_argument("--corpus", required=True, help="sequence directory or directory of them")
    p.add_argument("--out", required=True, help="head output file")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--snippet-length", type=int, default=4)
    p.add_argument("--train-strategy", choices=sorted(TRAIN_STRATEGIES), default="9 frames")
    p.add_argument("--n-components", type=int, default=16)
    p.add_argument("--init", choices=("random", "identity"), default="random")
    p.add_argument("--temperature", type=float, default=0.1)
    p.add_argument("--stride", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-out", help="write 'epoch loss' lines here")
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("eval", help="J/F/G of predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--series", help="per-frame IoU table path")
    p.add_argument("--tolerance", type=float, default=0.008,
                   help="boundary tolerance as a fraction of the image diagonal")
    p.add_argument("--include-first", action="store_true", help="also score frame 0")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("flow", help="displacement field between consecutive frames")
    p.add_argument("--frame-a", help="PPM at time t")
    p.add_argument("--frame-b", help="PPM at time t+1")
    p.add_argument("--embeddings", help="EMB1 file; use with --index")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True, help="text flow field")
    p.add_argument("--color", help="optional color-wheel PPM")
    p.add_argument("--no-spatial", action="store_true", help="appearance-only weights")
    _add_tracking_flags(p, with_schedule=False)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("synth", help="generate a synthetic annotated sequence")
    p.add_argument("--preset", choices=PRESETS, required=True)
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--size", default="64x64", help="WxH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="J table over the six reference schedules")
    p.add_argument("--corpus", required=True, help="sequence directory or directory of them")
    p.add_argument("--out", help="also write the per-sequence table as JSON")
    _add_tracking_flags(p, with_schedule=False)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports unknown flags itself
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"tvos {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
