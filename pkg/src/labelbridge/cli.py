"""``labelbridge`` command line.

Exit codes: 0 success, 2 bad flags, 3 data or configuration errors,
4 numeric failures (non-finite loss, failed gradient check).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from labelbridge import baseline_map as bm
from labelbridge.bridge import eval_no_label, eval_supervisor_only, eval_translate
from labelbridge.config import ConfigError, dump_run_config, load_run_config, load_synth_config
from labelbridge.corpus.formats import (
    ParseError,
    format_pairs,
    format_two_col,
    read_corpus,
    read_pairs,
    write_text,
)
from labelbridge.corpus.oracle import bayes_oracle
from labelbridge.corpus.overlap import detect_overlap
from labelbridge.corpus.records import Tagset
from labelbridge.corpus.synth import PRESETS, gen_synthetic
from labelbridge.corpus.vocab import Vocab
from labelbridge.substrate.gradcheck import NonDifferentiableError
from labelbridge.substrate.rng import Rng
from labelbridge.substrate.serialize import ManifestError
from labelbridge.substrate.tensor import NonFiniteError

EXIT_OK, EXIT_FLAGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
GRAD_TOL = 1e-4
VARIANT_FLAGS = {"translate": "ours", "supervisor": "supervisor_only", "no-label": "no_label"}


class DataError(Exception):
    """Unusable input; the message names the offending path."""


# ----------------------------------------------------------------------
# commands


def cmd_gen_synth(args):
    if args.config:
        config, seed = load_synth_config(args.config)
        if args.seed_given or seed is None:
            seed = args.seed
    else:
        config, seed = PRESETS[args.preset](), args.seed
    corpus = gen_synthetic(config, seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_text(os.path.join(out, "d_y.tsv"), format_two_col(corpus.d_y, "y"))
    write_text(os.path.join(out, "d_z.tsv"), format_two_col(corpus.d_z, "z"))
    write_text(os.path.join(out, "val.tsv"), format_pairs(corpus.val))
    write_text(os.path.join(out, "y_tags.txt"), "\n".join(config.y_tagset().tags) + "\n")
    write_text(os.path.join(out, "z_tags.txt"), "\n".join(config.z_tagset().tags) + "\n")
    write_text(os.path.join(out, "truth.ini"), corpus.truth.manifest())
    oracle = {}
    for side, cfg in (("Y", config), ("Z", config.swapped())):
        oracle[side] = {mode: bayes_oracle(cfg, mode, seed=seed) for mode in ("x_only", "x_and_z")}
    with open(os.path.join(out, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump(oracle, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(corpus.d_y)} Y, {len(corpus.d_z)} Z and {len(corpus.val)} parallel sentences to {out}")
    print("bayes ceilings: " + " ".join(f"{s}/{m}={v:.4f}" for s, d in oracle.items() for m, v in d.items()))
    return EXIT_OK


def _run_config(args):
    from labelbridge.trainer import RunConfig

    cfg = load_run_config(args.config) if args.config else RunConfig()
    d = cfg.data
    for flag, key in (("y_train", "y_train"), ("z_train", "z_train"), ("val", "val"),
                      ("y_tagset", "y_tagset"), ("z_tagset", "z_tagset"), ("preset", "synth_preset")):
        value = getattr(args, flag)
        if value is not None:
            setattr(d, key, value)
    if args.epochs is not None:
        cfg.train.epochs = args.epochs
    if args.batch_size is not None:
        cfg.train.batch_size = args.batch_size
    if args.lr is not None:
        cfg.optim.lr = args.lr
    if args.seed_given or not args.config:
        cfg.train.seed = args.seed
        d.synth_seed = args.seed
    cfg.__post_init__()
    for key in ("y_train", "z_train", "val", "y_tagset", "z_tagset"):
        path = getattr(d, key)
        if path and not d.synth_preset and not os.path.exists(path):
            raise DataError(f"{path}: no such file ({key})")
    return cfg


def cmd_train(args):
    from labelbridge.trainer import load_task_data, train

    cfg = _run_config(args)
    if args.resume and not os.path.exists(args.resume):
        raise DataError(f"{args.resume}: no such checkpoint")
    data = load_task_data(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_text(os.path.join(args.out, "run.ini"), dump_run_config(cfg))
    result = train(cfg, data, out_dir=args.out, cheat=args.cheat, resume=args.resume)
    last = max(r.epoch for r in result.history)
    for r in result.history:
        if r.epoch == last and r.phase == "val":
            print(f"{r.dataset} {r.variant} {r.accuracy:.4f}")
    return EXIT_OK


def cmd_train_supervised(args):
    from labelbridge.trainer import load_task_data, supervised_baseline_train

    cfg = _run_config(args)
    data = load_task_data(cfg)
    result = supervised_baseline_train(cfg, data, args.side, out_dir=args.out)
    final = [r for r in result.history if r.phase == "val"]
    if final:
        print(f"{final[-1].dataset} supervised {final[-1].accuracy:.4f}")
    return EXIT_OK


def cmd_eval(args):
    from labelbridge.trainer import EVAL_BATCH, encode_items, load_checkpoint, pad, token_accuracy

    for path in (args.checkpoint, args.pairs):
        if not os.path.exists(path):
            raise DataError(f"{path}: no such file")
    model, _, meta = load_checkpoint(args.checkpoint)
    if "vocab" not in meta:
        raise DataError(f"{args.checkpoint}: checkpoint lacks vocabulary metadata")
    if meta.get("kind") == "supervised" and args.variant != "supervisor":
        raise DataError(f"{args.checkpoint}: a supervised checkpoint supports only --variant supervisor")
    vocab = Vocab(meta["vocab"])
    tagsets = {"y": Tagset("Y", meta["y_tags"], closed=True), "z": Tagset("Z", meta["z_tags"], closed=True)}
    pairs = read_pairs(args.pairs)
    side, oth = args.side, "z" if args.side == "y" else "y"
    try:
        enc = encode_items(pairs, ("y", "z"), vocab, tagsets, model.cfg.max_len)
    except KeyError as e:
        raise DataError(f"{args.pairs}: tag {e} unknown to the checkpoint") from None
    rng = Rng(args.seed)
    preds = []
    for start in range(0, len(pairs), EVAL_BATCH):
        idx = range(start, min(start + EVAL_BATCH, len(pairs)))
        ids, mask = pad([enc.ids[i] for i in idx], 1)
        if args.variant == "translate":
            out = eval_translate(model, ids, pad([enc.tags[oth][i] for i in idx], 0)[0], side, mask)
        elif args.variant == "supervisor":
            out = eval_supervisor_only(model, ids, side, mask)
        else:
            out = eval_no_label(model, ids, side, rng, mask)
        preds.extend(tagsets[side].decode(out[k, :len(enc.ids[i])]) for k, i in enumerate(idx))
    gold = [t for p in pairs for t in p.tags(side)[:model.cfg.max_len]]
    acc = token_accuracy([t for p in preds for t in p], gold)
    if args.out:
        lines = []
        for p, pred in zip(pairs, preds):
            lines += [f"{w}\t{t}" for w, t in zip(p.tokens, pred)] + [""]
        write_text(args.out, "\n".join(lines))
    print(f"{side.upper()} {VARIANT_FLAGS[args.variant]} {acc:.6f}")
    return EXIT_OK


def cmd_direct_map(args):
    if not os.path.exists(args.pairs):
        raise DataError(f"{args.pairs}: no such file")
    pairs = read_pairs(args.pairs)
    dmap, acc = bm.best_direct_map(bm.cooccurrence(pairs, args.direction))
    bm.save_map(dmap, args.out)
    print(f"{args.direction} direct map accuracy {acc:.6f} ({bm.OPTIMISM_NOTE})")
    return EXIT_OK


def cmd_stats(args):
    if not (args.y_corpus or args.z_corpus or args.pairs):
        raise DataError("stats needs --y-corpus, --z-corpus or --pairs")
    os.makedirs(args.out, exist_ok=True)
    loaded = {}
    for side, path in (("y", args.y_corpus), ("z", args.z_corpus)):
        if path:
            if not os.path.exists(path):
                raise DataError(f"{path}: no such file")
            loaded[side] = read_corpus(path, side)
            hist = bm.label_distribution(loaded[side], side)
            hist.write_csv(os.path.join(args.out, f"histogram_{side}_corpus.csv"))
            print(f"{path}: {len(loaded[side])} sentences, {len(hist.rows)} {side.upper()} tags")
    if args.pairs:
        if not os.path.exists(args.pairs):
            raise DataError(f"{args.pairs}: no such file")
        pairs = read_pairs(args.pairs)
        for side in ("y", "z"):
            bm.label_distribution(pairs, side).write_csv(os.path.join(args.out, f"histogram_{side}_pairs.csv"))
        print(f"{args.pairs}: {len(pairs)} parallel sentences")
    if args.overlap:
        if set(loaded) != {"y", "z"}:
            raise DataError("--overlap needs both --y-corpus and --z-corpus")
        result = detect_overlap(loaded["y"], loaded["z"], casefold=args.casefold)
        write_text(os.path.join(args.out, "overlap_pairs.tsv"), format_pairs(result.pairs))
        print(f"overlap: {result.audit()}")
    return EXIT_OK


def cmd_grad_check(args):
    from labelbridge.checks import run_all

    errors = run_all(args.seed)
    worst_name = max(errors, key=errors.get)
    if args.verbose:
        for name, err in errors.items():
            print(f"{name} {err:.3e}")
    print(f"worst relative error {errors[worst_name]:.3e} ({worst_name})")
    return EXIT_OK if errors[worst_name] < GRAD_TOL else EXIT_NUMERIC


# ----------------------------------------------------------------------
# parser


class _SeedAction(argparse.Action):
    def __call__(self, parser, ns, values, option_string=None):
        ns.seed = values
        ns.seed_given = True


def _seed(p):
    p.add_argument("--seed", type=int, default=0, action=_SeedAction,
                   help="seed for every random choice in the command (default 0)")
    p.set_defaults(seed_given=False)


def _data_flags(p):
    p.add_argument("--config", help="run configuration file ([model]/[optim]/[train]/[data] sections)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="train on a generated synthetic corpus")
    p.add_argument("--y-train", help="Y-labelled training corpus (.conllu or two-column)")
    p.add_argument("--z-train", help="Z-labelled training corpus (.conllu or two-column)")
    p.add_argument("--val", help="parallel validation pairs (token<TAB>y<TAB>z)")
    p.add_argument("--y-tagset", help="closed Y tag inventory, one tag per line")
    p.add_argument("--z-tagset", help="closed Z tag inventory, one tag per line")
    p.add_argument("--epochs", type=int, help="override the number of epochs")
    p.add_argument("--batch-size", type=int, help="override the batch size")
    p.add_argument("--lr", type=float, help="override the Adam learning rate")
    _seed(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="labelbridge",
                                     description="Tag-scheme bridging tagger with synthetic testbeds.")
    parser.add_argument("-v", "--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus with known ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in synthetic configuration")
    src.add_argument("--config", help="file with a [synth] section")
    p.add_argument("--out", required=True, help="output directory")
    _seed(p)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train the bridging model")
    _data_flags(p)
    p.add_argument("--out", required=True, help="run directory (metrics, checkpoint, reports)")
    p.add_argument("--cheat", action="store_true",
                   help="use the label-leaking surrogate (reproduces its collapse)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-supervised", help="train the plain supervised tagger baseline")
    _data_flags(p)
    p.add_argument("--side", choices=["y", "z"], required=True, help="which scheme to learn")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train_supervised)

    p = sub.add_parser("eval", help="score a checkpoint on parallel pairs")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--pairs", required=True, help="parallel pairs file")
    p.add_argument("--variant", choices=sorted(VARIANT_FLAGS), default="translate",
                   help="translate: gold other-scheme tags; supervisor: own head only; "
                        "no-label: sampled other-scheme tags")
    p.add_argument("--side", choices=["y", "z"], default="y", help="scheme to predict")
    p.add_argument("--out", help="write predictions (token<TAB>tag) here")
    _seed(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("direct-map", help="fit the best tag-to-tag map on parallel pairs")
    p.add_argument("--pairs", required=True, help="parallel pairs file")
    p.add_argument("--direction", choices=sorted(bm.DIRECTIONS), default="z2y", help="map direction")
    p.add_argument("--out", required=True, help="map file (source<TAB>target)")
    p.set_defaults(func=cmd_direct_map)

    p = sub.add_parser("stats", help="label histograms and corpus overlap")
    p.add_argument("--y-corpus", help="Y-labelled corpus")
    p.add_argument("--z-corpus", help="Z-labelled corpus")
    p.add_argument("--pairs", help="parallel pairs file")
    p.add_argument("--overlap", action="store_true", help="find sentences shared by the two corpora")
    p.add_argument("--casefold", action="store_true", help="ignore case when matching sentences")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("grad-check", help="finite-difference check of every op and the training graph")
    p.add_argument("--verbose", action="store_true", help="print every check")
    _seed(p)
    p.set_defaults(func=cmd_grad_check)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_FLAGS if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NonFiniteError, NonDifferentiableError, FloatingPointError) as e:
        print(f"error: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as e:
        print(f"error: {e.filename}: no such file", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ParseError, ConfigError, ManifestError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
