"""``longfin`` command line: pretrain, finetune, evaluate, stats, inspect-pattern, gradcheck.

Checkpoints travel with sidecar files next to them: ``<ckpt>.config``
(key=value model config), ``<ckpt>.vocab.json`` and ``<ckpt>.loss.csv``.
Failures print one line ``longfin: error {json}`` to stderr and exit nonzero.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import kernels
from .attention import build_pattern
from .checkpoint import CheckpointError, load_checkpoint, read_config, save_checkpoint, write_config
from .document import SchemaError, format_stats_table, read_jsonl, split_stats
from .finetune import evaluate, finetune
from .labels import chunk_document, encode_document
from .metrics import corpus_f1, format_report
from .model import ModelConfig, check_params, extend_positions, init_params
from .pretrain import pretrain
from .rng import derive
from .tokenizer import Vocabulary, build_vocab
from .training import FINETUNE_DESK, PRETRAIN_DESK, STREAM_INIT, Schedule

log = logging.getLogger("longfin")


class UsageError(Exception):
    """Bad flags or conflicting settings."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


# ---------------------------------------------------------------------------
# sidecars and resolution


def sidecar(ckpt, kind):
    return Path(f"{ckpt}.{kind}")


def _require(path, what):
    if path is None:
        raise UsageError(f"{what} is required")
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return Path(path)


def _schedule(args, base):
    over = {k: getattr(args, k) for k in ("steps", "lr", "warmup", "batch_size", "optimizer", "decay")}
    return replace(base, **{k: v for k, v in over.items() if v is not None})


def _load_model(args):
    """Checkpoint params, its config, and its vocabulary.

    A ``--config`` given alongside a checkpoint must agree with the stored one,
    except that ``max_len`` may grow by an integer factor, in which case the
    position tables are tiled.
    """
    ckpt = _require(args.checkpoint, "--checkpoint")
    stored = read_config(_require(sidecar(ckpt, "config"), "checkpoint config"))
    vocab = Vocabulary.load(_require(sidecar(ckpt, "vocab.json"), "checkpoint vocabulary"))
    params = load_checkpoint(ckpt)
    check_params(params, stored)
    cfg = stored
    if getattr(args, "config", None):
        wanted = read_config(_require(args.config, "--config"))
        if replace(wanted, max_len=stored.max_len, dropout_rate=stored.dropout_rate) != stored:
            diff = sorted(k for k, v in asdict(wanted).items() if v != getattr(stored, k) and k not in ("max_len", "dropout_rate"))
            raise UsageError(f"--config conflicts with checkpoint config on: {', '.join(diff)}")
        if wanted.max_len != stored.max_len:
            factor, rest = divmod(wanted.max_len, stored.max_len)
            if rest or factor < 1:
                raise UsageError(f"max_len {wanted.max_len} is not a multiple of the checkpoint's {stored.max_len}")
            for name in ("text.pos_emb", "layout.pos_emb"):
                params[name].data = extend_positions(params[name], factor)
            log.info("positions tiled x%d to %d", factor, wanted.max_len)
        cfg = wanted
    return params, cfg, vocab


def _save_model(out, params, cfg, vocab):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, params)
    write_config(sidecar(out, "config"), cfg)
    vocab.save(sidecar(out, "vocab.json"))


def _log_resolved(command, args, cfg=None, schedule=None):
    def plain(v):
        if isinstance(v, Path):
            return str(v)
        return [plain(x) for x in v] if isinstance(v, list) else v

    resolved = {k: plain(v) for k, v in vars(args).items() if k != "func"}
    if cfg is not None:
        resolved["model"] = asdict(cfg)
    if schedule is not None:
        resolved["schedule"] = asdict(schedule)
    resolved["kernels"] = kernels.BACKEND
    log.info("%s resolved config: %s", command, json.dumps(resolved, sort_keys=True))


# ---------------------------------------------------------------------------
# commands


def cmd_pretrain(args):
    docs = read_jsonl(_require(args.data, "--data"))
    cfg = read_config(args.config) if args.config else ModelConfig()
    schedule = _schedule(args, PRETRAIN_DESK)
    _log_resolved("pretrain", args, cfg, schedule)
    vocab = build_vocab([w.text for d in docs for w in d.words], max_size=cfg.vocab_size)
    if len(vocab) > cfg.vocab_size:
        raise UsageError(f"vocabulary needs {len(vocab)} entries but vocab_size is {cfg.vocab_size}")
    corpus = [encode_document(d, vocab) for d in docs if d.words]
    params = init_params(cfg, derive(args.seed, STREAM_INIT))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    records = pretrain(params, cfg, corpus, schedule, args.seed, len(vocab), sidecar(out, "loss.csv"))
    _save_model(out, params, cfg, vocab)
    if records:
        print(f"pretrained {len(records)} steps, final loss {records[-1][1]:.6f}")
    return 0


def cmd_finetune(args):
    docs = read_jsonl(_require(args.data, "--data"))
    if args.checkpoint:
        params, cfg, vocab = _load_model(args)
    else:
        cfg = read_config(args.config) if args.config else ModelConfig()
        vocab = build_vocab([w.text for d in docs for w in d.words], max_size=cfg.vocab_size)
        params = init_params(cfg, derive(args.seed, STREAM_INIT))
    schedule = _schedule(args, FINETUNE_DESK)
    _log_resolved("finetune", args, cfg, schedule)
    examples = [encode_document(d, vocab) for d in docs if d.words]
    if args.mode == "chunked":
        examples = [c for ex in examples for c in chunk_document(ex, args.max_len, args.stride)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    records = finetune(params, cfg, examples, schedule, args.seed, sidecar(out, "loss.csv"))
    _save_model(out, params, cfg, vocab)
    if records:
        print(f"finetuned {len(records)} steps, final loss {records[-1][1]:.6f}")
    return 0


def _score_predictions(pred_path, gold):
    preds = {d.id: d for d in read_jsonl(_require(pred_path, "--predictions"))}
    pairs = []
    for doc in gold:
        if doc.id not in preds:
            raise SchemaError(f"no prediction for document {doc.id!r}", path=str(pred_path))
        pairs.append((preds[doc.id].entities, doc.entities))
    extra = sorted(set(preds) - {d.id for d in gold})
    if extra:
        raise SchemaError(f"predictions for unknown documents: {extra[:3]}", path=str(pred_path))
    return corpus_f1(pairs)


def cmd_evaluate(args):
    gold = read_jsonl(_require(args.data, "--data"))
    if args.predictions and args.checkpoint:
        raise UsageError("give either --checkpoint or --predictions, not both")
    if args.predictions:
        _log_resolved("evaluate", args)
        report = _score_predictions(args.predictions, gold)
    else:
        params, cfg, vocab = _load_model(args)
        _log_resolved("evaluate", args, cfg)
        report = evaluate(params, cfg, gold, vocab, args.mode, args.max_len, args.stride)
    table = format_report(report, "longfin" if args.mode == "long" else f"longfin-chunked{args.max_len}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json(), encoding="utf-8")
        out.with_suffix(".txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def cmd_stats(args):
    if not args.data:
        raise UsageError("at least one --data file is required")
    _log_resolved("stats", args)
    splits = {}
    for path in args.data:
        name = Path(path).stem
        if name in splits:
            raise UsageError(f"two --data files share the split name {name!r}")
        splits[name] = read_jsonl(_require(path, "--data"))
    table = format_stats_table(split_stats(splits))
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def pattern_rle(p):
    """One line per row: ``i: a-b,c`` listing allowed column runs (inclusive)."""
    lines = [f"# n={p.n} window={p.window} globals={len(p.global_idx)} nnz={p.nnz}"]
    for i in range(p.n):
        cols = p.row(i)
        runs, start = [], cols[0]
        for a, b in zip(cols[:-1], cols[1:]):
            if b != a + 1:
                runs.append((start, a))
                start = b
        runs.append((start, cols[-1]))
        lines.append(f"{i}: " + ",".join(f"{a}" if a == b else f"{a}-{b}" for a, b in runs))
    return "\n".join(lines) + "\n"


def pattern_pbm(p):
    """Plain (P1) PBM; a 1 (black) pixel marks an allowed pair."""
    lines = ["P1", f"{p.n} {p.n}"]
    for i in range(p.n):
        row = ["0"] * p.n
        for j in p.row(i):
            row[j] = "1"
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def cmd_inspect_pattern(args):
    _log_resolved("inspect-pattern", args)
    p = build_pattern(args.n, args.window, args.interval)
    text = pattern_pbm(p) if args.format == "pbm" else pattern_rle(p)
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args):
    from .gradcheck import model_grad_check

    _log_resolved("gradcheck", args)
    tol = 1e-5 if args.precision == 64 else 1e-2
    results = model_grad_check(args.loss, args.precision, args.seed)
    failed = []
    for name, (worst, per_tensor) in results.items():
        print(f"{name}: max rel err {worst:.3e} (tolerance {tol:g}, {len(per_tensor)} tensors, {args.precision}-bit)")
        if not worst < tol:
            failed.append(name)
    if failed:
        raise ArithmeticError(f"gradient check above tolerance for: {', '.join(failed)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, seed=True, threads=True):
    if seed:
        p.add_argument("--seed", type=_u64, default=0, help="unsigned 64-bit run seed (default 0)")
    if threads:
        p.add_argument("--threads", type=_positive, default=None, help="cap kernel worker threads")


def _add_schedule(p):
    g = p.add_argument_group("schedule overrides")
    g.add_argument("--steps", type=_nonneg)
    g.add_argument("--lr", type=float)
    g.add_argument("--warmup", type=_nonneg)
    g.add_argument("--batch-size", type=_positive)
    g.add_argument("--optimizer", choices=("adam", "adafactor"))
    g.add_argument("--decay", choices=("constant", "linear"))


def _add_mode(p):
    p.add_argument("--mode", choices=("long", "chunked"), default="long")
    p.add_argument("--max-len", type=_positive, default=512, help="chunk length in chunked mode (default 512)")
    p.add_argument("--stride", type=_nonneg, default=0, help="chunk overlap in tokens (default 0)")


def build_parser():
    parser = _Parser(prog="longfin", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("pretrain", help="MVLM pretraining; writes a checkpoint and loss CSV", allow_abbrev=False)
    p.add_argument("--config", type=Path, help="model config (key=value); defaults to the desk config")
    p.add_argument("--data", type=Path, required=True, help="JSONL corpus")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path to write")
    _add_schedule(p)
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="NER fine-tuning; writes a checkpoint", allow_abbrev=False)
    p.add_argument("--config", type=Path, help="model config; with --checkpoint may only raise max_len")
    p.add_argument("--checkpoint", type=Path, help="start from this checkpoint (else from scratch)")
    p.add_argument("--data", type=Path, required=True, help="labelled JSONL training set")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path to write")
    _add_mode(p)
    _add_schedule(p)
    _add_common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="entity-level P/R/F1 report", allow_abbrev=False)
    p.add_argument("--config", type=Path, help="override config (max_len may grow by tiling)")
    p.add_argument("--checkpoint", type=Path, help="model to run")
    p.add_argument("--predictions", type=Path, help="score this JSONL of predicted entities instead of running a model")
    p.add_argument("--data", type=Path, required=True, help="gold JSONL")
    p.add_argument("--out", type=Path, help="report JSON path; the text table goes next to it as .txt")
    _add_mode(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="forms/pages/words/entities per split", allow_abbrev=False)
    p.add_argument("--data", type=Path, action="append", default=[], help="JSONL split; repeat per split")
    p.add_argument("--out", type=Path, help="also write the table here")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("inspect-pattern", help="dump an attention pattern", allow_abbrev=False)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--window", type=_nonneg, required=True)
    p.add_argument("--interval", type=_positive, required=True)
    p.add_argument("--format", choices=("pbm", "rle"), default="rle")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_inspect_pattern)

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference gradient check", allow_abbrev=False)
    p.add_argument("--precision", type=int, choices=(32, 64), default=64)
    p.add_argument("--loss", choices=("mvlm", "ner", "both"), default="both")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time, so repeated in-process
    calls to ``main`` follow redirections."""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


def _configure_logging():
    level = os.environ.get("LONGFIN_LOG", "info").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise UsageError(f"LONGFIN_LOG must be error, info or debug, got {level!r}")
    root = logging.getLogger("longfin")
    root.setLevel(levels[level])
    if not any(isinstance(h, _StderrHandler) for h in root.handlers):
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)


def _error_line(exc):
    info = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SchemaError):
        info.update(path=exc.path, line=exc.line)
    if isinstance(exc, OSError) and exc.filename:
        info["path"] = str(exc.filename)
    return "longfin: error " + json.dumps(info, sort_keys=True)


def main(argv=None):
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", None):
            kernels.set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, CheckpointError, NotImplementedError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # still report in the parseable form
        log.debug("unexpected failure", exc_info=True)
        print(_error_line(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
