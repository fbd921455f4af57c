"""Command-line interface: train, evaluate, predict, annotate.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .annotate import annotate_corpus, get_backend
from .config import ModelConfig, load_config
from .corpus import Sentence, load_corpus, read_sidecar, write_sidecar
from .errors import AnnotatorError, AsteError, ConfigError, DataError, TrainingDiverged
from .metrics import macro_scores
from .training import (
    build_model,
    evaluate,
    load_annotated_corpus,
    load_checkpoint,
    predict_sentences,
    prepare_sentences,
    train,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


_ABLATION_FLAGS = (
    "no_basic",
    "no_particular",
    "no_interaction",
    "single_embedding",
    "no_gcn",
)

_OVERRIDE_FIELDS = (
    "encoder_name",
    "epochs",
    "batch_size",
    "lr",
    "encoder_lr",
    "seed",
    "top_k",
    "dropout",
    "gcn_layers",
    "interaction_layers",
    "cnn_layers",
    "select_on_test",
)


def _build_config(args) -> ModelConfig:
    config = load_config(args.config) if args.config else ModelConfig()
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    for name in _ABLATION_FLAGS:
        if getattr(args, name, False):
            setattr(config, name, True)
    if getattr(args, "no_self_loops", False):
        config.self_loops = False
    config.validate()
    return config


def _cmd_train(args) -> int:
    config = _build_config(args)
    ckpt, history = train(
        config,
        train_path=args.train,
        dev_path=args.dev,
        annotation_paths=args.annotations,
        glove_path=args.glove,
        domain_emb_path=args.domain_emb,
        test_path=args.test,
        checkpoint_out=args.checkpoint_out,
    )
    if args.history_out:
        with open(args.history_out, "w", encoding="utf-8") as fh:
            for entry in history:
                fh.write(json.dumps(entry) + "\n")
    best = ckpt.best_metric.to_dict() if ckpt.best_metric else None
    print(json.dumps({"best_epoch": ckpt.epoch, "best_metric": best}))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    metrics = evaluate(ckpt, args.data, args.annotations)
    payload = metrics.to_dict()
    if args.macro:
        model = build_model(ckpt)
        sentences = load_annotated_corpus(args.data, args.annotations)
        tokenizer = model.basic.tokenizer if model.basic is not None else None
        prepared = prepare_sentences(sentences, ckpt.config.self_loops, tokenizer)
        pred = {p.sent.id: model.decode_sentence(p.sent, p.norm_adj) for p in prepared}
        gold = {p.sent.id: list(p.sent.gold) for p in prepared}
        payload["macro"] = macro_scores(pred, gold)
    text = json.dumps(payload)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def _read_raw_sentences(path) -> list[Sentence]:
    path = Path(path)
    sentences = []
    count = 0
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        sentences.append(Sentence(id=f"{path.stem}-{count:04d}", tokens=tuple(line.split())))
        count += 1
    return sentences


def _cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    sentences = _read_raw_sentences(args.input)
    sidecar = read_sidecar(args.annotations) if args.annotations else None
    annotator = get_backend(args.backend) if sidecar is None else None
    records = predict_sentences(ckpt, sentences, annotator=annotator, sidecar=sidecar)
    with open(args.output, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    failures = sum(1 for r in records if r.error is not None)
    print(
        json.dumps(
            {"sentences": len(records), "failed": failures, "output": str(args.output)}
        )
    )
    return EXIT_OK


def _cmd_annotate(args) -> int:
    sentences = load_corpus(args.input)
    backend = get_backend(args.backend)
    records = annotate_corpus(sentences, backend)
    write_sidecar(args.output, records)
    print(json.dumps({"sentences": len(records), "output": str(args.output)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aste-dual", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and keep the best checkpoint")
    p_train.add_argument("--config", help="YAML config file")
    p_train.add_argument("--train", required=True, help="training corpus")
    p_train.add_argument("--dev", required=True, help="development corpus")
    p_train.add_argument("--test", help="optional test corpus")
    p_train.add_argument("--glove", help="general-domain embedding file")
    p_train.add_argument("--domain-emb", dest="domain_emb", help="review-domain embedding file")
    p_train.add_argument(
        "--annotations", action="append", required=True, help="sidecar file (repeatable)"
    )
    p_train.add_argument("--checkpoint-out", default="model.ckpt")
    p_train.add_argument("--history-out", help="per-epoch metrics log (JSON lines)")
    p_train.add_argument("--encoder", dest="encoder_name")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--encoder-lr", dest="encoder_lr", type=float)
    p_train.add_argument("--top-k", dest="top_k", type=int)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--gcn-layers", dest="gcn_layers", type=int)
    p_train.add_argument("--interaction-layers", dest="interaction_layers", type=int)
    p_train.add_argument("--cnn-layers", dest="cnn_layers", type=int)
    p_train.add_argument("--select-on-test", dest="select_on_test", action="store_true", default=None)
    p_train.add_argument("--no-self-loops", dest="no_self_loops", action="store_true")
    p_train.add_argument("--no-basic", dest="no_basic", action="store_true")
    p_train.add_argument("--no-particular", dest="no_particular", action="store_true")
    p_train.add_argument("--no-interaction", dest="no_interaction", action="store_true")
    p_train.add_argument("--single-embedding", dest="single_embedding", action="store_true")
    p_train.add_argument("--no-gcn", dest="no_gcn", action="store_true")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a checkpoint on a corpus")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--annotations", action="append", required=True)
    p_eval.add_argument("--output", help="also write the metrics record here")
    p_eval.add_argument("--macro", action="store_true", help="add macro-averaged scores")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_pred = sub.add_parser("predict", help="extract triplets from raw sentences")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--input", required=True, help="one whitespace-tokenized sentence per line")
    p_pred.add_argument("--output", required=True, help="JSON-lines prediction records")
    p_pred.add_argument("--annotations", help="precomputed sidecar instead of a live backend")
    p_pred.add_argument("--backend", default="spacy")
    p_pred.set_defaults(func=_cmd_predict)

    p_ann = sub.add_parser("annotate", help="produce a POS/dependency sidecar for a corpus")
    p_ann.add_argument("--input", required=True)
    p_ann.add_argument("--output", required=True)
    p_ann.add_argument("--backend", default="spacy")
    p_ann.set_defaults(func=_cmd_annotate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, AnnotatorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostics, indent=2), file=sys.stderr)
        return EXIT_RUNTIME
    except AsteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort mapping
        log.exception("unhandled failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
