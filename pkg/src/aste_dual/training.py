"""Training loop, evaluation, prediction, and checkpointing.

Training is deterministic given the seed: seeding happens before model
construction, sentences are shuffled by a dedicated RNG, and data loading is
single-worker. The checkpoint embeds the frozen embedding tables so that
evaluate/predict need only the checkpoint file.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .align import tokenize_with_alignment
from .config import ModelConfig
from .corpus import (
    AnnotatedSentence,
    PredictionRecord,
    Sentence,
    build_dependency_graph,
    load_corpus,
    merge_annotations,
    read_sidecar,
)
from .encoders import EmbeddingTable, load_embedding_file
from .errors import CheckpointError, ConfigError, DataError, TrainingDiverged
from .metrics import Metrics, score_corpus
from .model import TripletModel

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "aste-dual-checkpoint"


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


@dataclass
class PreparedSentence:
    sent: AnnotatedSentence
    norm_adj: torch.Tensor


def prepare_sentences(
    sentences, self_loops: bool = True, tokenizer=None, dtype=torch.float32
) -> list[PreparedSentence]:
    """Precompute per-sentence graph tensors; reject unannotated sentences
    and sentences over the encoder's subword limit."""
    prepared = []
    for sent in sentences:
        if not sent.is_annotated:
            raise DataError(f"sentence {sent.id} has no POS/head annotations")
        sent.validate()
        if tokenizer is not None:
            tokenize_with_alignment(sent.tokens, tokenizer)  # raises on overflow
        graph = build_dependency_graph(sent.heads, len(sent), self_loops=self_loops)
        prepared.append(
            PreparedSentence(
                sent=sent, norm_adj=torch.as_tensor(graph.normalized, dtype=dtype)
            )
        )
    return prepared


def load_annotated_corpus(corpus_path, annotation_paths) -> list[AnnotatedSentence]:
    sentences = load_corpus(corpus_path)
    sidecar: dict[str, dict] = {}
    paths = [annotation_paths] if isinstance(annotation_paths, (str, Path)) else list(
        annotation_paths
    )
    for path in paths:
        sidecar.update(read_sidecar(path))
    return merge_annotations(sentences, sidecar)


# --- checkpointing ---


@dataclass
class Checkpoint:
    config: ModelConfig
    parameters: dict[str, np.ndarray]
    epoch: int
    best_metric: Metrics | None
    general: EmbeddingTable | None = None
    specific: EmbeddingTable | None = None


def _table_tokens(table: EmbeddingTable) -> list[str]:
    tokens = [""] * (len(table.vectors) - 1)
    for tok, idx in table.vocab.items():
        tokens[idx] = tok
    return tokens


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Canonical layout: magic line, JSON manifest, raw little-endian array
    bytes in manifest order. Byte-for-byte reproducible across save/load
    cycles (pickle's memoization is not, so it is avoided here)."""
    arrays: list[tuple[str, np.ndarray]] = []
    manifest_arrays = []

    def add_array(name: str, value: np.ndarray):
        arr = np.ascontiguousarray(value)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        arrays.append((name, arr))
        manifest_arrays.append(
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
        )

    for key, value in ckpt.parameters.items():
        add_array("param:" + key, value)
    tables = {}
    for label, table in (("general", ckpt.general), ("specific", ckpt.specific)):
        if table is None:
            tables[label] = None
        else:
            tables[label] = {"tokens": _table_tokens(table), "unk_index": table.unk_index}
            add_array("table:" + label, table.vectors)

    manifest = {
        "version": 1,
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "best_metric": ckpt.best_metric.to_dict() if ckpt.best_metric else None,
        "tables": tables,
        "arrays": manifest_arrays,
    }
    blob = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC.encode("ascii") + b"\n")
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(arr.tobytes())


def load_checkpoint(path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
        magic, _, rest = raw.partition(b"\n")
        if magic.decode("ascii", errors="replace") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not an aste-dual checkpoint")
        blob_len = int.from_bytes(rest[:8], "little")
        manifest = json.loads(rest[8 : 8 + blob_len].decode("utf-8"))
        cursor = 8 + blob_len
        loaded: dict[str, np.ndarray] = {}
        for spec in manifest["arrays"]:
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
            nbytes = dtype.itemsize * count
            arr = np.frombuffer(rest[cursor : cursor + nbytes], dtype=dtype).reshape(
                spec["shape"]
            )
            loaded[spec["name"]] = arr.copy()
            cursor += nbytes
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    def table_from(label: str) -> EmbeddingTable | None:
        meta = manifest["tables"][label]
        if meta is None:
            return None
        vectors = loaded["table:" + label]
        return EmbeddingTable(
            vocab={tok: i for i, tok in enumerate(meta["tokens"])},
            vectors=vectors,
            dim=vectors.shape[1],
            unk_index=meta["unk_index"],
        )

    best = manifest["best_metric"]
    parameters = {
        spec["name"][len("param:"):]: loaded[spec["name"]]
        for spec in manifest["arrays"]
        if spec["name"].startswith("param:")
    }
    return Checkpoint(
        config=ModelConfig.from_dict(manifest["config"]),
        parameters=parameters,
        epoch=manifest["epoch"],
        best_metric=Metrics(best["tp"], best["n_pred"], best["n_gold"]) if best else None,
        general=table_from("general"),
        specific=table_from("specific"),
    )


def snapshot_parameters(model: TripletModel) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def build_model(ckpt: Checkpoint) -> TripletModel:
    model = TripletModel(ckpt.config, general=ckpt.general, specific=ckpt.specific)
    state = {}
    for key, value in ckpt.parameters.items():
        state[key] = torch.as_tensor(value)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint parameters do not match config: {exc}") from exc
    model.eval()
    return model


# --- evaluation ---


def evaluate_prepared(model: TripletModel, prepared) -> Metrics:
    if not prepared:
        raise DataError("cannot evaluate an empty corpus")
    pred = {}
    gold = {}
    for item in prepared:
        pred[item.sent.id] = model.decode_sentence(item.sent, item.norm_adj)
        gold[item.sent.id] = list(item.sent.gold)
    return score_corpus(pred, gold)


def evaluate(ckpt: Checkpoint, corpus_path, annotation_paths) -> Metrics:
    model = build_model(ckpt)
    sentences = load_annotated_corpus(corpus_path, annotation_paths)
    tokenizer = model.basic.tokenizer if model.basic is not None else None
    prepared = prepare_sentences(
        sentences, self_loops=ckpt.config.self_loops, tokenizer=tokenizer
    )
    return evaluate_prepared(model, prepared)


# --- training ---


def _check_table(table: EmbeddingTable, expected_dim: int, name: str) -> None:
    if table.dim != expected_dim:
        raise ConfigError(
            f"{name} embedding file has width {table.dim}, config expects {expected_dim}"
        )


def train(
    config: ModelConfig,
    train_path,
    dev_path,
    annotation_paths,
    glove_path=None,
    domain_emb_path=None,
    test_path=None,
    checkpoint_out=None,
) -> tuple[Checkpoint, list[dict]]:
    """Mini-batch training on the summed boundary + sentiment loss.

    Keeps the parameter snapshot with the best dev F1 (test F1 when
    select_on_test is set and a test split is given). Returns the checkpoint
    and the per-epoch history.
    """
    config.validate()
    seed_everything(config.seed)

    general = specific = None
    if not config.no_particular:
        if glove_path is None:
            raise ConfigError("particular branch requires a --glove embedding file")
        general = load_embedding_file(glove_path)
        _check_table(general, config.d_g, "general")
        if not config.single_embedding:
            if domain_emb_path is None:
                raise ConfigError("3-domain embedding requires a --domain-emb file")
            specific = load_embedding_file(domain_emb_path)
            _check_table(specific, config.d_s, "review-domain")

    model = TripletModel(config, general=general, specific=specific)
    tokenizer = model.basic.tokenizer if model.basic is not None else None

    train_sents = load_annotated_corpus(train_path, annotation_paths)
    dev_sents = load_annotated_corpus(dev_path, annotation_paths)
    if not train_sents or not dev_sents:
        raise DataError("train and dev splits must be non-empty")
    train_prep = prepare_sentences(train_sents, config.self_loops, tokenizer)
    dev_prep = prepare_sentences(dev_sents, config.self_loops, tokenizer)
    test_prep = None
    if test_path is not None:
        test_prep = prepare_sentences(
            load_annotated_corpus(test_path, annotation_paths), config.self_loops, tokenizer
        )
    if config.select_on_test and test_prep is None:
        raise ConfigError("select_on_test requires a test split")

    optimizer = torch.optim.Adam(model.parameter_groups(config.encoder_lr, config.lr))
    scheduler = None
    if config.lr_decay_epoch > 0:
        scheduler = torch.optim.lr_scheduler.MultiStepLR(
            optimizer, milestones=[config.lr_decay_epoch], gamma=config.lr_decay_factor
        )
    rng = random.Random(config.seed)
    history: list[dict] = []
    best_f1 = -1.0
    best_state: dict[str, np.ndarray] | None = None
    best_epoch = 0
    best_metric: Metrics | None = None

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = list(range(len(train_prep)))
        rng.shuffle(order)
        sums = {"l_start": 0.0, "l_end": 0.0, "l_sentiment": 0.0, "total": 0.0}
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            optimizer.zero_grad()
            losses = [
                model.sentence_loss(train_prep[i].sent, train_prep[i].norm_adj)
                for i in batch
            ]
            total = torch.stack([l.total for l in losses]).mean()
            if not torch.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}",
                    diagnostics={
                        "epoch": epoch,
                        "sentence_ids": [train_prep[i].sent.id for i in batch],
                        "l_start": [float(l.l_start.detach()) for l in losses],
                        "l_end": [float(l.l_end.detach()) for l in losses],
                        "l_sentiment": [float(l.l_sentiment.detach()) for l in losses],
                    },
                )
            total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.max_grad_norm)
            optimizer.step()
            for l in losses:
                sums["l_start"] += float(l.l_start.detach())
                sums["l_end"] += float(l.l_end.detach())
                sums["l_sentiment"] += float(l.l_sentiment.detach())
                sums["total"] += float(l.total.detach())
        if scheduler is not None:
            scheduler.step()
        denom = len(order)
        entry = {
            "epoch": epoch,
            "loss": sums["total"] / denom,
            "l_start": sums["l_start"] / denom,
            "l_end": sums["l_end"] / denom,
            "l_sentiment": sums["l_sentiment"] / denom,
        }
        dev_metrics = evaluate_prepared(model, dev_prep)
        entry["dev"] = dev_metrics.to_dict()
        test_metrics = None
        if test_prep is not None:
            test_metrics = evaluate_prepared(model, test_prep)
            entry["test"] = test_metrics.to_dict()
        if config.track_train_f1:
            entry["train"] = evaluate_prepared(model, train_prep).to_dict()
        select = test_metrics if (config.select_on_test and test_metrics) else dev_metrics
        if select.f1 > best_f1:
            best_f1 = select.f1
            best_state = snapshot_parameters(model)
            best_epoch = epoch
            best_metric = select
        history.append(entry)
        log.info(
            "epoch %d: loss %.4f, dev F1 %.4f%s",
            epoch,
            entry["loss"],
            dev_metrics.f1,
            f", test F1 {test_metrics.f1:.4f}" if test_metrics else "",
        )

    assert best_state is not None
    ckpt = Checkpoint(
        config=config,
        parameters=best_state,
        epoch=best_epoch,
        best_metric=best_metric,
        general=general,
        specific=specific,
    )
    if checkpoint_out is not None:
        save_checkpoint(ckpt, checkpoint_out)
    return ckpt, history


# --- prediction ---


def predict_sentences(
    ckpt: Checkpoint, sentences: list[Sentence], annotator=None, sidecar=None
) -> list[PredictionRecord]:
    """Decode triplets for raw sentences, annotating on the fly.

    Per-sentence failures (annotation errors, encoder length overflow) become
    error records; the run continues.
    """
    if annotator is None and sidecar is None:
        raise ConfigError("predict needs an annotator backend or a sidecar file")
    model = build_model(ckpt)
    tokenizer = model.basic.tokenizer if model.basic is not None else None
    records = []
    for sent in sentences:
        try:
            if sidecar is not None:
                rec = sidecar.get(sent.id)
                if rec is None:
                    raise DataError(f"sentence {sent.id}: no sidecar record")
                merged = merge_annotations(
                    [AnnotatedSentence(sentence=sent)], {sent.id: rec}
                )[0]
            else:
                raw_pos, heads = annotator.annotate(list(sent.tokens))
                merged = merge_annotations(
                    [AnnotatedSentence(sentence=sent)],
                    {
                        sent.id: {
                            "id": sent.id,
                            "tokens": list(sent.tokens),
                            "pos": raw_pos,
                            "heads": heads,
                        }
                    },
                )[0]
            prepared = prepare_sentences(
                [merged], self_loops=ckpt.config.self_loops, tokenizer=tokenizer
            )[0]
            triplets = model.decode_sentence(prepared.sent, prepared.norm_adj)
            records.append(PredictionRecord(id=sent.id, triplets=tuple(triplets)))
        except Exception as exc:  # keep going; the record carries the reason
            log.warning("sentence %s failed: %s", sent.id, exc)
            records.append(PredictionRecord(id=sent.id, error=str(exc)))
    return records
