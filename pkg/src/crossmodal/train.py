"""Training loops, evaluation, attention dumps, and data-directory plumbing.

Pre-training runs in two phases: the QA loss is disabled for the first part
of the epochs and enabled for the rest (``qa_start_fraction``, default the
second half). One metrics line is appended per step. Checkpoints are saved
per epoch with optimizer and rng state, so training can resume and
reproduce the uninterrupted run exactly.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ModelConfig, RunConfig
from .data import (
    OUT_OF_TABLE,
    AnswerTable,
    BatchMaker,
    BatchRow,
    CorpusRecord,
    CrossModalBatch,
    FeatureStore,
    MaskingConfig,
    ObjectSet,
    PairRecord,
    Vocabulary,
    build_answer_table,
    collate,
    load_corpus,
    load_pairs,
    tokenize,
)
from .encoders import Runtime, forward_batch, model_forward
from .heads import pairwise_bce, pairwise_logit, pretrain_losses, qa_loss
from .optim import OptimizerState, adam_step, clip_gradients, lr_at_step
from .params import PAIRWISE_HEAD, PRETRAIN_HEADS, init_head_params, init_params
from .tensor import Tape, Tensor, backward, matmul, zero_grads

CORPUS_FILE = "corpus.jsonl"
FEATURES_FILE = "features.bin"
VOCAB_FILE = "vocab.json"
LABELS_FILE = "labels.json"
PAIRS_FILE = "pairs.jsonl"


@dataclass
class DataBundle:
    records: list[CorpusRecord]
    store: FeatureStore
    vocab: Vocabulary
    label_names: list[str]
    pairs: list[PairRecord] | None = None

    def split(self, tag: str) -> list[CorpusRecord]:
        return [r for r in self.records if r.split == tag]


def load_data_dir(path) -> DataBundle:
    """Load the gen-data output directory."""
    records = load_corpus(os.path.join(path, CORPUS_FILE))
    store = FeatureStore.load(os.path.join(path, FEATURES_FILE))
    vocab = Vocabulary.load(os.path.join(path, VOCAB_FILE))
    labels_path = os.path.join(path, LABELS_FILE)
    if os.path.exists(labels_path):
        with open(labels_path, "r", encoding="utf-8") as fh:
            label_names = json.load(fh)["labels"]
    else:
        label_names = [f"label{i}" for i in range(store.num_labels())]
    pairs_path = os.path.join(path, PAIRS_FILE)
    pairs = load_pairs(pairs_path) if os.path.exists(pairs_path) else None
    return DataBundle(records, store, vocab, label_names, pairs)


def resolve_model_config(model: ModelConfig, bundle: DataBundle,
                         answer_coverage: float) -> tuple[ModelConfig, AnswerTable]:
    """Fill the data-derived config fields and check corpus compatibility."""
    if bundle.store.m != model.objects_per_image:
        raise ValueError(
            f"feature store holds {bundle.store.m} objects per image, "
            f"config expects {model.objects_per_image}"
        )
    if bundle.store.feat_dim != model.feat_dim:
        raise ValueError(
            f"feature store feat_dim {bundle.store.feat_dim} != config feat_dim {model.feat_dim}"
        )
    table = build_answer_table(bundle.split("train"), answer_coverage)
    cfg = replace(
        model,
        vocab_size=len(bundle.vocab),
        num_labels=len(bundle.label_names),
        num_answers=len(table),
    ).validate()
    return cfg, table


def make_initial_checkpoint(run_cfg: RunConfig, bundle: DataBundle, seed: int) -> Checkpoint:
    """Randomly initialized checkpoint with data-derived sizes resolved.

    Uses the same seed derivation as run_pretraining, so this equals the
    state a pre-training run with the same seed starts from.
    """
    cfg, table = resolve_model_config(run_cfg.model, bundle, run_cfg.schedule.answer_coverage)
    init_seed, _ = np.random.SeedSequence(seed).spawn(2)
    params = init_params(cfg, np.random.default_rng(init_seed), heads=(PRETRAIN_HEADS,))
    return Checkpoint(config=cfg, heads=(PRETRAIN_HEADS,), params=params,
                      extra={"answers": table.answers, "epoch": 0})


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng


def _grad_dict(params: dict[str, Tensor]) -> dict[str, np.ndarray | None]:
    return {name: p.grad for name, p in params.items()}


def _clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    """Copy parameters so in-place optimizer updates cannot leak to the caller."""
    return {name: Tensor(p.data.copy(), requires_grad=True) for name, p in params.items()}


@dataclass
class PretrainResult:
    final_checkpoint: str
    metrics_path: str
    history: list[dict]
    config: ModelConfig
    answers: list[str]


def run_pretraining(bundle: DataBundle, run_cfg: RunConfig, seed: int, out_dir,
                    resume: str | None = None, log=None) -> PretrainResult:
    """Two-phase pre-training over the train split.

    Phase 1 runs with the QA loss forced to zero; phase 2 enables it. All
    randomness (masking, mismatching, shuffling, dropout) is drawn from one
    generator whose state is checkpointed, so a resumed run reproduces the
    uninterrupted loss sequence exactly.
    """
    run_cfg.validate()
    sched = run_cfg.schedule
    os.makedirs(out_dir, exist_ok=True)

    train_records = bundle.split("train")
    if not train_records:
        raise ValueError("corpus has no train records")
    cfg, table = resolve_model_config(run_cfg.model, bundle, sched.answer_coverage)

    steps_per_epoch = math.ceil(len(train_records) / sched.batch_size)
    total_steps = steps_per_epoch * sched.epochs
    qa_start_epoch = int(round(sched.epochs * sched.qa_start_fraction))

    if resume is not None:
        ckpt = load_checkpoint(resume, expected_config=cfg)
        params = ckpt.params
        opt = ckpt.opt_state
        if opt is None:
            raise ValueError("resume checkpoint has no optimizer state")
        train_rng = _restore_rng(ckpt.rng_state)
        start_epoch = int(ckpt.extra.get("epoch", 0))
    else:
        seeds = np.random.SeedSequence(seed).spawn(2)
        init_rng = np.random.default_rng(seeds[0])
        train_rng = np.random.default_rng(seeds[1])
        params = init_params(cfg, init_rng, heads=(PRETRAIN_HEADS,))
        opt = OptimizerState.init(params, sched.peak_lr, sched.warmup_fraction, total_steps)
        start_epoch = 0

    maker = BatchMaker(train_records, bundle.store, bundle.vocab, table,
                       run_cfg.masking, cfg)
    rt = Runtime(training=True, rng=train_rng)
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    history: list[dict] = []
    t0 = time.time()

    mode = "a" if resume is not None else "w"
    with open(metrics_path, mode, encoding="utf-8") as metrics:
        for epoch in range(start_epoch, sched.epochs):
            qa_enabled = epoch >= qa_start_epoch
            peak = sched.peak_lr
            if qa_enabled and sched.phase2_lr is not None:
                peak = sched.phase2_lr
            order = train_rng.permutation(len(train_records))
            for i in range(steps_per_epoch):
                step = epoch * steps_per_epoch + i
                chunk = order[i * sched.batch_size:(i + 1) * sched.batch_size]
                rows = [maker.make_row(train_records[j], train_rng) for j in chunk]
                packed = collate(CrossModalBatch(rows), bundle.vocab)

                zero_grads(params)
                with Tape():
                    out = forward_batch(packed, params, cfg, rt)
                    bundle_losses = pretrain_losses(
                        packed, out, params, qa_enabled=qa_enabled,
                        gate_object_tasks=sched.gate_object_tasks)
                    backward(bundle_losses.total)
                clip_gradients(params, sched.clip_norm)
                lr = lr_at_step(step, peak, sched.warmup_fraction, total_steps)
                adam_step(params, _grad_dict(params), opt, lr)

                line = {"step": step, "lr": lr}
                line.update(bundle_losses.floats())
                line["wall_time"] = time.time() - t0
                metrics.write(json.dumps(line) + "\n")
                history.append(line)
                if log is not None and (step % 50 == 0 or step == total_steps - 1):
                    log(f"step {step}/{total_steps} lr={lr:.2e} total={line['total']:.4f}")

            if sched.checkpoint_every_epoch:
                epoch_ckpt = Checkpoint(
                    config=cfg, heads=(PRETRAIN_HEADS,), params=params,
                    opt_state=opt, rng_state=_rng_state(train_rng),
                    extra={"epoch": epoch + 1, "answers": table.answers,
                           "answer_coverage": sched.answer_coverage})
                save_checkpoint(os.path.join(out_dir, f"checkpoint-epoch-{epoch + 1}.ckpt"),
                                epoch_ckpt)

    final = Checkpoint(
        config=cfg, heads=(PRETRAIN_HEADS,), params=params,
        opt_state=opt, rng_state=_rng_state(train_rng),
        extra={"epoch": sched.epochs, "answers": table.answers,
               "answer_coverage": sched.answer_coverage})
    final_path = os.path.join(out_dir, "checkpoint-final.ckpt")
    save_checkpoint(final_path, final)
    return PretrainResult(final_path, metrics_path, history, cfg, table.answers)


# ---------------------------------------------------------------------------
# evaluation


def _plain_row(record: CorpusRecord, store: FeatureStore, vocab: Vocabulary,
               cfg: ModelConfig, answer_index: int = OUT_OF_TABLE) -> BatchRow:
    seq = tokenize(record.sentence, vocab, cfg.max_sentence_len, cfg.use_sep)
    seq.mlm_targets = np.full(seq.token_ids.shape, -1, dtype=np.int64)
    feats, boxes, labels = store.get(record.image_id)
    objects = ObjectSet(feats, boxes, labels.astype(np.int64),
                        mask_flags=np.zeros(store.m, dtype=bool),
                        regression_targets=feats)
    return BatchRow(seq, objects, True, answer_index, record.is_question)


def _batched(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def evaluate_checkpoint(ckpt: Checkpoint, bundle: DataBundle, seed: int,
                        batch_size: int = 32,
                        masking: MaskingConfig | None = None) -> dict:
    """Held-out metrics: matching accuracy, masked-label accuracy, QA accuracy."""
    cfg = ckpt.config
    if len(bundle.vocab) != cfg.vocab_size:
        raise ValueError(
            f"vocabulary size {len(bundle.vocab)} != checkpoint vocab_size {cfg.vocab_size}"
        )
    answers = list((ckpt.extra or {}).get("answers", []))
    table = AnswerTable(answers)
    dev = bundle.split("dev") or bundle.split("train")
    params = ckpt.params
    rng = np.random.default_rng(seed)
    masking = masking or MaskingConfig()

    # matching: mismatch half the rows, nothing else perturbed
    match_cfg = MaskingConfig(word_mask_prob=0.0, object_mask_prob=0.0,
                              mismatch_prob=masking.mismatch_prob or 0.5)
    maker = BatchMaker(dev, bundle.store, bundle.vocab, table, match_cfg, cfg)
    match_hits = match_total = 0
    for chunk in _batched(dev, batch_size):
        packed = collate(CrossModalBatch([maker.make_row(r, rng) for r in chunk]), bundle.vocab)
        out = forward_batch(packed, params, cfg)
        logits = (matmul(out.cls, params["head.match.w"]) + params["head.match.b"]).data
        match_hits += int((logits.argmax(axis=1) == packed.match_labels).sum())
        match_total += packed.size

    # masked detected-label accuracy
    label_cfg = MaskingConfig(word_mask_prob=0.0, mismatch_prob=0.0,
                              object_mask_prob=max(masking.object_mask_prob, 0.15))
    maker = BatchMaker(dev, bundle.store, bundle.vocab, table, label_cfg, cfg)
    label_hits = label_total = 0
    for chunk in _batched(dev, batch_size):
        packed = collate(CrossModalBatch([maker.make_row(r, rng) for r in chunk]), bundle.vocab)
        out = forward_batch(packed, params, cfg)
        flags = packed.obj_mask_flags.reshape(-1)
        if not flags.any():
            continue
        b, m, d = out.vis.shape
        rows = out.vis.data.reshape(b * m, d)[flags]
        logits = rows @ params["head.obj_label.w"].data + params["head.obj_label.b"].data
        truth = packed.detected_labels.reshape(-1)[flags]
        label_hits += int((logits.argmax(axis=1) == truth).sum())
        label_total += int(flags.sum())

    # QA accuracy over matched, in-table dev questions
    questions = [r for r in dev if r.is_question and table.lookup(r.answer) != OUT_OF_TABLE]
    qa_hits = qa_total = 0
    for chunk in _batched(questions, batch_size):
        rows = [_plain_row(r, bundle.store, bundle.vocab, cfg, table.lookup(r.answer))
                for r in chunk]
        packed = collate(CrossModalBatch(rows), bundle.vocab)
        out = forward_batch(packed, params, cfg)
        logits = (matmul(out.cls, params["head.qa.w"]) + params["head.qa.b"]).data
        qa_hits += int((logits.argmax(axis=1) == packed.answer_indices).sum())
        qa_total += packed.size

    return {
        "match_accuracy": match_hits / match_total if match_total else float("nan"),
        "match_n": match_total,
        "masked_label_accuracy": label_hits / label_total if label_total else float("nan"),
        "masked_label_n": label_total,
        "label_chance": 1.0 / cfg.num_labels if cfg.num_labels else float("nan"),
        "qa_accuracy": qa_hits / qa_total if qa_total else float("nan"),
        "qa_n": qa_total,
    }


# ---------------------------------------------------------------------------
# fine-tuning


@dataclass
class FinetuneResult:
    final_checkpoint: str
    metrics_path: str
    history: list[dict]
    dev_accuracy: float
    answers: list[str] | None = None


def _finetune_schedule(n_rows: int, batch_size: int, epochs: int) -> tuple[int, int]:
    steps_per_epoch = math.ceil(n_rows / batch_size)
    return steps_per_epoch, steps_per_epoch * epochs


def run_finetune_qa(ckpt: Checkpoint, bundle: DataBundle, run_cfg: RunConfig,
                    seed: int, out_dir, log=None) -> FinetuneResult:
    """Fine-tune on question answering with a fresh answer head by default."""
    ft = run_cfg.finetune.validate()
    os.makedirs(out_dir, exist_ok=True)
    cfg = ckpt.config
    if len(bundle.vocab) != cfg.vocab_size:
        raise ValueError("vocabulary does not match the checkpoint")
    train_qs = [r for r in bundle.split("train") if r.is_question]
    if not train_qs:
        raise ValueError("fine-tuning corpus has no train questions")

    seeds = np.random.SeedSequence(seed).spawn(2)
    head_rng = np.random.default_rng(seeds[0])
    train_rng = np.random.default_rng(seeds[1])

    params = _clone_params(ckpt.params)
    if ft.reuse_qa_head:
        answers = list((ckpt.extra or {}).get("answers", []))
        if not answers:
            raise ValueError("--reuse-qa-head needs a checkpoint with a stored answer table")
        table = AnswerTable(answers)
    else:
        table = build_answer_table(train_qs, coverage_target=1.0)
        cfg = replace(cfg, num_answers=len(table)).validate()
        fresh = init_head_params(cfg, head_rng, PRETRAIN_HEADS)
        params["head.qa.w"] = fresh["head.qa.w"]
        params["head.qa.b"] = fresh["head.qa.b"]

    rows_train = [r for r in train_qs if table.lookup(r.answer) != OUT_OF_TABLE]
    steps_per_epoch, total_steps = _finetune_schedule(len(rows_train), ft.batch_size, ft.epochs)
    opt = OptimizerState.init(params, ft.lr, ft.warmup_fraction, total_steps)
    rt = Runtime(training=True, rng=train_rng)
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    history = []
    t0 = time.time()

    with open(metrics_path, "w", encoding="utf-8") as metrics:
        for epoch in range(ft.epochs):
            order = train_rng.permutation(len(rows_train))
            for i in range(steps_per_epoch):
                step = epoch * steps_per_epoch + i
                chunk = [rows_train[j] for j in order[i * ft.batch_size:(i + 1) * ft.batch_size]]
                rows = [_plain_row(r, bundle.store, bundle.vocab, cfg, table.lookup(r.answer))
                        for r in chunk]
                packed = collate(CrossModalBatch(rows), bundle.vocab)
                zero_grads(params)
                with Tape():
                    out = forward_batch(packed, params, cfg, rt)
                    loss, _ = qa_loss(out.cls, packed.answer_indices, packed.match_labels,
                                      packed.is_question, params)
                    backward(loss)
                clip_gradients(params, ft.clip_norm)
                lr = lr_at_step(step, ft.lr, ft.warmup_fraction, total_steps)
                adam_step(params, _grad_dict(params), opt, lr)
                line = {"step": step, "lr": lr, "loss": loss.item(),
                        "wall_time": time.time() - t0}
                metrics.write(json.dumps(line) + "\n")
                history.append(line)
                if log is not None and step % 50 == 0:
                    log(f"qa finetune step {step}/{total_steps} loss={line['loss']:.4f}")

    final = Checkpoint(config=cfg, heads=(PRETRAIN_HEADS,), params=params,
                       opt_state=opt, rng_state=_rng_state(train_rng),
                       extra={"answers": table.answers, "finetuned": "qa"})
    final_path = os.path.join(out_dir, "checkpoint-final.ckpt")
    save_checkpoint(final_path, final)

    eval_ckpt = Checkpoint(config=cfg, heads=(PRETRAIN_HEADS,), params=params,
                           extra={"answers": table.answers})
    dev_metrics = evaluate_checkpoint(eval_ckpt, bundle, seed=seed + 1)
    return FinetuneResult(final_path, metrics_path, history,
                          dev_accuracy=dev_metrics["qa_accuracy"], answers=table.answers)


def _pair_rows(pairs: list[PairRecord], store: FeatureStore, vocab: Vocabulary,
               cfg: ModelConfig):
    packed0, packed1, labels = [], [], []
    for p in pairs:
        r0 = CorpusRecord(p.image_id_0, p.sentence, False, None, p.split)
        r1 = CorpusRecord(p.image_id_1, p.sentence, False, None, p.split)
        packed0.append(_plain_row(r0, store, vocab, cfg))
        packed1.append(_plain_row(r1, store, vocab, cfg))
        labels.append(int(p.label))
    return packed0, packed1, np.array(labels, dtype=np.int64)


def run_finetune_pairwise(ckpt: Checkpoint, bundle: DataBundle, run_cfg: RunConfig,
                          seed: int, out_dir, log=None) -> FinetuneResult:
    """Fine-tune the two-image head: both passes share the encoder parameters."""
    ft = run_cfg.finetune.validate()
    os.makedirs(out_dir, exist_ok=True)
    cfg = ckpt.config
    if bundle.pairs is None:
        raise ValueError("pairwise fine-tuning needs a pair corpus (two image ids per record)")
    train_pairs = [p for p in bundle.pairs if p.split == "train"]
    dev_pairs = [p for p in bundle.pairs if p.split == "dev"] or train_pairs
    if not train_pairs:
        raise ValueError("pair corpus has no train records")

    seeds = np.random.SeedSequence(seed).spawn(2)
    head_rng = np.random.default_rng(seeds[0])
    train_rng = np.random.default_rng(seeds[1])
    params = _clone_params(ckpt.params)
    params.update(init_head_params(cfg, head_rng, PAIRWISE_HEAD))
    heads = tuple(dict.fromkeys(list(ckpt.heads) + [PAIRWISE_HEAD]))

    steps_per_epoch, total_steps = _finetune_schedule(len(train_pairs), ft.batch_size, ft.epochs)
    opt = OptimizerState.init(params, ft.lr, ft.warmup_fraction, total_steps)
    rt = Runtime(training=True, rng=train_rng)
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    history = []
    t0 = time.time()

    with open(metrics_path, "w", encoding="utf-8") as metrics:
        for epoch in range(ft.epochs):
            order = train_rng.permutation(len(train_pairs))
            for i in range(steps_per_epoch):
                step = epoch * steps_per_epoch + i
                chunk = [train_pairs[j] for j in order[i * ft.batch_size:(i + 1) * ft.batch_size]]
                rows0, rows1, labels = _pair_rows(chunk, bundle.store, bundle.vocab, cfg)
                p0 = collate(CrossModalBatch(rows0), bundle.vocab)
                p1 = collate(CrossModalBatch(rows1), bundle.vocab)
                zero_grads(params)
                with Tape():
                    out0 = forward_batch(p0, params, cfg, rt)
                    out1 = forward_batch(p1, params, cfg, rt)
                    logit = pairwise_logit(out0.cls, out1.cls, params, cfg.ln_eps)
                    loss = pairwise_bce(logit, labels)
                    backward(loss)
                clip_gradients(params, ft.clip_norm)
                lr = lr_at_step(step, ft.lr, ft.warmup_fraction, total_steps)
                adam_step(params, _grad_dict(params), opt, lr)
                line = {"step": step, "lr": lr, "loss": loss.item(),
                        "wall_time": time.time() - t0}
                metrics.write(json.dumps(line) + "\n")
                history.append(line)
                if log is not None and step % 50 == 0:
                    log(f"pairwise finetune step {step}/{total_steps} bce={line['loss']:.4f}")

    hits = total = 0
    for chunk in _batched(dev_pairs, ft.batch_size):
        rows0, rows1, labels = _pair_rows(chunk, bundle.store, bundle.vocab, cfg)
        p0 = collate(CrossModalBatch(rows0), bundle.vocab)
        p1 = collate(CrossModalBatch(rows1), bundle.vocab)
        out0 = forward_batch(p0, params, cfg)
        out1 = forward_batch(p1, params, cfg)
        prob = 1.0 / (1.0 + np.exp(-pairwise_logit(out0.cls, out1.cls, params, cfg.ln_eps).data))
        hits += int(((prob > 0.5).astype(int) == labels).sum())
        total += len(chunk)

    final = Checkpoint(config=cfg, heads=heads, params=params,
                       opt_state=opt, rng_state=_rng_state(train_rng),
                       extra={**(ckpt.extra or {}), "finetuned": "pairwise"})
    final_path = os.path.join(out_dir, "checkpoint-final.ckpt")
    save_checkpoint(final_path, final)
    return FinetuneResult(final_path, metrics_path, history,
                          dev_accuracy=hits / total if total else float("nan"))


# ---------------------------------------------------------------------------
# attention dump


def dump_attention(ckpt: Checkpoint, bundle: DataBundle, index: int, out_path,
                   split: str = "dev") -> dict:
    """Run one pair through the model and write every attention matrix.

    The dump is JSON keyed by encoder name, layer, head and direction; each
    matrix row is a softmax distribution over the context and carries token
    or object row labels.
    """
    rows = bundle.split(split) or bundle.records
    if not 0 <= index < len(rows):
        raise ValueError(f"record index {index} out of range [0, {len(rows)})")
    record = rows[index]
    cfg = ckpt.config
    seq = tokenize(record.sentence, bundle.vocab, cfg.max_sentence_len, cfg.use_sep)
    feats, boxes, labels = bundle.store.get(record.image_id)
    objects = ObjectSet(feats, boxes, labels.astype(np.int64))

    _, _, _, records = model_forward(seq, objects, ckpt.params, cfg)

    token_labels = [bundle.vocab.token_of(int(t)) for t in seq.token_ids]
    object_labels = []
    for j in range(objects.m):
        name = bundle.label_names[int(labels[j])] if int(labels[j]) < len(bundle.label_names) else str(int(labels[j]))
        box = ", ".join(f"{v:.3f}" for v in boxes[j])
        object_labels.append(f"obj{j} {name} [{box}]")

    def labels_for(direction: str) -> tuple[list[str], list[str]]:
        if direction == "self-L":
            return token_labels, token_labels
        if direction == "self-R":
            return object_labels, object_labels
        if direction == "cross-L->R":
            return token_labels, object_labels
        return object_labels, token_labels

    groups = []
    for rec in records:
        q_labels, c_labels = labels_for(rec.direction)
        groups.append({
            "encoder": rec.encoder,
            "layer": rec.layer,
            "direction": rec.direction,
            "query_labels": q_labels,
            "context_labels": c_labels,
            "heads": [rec.weights[0, h].tolist() for h in range(rec.weights.shape[1])],
        })
    dump = {
        "image_id": record.image_id,
        "sentence": record.sentence,
        "tokens": token_labels,
        "objects": object_labels,
        "groups": groups,
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(dump, fh, indent=1)
        fh.write("\n")
    return dump
