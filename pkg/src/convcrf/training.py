"""Training loop, optimizer wiring, and the finite-difference gradient gate."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import torch

from .conversation import Conversation
from .model import ConversationModel, ModelConfig


class EmptyDataset(ValueError):
    pass


@dataclass
class TrainConfig:
    lr_ext: float = 2e-5
    lr_cls: float = 7e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    dropout_rate: float = 0.3
    max_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lr_ext <= 0 or self.lr_cls <= 0:
            raise ValueError("learning rates must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")


def make_optimizer(model: ConversationModel, cfg: TrainConfig) -> torch.optim.AdamW:
    """Adam with decoupled weight decay; separate learning rates per group."""
    return torch.optim.AdamW(
        [
            {"params": list(model.extraction_parameters()), "lr": cfg.lr_ext},
            {"params": list(model.classification_parameters()), "lr": cfg.lr_cls},
        ],
        weight_decay=cfg.weight_decay,
    )


def batch_loss(model: ConversationModel, batch: Sequence[Conversation]) -> torch.Tensor:
    """Mean per-conversation NLL over the batch."""
    losses = [model.conversation_loss(conv) for conv in batch]
    return torch.stack(losses).mean()


def evaluate_accuracy(model: ConversationModel, convs: Sequence[Conversation]) -> float:
    correct = total = 0
    for conv in convs:
        preds = model.predict(conv)
        for p, y in zip(preds, conv.gold_labels()):
            if y is not None:
                total += 1
                correct += int(p == y)
    return correct / total if total else 0.0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metric: float


def train_loop(
    model: ConversationModel,
    train_data: Sequence[Conversation],
    val_data: Sequence[Conversation],
    cfg: TrainConfig,
    metric_fn: Optional[Callable[[ConversationModel, Sequence[Conversation]], float]] = None,
    log_fn: Optional[Callable[[EpochRecord], None]] = None,
) -> tuple[dict, list[EpochRecord]]:
    """Run up to max_epochs, returning the best-validation state dict + history.

    Fully deterministic for a fixed seed: shuffling uses its own seeded RNG,
    and torch's global seed is fixed up front for dropout.
    """
    if not train_data:
        raise EmptyDataset("no training conversations")
    torch.manual_seed(cfg.seed)
    shuffler = random.Random(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    best_metric = float("-inf")
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    metric_fn = metric_fn or evaluate_accuracy
    history: list[EpochRecord] = []
    order = list(range(len(train_data)))
    for epoch in range(cfg.max_epochs):
        model.train()
        shuffler.shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for i in range(0, len(order), cfg.batch_size):
            batch = [train_data[j] for j in order[i : i + cfg.batch_size]]
            optimizer.zero_grad()
            loss = batch_loss(model, batch)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1
        val_metric = metric_fn(model, val_data) if val_data else 0.0
        rec = EpochRecord(epoch, epoch_loss / n_batches, val_metric)
        history.append(rec)
        if log_fn:
            log_fn(rec)
        if val_metric > best_metric:
            best_metric = val_metric
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    return best_state, history


def gradient_check(
    model: ConversationModel,
    convs: Sequence[Conversation],
    eps: float = 1e-5,
) -> float:
    """Max relative error between autograd and central finite differences.

    Relative error per coordinate is |ad - fd| / max(|ad|, |fd|, 1e-6);
    coordinates where both sides vanish contribute 0.
    """
    model.eval()  # dropout off: loss must be a deterministic function of params
    params = [p for p in model.parameters()]
    model.zero_grad()
    loss = batch_loss(model, convs)
    loss.backward()
    grads = [
        p.grad.clone() if p.grad is not None else torch.zeros_like(p) for p in params
    ]
    max_err = 0.0
    with torch.no_grad():
        for p, g in zip(params, grads):
            flat = p.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                hi = float(batch_loss(model, convs))
                flat[i] = orig - eps
                lo = float(batch_loss(model, convs))
                flat[i] = orig
                fd = (hi - lo) / (2 * eps)
                ad = gflat[i].item()
                denom = max(abs(ad), abs(fd), 1e-6)
                max_err = max(max_err, abs(ad - fd) / denom)
    return max_err
