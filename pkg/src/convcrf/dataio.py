"""Dataset files, checkpoints, and report records.

Datasets are line-delimited JSON, one conversation per line:

    {"id": "...", "labels_space": ["happy", ...],
     "utterances": [{"speaker": "A", "features": [...], "label": "happy"}, ...]}

Labels are mapped to indices by labels_space order, which must be identical
on every line of a file. All writes are atomic (write to a temp file, then
rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Optional, Sequence

import torch

from .conversation import Conversation, Utterance, validate_conversation

CHECKPOINT_VERSION = 1


class ParseError(ValueError):
    def __init__(self, line: int, cause: str):
        self.line = line
        super().__init__(f"line {line}: {cause}")


class UnknownLabel(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, conv_id: str, cause: Exception):
        self.conv_id = conv_id
        super().__init__(f"conversation {conv_id!r}: {cause}")


class MissingCheckpoint(FileNotFoundError):
    pass


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_dataset(path: str, convs: Sequence[Conversation], labels_space: Sequence[str]) -> None:
    lines = []
    for conv in convs:
        utts = []
        for u in conv.utterances:
            rec = {"speaker": u.speaker, "features": u.features.tolist()}
            if u.gold_label is not None:
                rec["label"] = labels_space[u.gold_label]
            utts.append(rec)
        lines.append(
            json.dumps(
                {"id": conv.id, "labels_space": list(labels_space), "utterances": utts}
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dataset(path: str) -> tuple[list[Conversation], list[str]]:
    convs: list[Conversation] = []
    labels_space: Optional[list[str]] = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, str(e)) from e
            try:
                space = list(rec["labels_space"])
                if labels_space is None:
                    labels_space = space
                elif space != labels_space:
                    raise ParseError(lineno, "labels_space differs from earlier lines")
                index = {name: k for k, name in enumerate(space)}
                utts = []
                for t, u in enumerate(rec["utterances"]):
                    label = u.get("label")
                    if label is not None:
                        if label not in index:
                            raise UnknownLabel(
                                f"label {label!r} not in labels_space (line {lineno})"
                            )
                        label = index[label]
                    utts.append(Utterance(t, u["speaker"], u["features"], label))
                conv = Conversation(rec["id"], tuple(utts), len(space))
            except (KeyError, TypeError) as e:
                raise ParseError(lineno, f"malformed record: {e!r}") from e
            try:
                validate_conversation(conv)
            except ValueError as e:
                raise ValidationError(conv.id, e) from e
            convs.append(conv)
    if labels_space is None:
        raise ParseError(0, "empty dataset file")
    return convs, labels_space


def save_checkpoint(path: str, model_config: dict, labels_space: Sequence[str], state_dict: dict) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": model_config,
        "labels_space": list(labels_space),
        "state_dict": state_dict,
    }
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        torch.save(payload, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> dict:
    if not os.path.exists(path):
        raise MissingCheckpoint(path)
    payload = torch.load(path, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    return payload


def write_records(path: str, records: Iterable[dict]) -> None:
    """Line-delimited JSON records (history files, reports)."""
    atomic_write_text(path, "\n".join(json.dumps(r) for r in records) + "\n")


def read_records(path: str) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
