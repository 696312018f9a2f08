"""JSONL dataset ingestion and generic artifact line IO.

Dataset schema, one problem per line:
    {"id": str, "prompt": str, "answer": str, "difficulty": int?}
"""

from __future__ import annotations

import json
from pathlib import Path

from .answers import parse_answer
from .types import CorpusError, Problem


class DatasetError(CorpusError):
    """Dataset file missing, malformed, or schema-violating."""


_REQUIRED_FIELDS = ("id", "prompt", "answer")


def load_dataset(path) -> list[Problem]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    problems: list[Problem] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for field in _REQUIRED_FIELDS:
                if field not in record:
                    raise DatasetError(f"{path}:{lineno}: missing field {field!r}")
            if record["id"] in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate problem id {record['id']!r}")
            seen.add(record["id"])
            problems.append(
                Problem(
                    id=record["id"],
                    prompt=record["prompt"],
                    ground_truth=parse_answer(record["answer"]),
                    difficulty=record.get("difficulty"),
                )
            )
    return problems


def save_dataset(path, problems: list[Problem]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for problem in problems:
            fh.write(json.dumps(problem.to_dict()) + "\n")


def write_jsonl(path, records: list[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_jsonl(path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return records
