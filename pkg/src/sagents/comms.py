"""Shared message pool and the protocol phrases agents speak."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

from .org_graph import norm

TICKS_PER_SECOND = 1  # 60 ticks per simulated minute

START = "I'll start the task {task} now"
SUCCESS = "I have succeeded the task {task}."
FAIL = "I have failed the task {task}."
ACK = "Got it!"
INVENTORY = "my inventory is {inventory}, and my equipment is {equipment} "
INSTRUCTION = "{target}, please {todo}"


class SelfMessage(ValueError):
    pass


def inventory_report(inventory: dict, equipment: list) -> str:
    return INVENTORY.format(inventory=dict(sorted(inventory.items())), equipment=list(equipment))


@dataclass(frozen=True)
class MessageRecord:
    time: int
    seq: int
    speaker: str
    respondent: str
    message: str

    def involves(self, agent: str) -> bool:
        return norm(agent) in (norm(self.speaker), norm(self.respondent))

    def counterpart(self, agent: str) -> str:
        return self.respondent if norm(self.speaker) == norm(agent) else self.speaker


@dataclass
class ConversationCursor:
    owner: str
    last_seen: int = 0


class MessagePool:
    """Append-only, totally ordered record of all inter-agent messages."""

    def __init__(self, clock: Callable[[], int] | None = None):
        self._records: list[MessageRecord] = []
        self._lock = threading.Lock()
        self._clock = clock or (lambda: 0)
        self.listeners: list[Callable[[MessageRecord], None]] = []

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[MessageRecord, ...]:
        return tuple(self._records)

    def post(self, speaker: str, respondent: str, message: str) -> MessageRecord:
        if norm(speaker) == norm(respondent):
            raise SelfMessage(f"{speaker} cannot message itself")
        with self._lock:
            rec = MessageRecord(self._clock(), len(self._records) + 1, speaker, respondent, message)
            self._records.append(rec)
        for listener in self.listeners:
            listener(rec)
        return rec

    def conversation_since(self, cursor: ConversationCursor) -> tuple["Conversation", ConversationCursor]:
        with self._lock:
            snapshot = list(self._records)
        new = [r for r in snapshot if r.seq > cursor.last_seen and r.involves(cursor.owner)]
        if not new:
            return Conversation(cursor.owner, []), cursor
        return Conversation(cursor.owner, new), ConversationCursor(cursor.owner, new[-1].seq)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self._records)

    @classmethod
    def from_jsonl(cls, text: str) -> "MessagePool":
        pool = cls()
        for line in text.splitlines():
            if line.strip():
                pool._records.append(MessageRecord(**json.loads(line)))
        return pool


def post(pool: MessagePool, speaker: str, respondent: str, message: str) -> MessageRecord:
    return pool.post(speaker, respondent, message)


def conversation_since(pool: MessagePool, cursor: ConversationCursor):
    return pool.conversation_since(cursor)


class Conversation:
    """Records involving ``owner``, grouped by counterpart in first-contact order."""

    def __init__(self, owner: str, records: Iterable[MessageRecord]):
        self.owner = owner
        self.records = list(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def grouped(self) -> dict[str, list[MessageRecord]]:
        groups: dict[str, list[MessageRecord]] = {}
        keys: dict[str, str] = {}
        for r in self.records:
            other = r.counterpart(self.owner)
            key = keys.setdefault(norm(other), other)
            groups.setdefault(key, []).append(r)
        return groups

    def render(self) -> str:
        blocks = []
        for other, recs in self.grouped().items():
            blocks.append(f"The conversation between {norm(other)} and {norm(self.owner)}\n" + render_transcript(recs))
        return "\n\n".join(blocks)


def clock_label(ticks: int) -> str:
    seconds = ticks // TICKS_PER_SECOND
    return f"{seconds // 3600:02d}:{seconds // 60 % 60:02d}:{seconds % 60:02d}"


def render_line(record: MessageRecord) -> str:
    return f"-[{clock_label(record.time)}]{record.speaker} says: '{record.message}'"


def render_transcript(records: Iterable[MessageRecord]) -> str:
    return "\n".join(render_line(r) for r in records)
