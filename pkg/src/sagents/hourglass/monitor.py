"""Progress monitor: judge a task from the conversation and chest contents.

The rule set follows the judge prompt's criteria: a start notice or a bare
acknowledgement leaves the task unknown, a success claim finishes it, a
failure claim fails it, and valid chest contents are sufficient evidence on
their own. A success claim is overridden to a failure when the speaker's own
inventory report afterwards lacks the claimed items.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from ..comms import MessageRecord, clock_label
from ..grammar import TodoError, Verb, parse_todo
from ..org_graph import norm
from ..world import canonical_item


class EmptyTask(ValueError):
    pass


class TaskStatus(str, Enum):
    SUCCESS = "success"
    FAIL = "fail"
    UNKNOWN = "unknown"


_STATUS_WORDS = {
    "success": TaskStatus.SUCCESS, "succeeded": TaskStatus.SUCCESS, "successful": TaskStatus.SUCCESS,
    "complete": TaskStatus.SUCCESS, "completed": TaskStatus.SUCCESS,
    "fail": TaskStatus.FAIL, "failed": TaskStatus.FAIL, "failure": TaskStatus.FAIL,
    "unknown": TaskStatus.UNKNOWN, "ongoing": TaskStatus.UNKNOWN, "in progress": TaskStatus.UNKNOWN,
}


def parse_status(token: str) -> TaskStatus | None:
    key = token.strip().strip(".'\"`<>").lower()
    return _STATUS_WORDS.get(key)


@dataclass
class PartStatus:
    agent: str | None
    task: str
    status: TaskStatus
    evidence: str = ""


@dataclass
class ProgressJudgment:
    rationale: str
    status: TaskStatus
    raw_token: str | None = None
    parts: list[PartStatus] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rationale": self.rationale,
            "status": self.status.value,
            "raw_token": self.raw_token,
            "parts": [
                {"agent": p.agent, "task": p.task, "status": p.status.value} for p in self.parts
            ],
        }


@dataclass(frozen=True)
class Line:
    speaker: str
    message: str
    clock: str = ""


_LINE_RE = re.compile(r"^\s*-?\s*\[(\d+:\d\d:\d\d)\]\s*([^\s:]+)\s+says:\s*(.*)$")


def _unquote(msg: str) -> str:
    msg = msg.strip()
    if len(msg) >= 2 and msg[0] == msg[-1] and msg[0] in "'\"":
        msg = msg[1:-1]
    return msg.strip()


def parse_conversation(conversation: str | Iterable[MessageRecord] | None) -> list[Line]:
    """Accepts rendered transcripts, the dict-of-lists form, or message records."""
    if conversation is None:
        return []
    if not isinstance(conversation, str):
        return [Line(r.speaker, r.message, clock_label(r.time)) for r in conversation]
    text = conversation.strip()
    raw_lines: list[str] = []
    if text.startswith("{"):
        try:
            doc = ast.literal_eval(text)
        except (ValueError, SyntaxError):
            doc = None
        if isinstance(doc, dict):
            for value in doc.values():
                raw_lines.extend(value if isinstance(value, list) else [str(value)])
    if not raw_lines:
        raw_lines = text.splitlines()
    lines = []
    for raw in raw_lines:
        m = _LINE_RE.match(raw)
        if m:
            lines.append(Line(m.group(2), _unquote(m.group(3)), m.group(1)))
    return lines


_SUCCESS_RE = re.compile(r"i have succeeded (?:in )?(?:the )?task:?\s*(.+?)\.?$", re.I)
_FAIL_RE = re.compile(r"i have failed (?:in )?(?:the )?task:?\s*(.+?)\.?$", re.I)
_START_RE = re.compile(r"i(?:'ll| will) start (?:the )?task:?\s*(.+?)(?:\s+now)?\.?$", re.I)
_ACK_RE = re.compile(r"^got it!?$", re.I)
_INV_RE = re.compile(r"inventory is\s*(\{.*?\}|\[.*?\])", re.I)
_STAGE_HEADER_RE = re.compile(r"^\s*(?:stage|step)\b[^:]*:\s*", re.I)


def parse_inventory_report(message: str) -> dict[str, int] | None:
    m = _INV_RE.search(message)
    if not m:
        return None
    body = m.group(1)
    if body.startswith("["):
        body = "{" + body[1:-1] + "}"
    try:
        doc = ast.literal_eval(body)
    except (ValueError, SyntaxError):
        return None
    if not isinstance(doc, dict):
        return None
    return {str(k): int(v) for k, v in doc.items() if isinstance(v, (int, float))}


def item_count(inventory: dict[str, int], item: str) -> int:
    want = canonical_item(item)
    return sum(n for k, n in inventory.items() if canonical_item(k) == want)


def split_task(task: str, agents: Sequence[str] = ()) -> list[tuple[str | None, str]]:
    """Break a task (possibly a whole stage) into (agent, description) parts."""
    known = {norm(a) for a in agents}
    parts: list[tuple[str | None, str]] = []
    for raw_line in task.replace("```", "\n").splitlines():
        line = raw_line.strip()
        if not line:
            continue
        header = _STAGE_HEADER_RE.match(line)
        if header:
            # a header with no sentence after it is just a title
            rest = line[header.end():]
            if not re.search(r"\d", rest) and not any(norm(w.strip(",.")) in known for w in rest.split()[:1]):
                continue
            line = rest
        for sentence in re.split(r"(?<=\.)\s+", line):
            sentence = sentence.strip().rstrip(".")
            if not sentence:
                continue
            words = sentence.split()
            first = norm(words[0].strip(",:"))
            if first in known or (not known and re.fullmatch(r"worker\w*|leader\w*", first)):
                parts.append((words[0].strip(",:"), " ".join(words[1:])))
            else:
                parts.append((None, sentence))
    return parts


def _same_task(a: str, b: str) -> bool:
    try:
        x, y = parse_todo(a), parse_todo(b)
    except TodoError:
        return " ".join(a.lower().split()) == " ".join(b.lower().split())
    if x.verb is not y.verb or x.quantity != y.quantity:
        return False
    if (x.item is None) != (y.item is None):
        return False
    if x.item is not None and canonical_item(x.item) != canonical_item(y.item):
        # "walls" vs "wall": compare singular forms too
        if canonical_item(x.item).rstrip("s") != canonical_item(y.item).rstrip("s"):
            return False
    return True


def _judge_part(agent: str | None, description: str, lines: list[Line], chest: dict | None) -> PartStatus:
    status = TaskStatus.UNKNOWN
    evidence = ""
    claimed_at = None
    try:
        action = parse_todo(description)
    except TodoError:
        action = None
    for i, line in enumerate(lines):
        if agent is not None and norm(line.speaker) != norm(agent):
            continue
        msg = line.message
        m = _SUCCESS_RE.search(msg)
        if m and _same_task(m.group(1), description):
            status, evidence, claimed_at = TaskStatus.SUCCESS, msg, i
            continue
        m = _FAIL_RE.search(msg)
        if m and _same_task(m.group(1), description):
            status, evidence, claimed_at = TaskStatus.FAIL, msg, None
            continue
        m = _START_RE.search(msg)
        if m and _same_task(m.group(1), description):
            if status is TaskStatus.UNKNOWN:
                evidence = msg
            continue

    countable = action is not None and action.item and action.verb in (Verb.MINE, Verb.CRAFT, Verb.SMELT)
    if status is TaskStatus.SUCCESS and countable and claimed_at is not None:
        speaker = lines[claimed_at].speaker
        need = action.quantity or 1
        for line in lines[claimed_at:]:
            if norm(line.speaker) != norm(speaker):
                continue
            inv = parse_inventory_report(line.message)
            if inv is not None and item_count(inv, action.item) < need:
                status = TaskStatus.FAIL
                evidence = line.message
    if status is not TaskStatus.SUCCESS and countable and chest:
        if item_count(chest, action.item) >= (action.quantity or 1):
            status = TaskStatus.SUCCESS
            evidence = f"chest holds {item_count(chest, action.item)} {action.item}"
    return PartStatus(agent, description, status, evidence)


def judge_progress(
    task: str,
    conversation: str | Iterable[MessageRecord] | None,
    chest_info: dict | None = None,
    agents: Sequence[str] = (),
) -> ProgressJudgment:
    """Rule-based judgment used by the scripted backend."""
    if not task or not task.strip():
        raise EmptyTask("task to be inquired is blank")
    lines = parse_conversation(conversation)
    names = list(agents) or sorted({l.speaker for l in lines}, key=norm)
    parts = [_judge_part(a, d, lines, chest_info) for a, d in split_task(task, names)]
    if not parts:
        parts = [_judge_part(None, task.strip(), lines, chest_info)]
    statuses = [p.status for p in parts]
    label = " ".join(task.split())
    if TaskStatus.FAIL in statuses:
        bad = next(p for p in parts if p.status is TaskStatus.FAIL)
        who = bad.agent or "the agent"
        rationale = f"According to '{bad.evidence}' from the conversation, {who} has failed the task {bad.task}."
        return ProgressJudgment(rationale, TaskStatus.FAIL, "fail", parts)
    if all(s is TaskStatus.SUCCESS for s in statuses):
        ev = "; ".join(p.evidence for p in parts)
        rationale = f"According to '{ev}' from the conversation or chest information, {label} has succeeded."
        return ProgressJudgment(rationale, TaskStatus.SUCCESS, "success", parts)
    if lines:
        summary = f"The conversation has {len(lines)} message(s)"
    else:
        summary = "There is no conversation"
    rationale = f"{summary}, but it does not provide any information about the result of the task, so the task status is unknown."
    return ProgressJudgment(rationale, TaskStatus.UNKNOWN, "unknown", parts)


def render_judgment(judgment: ProgressJudgment) -> str:
    return f"Task result judgment: {judgment.rationale}\nFinal task status: {judgment.status.value}"


def parse_judgment(text: str) -> ProgressJudgment:
    """Parse a judge response; raises ValueError if the status line is missing."""
    rationale = ""
    status = None
    token = None
    for line in text.splitlines():
        m = re.match(r"^\s*task result judg(?:e)?ment\s*:\s*(.*)$", line, re.I)
        if m:
            rationale = m.group(1).strip()
            continue
        m = re.match(r"^\s*final task status\s*:\s*(.*)$", line, re.I)
        if m:
            token = m.group(1).strip()
            status = parse_status(token)
    if status is None:
        raise ValueError(f"no parsable 'Final task status' in response: {text[:200]!r}")
    return ProgressJudgment(rationale or f"status {token}", status, token)
