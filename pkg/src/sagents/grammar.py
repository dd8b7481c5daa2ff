"""Todo grammar shared by the action planner, its parser and the executor.

    todo   := ["inform" PLAYER ["to"]] inner
    inner  := VERB [QTY] ITEM ["to" PLAYER] ["at" POS] [NOTE]
    POS    := "(" INT "," INT "," INT ")"
    NOTE   := "(" free text ")"        -- dropped by the parser

``give [quantity] [item] to [player]`` is the only direct form with a target.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class TodoError(ValueError):
    pass


class UnknownVerb(TodoError):
    pass


class MissingPosition(TodoError):
    pass


class MalformedTodo(TodoError):
    pass


class ActionKind(str, Enum):
    DIRECT = "direct"
    DELEGATE = "delegate"


class Verb(str, Enum):
    MINE = "mine"
    CRAFT = "craft"
    SMELT = "smelt"
    KILL = "kill"
    COOK = "cook"
    EQUIP = "equip"
    BUILD = "build"
    GIVE = "give"
    MOVETO = "move to"


_VERB_WORDS = {
    "mine": Verb.MINE, "mines": Verb.MINE, "mined": Verb.MINE, "dig": Verb.MINE,
    "craft": Verb.CRAFT, "crafts": Verb.CRAFT,
    "smelt": Verb.SMELT, "smelts": Verb.SMELT,
    "kill": Verb.KILL, "kills": Verb.KILL, "eliminate": Verb.KILL,
    "cook": Verb.COOK, "cooks": Verb.COOK,
    "equip": Verb.EQUIP, "equips": Verb.EQUIP,
    "build": Verb.BUILD, "builds": Verb.BUILD,
    "give": Verb.GIVE, "gives": Verb.GIVE,
    "moveto": Verb.MOVETO,
}

_QTY_WORDS = {"a": 1, "an": 1, "one": 1}
_FILLER = {"the", "more", "remaining", "of", "some"}

Position = tuple[int, int, int]

_POS_RE = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")
_NOTE_RE = re.compile(r"\s*\((?![\s\-\d,]+\))[^()]*\)\s*$")


@dataclass(frozen=True)
class AgentAction:
    kind: ActionKind
    verb: Verb
    quantity: int | None = None
    item: str | None = None
    position: Position | None = None
    target: str | None = None
    inner: "AgentAction | None" = field(default=None, compare=True)

    def __post_init__(self):
        if self.kind is ActionKind.DELEGATE:
            if not self.target or self.inner is None:
                raise MalformedTodo("delegation needs a target and an inner action")
            if self.inner.kind is not ActionKind.DIRECT:
                raise MalformedTodo("nested delegation is not expressible")
        else:
            if self.target is not None and self.verb is not Verb.GIVE:
                raise MalformedTodo(f"{self.verb.value} cannot name a target")
            if self.verb is Verb.GIVE and not self.target:
                raise MalformedTodo("give needs a recipient")
            if self.verb is Verb.BUILD and self.position is None:
                raise MissingPosition("build needs a position")
            if self.verb is Verb.MOVETO and self.position is None:
                raise MissingPosition("move to needs a position")
            if self.quantity is not None and self.quantity <= 0:
                raise MalformedTodo("quantity must be positive")

    @classmethod
    def direct(cls, verb: Verb, quantity=None, item=None, position=None, target=None) -> "AgentAction":
        return cls(ActionKind.DIRECT, verb, quantity, item, position, target)

    @classmethod
    def delegate(cls, target: str, inner: "AgentAction") -> "AgentAction":
        return cls(ActionKind.DELEGATE, inner.verb, target=target, inner=inner)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "verb": self.verb.value,
            "quantity": self.quantity,
            "item": self.item,
            "position": list(self.position) if self.position else None,
            "target": self.target,
        }
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        return d


def render_position(pos: Position) -> str:
    return f"({pos[0]},{pos[1]},{pos[2]})"


def render_todo(action: AgentAction) -> str:
    if action.kind is ActionKind.DELEGATE:
        return f"inform {action.target} to {render_todo(action.inner)}"
    parts = [action.verb.value]
    if action.quantity is not None:
        parts.append(str(action.quantity))
    if action.item:
        parts.append(plural(action.item, action.quantity) if action.quantity is not None else action.item)
    if action.verb is Verb.GIVE:
        parts += ["to", action.target]
    if action.position is not None:
        if action.verb is not Verb.MOVETO:
            parts.append("at")
        parts.append(render_position(action.position))
    return " ".join(parts)


def singular(word: str) -> str:
    """Crude English singular for item nouns ("stones" -> "stone")."""
    w = word.lower()
    if len(w) > 3 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 2 and w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def plural(word: str, n: int | None) -> str:
    if n == 1 or word.endswith("s"):
        return word
    if len(word) > 2 and word.endswith("y") and word[-2] not in "aeiou":
        return word[:-1] + "ies"
    return word + "s"


def parse_todo(todo: str) -> AgentAction:
    if not isinstance(todo, str) or not todo.strip():
        raise MalformedTodo("empty todo")
    text = " ".join(todo.strip().rstrip(".").split())
    tokens = text.split(" ")
    if tokens[0].lower() in ("inform", "instruct", "tell", "ask"):
        if len(tokens) < 3:
            raise MalformedTodo(todo)
        target = tokens[1].rstrip(",")
        rest = tokens[2:]
        if rest and rest[0].lower() == "to":
            rest = rest[1:]
        inner = _parse_inner(" ".join(rest), todo)
        return AgentAction.delegate(target, inner)
    return _parse_inner(text, todo)


def _parse_inner(text: str, original: str) -> AgentAction:
    if not text:
        raise MalformedTodo(original)
    text = _NOTE_RE.sub("", text)
    position = None
    m = None
    for m in _POS_RE.finditer(text):
        pass
    if m is not None:
        position = (int(m.group(1)), int(m.group(2)), int(m.group(3)))
        text = (text[: m.start()] + text[m.end():]).strip()
    words = text.split()
    if words and words[-1].lower() == "at":
        words = words[:-1]
    if not words:
        raise MalformedTodo(original)
    head = words[0].lower()
    if head == "move" and len(words) > 1 and words[1].lower() == "to":
        verb, words = Verb.MOVETO, words[2:]
    elif head in _VERB_WORDS:
        verb, words = _VERB_WORDS[head], words[1:]
    else:
        raise UnknownVerb(head)

    target = None
    if verb is Verb.GIVE:
        lowered = [w.lower() for w in words]
        if "to" not in lowered:
            raise MalformedTodo(f"give without recipient: {original!r}")
        i = len(lowered) - 1 - lowered[::-1].index("to")
        if i + 1 >= len(words):
            raise MalformedTodo(original)
        target = words[i + 1]
        words = words[:i] + words[i + 2:]

    # a trailing "at" left by "build walls at" when the position was removed
    words = [w for w in words if w.lower() != "at"] if position is not None else words

    quantity = None
    rest: list[str] = []
    for w in words:
        lw = w.lower()
        if quantity is None and not rest and lw.isdigit():
            quantity = int(lw)
        elif quantity is None and not rest and lw in _QTY_WORDS:
            quantity = _QTY_WORDS[lw]
        elif lw in _FILLER:
            continue
        else:
            rest.append(lw)
    item = None
    if rest:
        # counted nouns are stored singular ("25 woods" -> wood); bare names stay as written
        if quantity is not None:
            rest[-1] = singular(rest[-1])
        item = " ".join(rest)
    if verb is Verb.BUILD and position is None:
        raise MissingPosition(original)
    if verb is Verb.MOVETO:
        if position is None:
            raise MissingPosition(original)
        item = None
    if quantity == 0:
        raise MalformedTodo(original)
    if verb not in (Verb.MOVETO, Verb.EQUIP) and item is None:
        raise MalformedTodo(f"missing object in {original!r}")
    return AgentAction.direct(verb, quantity, item, position, target)
