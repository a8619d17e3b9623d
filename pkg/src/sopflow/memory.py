"""Append-only execution memory and its prompt serialization.

Memory is the full history of what the agent did: one entry per executed
action holding the action identifier, the observation that came back, and a
binary success/fail feedback. The serialized form is what the state role
reads to decide where in the workflow the session is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SUCCESS = "success"
FAIL = "fail"

# observation recorded for user-facing and knowledge actions that worked
DONE = "done"


def _require(value: str, name: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValueError(f"memory entry {name} must be a non-empty string")
    return value


@dataclass(frozen=True)
class MemoryEntry:
    action: str
    observation: str
    feedback: str

    def __post_init__(self):
        _require(self.action, "action")
        _require(self.observation, "observation")
        if self.feedback not in (SUCCESS, FAIL):
            raise ValueError(f"feedback must be {SUCCESS!r} or {FAIL!r}, got {self.feedback!r}")

    @property
    def ok(self) -> bool:
        return self.feedback == SUCCESS


@dataclass
class ExecutionMemory:
    """Ordered history of (action, observation, feedback) triples.

    Append-only: entries are frozen and the list only ever grows. Hand the
    same instance between threads only between turns.
    """

    entries: list[MemoryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, entry: MemoryEntry) -> "ExecutionMemory":
        if not isinstance(entry, MemoryEntry):
            raise TypeError("append expects a MemoryEntry")
        self.entries.append(entry)
        return self

    def add(self, action: str, observation: str, feedback: str) -> MemoryEntry:
        entry = MemoryEntry(action, observation, feedback)
        self.append(entry)
        return entry

    @property
    def last(self) -> MemoryEntry | None:
        return self.entries[-1] if self.entries else None

    def repeat_count(self, action_id: str) -> int:
        """How many times action_id has been executed so far."""
        return sum(1 for e in self.entries if e.action == action_id)

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(
                {"action": e.action, "observation": e.observation, "feedback": e.feedback},
                ensure_ascii=False,
            )
            for e in self.entries
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionMemory":
        mem = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            mem.add(obj["action"], obj["observation"], obj["feedback"])
        return mem


def _flatten(text: str) -> str:
    # the numbered-line format cannot hold raw newlines
    return " ".join(text.splitlines()) if "\n" in text or "\r" in text else text


def serialize_for_prompt(memory: ExecutionMemory) -> str:
    """Numbered-line rendering consumed by the state role; empty memory -> ''."""
    return "\n".join(
        f"{i}. action:{_flatten(e.action)}, observation:{_flatten(e.observation)}, feedback:{e.feedback}"
        for i, e in enumerate(memory.entries, start=1)
    )
