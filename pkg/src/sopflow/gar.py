"""Global Action Repository: the shared table of actions an agent may take.

Each entry names an action and declares how it executes: through an API
call, by asking the user for input, by showing the user a message, by
consulting external knowledge, or some combination. The repository is
immutable after load and shared read-only across sessions.

On disk the repository is a JSON array of row objects. A TSV importer is
provided for spreadsheet-shaped sources; in TSV an empty cell means the
field is absent, and a cell containing exactly "" means present-but-empty
(needed for silent terminal actions whose message is empty).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    DuplicateAction,
    EmptyRepository,
    InvariantError,
    SchemaError,
    UnknownAction,
)

API_CALL = "api_call"
ASK_USER_INPUT = "ask_user_input"
MESSAGE_TO_USER = "message_to_user"
EXTERNAL_KNOWLEDGE = "external_knowledge"

ACTION_TYPES = frozenset({API_CALL, ASK_USER_INPUT, MESSAGE_TO_USER, EXTERNAL_KNOWLEDGE})

_COLUMNS = ("action", "action_type", "user_interaction_metadata", "API", "params")


@dataclass(frozen=True)
class GarEntry:
    """One repository row. ``user_interaction_metadata`` is the expected-input
    description for ask actions or the message text for message actions;
    empty string is a valid (silent) message."""

    action: str
    action_types: frozenset[str]
    user_interaction_metadata: str | None = None
    api: str | None = None
    params: tuple[str, ...] = ()

    @property
    def interactive(self) -> bool:
        return ASK_USER_INPUT in self.action_types


@dataclass
class ActionRepository:
    entries: dict[str, GarEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.values())

    def actions(self) -> list[str]:
        return list(self.entries)

    def get_entry(self, action_id: str) -> GarEntry:
        try:
            return self.entries[action_id]
        except KeyError:
            raise UnknownAction(f"action not in repository: {action_id!r}") from None


def _check_entry(entry: GarEntry) -> None:
    if not entry.action or not entry.action.strip():
        raise InvariantError("entry has an empty action identifier")
    if not entry.action_types:
        raise InvariantError(f"{entry.action!r}: action_type is empty")
    unknown = entry.action_types - ACTION_TYPES
    if unknown:
        raise InvariantError(f"{entry.action!r}: unknown action_type {sorted(unknown)}")
    has_api_type = API_CALL in entry.action_types
    if has_api_type != (entry.api is not None):
        raise InvariantError(
            f"{entry.action!r}: API endpoint must be present exactly when api_call is declared"
        )
    if entry.params and entry.api is None:
        raise InvariantError(f"{entry.action!r}: params require an API endpoint")
    needs_metadata = bool(entry.action_types & {ASK_USER_INPUT, MESSAGE_TO_USER})
    if needs_metadata != (entry.user_interaction_metadata is not None):
        raise InvariantError(
            f"{entry.action!r}: user_interaction_metadata must be present exactly when "
            "the action asks or messages the user"
        )


def _build(rows: list[GarEntry]) -> ActionRepository:
    if not rows:
        raise EmptyRepository("repository has no entries")
    repo = ActionRepository()
    for entry in rows:
        _check_entry(entry)
        if entry.action in repo.entries:
            raise DuplicateAction(f"duplicate action: {entry.action!r}")
        repo.entries[entry.action] = entry
    return repo


def load_repository_json(text: str) -> ActionRepository:
    """Parse the JSON array format. Keys follow the documented column schema."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"repository is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise SchemaError("repository JSON must be an array of row objects")
    rows = []
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise SchemaError(f"row {i}: not an object")
        missing = {"action", "action_type"} - obj.keys()
        if missing:
            raise SchemaError(f"row {i}: missing column(s) {sorted(missing)}")
        stray = obj.keys() - set(_COLUMNS)
        if stray:
            raise SchemaError(f"row {i}: unknown column(s) {sorted(stray)}")
        types = obj["action_type"]
        if isinstance(types, str):
            types = [t.strip() for t in types.split(",") if t.strip()]
        if not isinstance(types, list):
            raise SchemaError(f"row {i}: action_type must be a list or comma string")
        params = obj.get("params") or []
        if not isinstance(params, list):
            raise SchemaError(f"row {i}: params must be a list")
        rows.append(
            GarEntry(
                action=obj["action"],
                action_types=frozenset(types),
                user_interaction_metadata=obj.get("user_interaction_metadata"),
                api=obj.get("API"),
                params=tuple(params),
            )
        )
    return _build(rows)


def load_repository_tsv(text: str) -> ActionRepository:
    """Parse tab-separated rows with a header matching the column schema."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyRepository("repository has no entries")
    header = lines[0].split("\t")
    if tuple(h.strip() for h in header) != _COLUMNS:
        raise SchemaError(f"TSV header must be exactly {list(_COLUMNS)}, got {header}")

    def cell(value: str) -> str | None:
        value = value.strip()
        if value == "":
            return None
        if value == '""':
            return ""
        return value

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(_COLUMNS):
            raise SchemaError(f"line {lineno}: expected {len(_COLUMNS)} cells, got {len(cells)}")
        action, types_c, meta_c, api_c, params_c = (cell(c) for c in cells)
        if action is None or types_c is None:
            raise SchemaError(f"line {lineno}: action and action_type are required")
        params = tuple(p.strip() for p in params_c.split(",")) if params_c else ()
        rows.append(
            GarEntry(
                action=action,
                action_types=frozenset(t.strip() for t in types_c.split(",") if t.strip()),
                user_interaction_metadata=meta_c,
                api=api_c,
                params=params,
            )
        )
    return _build(rows)


def load_gar(path: str) -> ActionRepository:
    """Load a repository file, dispatching on extension (.json or .tsv)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".tsv"):
        return load_repository_tsv(text)
    return load_repository_json(text)
