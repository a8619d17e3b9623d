"""The three LLM role contracts: prompt construction and reply parsing.

Templates live in data files with <slot> markers; builders substitute slots
and nothing else, so the shipped template text fully determines each role's
behavior. Replies are expected to be JSON; the parser
tolerates code fences and surrounding prose by extracting the first JSON
object found.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field

from .errors import MalformedResponse
from .memory import FAIL, SUCCESS

STATE = "state"
ACTION = "action"
USER = "user"

ROLES = (STATE, ACTION, USER)

_SLOTS = {
    STATE: ("<sop_workflow>", "<execution_memory>"),
    ACTION: ("<action>", "<action_type>", "<action_context>"),
    USER: ("<question>", "<user_reply>", "<expected_format>"),
}


@dataclass(frozen=True)
class StateDecision:
    thought: str
    next_action: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


@dataclass(frozen=True)
class ActionData:
    thought: str = ""
    user_interaction: str | None = None
    params: dict | None = None
    search_query: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


@dataclass(frozen=True)
class UserTurn:
    thought: str
    input_validation: str
    user_response: str
    slots: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


def _template(role: str) -> str:
    from . import assets

    return assets.load_prompt(role)


def _substitute(role: str, mapping: dict[str, str]) -> str:
    text = _template(role)
    for slot, value in mapping.items():
        text = text.replace(slot, value)
    for slot in _SLOTS[role]:
        if slot in text:
            raise ValueError(f"unsubstituted slot {slot} in {role} prompt")
    return text


def build_state_prompt(workflow_text: str, memory_text: str) -> str:
    """Fill the state-decision template; empty memory_text is the empty-memory case."""
    return _substitute(STATE, {"<sop_workflow>": workflow_text, "<execution_memory>": memory_text})


def build_action_prompt(action: str, action_type: str, action_context: str) -> str:
    """Fill the action-execution template.

    <action> also occurs inside the retry instruction, so the action name is
    substituted there too, not only under the Action heading.
    """
    if not action or not action.strip():
        raise ValueError("action must be non-empty")
    return _substitute(
        ACTION,
        {"<action>": action, "<action_type>": action_type, "<action_context>": action_context},
    )


def build_user_prompt(question: str, user_reply: str, expected_format: str) -> str:
    if not expected_format or not expected_format.strip():
        raise ValueError("expected_format must be non-empty")
    return _substitute(
        USER,
        {"<question>": question, "<user_reply>": user_reply, "<expected_format>": expected_format},
    )


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _extract_json_object(raw: str) -> dict:
    fenced = _FENCE.search(raw)
    if fenced:
        raw = fenced.group(1)
    decoder = json.JSONDecoder()
    for start in range(len(raw)):
        if raw[start] != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise MalformedResponse(f"no JSON object found in response: {raw[:120]!r}")


def parse_role_response(role: str, raw_text: str) -> StateDecision | ActionData | UserTurn:
    """Typed view of a backend reply; MalformedResponse on contract violations."""
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    obj = _extract_json_object(raw_text)
    thought = str(obj.get("thought", ""))

    if role == STATE:
        next_action = obj.get("next_action")
        if not isinstance(next_action, str) or not next_action.strip():
            raise MalformedResponse("state response missing non-empty next_action")
        return StateDecision(thought=thought, next_action=next_action)

    if role == ACTION:
        user_interaction = obj.get("user_interaction")
        params = obj.get("params")
        search_query = obj.get("search_query")
        if params is not None and not isinstance(params, dict):
            raise MalformedResponse("action response params must be an object")
        if user_interaction is None and params is None and search_query is None:
            raise MalformedResponse(
                "action response needs one of user_interaction, params, search_query"
            )
        return ActionData(
            thought=thought,
            user_interaction=user_interaction,
            params=params,
            search_query=search_query,
        )

    validation = obj.get("input_validation")
    if validation not in (SUCCESS, FAIL):
        raise MalformedResponse(f"input_validation must be success or fail, got {validation!r}")
    response = obj.get("user_response")
    if not isinstance(response, str):
        raise MalformedResponse("user response missing user_response text")
    slots = obj.get("slots") or {}
    if not isinstance(slots, dict) or any(not str(k).strip() for k in slots):
        raise MalformedResponse("slots must be an object with non-empty keys")
    return UserTurn(
        thought=thought,
        input_validation=validation,
        user_response=response,
        slots={str(k): str(v) for k, v in slots.items()},
    )
