"""Indented-text SOP parser.

An SOP is a logical block of text where indentation opens sub-flows,
Python-style: any strictly greater leading-space count opens a sub-block and
a return to an earlier count closes it. Lines starting with ``if``/``else``
(after trim, case-insensitive) are conditions, lines containing
``terminate the flow`` are terminals, and everything else is an action.

The parser builds a workflow graph in which every non-blank line is a node.
Branch guards are attached to edges: an edge into a condition node carries
that condition's text, and the edge from a condition into a non-condition
body entry carries the condition's text as well, so every path through a
branch point is labeled. Sibling ``if`` blocks are preserved as ordered
guarded children; whether they are exhaustive is left to the state-decision
role, and there are no fall-through edges out of a condition body.

Well-formedness beyond structure (termination on every leaf, reachability,
resolvable action labels) is checked by :func:`lint_sop`, not at parse time,
so that malformed-but-parseable workflows can be diagnosed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import DanglingBranch, EmptyWorkflow, IndentationError, InvalidStructure

TERMINAL_MARKER = "terminate the flow"

_CONDITION_RE = re.compile(r"^(if\s|if$|else\b)", re.IGNORECASE)

KIND_ACTION = "action"
KIND_CONDITION = "condition"
KIND_TERMINAL = "terminal"


@dataclass
class SopNode:
    """One line of the SOP: an action, a branch condition, or a terminal."""

    id: str
    kind: str
    label: str
    children: list[tuple[str | None, str]] = field(default_factory=list)

    @property
    def is_condition(self) -> bool:
        return self.kind == KIND_CONDITION

    @property
    def is_terminal(self) -> bool:
        return self.kind == KIND_TERMINAL


@dataclass
class SopWorkflow:
    """A parsed SOP: named node table plus the entry node."""

    name: str
    root: str
    nodes: dict[str, SopNode]
    source_text: str

    def node(self, node_id: str) -> SopNode:
        return self.nodes[node_id]

    def successors(self, node_id: str) -> list[tuple[str | None, SopNode]]:
        return [(guard, self.nodes[child]) for guard, child in self.nodes[node_id].children]

    def action_labels(self) -> list[str]:
        """Labels of all action and terminal nodes, in source order."""
        return [n.label for n in self.nodes.values() if n.kind != KIND_CONDITION]

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "root": self.root,
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind,
                    "label": n.label,
                    "children": [{"guard": g, "child": c} for g, c in n.children],
                }
                for n in self.nodes.values()
            ],
        }
        return json.dumps(payload, indent=2)


def classify_line(text: str) -> str:
    if TERMINAL_MARKER in text.lower():
        return KIND_TERMINAL
    if _CONDITION_RE.match(text):
        return KIND_CONDITION
    return KIND_ACTION


@dataclass
class _Item:
    node: SopNode
    block: list["_Item"] = field(default_factory=list)


def _split_lines(text: str) -> list[tuple[int, int, str]]:
    """Return (lineno, indent, stripped_text) for every non-blank line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        stripped = raw.lstrip(" ")
        if stripped.startswith("\t"):
            raise IndentationError(f"line {lineno}: tabs are not allowed in indentation")
        indent = len(raw) - len(stripped)
        out.append((lineno, indent, stripped.rstrip()))
    return out


def _build_item_tree(lines: list[tuple[int, int, str]]) -> list[_Item]:
    """Group lines into nested blocks by indentation level."""
    top_indent = lines[0][1]
    root_block: list[_Item] = []
    # stack of (indent, block list) for every open level
    stack: list[tuple[int, list[_Item]]] = [(top_indent, root_block)]
    counter = 0
    prev_item: _Item | None = None
    for lineno, indent, text in lines:
        if indent > stack[-1][0]:
            if prev_item is None:
                raise IndentationError(f"line {lineno}: unexpected indent")
            stack.append((indent, prev_item.block))
        else:
            while stack and indent < stack[-1][0]:
                stack.pop()
            if not stack or indent != stack[-1][0]:
                raise IndentationError(
                    f"line {lineno}: dedent to a level that was never opened"
                )
        counter += 1
        node = SopNode(id=f"n{counter}", kind=classify_line(text), label=text)
        prev_item = _Item(node=node)
        stack[-1][1].append(prev_item)
    return root_block


def _leading_condition_run(items: list[_Item], start: int) -> list[_Item]:
    run = []
    for item in items[start:]:
        if not item.node.is_condition:
            break
        run.append(item)
    return run


def _entries(block: list[_Item]) -> list[tuple[str | None, _Item]]:
    """Entry edges of a block: its leading condition run, or its first item."""
    if not block:
        return []
    run = _leading_condition_run(block, 0)
    if run:
        return [(item.node.label, item) for item in run]
    return [(None, block[0])]


def _wire_block(block: list[_Item], nodes: dict[str, SopNode]) -> None:
    for idx, item in enumerate(block):
        node = item.node
        nodes[node.id] = node
        if item.block:
            _wire_block(item.block, nodes)
        if node.is_condition:
            if not item.block:
                raise DanglingBranch(f"condition {node.label!r} has no indented body")
            for guard, entry in _entries(item.block):
                # the branch into a plain body is labeled by the condition itself
                node.children.append((guard or node.label, entry.node.id))
            continue
        if node.is_terminal:
            if item.block:
                raise InvalidStructure(
                    f"terminal {node.label!r} cannot open a sub-flow"
                )
            continue
        # action node: sub-block entries first, then an adjacent condition run
        wired_conditions = False
        if item.block:
            sub = _entries(item.block)
            for guard, entry in sub:
                node.children.append((guard, entry.node.id))
            wired_conditions = all(e.node.is_condition for _, e in sub)
        if idx + 1 < len(block):
            nxt = block[idx + 1]
            if nxt.node.is_condition:
                if not item.block or wired_conditions:
                    for cond in _leading_condition_run(block, idx + 1):
                        node.children.append((cond.node.label, cond.node.id))
            elif not item.block:
                node.children.append((None, nxt.node.id))


def parse_sop(text: str, name: str = "sop") -> SopWorkflow:
    """Parse indented SOP text into a workflow graph.

    Raises IndentationError for tab indentation or a dedent to an unopened
    level, EmptyWorkflow for blank input, DanglingBranch for a condition
    without a body, and InvalidStructure for multiple roots or a sub-flow
    under a terminal.
    """
    lines = _split_lines(text)
    if not lines:
        raise EmptyWorkflow("SOP source has no content lines")
    root_block = _build_item_tree(lines)
    entries = _entries(root_block)
    if len(entries) != 1:
        raise InvalidStructure(
            f"workflow must have exactly one entry node, found {len(entries)}"
        )
    nodes: dict[str, SopNode] = {}
    _wire_block(root_block, nodes)
    return SopWorkflow(name=name, root=entries[0][1].node.id, nodes=nodes, source_text=text)


def render_sop(workflow: SopWorkflow) -> str:
    """Render a workflow back to canonical 4-space-indented text.

    ``parse_sop(render_sop(w))`` is structurally identical to ``w``: sibling
    conditions are emitted at their parent's depth and condition bodies one
    level deeper.
    """
    lines: list[str] = []
    emitted: set[str] = set()

    def emit(node_id: str, depth: int) -> None:
        node = workflow.nodes[node_id]
        if node_id in emitted:
            return
        emitted.add(node_id)
        lines.append("    " * depth + node.label)
        children = node.children
        if node.is_condition:
            for _, child_id in children:
                emit(child_id, depth + 1)
            return
        # both the unguarded successor and any sibling condition run sit at
        # the action's own depth in canonical form
        for _, child_id in children:
            emit(child_id, depth)

    emit(workflow.root, 0)
    return "\n".join(lines) + "\n"


def workflows_isomorphic(a: SopWorkflow, b: SopWorkflow) -> bool:
    """Structural equality: same shape, kinds, labels, and guard texts."""

    def signature(wf: SopWorkflow, node_id: str, seen: frozenset[str]) -> tuple:
        if node_id in seen:
            return ("cycle",)
        node = wf.nodes[node_id]
        seen = seen | {node_id}
        return (
            node.kind,
            node.label,
            tuple((g, signature(wf, c, seen)) for g, c in node.children),
        )

    if len(a.nodes) != len(b.nodes):
        return False
    return signature(a, a.root, frozenset()) == signature(b, b.root, frozenset())


def is_acyclic(workflow: SopWorkflow) -> bool:
    state: dict[str, int] = {}  # 0 in-progress, 1 done

    def visit(node_id: str) -> bool:
        mark = state.get(node_id)
        if mark == 0:
            return False
        if mark == 1:
            return True
        state[node_id] = 0
        for _, child in workflow.nodes[node_id].children:
            if not visit(child):
                return False
        state[node_id] = 1
        return True

    return all(visit(nid) for nid in workflow.nodes)


@dataclass
class Diagnostic:
    code: str
    node_id: str | None
    message: str

    def __str__(self) -> str:
        where = f" [{self.node_id}]" if self.node_id else ""
        return f"{self.code}{where}: {self.message}"


def lint_sop(workflow: SopWorkflow, repo, index=None, threshold: float | None = None) -> list[Diagnostic]:
    """Check a workflow against an action repository.

    Emits LowSimilarity for action nodes whose best repository match scores
    below the retrieval threshold, UnreachableNode for nodes the root cannot
    reach, and MissingTermination for leaves that are not terminal.
    """
    from . import retrieval
    from .errors import BelowThreshold

    if index is None:
        index = retrieval.build_index(repo, retrieval.HashingEmbeddingProvider())
    diagnostics: list[Diagnostic] = []

    reachable: set[str] = set()
    stack = [workflow.root]
    while stack:
        nid = stack.pop()
        if nid in reachable:
            continue
        reachable.add(nid)
        stack.extend(child for _, child in workflow.nodes[nid].children)
    for nid, node in workflow.nodes.items():
        if nid not in reachable:
            diagnostics.append(Diagnostic("UnreachableNode", nid, f"{node.label!r} is never reached"))

    for nid, node in workflow.nodes.items():
        if nid not in reachable:
            continue
        if not node.children and not node.is_terminal:
            diagnostics.append(
                Diagnostic("MissingTermination", nid, f"path ends at {node.label!r} without terminating the flow")
            )
        if node.kind == KIND_ACTION:
            try:
                retrieval.match_action(index, node.label, threshold=threshold)
            except BelowThreshold as exc:
                diagnostics.append(
                    Diagnostic(
                        "LowSimilarity",
                        nid,
                        f"no repository action matches {node.label!r} (best {exc.best_action!r} at {exc.score:.3f})",
                    )
                )
    return diagnostics
