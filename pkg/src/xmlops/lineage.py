"""Append-only lineage graph over store entities.

Edges are directed (from_id, relation, to_id) records in a checksummed log.
Deletion is modeled as appending an archival record for the same edge key;
nothing is ever removed. The graph is kept acyclic: an append that would
close a directed cycle is rejected.

Each relation has a fixed orientation toward the upstream (provenance)
endpoint, so ancestor/descendant queries work over mixed relations:

    dataset   --derived_from--> sample/recipe/parent     (to is upstream)
    run       --trained_on-->   dataset                  (to is upstream)
    run       --produced-->     model                    (from is upstream)
    expl.     --explains-->     model                    (to is upstream)
    model     --deployed_as-->  deployment               (from is upstream)
    feedback  --feedback_on-->  target                   (to is upstream)

The in-memory adjacency is consumed incrementally from the store log, so
appends stay O(degree) rather than O(edges); several graph instances over
one store converge by re-syncing against the log.
"""

from __future__ import annotations

from .entities import LineageEdge
from .errors import ValidationError
from .store import FileStore

LOG_NAME = "lineage"

# relation -> True when to_id is the upstream endpoint of the edge
_TO_IS_UPSTREAM = {
    "derived_from": True,
    "trained_on": True,
    "explains": True,
    "feedback_on": True,
    "produced": False,
    "deployed_as": False,
}


class LineageGraph:
    def __init__(self, store: FileStore):
        self._store = store
        self._consumed = 0
        self._state: dict[tuple, bool] = {}  # (from, rel, to) -> archived
        self._adj: dict[str, set[str]] = {}  # stored direction, live edges only

    def _sync(self) -> None:
        for doc in self._store.log_slice(LOG_NAME, self._consumed):
            self._apply(doc)
            self._consumed += 1

    def _apply(self, doc: dict) -> None:
        key = (doc["from_id"], doc["relation"], doc["to_id"])
        archived = doc.get("archived", False)
        self._state[key] = archived
        if archived:
            self._adj.get(doc["from_id"], set()).discard(doc["to_id"])
        else:
            self._adj.setdefault(doc["from_id"], set()).add(doc["to_id"])

    def edges(self, include_archived: bool = False) -> list[LineageEdge]:
        """Effective edge set: the last record per (from, relation, to) wins."""
        self._sync()
        return [LineageEdge(f, t, r, archived)
                for (f, r, t), archived in self._state.items()
                if include_archived or not archived]

    def add_edge(self, from_id: str, to_id: str, relation: str) -> None:
        edge = LineageEdge(from_id, to_id, relation)
        if from_id == to_id:
            raise ValidationError(f"self-edge would create a cycle: {from_id}")
        self._sync()
        if self._state.get((from_id, relation, to_id)) is False:
            return  # idempotent
        if self._reaches(to_id, from_id):
            raise ValidationError(
                f"edge {from_id} -{relation}-> {to_id} would create a cycle")
        self._store.append_log(LOG_NAME, edge.to_doc())
        self._apply(edge.to_doc())
        self._consumed += 1

    def archive_edge(self, from_id: str, to_id: str, relation: str) -> None:
        self._sync()
        doc = LineageEdge(from_id, to_id, relation, archived=True).to_doc()
        self._store.append_log(LOG_NAME, doc)
        self._apply(doc)
        self._consumed += 1

    def _reaches(self, start: str, goal: str) -> bool:
        stack = [start]
        seen = set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self._adj.get(node, ()))
        return False

    def is_acyclic(self) -> bool:
        """Kahn topological sort over the effective directed edge set."""
        self._sync()
        nodes = set(self._adj)
        for targets in self._adj.values():
            nodes.update(targets)
        indeg = {node: 0 for node in nodes}
        for targets in self._adj.values():
            for t in targets:
                indeg[t] += 1
        queue = [n for n, d in indeg.items() if d == 0]
        visited = 0
        while queue:
            node = queue.pop()
            visited += 1
            for t in self._adj.get(node, ()):
                indeg[t] -= 1
                if indeg[t] == 0:
                    queue.append(t)
        return visited == len(nodes)

    # -- queries -----------------------------------------------------------

    def _oriented(self):
        """(child -> parents, parent -> children) adjacency in provenance order."""
        self._sync()
        up: dict[str, list[str]] = {}
        down: dict[str, list[str]] = {}
        for (from_id, relation, to_id), archived in self._state.items():
            if archived:
                continue
            if _TO_IS_UPSTREAM[relation]:
                child, parent = from_id, to_id
            else:
                child, parent = to_id, from_id
            up.setdefault(child, []).append(parent)
            down.setdefault(parent, []).append(child)
        return up, down

    def ancestors(self, entity_id: str) -> set[str]:
        up, _ = self._oriented()
        return self._closure(entity_id, up)

    def descendants(self, entity_id: str) -> set[str]:
        _, down = self._oriented()
        return self._closure(entity_id, down)

    def resolve(self, entity_id: str) -> dict:
        """Lineage subgraph: the entity plus all ancestors and descendants,
        with every effective edge between those nodes."""
        up, down = self._oriented()
        ancestors = self._closure(entity_id, up)
        descendants = self._closure(entity_id, down)
        nodes = {entity_id} | ancestors | descendants
        edges = [LineageEdge(f, t, r)
                 for (f, r, t), archived in self._state.items()
                 if not archived and f in nodes and t in nodes]
        return {
            "root": entity_id,
            "nodes": sorted(nodes),
            "edges": [e.to_doc() for e in edges],
            "ancestors": sorted(ancestors),
            "descendants": sorted(descendants),
        }

    @staticmethod
    def _closure(start: str, adj: dict[str, list[str]]) -> set[str]:
        out: set[str] = set()
        stack = list(adj.get(start, []))
        while stack:
            node = stack.pop()
            if node in out:
                continue
            out.add(node)
            stack.extend(adj.get(node, []))
        return out


def to_dot(subgraph: dict) -> str:
    """Render a resolve() result as a DOT digraph."""
    lines = ["digraph lineage {", "  rankdir=LR;"]
    root = subgraph["root"]
    for node in subgraph["nodes"]:
        if node == root:
            lines.append(f'  "{_short(node)}" [shape=box style=bold];')
        else:
            lines.append(f'  "{_short(node)}";')
    for edge in subgraph["edges"]:
        lines.append(
            f'  "{_short(edge["from_id"])}" -> "{_short(edge["to_id"])}" '
            f'[label="{edge["relation"]}"];')
    lines.append("}")
    return "\n".join(lines)


def _short(entity_id: str) -> str:
    return entity_id[:12] if len(entity_id) >= 32 else entity_id
