"""Word lattices: parsing, forward-backward arc posteriors, keyword search.

A lattice is a directed acyclic word graph with one start and one end node;
every node lies on some start-to-end path.  Arc weights are natural-log
scores.  The text form is::

    UTT <utterance_id> <num_nodes> <start_id> <end_id>
    ARC <from> <to> <word or <eps>> <log_weight>
    ...
    .

A batch file is a plain concatenation of lattices.  Keyword hits are scored
by the total probability mass of all paths running through the spelled arc
sequence, normalized by the total path mass of the lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

EPSILON = "<eps>"

NEG_INF = float("-inf")


class LatticeError(ValueError):
    """Structurally invalid lattice (cycles, unreachable nodes, bad format)."""


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


@dataclass(frozen=True)
class Arc:
    from_node: int
    to_node: int
    word: str          # EPSILON for epsilon arcs
    log_weight: float  # natural log of the path-mass contribution


@dataclass
class Lattice:
    utterance_id: str
    num_nodes: int
    start: int
    end: int
    arcs: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Enforce the structural invariants; raises :class:`LatticeError`."""
        if self.start == self.end:
            raise LatticeError(f"{self.utterance_id}: start equals end node")
        nodes = {self.start, self.end}
        for arc in self.arcs:
            nodes.add(arc.from_node)
            nodes.add(arc.to_node)
        for node in nodes:
            if not 0 <= node < self.num_nodes:
                raise LatticeError(
                    f"{self.utterance_id}: node {node} outside 0..{self.num_nodes - 1}"
                )
        order = self.topological_order()
        if order is None:
            raise LatticeError(f"{self.utterance_id}: lattice contains a cycle")
        reach_fwd = self._reachable(self.start, forward=True)
        if self.end not in reach_fwd:
            raise LatticeError(f"{self.utterance_id}: end node unreachable from start")
        reach_bwd = self._reachable(self.end, forward=False)
        stranded = nodes - (reach_fwd & reach_bwd)
        if stranded:
            raise LatticeError(
                f"{self.utterance_id}: node {min(stranded)} lies on no start-to-end path"
            )

    def _adjacency(self):
        out_arcs = {}
        in_arcs = {}
        for idx, arc in enumerate(self.arcs):
            out_arcs.setdefault(arc.from_node, []).append(idx)
            in_arcs.setdefault(arc.to_node, []).append(idx)
        return out_arcs, in_arcs

    def _reachable(self, origin: int, forward: bool) -> set:
        out_arcs, in_arcs = self._adjacency()
        table = out_arcs if forward else in_arcs
        seen = {origin}
        stack = [origin]
        while stack:
            node = stack.pop()
            for idx in table.get(node, ()):
                arc = self.arcs[idx]
                nxt = arc.to_node if forward else arc.from_node
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def topological_order(self):
        """Nodes in topological order, or None if the graph is cyclic.

        Only nodes touched by arcs (plus start and end) are ordered.
        """
        nodes = {self.start, self.end}
        indeg = {}
        for arc in self.arcs:
            nodes.add(arc.from_node)
            nodes.add(arc.to_node)
        for node in nodes:
            indeg[node] = 0
        for arc in self.arcs:
            indeg[arc.to_node] += 1
        out_arcs, _ = self._adjacency()
        ready = sorted(n for n in nodes if indeg[n] == 0)
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            inserted = False
            for idx in out_arcs.get(node, ()):
                to = self.arcs[idx].to_node
                indeg[to] -= 1
                if indeg[to] == 0:
                    ready.append(to)
                    inserted = True
            if inserted:
                ready.sort()
        if len(order) != len(nodes):
            return None
        return order


def forward_backward(lattice: Lattice, scale: float = 1.0):
    """Posterior probability of every arc, indexed like ``lattice.arcs``.

    Arc weights enter as exp(scale * log_weight).  Computed in log space:
    posterior(arc) = exp(alpha[from] + scale*w + beta[to] - Z) with Z the
    total path mass.
    """
    if scale <= 0.0:
        raise ValueError(f"scale must be > 0, got {scale}")
    order = lattice.topological_order()
    if order is None:
        raise LatticeError(f"{lattice.utterance_id}: lattice contains a cycle")
    out_arcs, in_arcs = lattice._adjacency()

    alpha = {node: NEG_INF for node in order}
    alpha[lattice.start] = 0.0
    for node in order:
        a = alpha[node]
        if a == NEG_INF:
            continue
        for idx in out_arcs.get(node, ()):
            arc = lattice.arcs[idx]
            alpha[arc.to_node] = _logaddexp(
                alpha[arc.to_node], a + scale * arc.log_weight
            )
    log_z = alpha[lattice.end]
    if log_z == NEG_INF:
        raise LatticeError(f"{lattice.utterance_id}: end node unreachable from start")

    beta = {node: NEG_INF for node in order}
    beta[lattice.end] = 0.0
    for node in reversed(order):
        b = beta[node]
        if b == NEG_INF:
            continue
        for idx in in_arcs.get(node, ()):
            arc = lattice.arcs[idx]
            beta[arc.from_node] = _logaddexp(
                beta[arc.from_node], scale * arc.log_weight + b
            )

    return [
        math.exp(alpha[arc.from_node] + scale * arc.log_weight
                 + beta[arc.to_node] - log_z)
        for arc in lattice.arcs
    ]


def cut_check(lattice: Lattice, posteriors, tol: float = 1e-9) -> bool:
    """True iff posteriors sum to 1 across every topological cut.

    Cuts are taken between consecutive prefixes of a topological order; each
    start-to-end path crosses each such cut exactly once, so a valid
    posterior assignment must sum to 1 over the crossing arcs.
    """
    order = lattice.topological_order()
    if order is None:
        raise LatticeError(f"{lattice.utterance_id}: lattice contains a cycle")
    pos = {node: k for k, node in enumerate(order)}
    n = len(order)
    # difference array over cut positions 1..n-1: arc (u,v) crosses every cut
    # i with pos[u] < i <= pos[v]
    delta = [0.0] * (n + 1)
    for arc, p in zip(lattice.arcs, posteriors):
        delta[pos[arc.from_node] + 1] += p
        delta[pos[arc.to_node] + 1] -= p
    running = 0.0
    for i in range(1, n):
        running += delta[i]
        if abs(running - 1.0) > tol:
            return False
    return True


@dataclass
class KeywordHit:
    keyword: tuple
    utterance_id: str
    arc_span: tuple  # indices into lattice.arcs, contiguous along a path
    posterior: float


def search_keyword(lattice: Lattice, keyword, threshold: float = 0.0,
                   scale: float = 1.0):
    """All contiguous arc sequences spelling ``keyword``, above threshold.

    Epsilon arcs may be traversed between keyword words (they join the
    reported span); the span starts at the arc of the first keyword word and
    ends at the arc of the last.  Hit posterior is the total mass of paths
    through the exact arc sequence divided by the total lattice mass.
    Hits are sorted by descending posterior.
    """
    keyword = tuple(keyword)
    if not keyword:
        raise ValueError("keyword is empty")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    order = lattice.topological_order()
    if order is None:
        raise LatticeError(f"{lattice.utterance_id}: lattice contains a cycle")
    out_arcs, in_arcs = lattice._adjacency()

    # alpha/beta as in forward_backward
    alpha = {node: NEG_INF for node in order}
    alpha[lattice.start] = 0.0
    for node in order:
        a = alpha[node]
        if a == NEG_INF:
            continue
        for idx in out_arcs.get(node, ()):
            arc = lattice.arcs[idx]
            alpha[arc.to_node] = _logaddexp(alpha[arc.to_node], a + scale * arc.log_weight)
    beta = {node: NEG_INF for node in order}
    beta[lattice.end] = 0.0
    for node in reversed(order):
        b = beta[node]
        if b == NEG_INF:
            continue
        for idx in in_arcs.get(node, ()):
            arc = lattice.arcs[idx]
            beta[arc.from_node] = _logaddexp(beta[arc.from_node], scale * arc.log_weight + b)
    log_z = alpha[lattice.end]

    spans = []

    def extend(span, span_weight, k):
        """span ends at a keyword-word arc for word k-1; find word k."""
        if k == len(keyword):
            spans.append((tuple(span), span_weight))
            return
        frontier = [(lattice.arcs[span[-1]].to_node, span, span_weight)]
        while frontier:
            node, path, weight = frontier.pop()
            for idx in out_arcs.get(node, ()):
                arc = lattice.arcs[idx]
                w = weight + scale * arc.log_weight
                if arc.word == EPSILON:
                    frontier.append((arc.to_node, path + [idx], w))
                elif arc.word == keyword[k]:
                    extend(path + [idx], w, k + 1)

    for idx, arc in enumerate(lattice.arcs):
        if arc.word == keyword[0]:
            extend([idx], scale * arc.log_weight, 1)

    hits = []
    for span, span_weight in spans:
        first = lattice.arcs[span[0]]
        last = lattice.arcs[span[-1]]
        log_mass = alpha[first.from_node] + span_weight + beta[last.to_node] - log_z
        posterior = math.exp(log_mass)
        if posterior >= threshold:
            hits.append(KeywordHit(
                keyword=keyword,
                utterance_id=lattice.utterance_id,
                arc_span=span,
                posterior=posterior,
            ))
    hits.sort(key=lambda h: (-h.posterior, h.arc_span))
    return hits


# --- text format -------------------------------------------------------------


def parse_lattices(text: str):
    """Parse a batch of lattices from the text format."""
    lattices = []
    header = None
    arcs = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "UTT":
            if header is not None:
                raise LatticeError(f"line {lineno}: unterminated lattice before UTT")
            if len(fields) != 5:
                raise LatticeError(f"line {lineno}: UTT needs 4 fields, got {len(fields) - 1}")
            try:
                header = (fields[1], int(fields[2]), int(fields[3]), int(fields[4]))
            except ValueError:
                raise LatticeError(f"line {lineno}: malformed UTT header") from None
            arcs = []
        elif fields[0] == "ARC":
            if header is None:
                raise LatticeError(f"line {lineno}: ARC before UTT header")
            if len(fields) != 5:
                raise LatticeError(f"line {lineno}: ARC needs 4 fields, got {len(fields) - 1}")
            try:
                arcs.append(Arc(
                    from_node=int(fields[1]),
                    to_node=int(fields[2]),
                    word=fields[3],
                    log_weight=float(fields[4]),
                ))
            except ValueError:
                raise LatticeError(f"line {lineno}: malformed ARC line") from None
        elif line == ".":
            if header is None:
                raise LatticeError(f"line {lineno}: terminator outside a lattice")
            utt_id, num_nodes, start, end = header
            lattices.append(Lattice(
                utterance_id=utt_id, num_nodes=num_nodes,
                start=start, end=end, arcs=arcs,
            ))
            header = None
            arcs = []
        else:
            raise LatticeError(f"line {lineno}: unrecognized line {line!r}")
    if header is not None:
        raise LatticeError("unterminated lattice at end of input")
    return lattices


def load_lattices(path):
    with open(path, encoding="utf-8") as fh:
        return parse_lattices(fh.read())


def format_lattice(lattice: Lattice) -> str:
    lines = [
        f"UTT {lattice.utterance_id} {lattice.num_nodes} {lattice.start} {lattice.end}"
    ]
    for arc in lattice.arcs:
        lines.append(f"ARC {arc.from_node} {arc.to_node} {arc.word} {arc.log_weight:.10f}")
    lines.append(".")
    return "\n".join(lines) + "\n"


def hit_to_json(hit: KeywordHit) -> str:
    """One keyword hit as a JSON line."""
    return json.dumps({
        "utterance_id": hit.utterance_id,
        "keyword": " ".join(hit.keyword),
        "posterior": hit.posterior,
        "arc_indices": list(hit.arc_span),
    }, sort_keys=True)
