"""Directed network model, o-d paths and flow-balance data."""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DanglingArc,
    DuplicateArc,
    InvalidPath,
    IoError,
    SelfLoop,
    TooManyPaths,
    Unreachable,
)


@dataclass(frozen=True)
class Network:
    """Directed graph with a single origin/destination pair.

    Arc ids are the positions in ``arcs`` (0-based, file order). Every vector
    indexed by arcs in this package uses that order.
    """

    num_vertices: int
    arcs: tuple[tuple[int, int], ...]
    origin: int
    destination: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple((int(u), int(v)) for u, v in self.arcs))

    @property
    def n(self) -> int:
        return len(self.arcs)

    @property
    def m(self) -> int:
        return self.num_vertices

    def label(self, v: int) -> str:
        if self.labels is not None:
            return self.labels[v]
        return str(v)

    def arc_label(self, e: int) -> str:
        u, v = self.arcs[e]
        return f"{self.label(u)}->{self.label(v)}"

    def out_arcs(self, v: int) -> list[int]:
        return [e for e, (u, _) in enumerate(self.arcs) if u == v]


def validate_network(net: Network) -> Network:
    """Check the structural invariants; return ``net`` unchanged if they hold."""
    m = net.num_vertices
    for vid in (net.origin, net.destination):
        if not 0 <= vid < m:
            raise DanglingArc(f"origin/destination {vid} outside [0, {m})")
    seen = set()
    for e, (u, v) in enumerate(net.arcs):
        if not (0 <= u < m and 0 <= v < m):
            raise DanglingArc(f"arc {e} ({u}, {v}) references a vertex outside [0, {m})")
        if u == v:
            raise SelfLoop(f"arc {e} is a self-loop at vertex {u}")
        if (u, v) in seen:
            raise DuplicateArc(f"arc {e} duplicates ({u}, {v})")
        seen.add((u, v))
    if net.labels is not None and len(net.labels) != m:
        raise DanglingArc(f"{len(net.labels)} labels for {m} vertices")
    if net.origin == net.destination:
        raise Unreachable("origin equals destination")

    reached = {net.origin}
    queue = deque([net.origin])
    adj: dict[int, list[int]] = {}
    for u, v in net.arcs:
        adj.setdefault(u, []).append(v)
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in reached:
                reached.add(v)
                queue.append(v)
    if net.destination not in reached:
        raise Unreachable(
            f"no directed path from {net.label(net.origin)} to {net.label(net.destination)}"
        )
    return net


def flow_constraints(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Signed node-arc incidence matrix and the o-d supply vector.

    Row i of ``A`` is +1 on arcs leaving i and -1 on arcs entering i;
    ``b`` is 1 at the origin, -1 at the destination, 0 elsewhere.
    """
    A = np.zeros((net.m, net.n))
    for e, (u, v) in enumerate(net.arcs):
        A[u, e] = 1.0
        A[v, e] = -1.0
    b = np.zeros(net.m)
    b[net.origin] = 1.0
    b[net.destination] = -1.0
    return A, b


@dataclass(frozen=True)
class PathVector:
    """Simple directed o-d path stored both as arc sequence and 0/1 vector."""

    arc_sequence: tuple[int, ...]
    n: int
    selected: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "arc_sequence", tuple(int(e) for e in self.arc_sequence))
        sel = np.zeros(self.n)
        sel[list(self.arc_sequence)] = 1.0
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)

    def __len__(self) -> int:
        return len(self.arc_sequence)

    @property
    def arcs(self) -> frozenset[int]:
        return frozenset(self.arc_sequence)

    def describe(self, net: Network) -> list[str]:
        return [net.arc_label(e) for e in self.arc_sequence]


def make_path(net: Network, arc_sequence: Sequence[int]) -> PathVector:
    """Build a :class:`PathVector` after checking it is a simple o-d path."""
    seq = [int(e) for e in arc_sequence]
    if not seq:
        raise InvalidPath("empty arc sequence")
    at = net.origin
    visited = {at}
    for e in seq:
        if not 0 <= e < net.n:
            raise InvalidPath(f"arc id {e} out of range")
        u, v = net.arcs[e]
        if u != at:
            raise InvalidPath(f"arc {net.arc_label(e)} does not leave {net.label(at)}")
        if v in visited:
            raise InvalidPath(f"vertex {net.label(v)} visited twice")
        visited.add(v)
        at = v
    if at != net.destination:
        raise InvalidPath(f"sequence ends at {net.label(at)}, not the destination")
    return PathVector(tuple(seq), net.n)


def path_from_arcs(net: Network, arcs: Sequence[str]) -> PathVector:
    """Parse labels like ``"1->2"`` into a path."""
    index = {net.arc_label(e): e for e in range(net.n)}
    try:
        seq = [index[a.replace(" ", "").replace("→", "->")] for a in arcs]
    except KeyError as exc:
        raise InvalidPath(f"unknown arc {exc.args[0]!r}") from None
    return make_path(net, seq)


def extract_path(net: Network, selection: np.ndarray, tol: float = 0.5) -> PathVector:
    """Pull a simple o-d path out of a 0/1 arc selection.

    Arcs that only form cycles are dropped. Depth-first search over selected
    arcs, lowest arc id first, so the result is deterministic.
    """
    chosen = [e for e in range(net.n) if selection[e] > tol]
    out: dict[int, list[int]] = {}
    for e in chosen:
        out.setdefault(net.arcs[e][0], []).append(e)

    stack: list[tuple[int, int]] = [(net.origin, 0)]
    seq: list[int] = []
    on_path = {net.origin}
    while stack:
        v, k = stack[-1]
        if v == net.destination:
            return PathVector(tuple(seq), net.n)
        arcs_v = out.get(v, [])
        if k >= len(arcs_v):
            stack.pop()
            on_path.discard(v)
            if seq:
                seq.pop()
            continue
        stack[-1] = (v, k + 1)
        e = arcs_v[k]
        w = net.arcs[e][1]
        if w in on_path:
            continue
        on_path.add(w)
        seq.append(e)
        stack.append((w, 0))
    raise InvalidPath("selection contains no origin-destination path")


def enumerate_paths(net: Network, max_paths: int = 100_000) -> list[PathVector]:
    """All simple o-d paths, ordered lexicographically by arc sequence."""
    out: dict[int, list[int]] = {}
    for e, (u, _) in enumerate(net.arcs):
        out.setdefault(u, []).append(e)

    found: list[tuple[int, ...]] = []
    seq: list[int] = []
    visited = {net.origin}

    def walk(v: int) -> None:
        if v == net.destination:
            if len(found) >= max_paths:
                raise TooManyPaths(f"more than {max_paths} o-d paths")
            found.append(tuple(seq))
            return
        for e in out.get(v, ()):
            w = net.arcs[e][1]
            if w in visited:
                continue
            visited.add(w)
            seq.append(e)
            walk(w)
            seq.pop()
            visited.discard(w)

    walk(net.origin)
    found.sort()
    return [PathVector(s, net.n) for s in found]


def toy_network() -> Network:
    """Three-vertex example: arcs 1->2, 2->3, 1->3 from vertex 1 to vertex 3."""
    return Network(3, ((0, 1), (1, 2), (0, 2)), origin=0, destination=2, labels=("1", "2", "3"))


def read_arc_csv(csv_path: str | Path) -> list[tuple[int, int]]:
    """Arc list from a CSV with header ``tail,head`` (0-based vertex ids)."""
    try:
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read network file {csv_path}: {exc}") from None
    if not rows or [c.strip() for c in rows[0]] != ["tail", "head"]:
        raise IoError(f"{csv_path}: expected header 'tail,head'")
    arcs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise IoError(f"{csv_path}:{lineno}: expected 2 columns")
        try:
            arcs.append((int(row[0]), int(row[1])))
        except ValueError:
            raise IoError(f"{csv_path}:{lineno}: non-integer vertex id") from None
    return arcs


def load_network(
    csv_path: str | Path,
    sidecar: str | Path | None = None,
    origin: int | None = None,
    destination: int | None = None,
    num_vertices: int | None = None,
) -> Network:
    """Read a ``tail,head`` arc CSV plus origin/destination metadata.

    Explicit arguments override values from the JSON sidecar. Vertex count
    defaults to one more than the largest vertex id.
    """
    meta: dict = {}
    if sidecar is not None:
        try:
            meta = json.loads(Path(sidecar).read_text())
        except (OSError, ValueError) as exc:
            raise IoError(f"cannot read network sidecar {sidecar}: {exc}") from None
    arcs = read_arc_csv(csv_path)

    o = origin if origin is not None else meta.get("origin")
    d = destination if destination is not None else meta.get("destination")
    if o is None or d is None:
        raise IoError("origin and destination must be given by flag or sidecar")
    m = num_vertices if num_vertices is not None else meta.get("num_vertices")
    if m is None:
        m = 1 + max([o, d] + [max(a) for a in arcs])
    labels = meta.get("labels")
    net = Network(int(m), tuple(arcs), int(o), int(d), tuple(labels) if labels else None)
    return validate_network(net)


def write_network(net: Network, csv_path: str | Path, sidecar: str | Path) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tail", "head"])
        w.writerows(net.arcs)
    meta = {"origin": net.origin, "destination": net.destination, "num_vertices": net.m}
    if net.labels is not None:
        meta["labels"] = list(net.labels)
    Path(sidecar).write_text(json.dumps(meta, indent=2) + "\n")
