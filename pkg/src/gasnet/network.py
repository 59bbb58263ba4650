"""Tree-shaped pipeline networks: pipes, topology, vertex classification.

A network is a finite directed graph whose underlying undirected graph is a
tree.  Each edge is a pipe with physical parameters; vertices are junctions
or boundary nodes.  Pressure is controlled at entry vertices (pipe starts on
the boundary) and flux at exit vertices (pipe ends on the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import GasnetError

__all__ = [
    "NetworkError",
    "Constants",
    "PipeParameters",
    "Pipe",
    "NetworkTopology",
    "VertexClassification",
    "TreeValidation",
    "parse_network",
    "classify_vertices",
    "validate_tree",
]

DEFAULT_SOUND_SPEED = 340.0   # m/s
DEFAULT_GRAVITY = 9.81        # m/s^2


class NetworkError(GasnetError, ValueError):
    """Raised for malformed network documents or invalid topologies."""


@dataclass(frozen=True)
class Constants:
    """Global physical constants shared by all pipes."""

    c: float = DEFAULT_SOUND_SPEED
    g: float = DEFAULT_GRAVITY

    def __post_init__(self):
        if self.c <= 0.0:
            raise NetworkError("sound speed c must be positive")


@dataclass(frozen=True)
class PipeParameters:
    """Physical parameters of a single cylindrical pipe.

    beta = friction/(2*diameter) and gamma = g*sin(inclination)/c^2 are
    derived; they are recomputed from the primitives at construction.
    """

    length: float
    diameter: float
    friction: float
    inclination: float
    beta: float = field(init=False)
    gamma: float = field(init=False)
    constants: Constants = Constants()

    def __post_init__(self):
        if not self.length > 0.0:
            raise NetworkError("nonpositive length")
        if not self.diameter > 0.0:
            raise NetworkError("nonpositive diameter")
        if self.friction < 0.0:
            raise NetworkError("negative friction coefficient")
        if not abs(self.inclination) < math.pi / 2:
            raise NetworkError("inclination must lie in (-pi/2, pi/2)")
        object.__setattr__(self, "beta", self.friction / (2.0 * self.diameter))
        object.__setattr__(
            self,
            "gamma",
            self.constants.g * math.sin(self.inclination) / self.constants.c ** 2,
        )


@dataclass(frozen=True)
class Pipe:
    """A directed edge of the network with its parameters."""

    pipe_id: str
    start: str
    end: str
    params: PipeParameters


class NetworkTopology:
    """Ordered list of pipes plus the vertex set.

    The document order of the pipes fixes the edge index k (0-based in code,
    1-based in reports).
    """

    def __init__(self, pipes: list[Pipe], vertices: list[str], constants: Constants = Constants()):
        self.pipes = list(pipes)
        self.vertices = list(vertices)
        self.constants = constants
        vertex_set = set(self.vertices)
        if len(vertex_set) != len(self.vertices):
            raise NetworkError("duplicate vertex ids")
        seen_ids = set()
        for pipe in self.pipes:
            if pipe.pipe_id in seen_ids:
                raise NetworkError(f"duplicate pipe id {pipe.pipe_id!r}")
            seen_ids.add(pipe.pipe_id)
            if pipe.start == pipe.end:
                raise NetworkError(f"pipe {pipe.pipe_id!r} is a self-loop")
            for v in (pipe.start, pipe.end):
                if v not in vertex_set:
                    raise NetworkError(f"pipe {pipe.pipe_id!r} references unknown vertex {v!r}")

    @property
    def m(self) -> int:
        return len(self.pipes)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def pipe_index(self, pipe_id: str) -> int:
        for k, pipe in enumerate(self.pipes):
            if pipe.pipe_id == pipe_id:
                return k
        raise NetworkError(f"unknown pipe id {pipe_id!r}")


@dataclass
class TreeValidation:
    """Result of the connectivity/acyclicity check."""

    connected: bool
    acyclic: bool
    count_ok: bool
    witness_edges: list[str]

    @property
    def valid(self) -> bool:
        return self.connected and self.acyclic and self.count_ok

    def describe(self) -> str:
        if self.valid:
            return "valid tree"
        parts = []
        if not self.acyclic:
            parts.append("cycle detected: " + ", ".join(self.witness_edges))
        if not self.connected:
            parts.append("disconnected")
        if not self.count_ok:
            parts.append("vertex/edge count violates n = m + 1")
        return "; ".join(parts)


@dataclass
class VertexClassification:
    """Incidence data and the inner/entry/exit split of the vertex set."""

    xi: dict[str, list[int]]            # vertex -> per-pipe incidence in {-1,0,+1}
    incident: dict[str, list[int]]      # vertex -> indices of incident pipes
    inner: list[str]
    entry: list[str]
    exit: list[str]


def validate_tree(topology: NetworkTopology) -> TreeValidation:
    """Check that the underlying undirected graph is a connected tree."""
    adjacency: dict[str, list[tuple[str, str]]] = {v: [] for v in topology.vertices}
    for pipe in topology.pipes:
        adjacency[pipe.start].append((pipe.end, pipe.pipe_id))
        adjacency[pipe.end].append((pipe.start, pipe.pipe_id))

    witness: list[str] = []
    acyclic = True
    visited: set[str] = set()
    if topology.vertices:
        stack = [(topology.vertices[0], None)]
        while stack:
            vertex, via = stack.pop()
            if vertex in visited:
                continue
            visited.add(vertex)
            for neighbor, edge_id in adjacency[vertex]:
                if edge_id == via:
                    continue
                if neighbor in visited:
                    acyclic = False
                    if edge_id not in witness:
                        witness.append(edge_id)
                else:
                    stack.append((neighbor, edge_id))
    connected = len(visited) == topology.n
    count_ok = topology.n == topology.m + 1
    return TreeValidation(connected=connected, acyclic=acyclic, count_ok=count_ok, witness_edges=witness)


def classify_vertices(topology: NetworkTopology) -> VertexClassification:
    """Compute incidence maps and the inner/entry/exit vertex split.

    Inner vertices touch more than one pipe.  A boundary vertex of a tree
    touches exactly one pipe: it is an entry if that pipe starts there and
    an exit if it ends there.
    """
    report = validate_tree(topology)
    if not report.valid:
        raise NetworkError("topology is not a tree: " + report.describe())

    xi: dict[str, list[int]] = {v: [0] * topology.m for v in topology.vertices}
    incident: dict[str, list[int]] = {v: [] for v in topology.vertices}
    for k, pipe in enumerate(topology.pipes):
        xi[pipe.start][k] = -1
        xi[pipe.end][k] = +1
        incident[pipe.start].append(k)
        incident[pipe.end].append(k)

    inner, entry, exit_ = [], [], []
    for v in topology.vertices:
        if len(incident[v]) > 1:
            inner.append(v)
        else:
            (k,) = incident[v]
            if xi[v][k] == -1:
                entry.append(v)
            else:
                exit_.append(v)
    return VertexClassification(xi=xi, incident=incident, inner=inner, entry=entry, exit=exit_)


def parse_network(document: dict) -> NetworkTopology:
    """Build a topology from a parsed network document.

    Expected keys: optional ``constants {c, g}``, ``vertices [id...]`` and
    ``pipes [{id, from, to, length, diameter, friction, inclination}...]``.
    """
    if not isinstance(document, dict):
        raise NetworkError("network document must be a mapping")

    raw_constants = document.get("constants", {}) or {}
    constants = Constants(
        c=float(raw_constants.get("c", DEFAULT_SOUND_SPEED)),
        g=float(raw_constants.get("g", DEFAULT_GRAVITY)),
    )

    vertices = document.get("vertices")
    if not isinstance(vertices, list) or not vertices:
        raise NetworkError("missing or empty 'vertices' list")
    vertices = [str(v) for v in vertices]

    raw_pipes = document.get("pipes")
    if not isinstance(raw_pipes, list) or not raw_pipes:
        raise NetworkError("missing or empty 'pipes' list")

    pipes = []
    for entry in raw_pipes:
        pipe_id = str(entry.get("id", f"pipe{len(pipes) + 1}"))
        for key in ("from", "to", "length", "diameter", "friction", "inclination"):
            if key not in entry:
                raise NetworkError(f"pipe {pipe_id!r}: missing field {key!r}")
        try:
            params = PipeParameters(
                length=float(entry["length"]),
                diameter=float(entry["diameter"]),
                friction=float(entry["friction"]),
                inclination=float(entry["inclination"]),
                constants=constants,
            )
        except NetworkError as err:
            raise NetworkError(f"pipe {pipe_id!r}: {err}") from None
        pipes.append(Pipe(pipe_id=pipe_id, start=str(entry["from"]), end=str(entry["to"]), params=params))

    return NetworkTopology(pipes=pipes, vertices=vertices, constants=constants)
