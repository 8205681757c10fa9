"""Graph-of-groups configuration: the glue data for the piece model.

A config names a finite connected bipartite multigraph. Every vertex carries
a free rank and one cyclically reduced boundary word per incident edge; every
edge carries an integer 2x2 gluing matrix with |det| = 1 and an integer
translation relating the two plane frames. The fiber-nonparallel condition is
matrix[0][1] != 0: the far side's position coordinate must see this side's
fiber."""

from __future__ import annotations

from dataclasses import dataclass

from .. import words
from ..errors import ConfigInvalid

Matrix = tuple[tuple[int, int], tuple[int, int]]
Vec = tuple[int, int]


@dataclass(frozen=True)
class VertexSpec:
    vid: str
    rank: int
    words: dict  # edge id -> boundary word
    cls: int = 0  # bipartition class, filled by validate()


@dataclass(frozen=True)
class EdgeSpec:
    eid: str
    ends: tuple[str, str]
    matrix: Matrix
    translation: Vec


def _invert(matrix: Matrix, translation: Vec) -> tuple[Matrix, Vec]:
    (a, b), (c, d) = matrix
    det = a * d - b * c
    inv = ((d * det, -b * det), (-c * det, a * det))
    t1, t2 = translation
    it = (-(inv[0][0] * t1 + inv[0][1] * t2), -(inv[1][0] * t1 + inv[1][1] * t2))
    return inv, it


class GraphOfGroupsConfig:
    def __init__(self, vertices: dict, edges: dict):
        self.vertices: dict[str, VertexSpec] = vertices
        self.edges: dict[str, EdgeSpec] = edges
        self._incident: dict[str, list[str]] = {}
        for vid in vertices:
            self._incident[vid] = sorted(
                eid for eid, e in edges.items() if vid in e.ends
            )
        self.validate()

    @classmethod
    def from_dict(cls, doc: dict) -> "GraphOfGroupsConfig":
        vsec = doc.get("vertex")
        esec = doc.get("edge")
        if not isinstance(vsec, dict) or not vsec:
            raise ConfigInvalid("missing [vertex.*] sections")
        if not isinstance(esec, dict) or not esec:
            raise ConfigInvalid("missing [edge.*] sections")
        vertices = {}
        for vid, spec in sorted(vsec.items()):
            if "rank" not in spec:
                raise ConfigInvalid(f"vertex {vid!r}: missing rank")
            wmap = spec.get("words")
            if not isinstance(wmap, dict):
                raise ConfigInvalid(f"vertex {vid!r}: missing words table")
            vertices[vid] = VertexSpec(
                vid=vid,
                rank=int(spec["rank"]),
                words=dict(wmap),
                cls=int(spec.get("class", 0)),
            )
        edges = {}
        for eid, spec in sorted(esec.items()):
            ends = spec.get("ends")
            if not isinstance(ends, list) or len(ends) != 2:
                raise ConfigInvalid(f"edge {eid!r}: ends must list two vertices")
            m = spec.get("matrix")
            if (
                not isinstance(m, list)
                or len(m) != 2
                or any(not isinstance(r, list) or len(r) != 2 for r in m)
            ):
                raise ConfigInvalid(f"edge {eid!r}: matrix must be 2x2")
            t = spec.get("translation", [0, 0])
            if not isinstance(t, list) or len(t) != 2:
                raise ConfigInvalid(f"edge {eid!r}: translation must have 2 entries")
            edges[eid] = EdgeSpec(
                eid=eid,
                ends=(str(ends[0]), str(ends[1])),
                matrix=((int(m[0][0]), int(m[0][1])), (int(m[1][0]), int(m[1][1]))),
                translation=(int(t[0]), int(t[1])),
            )
        return cls(vertices, edges)

    # -- structure queries ------------------------------------------------

    def incident(self, vid: str) -> list[str]:
        return self._incident[vid]

    def other_end(self, eid: str, vid: str) -> str:
        a, b = self.edges[eid].ends
        if vid == a:
            return b
        if vid == b:
            return a
        raise ConfigInvalid(f"vertex {vid!r} not an end of edge {eid!r}")

    def word(self, vid: str, eid: str) -> str:
        return self.vertices[vid].words[eid]

    def transform(self, eid: str, from_vid: str) -> tuple[Matrix, Vec]:
        """(matrix, translation) mapping from_vid-side (h, f) to the far side."""
        e = self.edges[eid]
        if from_vid == e.ends[0]:
            return e.matrix, e.translation
        if from_vid == e.ends[1]:
            return _invert(e.matrix, e.translation)
        raise ConfigInvalid(f"vertex {from_vid!r} not an end of edge {eid!r}")

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        if not self.edges:
            raise ConfigInvalid("underlying graph needs at least one edge")
        for eid, e in self.edges.items():
            for vid in e.ends:
                if vid not in self.vertices:
                    raise ConfigInvalid(f"edge {eid!r}: unknown vertex {vid!r}")
            if e.ends[0] == e.ends[1]:
                raise ConfigInvalid(f"edge {eid!r}: loops break bipartiteness")
            (a, b), (c, d) = e.matrix
            if abs(a * d - b * c) != 1:
                raise ConfigInvalid(f"edge {eid!r}: |det| must be 1")
            if b == 0:
                raise ConfigInvalid(
                    f"edge {eid!r}: fiber-parallel gluing (matrix[0][1] = 0)"
                )
        for vid, v in self.vertices.items():
            if not (2 <= v.rank <= 26):
                raise ConfigInvalid(f"vertex {vid!r}: rank must be in 2..26")
            inc = set(self.incident(vid))
            declared = set(v.words)
            if declared != inc:
                raise ConfigInvalid(
                    f"vertex {vid!r}: words declared for {sorted(declared)} "
                    f"but incident edges are {sorted(inc)}"
                )
            alphabet = set(words.generators(v.rank))
            for eid, w in v.words.items():
                if not w or any(ch.lower() not in alphabet for ch in w):
                    raise ConfigInvalid(
                        f"vertex {vid!r}, edge {eid!r}: word {w!r} outside rank"
                    )
                if not words.is_cyclically_reduced(w):
                    raise ConfigInvalid(
                        f"vertex {vid!r}, edge {eid!r}: word {w!r} not cyclically reduced"
                    )
                if words.is_proper_power(w):
                    raise ConfigInvalid(
                        f"vertex {vid!r}, edge {eid!r}: word {w!r} is a proper power"
                    )
            ws = sorted(v.words.items())
            for i in range(len(ws)):
                for j in range(i + 1, len(ws)):
                    if words.conjugate_as_cyclic(ws[i][1], ws[j][1]):
                        raise ConfigInvalid(
                            f"vertex {vid!r}: boundary words of edges "
                            f"{ws[i][0]!r} and {ws[j][0]!r} are conjugate"
                        )
        self._two_color()

    def _two_color(self) -> None:
        """Connected bipartite check; assigns classes 1/2 anchored by any
        declared class, else by the lex-least vertex."""
        color: dict[str, int] = {}
        start = min(self.vertices)
        color[start] = 1
        queue = [start]
        while queue:
            u = queue.pop(0)
            for eid in self.incident(u):
                w = self.other_end(eid, u)
                if w not in color:
                    color[w] = 3 - color[u]
                    queue.append(w)
                elif color[w] == color[u]:
                    raise ConfigInvalid("underlying graph is not bipartite")
        if len(color) != len(self.vertices):
            raise ConfigInvalid("underlying graph is not connected")
        declared = {vid: v.cls for vid, v in self.vertices.items() if v.cls}
        flip = False
        for vid, c in declared.items():
            if c not in (1, 2):
                raise ConfigInvalid(f"vertex {vid!r}: class must be 1 or 2")
            if c != color[vid]:
                flip = True
        if flip:
            color = {vid: 3 - c for vid, c in color.items()}
            for vid, c in declared.items():
                if c != color[vid]:
                    raise ConfigInvalid("declared classes are not a bipartition")
        for vid, v in self.vertices.items():
            self.vertices[vid] = VertexSpec(
                vid=v.vid, rank=v.rank, words=v.words, cls=color[vid]
            )
