"""Combinatorial model of shaped triangulations and the two built-in 7₃ datasets."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

SLOTS = ("A", "B", "C")
WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class TetShape:
    a: float
    b: float
    c: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)

    def angle(self, slot: str) -> float:
        return self.as_tuple()[SLOTS.index(slot)]


@dataclass(frozen=True)
class Tetrahedron:
    id: int
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"tetrahedron {self.id}: sign must be +1 or -1")


@dataclass(frozen=True)
class EdgeClass:
    id: str
    incidences: tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class ShapeStructure:
    shapes: tuple[TetShape, ...]

    def __post_init__(self):
        for k, s in enumerate(self.shapes):
            if abs(s.a + s.b + s.c - 0.5) > 1e-12:
                raise ValueError(f"tetrahedron {k + 1}: a+b+c = {s.a + s.b + s.c!r}, expected 1/2")

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "ShapeStructure":
        v = [float(x) for x in v]
        if len(v) % 3:
            raise ValueError("angle vector length must be a multiple of 3")
        return cls(tuple(TetShape(*v[i:i + 3]) for i in range(0, len(v), 3)))

    def vector(self) -> np.ndarray:
        return np.array([x for s in self.shapes for x in s.as_tuple()])

    def __len__(self) -> int:
        return len(self.shapes)

    def __getitem__(self, k: int) -> TetShape:
        return self.shapes[k]


@dataclass(frozen=True)
class Triangulation:
    tetrahedra: tuple[Tetrahedron, ...]
    edges: tuple[EdgeClass, ...]
    knot_edge: str | None = None
    name: str = ""
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        ids = [t.id for t in self.tetrahedra]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate tetrahedron ids")
        pos = {tid: k for k, tid in enumerate(ids)}
        for e in self.edges:
            for tid, slot in e.incidences:
                if tid not in pos:
                    raise ValueError(f"edge {e.id}: unknown tetrahedron {tid}")
                if slot not in SLOTS:
                    raise ValueError(f"edge {e.id}: bad slot {slot!r}")
        eids = [e.id for e in self.edges]
        if len(set(eids)) != len(eids):
            raise ValueError("duplicate edge ids")
        if self.knot_edge is not None and self.knot_edge not in eids:
            raise ValueError(f"knot edge {self.knot_edge!r} is not an edge")
        self._index.update(pos)

    @property
    def n_tets(self) -> int:
        return len(self.tetrahedra)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(t.sign for t in self.tetrahedra)

    def edge(self, eid: str) -> EdgeClass:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(f"unknown edge id {eid!r}")

    def coefficients(self, eid: str) -> np.ndarray:
        """Row of the weight matrix: weight(e)/2π = row · angle vector."""
        row = np.zeros(3 * self.n_tets)
        for tid, slot in self.edge(eid).incidences:
            row[3 * self._index[tid] + SLOTS.index(slot)] += 1.0
        return row

    def weight_matrix(self) -> np.ndarray:
        return np.array([self.coefficients(e.id) for e in self.edges])

    def linear_form(self, eid: str) -> str:
        """Human-readable weight/2π, e.g. 'a1+c1+a2+c2+a3'."""
        terms = []
        for tid, slot in sorted(self.edge(eid).incidences, key=lambda p: (self._index[p[0]], p[1])):
            terms.append(f"{slot.lower()}{tid}")
        return "+".join(terms)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "tets": [{"id": t.id, "sign": t.sign} for t in self.tetrahedra],
            "edges": [{"id": e.id, "incidences": [[tid, s] for tid, s in e.incidences]}
                      for e in self.edges],
            "knot_edge": self.knot_edge,
        }


def triangulation_from_json(doc: Mapping) -> Triangulation:
    try:
        tets = tuple(Tetrahedron(int(t["id"]), int(t["sign"])) for t in doc["tets"])
        edges = tuple(
            EdgeClass(str(e["id"]), tuple((int(tid), str(slot).upper()) for tid, slot in e["incidences"]))
            for e in doc["edges"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed triangulation document: {exc}") from exc
    return Triangulation(tets, edges, doc.get("knot_edge"), str(doc.get("name", "")))


def load_triangulation(path: str | Path) -> Triangulation:
    with open(path, encoding="utf-8") as fh:
        return triangulation_from_json(json.load(fh))


def _builtin(name: str) -> Triangulation:
    text = resources.files("tqft73.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return triangulation_from_json(json.loads(text))


def builtin_ideal_73() -> Triangulation:
    return _builtin("ideal73")


def builtin_h_73() -> Triangulation:
    return _builtin("h73")


BUILTINS: dict[str, Callable[[], Triangulation]] = {
    "ideal73": builtin_ideal_73,
    "h73": builtin_h_73,
}


def _check_len(t: Triangulation, alpha: ShapeStructure) -> None:
    if len(alpha) != t.n_tets:
        raise ValueError(f"shape structure has {len(alpha)} tetrahedra, triangulation has {t.n_tets}")


def weight(t: Triangulation, alpha: ShapeStructure, e: str) -> float:
    _check_len(t, alpha)
    return 2.0 * math.pi * float(t.coefficients(e) @ alpha.vector())


def weights(t: Triangulation, alpha: ShapeStructure) -> dict[str, float]:
    _check_len(t, alpha)
    w = 2.0 * math.pi * (t.weight_matrix() @ alpha.vector())
    return {e.id: float(x) for e, x in zip(t.edges, w)}


def is_angle_structure(t: Triangulation, alpha: ShapeStructure,
                       target: Mapping[str, float] | Callable[[str], float] | None = None,
                       extended: bool = False, tol: float = WEIGHT_TOL) -> bool:
    """True iff all edge weights hit their targets and all angles are admissible.

    ``target`` maps edge id to the required weight (default 2π everywhere).
    With ``extended`` angles may sit on the closed interval [0, 1/2].
    """
    if target is None:
        def tgt(_e):
            return 2.0 * math.pi
    elif callable(target):
        tgt = target
    else:
        tgt = target.__getitem__
    v = alpha.vector()
    if extended:
        if np.any(v < -tol) or np.any(v > 0.5 + tol):
            return False
    elif np.any(v <= 0.0) or np.any(v >= 0.5):
        return False
    return all(abs(w - tgt(e)) <= tol for e, w in weights(t, alpha).items())


def lambda_mu(alpha: ShapeStructure) -> tuple[float, float]:
    """Longitude/meridian angle invariants of an ideal 7₃ shape structure."""
    if len(alpha) != 5:
        raise ValueError("lambda_mu expects the 5-tetrahedron ideal 7_3 structure")
    a3, a4 = alpha[2].a, alpha[3].a
    c4, b5 = alpha[3].c, alpha[4].b
    lam = -2.0 * math.pi * (-c4 + b5 - 3.0 * a3 + 3.0 * a4)
    mu = a3 - a4
    return lam, mu


def reduced_balance_residual(alpha: ShapeStructure) -> np.ndarray:
    """Residuals of the reduced linear system equivalent to balancing the ideal 7₃."""
    (a1, b1, c1), (a2, b2, c2), (a3, b3, c3), (a4, b4, c4), (a5, b5, c5) = (
        s.as_tuple() for s in alpha.shapes)
    return np.array([
        b1 + b2 + a3 - a4 - c5,
        a2 - 2.0 * b1 - c1,
        a2 + b3 - c4 - b5,
        a3 - b1 - b2,
    ])


# a known interior angle structure of the ideal 7₃
NONEMPTY_POINT = ShapeStructure.from_vector([
    1 / 4, 1 / 8, 1 / 8,
    3 / 8, 1 / 16, 1 / 16,
    3 / 16, 1 / 8, 3 / 16,
    1 / 8, 1 / 16, 5 / 16,
    1 / 16, 3 / 16, 1 / 4,
])
