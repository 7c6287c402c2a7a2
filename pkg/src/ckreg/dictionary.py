"""Basis dictionaries: ordered families of functions R^p -> R.

Every basis function is a product of per-coordinate atoms (constant,
scaled polynomial, raw monomial, trigonometric, indicator), which covers
the 1D 12-function family, the twelve 2D tensor families and user
compositions, and makes coordinate derivatives and JSON serialization
mechanical.

Polynomial atoms are p_i(x) = (2(x - 0.5))^i, which maps [0, 1] onto
[-1, 1] so every feature is bounded by 1 on the unit box.  Trigonometric
atoms are cos(2 i pi x) and sin(2 i pi x).  Indicator atoms 1{x <= c}
are differentiable away from the threshold.

Coordinates are 1-based in the public API (coord=1 differentiates with
respect to the first component of z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ArgumentError, NonDifferentiablePointError

__all__ = [
    "Atom",
    "Term",
    "Dictionary",
    "build_family_1d",
    "build_family_2d",
    "constant_dictionary",
    "evaluate",
    "evaluate_derivative",
    "design_matrix",
    "with_input_box",
    "to_descriptor",
    "from_descriptor",
]

DESCRIPTOR_SCHEMA = "ckreg.dictionary/1"


@dataclass(frozen=True)
class Atom:
    """One per-coordinate factor of a basis function."""

    kind: str  # const | poly | mono | cos | sin | indicator
    coord: int  # 1-based coordinate index
    param: float = 0.0  # degree, frequency, or threshold

    def label(self, input_dim: int) -> str:
        suffix = f"_z{self.coord}" if input_dim > 1 else ""
        if self.kind == "const":
            return "const"
        if self.kind == "poly":
            return f"p{int(self.param)}{suffix}"
        if self.kind == "mono":
            return f"x{int(self.param)}{suffix}"
        if self.kind in ("cos", "sin"):
            return f"{self.kind}{int(self.param)}{suffix}"
        return f"ind{self.param:g}{suffix}"

    def values(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "const":
            return np.ones_like(x)
        if self.kind == "poly":
            return (2.0 * (x - 0.5)) ** int(self.param)
        if self.kind == "mono":
            return x ** int(self.param)
        if self.kind == "cos":
            return np.cos(2.0 * self.param * np.pi * x)
        if self.kind == "sin":
            return np.sin(2.0 * self.param * np.pi * x)
        return (x <= self.param).astype(float)

    def deriv(self, x: float) -> float:
        if self.kind == "const":
            return 0.0
        if self.kind == "poly":
            i = int(self.param)
            return 0.0 if i == 0 else 2.0 * i * (2.0 * (x - 0.5)) ** (i - 1)
        if self.kind == "mono":
            i = int(self.param)
            return 0.0 if i == 0 else float(i) * x ** (i - 1)
        if self.kind == "cos":
            w = 2.0 * self.param * np.pi
            return -w * np.sin(w * x)
        if self.kind == "sin":
            w = 2.0 * self.param * np.pi
            return w * np.cos(w * x)
        if x == self.param:
            raise NonDifferentiablePointError(self.label(2), x)
        return 0.0


@dataclass(frozen=True)
class Term:
    """A basis function: scaled product of atoms on distinct coordinates."""

    atoms: tuple[Atom, ...]
    name: str = ""
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.coefficient) and self.coefficient != 0.0):
            raise ArgumentError("term coefficient must be finite and nonzero")

    def values(self, points: np.ndarray) -> np.ndarray:
        out = np.full(points.shape[0], self.coefficient)
        for a in self.atoms:
            if a.kind != "const":
                out = out * a.values(points[:, a.coord - 1])
        return out

    def deriv(self, z: np.ndarray, coord: int) -> float:
        total = 0.0
        for k, a in enumerate(self.atoms):
            if a.coord != coord or a.kind == "const":
                continue
            part = a.deriv(float(z[coord - 1]))
            for m, b in enumerate(self.atoms):
                if m != k and b.kind != "const":
                    part *= float(b.values(np.array([z[b.coord - 1]]))[0])
            total += part
        return self.coefficient * total


@dataclass(frozen=True)
class Dictionary:
    """Ordered, named family of basis functions on R^p.

    input_box, when set, affinely rescales inputs coordinate-wise from
    [lo, hi] to [0, 1] before the atoms are evaluated (for data whose
    covariate does not already live in the unit box).
    """

    name: str
    input_dim: int
    terms: tuple[Term, ...]
    builder: dict = field(default_factory=dict)
    input_box: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise ArgumentError("basis names must be unique")
        if self.input_box is not None:
            lo, hi = self.input_box
            if len(lo) != self.input_dim or len(hi) != self.input_dim:
                raise ArgumentError("input_box dimension mismatch")
            if any(h <= l for l, h in zip(lo, hi)):
                raise ArgumentError("input_box must have hi > lo")

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    @property
    def constant_index(self) -> int | None:
        """Index of the constant basis function, if present."""
        for j, t in enumerate(self.terms):
            if all(a.kind == "const" for a in t.atoms):
                return j
        return None

    def _rescale(self, points: np.ndarray) -> np.ndarray:
        if self.input_box is None:
            return points
        lo = np.asarray(self.input_box[0])
        hi = np.asarray(self.input_box[1])
        return (points - lo) / (hi - lo)


def _as_points(z, p: int) -> np.ndarray:
    pts = np.asarray(z, dtype=float)
    if pts.ndim == 1:
        if p == 1:
            pts = pts[:, None]
        else:
            pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != p:
        raise ArgumentError(f"points must have dimension {p}")
    return pts


def evaluate(dictionary: Dictionary, z) -> np.ndarray:
    """Evaluate all basis functions at a single point z; returns length p'."""
    q = np.atleast_1d(np.asarray(z, dtype=float))
    if q.shape != (dictionary.input_dim,):
        raise ArgumentError(
            f"point has shape {q.shape}, expected ({dictionary.input_dim},)"
        )
    return design_matrix(dictionary, q[None, :])[0]


def design_matrix(dictionary: Dictionary, points) -> np.ndarray:
    """Rows are evaluate(dictionary, z) for each query point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, dictionary.size))
    pts = _as_points(pts, dictionary.input_dim)
    pts = dictionary._rescale(pts)
    cols = [t.values(pts) for t in dictionary.terms]
    return np.column_stack(cols)


def evaluate_derivative(dictionary: Dictionary, z, coord: int) -> np.ndarray:
    """Partial derivatives of every basis function with respect to z_coord.

    coord is 1-based.  Raises at indicator thresholds.
    """
    q = np.atleast_1d(np.asarray(z, dtype=float))
    if q.shape != (dictionary.input_dim,):
        raise ArgumentError(
            f"point has shape {q.shape}, expected ({dictionary.input_dim},)"
        )
    if not 1 <= coord <= dictionary.input_dim:
        raise ArgumentError(f"coord must be in 1..{dictionary.input_dim}")
    scale = 1.0
    if dictionary.input_box is not None:
        lo, hi = dictionary.input_box
        scale = 1.0 / (hi[coord - 1] - lo[coord - 1])
        q = dictionary._rescale(q[None, :])[0]
    return np.array([t.deriv(q, coord) * scale for t in dictionary.terms])


def constant_dictionary(input_dim: int = 1) -> Dictionary:
    """The one-function dictionary {1}."""
    term = Term(atoms=(Atom("const", 1),), name="const")
    return Dictionary("constant", input_dim, (term,), builder={"kind": "constant", "input_dim": input_dim})


def _named(atoms: tuple[Atom, ...], input_dim: int) -> Term:
    live = [a for a in atoms if a.kind != "const"]
    if not live:
        return Term(atoms=(Atom("const", 1),), name="const")
    name = "*".join(a.label(input_dim) for a in live)
    return Term(atoms=tuple(live), name=name)


def build_family_1d() -> Dictionary:
    """The 12-function 1D family: constant, scaled polynomials of degree
    1..5, cos/sin at frequencies 1 and 2, and indicators at 0.4, 0.6."""
    terms = [Term(atoms=(Atom("const", 1),), name="const")]
    for i in range(1, 6):
        terms.append(_named((Atom("poly", 1, i),), 1))
    for i in (1, 2):
        terms.append(_named((Atom("cos", 1, i),), 1))
        terms.append(_named((Atom("sin", 1, i),), 1))
    # order: const, p1..p5, cos1, sin1, cos2, sin2, ind0.4, ind0.6
    terms = terms[:6] + [terms[6], terms[7], terms[8], terms[9]]
    terms.append(_named((Atom("indicator", 1, 0.4),), 1))
    terms.append(_named((Atom("indicator", 1, 0.6),), 1))
    return Dictionary("family_1d", 1, tuple(terms), builder={"kind": "family_1d"})


def _poly_atoms(i: int, coord: int) -> tuple[Atom, ...]:
    return () if i == 0 else (Atom("poly", coord, i),)


def _trig_atoms(i: int, coord: int) -> list[tuple[Atom, ...]]:
    if i == 0:
        return [()]
    return [(Atom("cos", coord, i),), (Atom("sin", coord, i),)]


_MIN_CAP = {1: 0, 2: 1, 3: 2, 4: 5}


def _poly_terms_2d(min_cap: int) -> list[Term]:
    out = []
    for i, j in product(range(6), range(6)):
        if min(i, j) > min_cap:
            continue
        atoms = _poly_atoms(i, 1) + _poly_atoms(j, 2)
        out.append(_named(atoms if atoms else (Atom("const", 1),), 2))
    return out


def _trig_terms_2d(min_cap: int) -> list[Term]:
    out = []
    for i, j in product(range(6), range(6)):
        if min(i, j) > min_cap:
            continue
        for left, right in product(_trig_atoms(i, 1), _trig_atoms(j, 2)):
            atoms = left + right
            out.append(_named(atoms if atoms else (Atom("const", 1),), 2))
    return out


def build_family_2d(family_id: int) -> Dictionary:
    """The twelve 2D tensor families.

    1-4: polynomial tensor products with min-degree caps 0/1/2/5
         (sizes 11, 20, 27, 36);
    5-8: trigonometric tensor products with the same caps
         (sizes 21, 57, 85, 121);
    9-12: unions of the matching polynomial and trigonometric families
          with the constant counted once (sizes 31, 76, 111, 156).
    """
    if family_id not in range(1, 13):
        raise ArgumentError("family id must be in 1..12")
    if family_id <= 4:
        terms = _poly_terms_2d(_MIN_CAP[family_id])
    elif family_id <= 8:
        terms = _trig_terms_2d(_MIN_CAP[family_id - 4])
    else:
        poly = _poly_terms_2d(_MIN_CAP[family_id - 8])
        trig = _trig_terms_2d(_MIN_CAP[family_id - 8])
        terms = poly + [t for t in trig if t.name != "const"]
    return Dictionary(
        f"family_2d_{family_id}", 2, tuple(terms),
        builder={"kind": "family_2d", "id": family_id},
    )


def with_input_box(dictionary: Dictionary, lo, hi) -> Dictionary:
    """Copy of the dictionary that rescales inputs from [lo, hi] to [0, 1]."""
    lo_t = tuple(float(v) for v in np.atleast_1d(lo))
    hi_t = tuple(float(v) for v in np.atleast_1d(hi))
    return Dictionary(
        dictionary.name, dictionary.input_dim, dictionary.terms,
        builder=dictionary.builder, input_box=(lo_t, hi_t),
    )


def to_descriptor(dictionary: Dictionary) -> dict:
    """JSON-ready description; always carries the explicit term list."""
    return {
        "schema": DESCRIPTOR_SCHEMA,
        "name": dictionary.name,
        "input_dim": dictionary.input_dim,
        "builder": dict(dictionary.builder) if dictionary.builder else {"kind": "terms"},
        "input_box": None
        if dictionary.input_box is None
        else {"lo": list(dictionary.input_box[0]), "hi": list(dictionary.input_box[1])},
        "terms": [
            {
                "name": t.name,
                "coefficient": t.coefficient,
                "atoms": [
                    {"kind": a.kind, "coord": a.coord, "param": a.param} for a in t.atoms
                ],
            }
            for t in dictionary.terms
        ],
    }


def from_descriptor(descriptor: dict) -> Dictionary:
    """Rebuild a Dictionary from to_descriptor output.

    An explicit "terms" list is authoritative (the builder tag is kept as
    metadata only); builder-only descriptors rebuild the named family.
    """
    if descriptor.get("schema") != DESCRIPTOR_SCHEMA:
        raise ArgumentError("unknown dictionary descriptor schema")
    builder = descriptor.get("builder") or {"kind": "terms"}
    kind = builder.get("kind")
    if "terms" in descriptor:
        terms = tuple(
            Term(
                atoms=tuple(
                    Atom(a["kind"], int(a["coord"]), float(a["param"]))
                    for a in t["atoms"]
                ),
                name=t["name"],
                coefficient=float(t.get("coefficient", 1.0)),
            )
            for t in descriptor["terms"]
        )
        d = Dictionary(
            descriptor["name"], int(descriptor["input_dim"]), terms,
            builder=dict(builder),
        )
    elif kind == "family_1d":
        d = build_family_1d()
    elif kind == "family_2d":
        d = build_family_2d(int(builder["id"]))
    elif kind == "constant":
        d = constant_dictionary(int(builder.get("input_dim", 1)))
    else:
        raise ArgumentError("descriptor lacks terms and names no known family")
    box = descriptor.get("input_box")
    if box is not None:
        d = with_input_box(d, box["lo"], box["hi"])
    return d
