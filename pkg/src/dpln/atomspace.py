"""Interned hypergraph knowledge base.

Atoms are nodes (type + name) or links (type + ordered outgoing atoms) and
are interned: re-inserting an existing key returns the same integer id.
Truth-value strengths are VarRefs on an autodiff tape, so every strength read
by a rule formula participates in the computation graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .autodiff import Tape, VarRef

NODE = "node"
LINK = "link"

BUILTIN_TYPES = {
    "ConceptNode": NODE,
    "PredicateNode": NODE,
    "NumberNode": NODE,
    "VariableNode": NODE,
    "TypeNode": NODE,
    "InheritanceLink": LINK,
    "ImplicationLink": LINK,
    "EvaluationLink": LINK,
    "AndLink": LINK,
    "OrLink": LINK,
    "NotLink": LINK,
    "ListLink": LINK,
    "LambdaLink": LINK,
    "VariableList": LINK,
    "TypedVariableLink": LINK,
    "BindLink": LINK,
}


class AtomSpaceError(Exception):
    pass


class UnknownTypeError(AtomSpaceError):
    pass


class UnknownAtomError(AtomSpaceError):
    pass


@dataclass(frozen=True)
class AtomType:
    name: str
    kind: str  # NODE or LINK

    @property
    def is_node(self) -> bool:
        return self.kind == NODE


class TypeRegistry:
    """Atom type registry; extensible until frozen (first intern freezes it)."""

    def __init__(self):
        self._types: dict[str, AtomType] = {
            name: AtomType(name, kind) for name, kind in BUILTIN_TYPES.items()
        }
        self._frozen = False

    def add(self, name: str, kind: str) -> AtomType:
        if self._frozen:
            raise AtomSpaceError("type registry is frozen")
        if name in self._types:
            raise AtomSpaceError("type %r already registered" % name)
        if kind not in (NODE, LINK):
            raise AtomSpaceError("kind must be %r or %r" % (NODE, LINK))
        t = AtomType(name, kind)
        self._types[name] = t
        return t

    def get(self, name: str) -> AtomType:
        try:
            return self._types[name]
        except KeyError:
            raise UnknownTypeError("unknown atom type %r" % name) from None

    def freeze(self) -> None:
        self._frozen = True

    def __contains__(self, name: str) -> bool:
        return name in self._types


@dataclass
class Atom:
    id: int
    type: AtomType
    name: str | None = None          # node kinds only
    outgoing: tuple[int, ...] = ()   # link kinds only
    is_ground: bool = True           # False iff a VariableNode occurs below


@dataclass
class TruthValue:
    """Strength is a live VarRef; confidence is a plain static scalar."""

    strength: VarRef
    confidence: float = 0.0

    def __post_init__(self):
        v = self.strength.value
        if not -1e-9 <= v <= 1.0 + 1e-9:
            raise AtomSpaceError("strength %g outside [0, 1]" % v)
        if not 0.0 <= self.confidence <= 1.0:
            raise AtomSpaceError("confidence %g outside [0, 1]" % self.confidence)


DEFAULT_STRENGTH = 1.0
DEFAULT_CONFIDENCE = 0.0


class AtomSpace:
    """The interned store with incoming-set and by-type indexes.

    Fresh atoms carry the default truth value (1.0, 0.0): asserted but
    unevidenced.  ``set_tv`` marks an atom as explicitly asserted, which the
    backward chainer uses to distinguish stated facts from atoms interned as
    query patterns or templates.
    """

    def __init__(self, tape: Tape, registry: TypeRegistry | None = None):
        self.tape = tape
        self.registry = registry or TypeRegistry()
        self._atoms: list[Atom] = []
        self._node_index: dict[tuple[str, str], int] = {}
        self._link_index: dict[tuple[str, tuple[int, ...]], int] = {}
        self._incoming: dict[int, list[int]] = {}
        self._by_type: dict[str, list[int]] = {}
        self._tvs: dict[int, TruthValue] = {}
        self._asserted: set[int] = set()

    def __len__(self) -> int:
        return len(self._atoms)

    # -- interning --------------------------------------------------------

    def intern_node(self, type_name: str, name: str) -> int:
        t = self.registry.get(type_name)
        if not t.is_node:
            raise AtomSpaceError("%s is a link kind, not a node kind" % type_name)
        self.registry.freeze()
        key = (type_name, name)
        existing = self._node_index.get(key)
        if existing is not None:
            return existing
        atom = Atom(len(self._atoms), t, name=name,
                    is_ground=(type_name != "VariableNode"))
        self._atoms.append(atom)
        self._node_index[key] = atom.id
        self._by_type.setdefault(type_name, []).append(atom.id)
        self._incoming[atom.id] = []
        return atom.id

    def intern_link(self, type_name: str, outgoing: list[int]) -> int:
        t = self.registry.get(type_name)
        if t.is_node:
            raise AtomSpaceError("%s is a node kind, not a link kind" % type_name)
        self.registry.freeze()
        out = tuple(outgoing)
        for oid in out:
            self._check_id(oid)
        # Acyclicity holds by construction: outgoing ids must already exist,
        # and ids are assigned in insertion order, so a link's id is strictly
        # greater than everything it (transitively) contains.
        key = (type_name, out)
        existing = self._link_index.get(key)
        if existing is not None:
            return existing
        ground = all(self._atoms[oid].is_ground for oid in out)
        atom = Atom(len(self._atoms), t, outgoing=out, is_ground=ground)
        self._atoms.append(atom)
        self._link_index[key] = atom.id
        self._by_type.setdefault(type_name, []).append(atom.id)
        self._incoming[atom.id] = []
        for oid in set(out):
            self._incoming[oid].append(atom.id)
        return atom.id

    def find_node(self, type_name: str, name: str) -> int | None:
        return self._node_index.get((type_name, name))

    def find_link(self, type_name: str, outgoing: list[int]) -> int | None:
        return self._link_index.get((type_name, tuple(outgoing)))

    # -- access -----------------------------------------------------------

    def _check_id(self, atom_id: int) -> None:
        if not isinstance(atom_id, int) or not 0 <= atom_id < len(self._atoms):
            raise UnknownAtomError("unknown atom id %r" % (atom_id,))

    def atom(self, atom_id: int) -> Atom:
        self._check_id(atom_id)
        return self._atoms[atom_id]

    def type_of(self, atom_id: int) -> str:
        return self.atom(atom_id).type.name

    def incoming(self, atom_id: int) -> list[int]:
        self._check_id(atom_id)
        return list(self._incoming[atom_id])

    def atoms_of_type(self, type_name: str) -> list[int]:
        self.registry.get(type_name)
        return list(self._by_type.get(type_name, []))

    # -- truth values -----------------------------------------------------

    def set_tv(self, atom_id: int, tv: TruthValue) -> None:
        self._check_id(atom_id)
        self._tvs[atom_id] = tv
        self._asserted.add(atom_id)

    def get_tv(self, atom_id: int) -> TruthValue:
        self._check_id(atom_id)
        tv = self._tvs.get(atom_id)
        if tv is None:
            tv = TruthValue(self.tape.constant(DEFAULT_STRENGTH), DEFAULT_CONFIDENCE)
            self._tvs[atom_id] = tv
        return tv

    def has_asserted_tv(self, atom_id: int) -> bool:
        self._check_id(atom_id)
        return atom_id in self._asserted

    # -- convenience constructors -----------------------------------------

    def node(self, type_name: str, name: str) -> int:
        return self.intern_node(type_name, name)

    def link(self, type_name: str, *outgoing: int) -> int:
        return self.intern_link(type_name, list(outgoing))
