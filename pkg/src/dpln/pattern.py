"""Pattern matching: find all groundings of variable-bearing query graphs.

Variables are VariableNodes identified by name; a Binding maps variable atom
ids to ground atom ids.  Candidate links for a clause come from the by-type
index, narrowed through the incoming set of any ground argument (a pure
filter, so result order still follows insertion order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .atomspace import AtomSpace

Binding = dict  # variable atom id -> ground atom id


class MatchError(Exception):
    pass


@dataclass
class Query:
    """Declared variables (with optional type constraints) plus clauses."""

    variables: list[tuple[int, str | None]]  # (VariableNode id, type name or None)
    clauses: list[int]

    def constraint_map(self) -> dict[int, str]:
        return {v: t for v, t in self.variables if t is not None}

    def declared(self) -> set[int]:
        return {v for v, _ in self.variables}


def variables_in(kb: AtomSpace, atom_id: int) -> set[int]:
    """All VariableNode ids occurring in the atom."""
    atom = kb.atom(atom_id)
    if atom.is_ground:
        return set()
    if atom.type.name == "VariableNode":
        return {atom_id}
    out: set[int] = set()
    for oid in atom.outgoing:
        out |= variables_in(kb, oid)
    return out


def unify(kb: AtomSpace, pattern: int, ground: int,
          binding: Binding | None = None,
          constraints: dict[int, str] | None = None) -> Binding | None:
    """Extends ``binding`` so the pattern matches the ground atom, or None.

    The ground side must not contain variables; the input binding is never
    mutated.  A variable with a type constraint only binds atoms of exactly
    that type.
    """
    if not kb.atom(ground).is_ground:
        return None
    result = dict(binding) if binding else {}
    if _unify_into(kb, pattern, ground, result, constraints or {}):
        return result
    return None


def _unify_into(kb, pattern, ground, binding, constraints) -> bool:
    p = kb.atom(pattern)
    if p.type.name == "VariableNode":
        bound = binding.get(pattern)
        if bound is not None:
            return bound == ground
        want = constraints.get(pattern)
        if want is not None and kb.type_of(ground) != want:
            return False
        binding[pattern] = ground
        return True
    g = kb.atom(ground)
    if p.type.name != g.type.name:
        return False
    if p.type.is_node:
        return p.name == g.name
    if len(p.outgoing) != len(g.outgoing):
        return False
    for po, go in zip(p.outgoing, g.outgoing):
        if not _unify_into(kb, po, go, binding, constraints):
            return False
    return True


def _candidates(kb: AtomSpace, clause: int, binding: Binding) -> list[int]:
    """Ground candidate atoms for one clause under a partial binding."""
    c = kb.atom(clause)
    if c.type.name == "VariableNode":
        bound = binding.get(clause)
        if bound is not None:
            return [bound]
        return [a for a in range(len(kb)) if kb.atom(a).is_ground]
    if c.type.is_node:
        found = kb.find_node(c.type.name, c.name)
        return [found] if found is not None else []
    if c.is_ground:
        found = kb.find_link(c.type.name, list(c.outgoing))
        return [found] if found is not None else []
    # narrow through the incoming set of a ground (or bound) argument
    anchor = None
    for oid in c.outgoing:
        sub = kb.atom(oid)
        if sub.is_ground:
            anchor = oid
            break
        if sub.type.name == "VariableNode" and oid in binding:
            anchor = binding[oid]
            break
    if anchor is not None and kb.atom(anchor).is_ground:
        pool = kb.incoming(anchor)
    else:
        pool = kb.atoms_of_type(c.type.name)
    return [a for a in pool
            if kb.atom(a).is_ground and kb.type_of(a) == c.type.name]


def match(kb: AtomSpace, query: Query) -> list[Binding]:
    """All bindings under which every clause is an atom present in the KB.

    Clauses are processed in the given order; results are deduplicated and
    come out in candidate insertion order (deterministic).
    """
    if not query.clauses:
        raise MatchError("query has no clauses")
    declared = query.declared()
    for clause in query.clauses:
        undeclared = variables_in(kb, clause) - declared
        if undeclared:
            names = sorted(kb.atom(v).name for v in undeclared)
            raise MatchError("undeclared variable(s) in clause: %s" % ", ".join(names))
    constraints = query.constraint_map()

    results: list[Binding] = []
    seen: set[tuple] = set()

    def extend(ci: int, binding: Binding) -> None:
        if ci == len(query.clauses):
            key = tuple(sorted(binding.items()))
            if key not in seen:
                seen.add(key)
                results.append(dict(binding))
            return
        clause = query.clauses[ci]
        for cand in _candidates(kb, clause, binding):
            nb = unify(kb, clause, cand, binding, constraints)
            if nb is not None:
                extend(ci + 1, nb)

    extend(0, {})
    return results


def substitute(kb: AtomSpace, template: int, binding: Binding) -> int:
    """Replaces bound variables in the template; unbound ones stay in place."""
    atom = kb.atom(template)
    if atom.type.name == "VariableNode":
        return binding.get(template, template)
    if atom.type.is_node or atom.is_ground:
        return template
    new_out = [substitute(kb, oid, binding) for oid in atom.outgoing]
    if list(atom.outgoing) == new_out:
        return template
    return kb.intern_link(atom.type.name, new_out)


def instantiate(kb: AtomSpace, template: int, binding: Binding) -> int:
    """Interns the template with every variable substituted; errors if any
    variable is left unbound."""
    unbound = variables_in(kb, template) - set(binding)
    if unbound:
        names = sorted(kb.atom(v).name for v in unbound)
        raise MatchError("unbound variable(s): %s" % ", ".join(names))
    return substitute(kb, template, binding)


def query_from_bindlink(kb: AtomSpace, bindlink: int) -> tuple[Query, int | None]:
    """Converts a BindLink atom into (Query, optional implicand template).

    Layout: (BindLink [VariableList] pattern [implicand]) where the pattern
    is an AndLink of clauses or a single clause.
    """
    atom = kb.atom(bindlink)
    if atom.type.name != "BindLink":
        raise MatchError("expected a BindLink")
    parts = list(atom.outgoing)
    variables: list[tuple[int, str | None]] = []
    if parts and kb.type_of(parts[0]) == "VariableList":
        for decl in kb.atom(parts[0]).outgoing:
            d = kb.atom(decl)
            if d.type.name == "VariableNode":
                variables.append((decl, None))
            elif d.type.name == "TypedVariableLink" and len(d.outgoing) == 2:
                var, tnode = d.outgoing
                variables.append((var, kb.atom(tnode).name))
            else:
                raise MatchError("bad variable declaration in VariableList")
        parts = parts[1:]
    if not parts:
        raise MatchError("BindLink has no pattern")
    pattern = parts[0]
    implicand = parts[1] if len(parts) > 1 else None
    if kb.type_of(pattern) == "AndLink":
        clauses = list(kb.atom(pattern).outgoing)
    else:
        clauses = [pattern]
    if not variables:
        seen: set[int] = set()
        ordered: list[int] = []
        for clause in clauses:
            for v in sorted(variables_in(kb, clause)):
                if v not in seen:
                    seen.add(v)
                    ordered.append(v)
        variables = [(v, None) for v in ordered]
    return Query(variables=variables, clauses=clauses), implicand
