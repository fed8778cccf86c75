"""Forward and backward rule chaining over the knowledge base.

Each rule application calls the rule's differentiable formula, so a chain of
applications builds one connected computation graph from KB leaf strengths to
the final conclusion strength.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .atomspace import AtomSpace, TruthValue
from .autodiff import VarRef
from .pattern import (Binding, Query, instantiate, match, substitute, unify,
                      variables_in)


class ChainError(Exception):
    pass


@dataclass
class Rule:
    """Premise patterns, a conclusion template and a strength formula.

    ``formula`` maps a list of input VarRefs to the conclusion strength.
    ``strength_inputs`` assembles that list; the default takes the premise
    strengths in order, but a rule may add further inputs (e.g. term
    strengths looked up from the binding).
    """

    name: str
    variables: list[tuple[int, str | None]]
    premises: list[int]
    conclusion: int
    formula: Callable[[list[VarRef]], VarRef]
    strength_inputs: Callable[[AtomSpace, list[int], Binding], list[VarRef]] | None = None

    def inputs_for(self, kb: AtomSpace, ground_premises: list[int],
                   binding: Binding) -> list[VarRef]:
        if self.strength_inputs is not None:
            return self.strength_inputs(kb, ground_premises, binding)
        return [kb.get_tv(p).strength for p in ground_premises]


@dataclass
class Leaf:
    """Trace leaf: a KB atom contributing its stored strength."""

    atom: int
    strength: VarRef

    def leaves(self):
        yield self

    def replay(self, kb: AtomSpace, memo: dict) -> VarRef:
        self.strength = kb.get_tv(self.atom).strength
        return self.strength


@dataclass
class Derivation:
    """Trace node: one rule application over child traces."""

    rule: Rule
    binding: Binding
    conclusion: int
    strength: VarRef
    premises: list  # child traces (Leaf or Derivation)

    def leaves(self):
        for child in self.premises:
            yield from child.leaves()

    def replay(self, kb: AtomSpace, memo: dict) -> VarRef:
        """Re-evaluates the formula bottom-up against current KB strengths.

        ``memo`` collapses repeated applications with identical inputs within
        one re-trace (keyed by rule name and input record indices).
        """
        for child in self.premises:
            child.replay(kb, memo)
        ground = [_trace_atom(t) for t in self.premises]
        inputs = self.rule.inputs_for(kb, ground, self.binding)
        key = (self.rule.name, tuple(v.index for v in inputs))
        out = memo.get(key)
        if out is None:
            out = self.rule.formula(inputs)
            memo[key] = out
        self.strength = out
        kb.set_tv(self.conclusion, TruthValue(out, _combined_confidence(kb, ground)))
        return out


InferenceTrace = Leaf | Derivation


def _trace_atom(trace) -> int:
    return trace.atom if isinstance(trace, Leaf) else trace.conclusion


def _combined_confidence(kb: AtomSpace, premises: list[int]) -> float:
    # monotone non-increasing placeholder: min over premise confidences
    return min((kb.get_tv(p).confidence for p in premises), default=0.0)


@dataclass
class ChainConfig:
    max_steps: int = 100
    max_depth: int = 5
    seed: int = 0
    dedup: bool = True

    def __post_init__(self):
        if self.max_steps < 1:
            raise ChainError("max_steps must be >= 1")
        if self.max_depth < 1:
            raise ChainError("max_depth must be >= 1")


def apply_rule(kb: AtomSpace, rule: Rule, binding: Binding,
               premise_traces: list | None = None) -> tuple[int, VarRef, Derivation]:
    """Applies one grounded rule instance; interns and re-values the conclusion.

    The conclusion's strength is the live formula output VarRef, so gradients
    flow through it; confidence is the minimum over premise confidences.
    """
    ground = []
    for premise in rule.premises:
        missing = variables_in(kb, premise) - set(binding)
        if missing:
            names = sorted(kb.atom(v).name for v in missing)
            raise ChainError("binding does not ground premise variable(s): %s"
                             % ", ".join(names))
        ground.append(substitute(kb, premise, binding))
    inputs = rule.inputs_for(kb, ground, binding)
    out = rule.formula(inputs)
    conclusion = instantiate(kb, rule.conclusion, binding)
    kb.set_tv(conclusion, TruthValue(out, _combined_confidence(kb, ground)))
    if premise_traces is None:
        premise_traces = [Leaf(g, kb.get_tv(g).strength) for g in ground]
    trace = Derivation(rule, dict(binding), conclusion, out, premise_traces)
    return conclusion, out, trace


def _binding_key(binding: Binding) -> tuple:
    return tuple(sorted(binding.items()))


def forward_chain(kb: AtomSpace, rules: list[Rule],
                  config: ChainConfig) -> tuple[list[int], list[Derivation]]:
    """Applies rules premises-to-conclusions for up to max_steps steps.

    Each step gathers all applicable (rule, binding) pairs, shuffles them with
    the seeded RNG and applies the first one; with dedup a pair fires at most
    once.  Returns the atoms that did not exist before chaining, with traces.
    """
    if not rules:
        raise ChainError("forward_chain needs a nonempty rule list")
    rng = random.Random(config.seed)
    applied: set[tuple] = set()
    new_atoms: list[int] = []
    traces: list[Derivation] = []
    size_before = len(kb)

    for _ in range(config.max_steps):
        candidates = []
        for ri, rule in enumerate(rules):
            query = Query(variables=list(rule.variables), clauses=list(rule.premises))
            for binding in match(kb, query):
                key = (rule.name, _binding_key(binding))
                if config.dedup and key in applied:
                    continue
                candidates.append((ri, binding, key))
        if not candidates:
            break
        rng.shuffle(candidates)
        ri, binding, key = candidates[0]
        applied.add(key)
        mark = len(kb)
        conclusion, _, trace = apply_rule(kb, rules[ri], binding)
        if conclusion >= mark and conclusion >= size_before:
            new_atoms.append(conclusion)
            traces.append(trace)
    return new_atoms, traces


# -- backward chaining -----------------------------------------------------

def _match_conclusion(kb: AtomSpace, conclusion: int, target: int):
    """Unifies a rule conclusion pattern against a (possibly variable-bearing)
    target pattern.

    Returns (rule_binding, aliases) or None, where aliases maps each target
    variable to the conclusion subtree it must equal once the rule binding is
    complete.
    """
    rb: Binding = {}
    aliases: dict[int, int] = {}

    def walk(c: int, t: int) -> bool:
        ca = kb.atom(c)
        ta = kb.atom(t)
        if ta.type.name == "VariableNode":
            if t in aliases and aliases[t] != c:
                return False  # duplicate target variable over different subtrees
            aliases[t] = c
            return True
        if ca.type.name == "VariableNode":
            if not ta.is_ground:
                return False  # rule variable against a partial pattern
            bound = rb.get(c)
            if bound is not None:
                return bound == t
            rb[c] = t
            return True
        if ca.type.name != ta.type.name:
            return False
        if ca.type.is_node:
            return ca.name == ta.name
        if len(ca.outgoing) != len(ta.outgoing):
            return False
        return all(walk(co, to) for co, to in zip(ca.outgoing, ta.outgoing))

    if walk(conclusion, target):
        return rb, aliases
    return None


def backward_chain(kb: AtomSpace, rules: list[Rule], target: int,
                   config: ChainConfig) -> list[tuple[Binding, VarRef, InferenceTrace]]:
    """All ways the target is derivable within max_depth.

    Depth 0 covers targets directly asserted in the KB; deeper results apply a
    rule whose conclusion unifies with the target and whose premises are
    recursively derivable.  Results are deterministic: KB facts first, then
    rules in the given order.
    """
    constraints: dict[int, str] = {}
    memo: dict[tuple[int, int], list] = {}
    # snapshot: conclusions derived during this search must not feed back in
    # as depth-0 facts, so leaves always predate the call
    initial_facts = frozenset(a for a in range(len(kb)) if kb.has_asserted_tv(a))

    def solve(pattern: int, depth: int) -> list[tuple[Binding, InferenceTrace]]:
        patom = kb.atom(pattern)
        key = (pattern, depth) if patom.is_ground else None
        if key is not None and key in memo:
            return memo[key]
        results: list[tuple[Binding, InferenceTrace]] = []
        # depth 0: asserted KB facts matching the pattern
        if patom.is_ground:
            if pattern in initial_facts:
                results.append(({}, Leaf(pattern, kb.get_tv(pattern).strength)))
        else:
            for cand in _fact_candidates(pattern):
                b = unify(kb, pattern, cand, None, constraints)
                if b is not None:
                    results.append((b, Leaf(cand, kb.get_tv(cand).strength)))
        if depth >= 1:
            for rule in rules:
                hit = _match_conclusion(kb, rule.conclusion, pattern)
                if hit is None:
                    continue
                rb, aliases = hit
                rule_constraints = {v: t for v, t in rule.variables if t is not None}
                for full_rb, child_traces in _solve_premises(rule, rb, depth - 1):
                    if any(kb.type_of(full_rb[v]) != t
                           for v, t in rule_constraints.items() if v in full_rb):
                        continue
                    ground = [substitute(kb, p, full_rb) for p in rule.premises]
                    premise_traces = list(child_traces)
                    _, out, trace = apply_rule(kb, rule, full_rb, premise_traces)
                    tbind: Binding = {}
                    ok = True
                    for tvar, subtree in aliases.items():
                        resolved = substitute(kb, subtree, full_rb)
                        if not kb.atom(resolved).is_ground:
                            ok = False
                            break
                        if tvar in tbind and tbind[tvar] != resolved:
                            ok = False
                            break
                        tbind[tvar] = resolved
                    if ok:
                        results.append((tbind, trace))
        if key is not None:
            memo[key] = results
        return results

    def _fact_candidates(pattern: int) -> list[int]:
        patom = kb.atom(pattern)
        if patom.type.name == "VariableNode":
            pool = range(len(kb))
        else:
            pool = kb.atoms_of_type(patom.type.name)
        return [a for a in pool
                if a in initial_facts and kb.atom(a).is_ground]

    def _solve_premises(rule: Rule, rb: Binding, depth: int):
        """Grounds all premises recursively; yields (binding, traces)."""
        solutions = [(dict(rb), [])]
        for premise in rule.premises:
            next_solutions = []
            for binding, traces in solutions:
                p = substitute(kb, premise, binding)
                for sub_binding, trace in solve(p, depth):
                    merged = dict(binding)
                    conflict = False
                    for var, atom in sub_binding.items():
                        if merged.get(var, atom) != atom:
                            conflict = True
                            break
                        merged[var] = atom
                    if not conflict:
                        next_solutions.append((merged, traces + [trace]))
            solutions = next_solutions
            if not solutions:
                break
        return solutions

    out: list[tuple[Binding, VarRef, InferenceTrace]] = []
    for binding, trace in solve(target, config.max_depth):
        out.append((binding, trace.strength, trace))
    return out
