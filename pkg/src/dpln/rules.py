"""Differentiable strength formulas and the concrete rule set.

All formulas are built from tape primitives, map [0,1] inputs into [0,1]
outputs, and stay smooth so gradient checks pass everywhere away from the
deduction clamp boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .atomspace import AtomSpace
from .autodiff import Tape, VarRef
from .chainer import Rule
from .pattern import Binding

DEDUCTION_EPS = 1e-6
DEFAULT_NEG_CONDITIONAL = 0.2

_RANGE_TOL = 1e-9


class FormulaError(Exception):
    pass


def _check_unit(name: str, *refs: VarRef) -> None:
    for r in refs:
        v = r.value
        if not -_RANGE_TOL <= v <= 1.0 + _RANGE_TOL:
            raise FormulaError("%s input %g outside [0, 1]" % (name, v))


def modus_ponens_strength(p_a: VarRef, p_b_given_a: VarRef,
                          p_b_given_not_a: VarRef) -> VarRef:
    """P(B) = P(B|A)*P(A) + P(B|not A)*(1 - P(A)); a convex combination."""
    _check_unit("modus_ponens", p_a, p_b_given_a, p_b_given_not_a)
    t = p_a.tape
    return t.add(t.mul(p_b_given_a, p_a),
                 t.mul(p_b_given_not_a, t.one_minus(p_a)))


def deduction_strength(s_ab: VarRef, s_bc: VarRef,
                       s_b: VarRef, s_c: VarRef) -> VarRef:
    """Independence-based transitive strength:

        s_ab*s_bc + (1 - s_ab)*(s_c - s_b*s_bc)/(1 - s_b)

    with the conditional term clamped into [0,1] and a fallback to s_c when
    s_b saturates (1 - s_b below epsilon), keeping gradients finite.
    """
    _check_unit("deduction", s_ab, s_bc, s_b, s_c)
    t = s_ab.tape
    if s_b.value >= 1.0 - DEDUCTION_EPS:
        return s_c
    cond = t.div(t.sub(s_c, t.mul(s_b, s_bc)), t.one_minus(s_b))
    cond = t.clamp01(cond)
    out = t.add(t.mul(s_ab, s_bc), t.mul(t.one_minus(s_ab), cond))
    return t.clamp01(out)


def fuzzy_and(a: VarRef, b: VarRef) -> VarRef:
    """Product conjunction."""
    _check_unit("fuzzy_and", a, b)
    return a.tape.mul(a, b)


def fuzzy_or(a: VarRef, b: VarRef) -> VarRef:
    """Probabilistic sum: a + b - a*b."""
    _check_unit("fuzzy_or", a, b)
    t = a.tape
    return t.sub(t.add(a, b), t.mul(a, b))


def fuzzy_not(a: VarRef) -> VarRef:
    """Complement: 1 - a."""
    _check_unit("fuzzy_not", a)
    return a.tape.one_minus(a)


@dataclass
class FormulaWeights:
    """Four trainable weights of the sigmoid-linear modus ponens family."""

    w0: VarRef
    w1: VarRef
    w2: VarRef
    w3: VarRef

    @classmethod
    def create(cls, tape: Tape, init: float = 0.0,
               prefix: str = "w") -> "FormulaWeights":
        return cls(*(tape.parameter(init, name="%s%d" % (prefix, i))
                     for i in range(4)))

    def refs(self) -> list[VarRef]:
        return [self.w0, self.w1, self.w2, self.w3]

    def values(self) -> dict[str, float]:
        return {"w%d" % i: r.value for i, r in enumerate(self.refs())}


def trainable_mp_strength(p_a: VarRef, p_b_given_a: VarRef,
                          weights: FormulaWeights) -> VarRef:
    """sigmoid(w0*P(A)*P(B|A) + w1*P(A) + w2*P(B|A) + w3); always in (0,1)."""
    _check_unit("trainable_mp", p_a, p_b_given_a)
    t = p_a.tape
    z = t.add(t.add(t.mul(weights.w0, t.mul(p_a, p_b_given_a)),
                    t.mul(weights.w1, p_a)),
              t.add(t.mul(weights.w2, p_b_given_a), weights.w3))
    return t.sigmoid(z)


# -- concrete rule set -----------------------------------------------------

def _neg_conditional(kb: AtomSpace, pred_a: int, pred_b: int,
                     default: float) -> VarRef:
    """Strength of Impl(Not(A), B) if asserted, else the configured default."""
    not_a = kb.find_link("NotLink", [pred_a])
    if not_a is not None:
        impl = kb.find_link("ImplicationLink", [not_a, pred_b])
        if impl is not None and kb.has_asserted_tv(impl):
            return kb.get_tv(impl).strength
    return kb.tape.constant(default)


def make_modus_ponens_rule(kb: AtomSpace,
                           neg_conditional: float = DEFAULT_NEG_CONDITIONAL,
                           name: str = "modus-ponens",
                           weights: FormulaWeights | None = None) -> Rule:
    """Impl($P, $Q), Eval($P, $X)  |-  Eval($Q, $X).

    With ``weights`` the conclusion strength comes from the trainable
    sigmoid-linear formula instead of the exact convex combination.
    """
    var_p = kb.node("VariableNode", "$P")
    var_q = kb.node("VariableNode", "$Q")
    var_x = kb.node("VariableNode", "$X")
    impl = kb.link("ImplicationLink", var_p, var_q)
    eval_pa = kb.link("EvaluationLink", var_p, var_x)
    eval_qa = kb.link("EvaluationLink", var_q, var_x)

    def strength_inputs(kb: AtomSpace, premises: list[int],
                        binding: Binding) -> list[VarRef]:
        impl_id, eval_id = premises
        p_bga = kb.get_tv(impl_id).strength
        p_a = kb.get_tv(eval_id).strength
        if weights is not None:
            return [p_a, p_bga]
        p_bgna = _neg_conditional(kb, binding[var_p], binding[var_q],
                                  neg_conditional)
        return [p_a, p_bga, p_bgna]

    if weights is not None:
        formula = lambda inputs: trainable_mp_strength(inputs[0], inputs[1], weights)
    else:
        formula = lambda inputs: modus_ponens_strength(inputs[0], inputs[1], inputs[2])

    return Rule(
        name=name,
        variables=[(var_p, "PredicateNode"), (var_q, "PredicateNode"),
                   (var_x, "ConceptNode")],
        premises=[impl, eval_pa],
        conclusion=eval_qa,
        formula=formula,
        strength_inputs=strength_inputs,
    )


def make_deduction_rule(kb: AtomSpace) -> Rule:
    """Inh($X, $Y), Inh($Y, $Z)  |-  Inh($X, $Z).

    Term strengths for the middle and final concepts are read from the bound
    ConceptNode truth values (defaults apply when unset).
    """
    var_x = kb.node("VariableNode", "$DX")
    var_y = kb.node("VariableNode", "$DY")
    var_z = kb.node("VariableNode", "$DZ")
    inh_xy = kb.link("InheritanceLink", var_x, var_y)
    inh_yz = kb.link("InheritanceLink", var_y, var_z)
    inh_xz = kb.link("InheritanceLink", var_x, var_z)

    def strength_inputs(kb: AtomSpace, premises: list[int],
                        binding: Binding) -> list[VarRef]:
        s_ab = kb.get_tv(premises[0]).strength
        s_bc = kb.get_tv(premises[1]).strength
        s_b = kb.get_tv(binding[var_y]).strength
        s_c = kb.get_tv(binding[var_z]).strength
        return [s_ab, s_bc, s_b, s_c]

    return Rule(
        name="deduction",
        variables=[(var_x, None), (var_y, None), (var_z, None)],
        premises=[inh_xy, inh_yz],
        conclusion=inh_xz,
        formula=lambda inputs: deduction_strength(*inputs),
        strength_inputs=strength_inputs,
    )


def make_connective_rules(kb: AtomSpace) -> list[Rule]:
    """Conjunction, disjunction and negation introduction over evaluations.

    Operands are constrained to EvaluationLinks so forward chaining does not
    flood the queue with compounds over arbitrary atoms.
    """
    var_a = kb.node("VariableNode", "$CA")
    var_b = kb.node("VariableNode", "$CB")
    and_ab = kb.link("AndLink", var_a, var_b)
    or_ab = kb.link("OrLink", var_a, var_b)
    not_a = kb.link("NotLink", var_a)
    binary_vars = [(var_a, "EvaluationLink"), (var_b, "EvaluationLink")]
    return [
        Rule(name="fuzzy-conjunction", variables=list(binary_vars),
             premises=[var_a, var_b], conclusion=and_ab,
             formula=lambda inputs: fuzzy_and(inputs[0], inputs[1])),
        Rule(name="fuzzy-disjunction", variables=list(binary_vars),
             premises=[var_a, var_b], conclusion=or_ab,
             formula=lambda inputs: fuzzy_or(inputs[0], inputs[1])),
        Rule(name="fuzzy-negation", variables=[(var_a, "EvaluationLink")],
             premises=[var_a], conclusion=not_a,
             formula=lambda inputs: fuzzy_not(inputs[0])),
    ]


def make_rule_set(kb: AtomSpace,
                  neg_conditional: float = DEFAULT_NEG_CONDITIONAL,
                  trainable_weights: FormulaWeights | None = None) -> list[Rule]:
    """The standard rule set: modus ponens, deduction, connectives, and a
    trainable modus ponens variant (weights created on the KB tape unless
    given)."""
    weights = trainable_weights or FormulaWeights.create(kb.tape)
    return [
        make_modus_ponens_rule(kb, neg_conditional),
        make_deduction_rule(kb),
        *make_connective_rules(kb),
        make_modus_ponens_rule(kb, neg_conditional, name="trainable-modus-ponens",
                               weights=weights),
    ]
