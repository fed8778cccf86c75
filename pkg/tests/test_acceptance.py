"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Criterion 2 carries both an attainable mean gate and a max gate that sits
below the representational floor of the sigmoid-linear family on this task;
the measured floor is about 0.077 at the P(A)=1 edge, so its test reports an
honest failure rather than a loosened tolerance.
"""

import itertools
import random
import time

import pytest

from dpln import (ChainConfig, FormulaWeights, LabeledExample,
                  LearnableStrength, Tape, TruthValue, backward_chain,
                  deduction_strength, format_atom, forward_chain, fuzzy_and,
                  fuzzy_not, fuzzy_or, load_kb, make_deduction_rule,
                  make_modus_ponens_rule, modus_ponens_strength, parse_atom,
                  sgd_step, trainable_mp_strength)
from dpln.cli import ExperimentConfig, run_fruit_colors, run_joint, \
    run_learn_formula, _eq1

from conftest import (analytic_grads, finite_diff_grads, fresh_kb, interior,
                      set_strength)
from test_chainer import _oracle_proofs, _serialize


def _report(num: int, ok: bool, detail: str) -> None:
    print("criterion %d: %s (%s)" % (num, "PASS" if ok else "FAIL", detail))


def _fruit_config(out_dir: str) -> ExperimentConfig:
    return ExperimentConfig(
        experiment="fruit-colors",
        fruits=["apple", "banana"],
        colors=["yellow", "red", "green"],
        true_probabilities={
            "apple": {"yellow": 0.1, "red": 0.2, "green": 0.7},
            "banana": {"yellow": 0.8, "red": 0.1, "green": 0.1},
        },
        n_samples=500, lr=0.1, steps=2000, seed=7, out_dir=out_dir)


def test_criterion_1_frequency_oracle_convergence(tmp_path):
    start = time.monotonic()
    result = run_fruit_colors(_fruit_config(str(tmp_path / "out")))
    elapsed = time.monotonic() - start
    max_diff = result["max_abs_diff"]
    ok = max_diff <= 0.01 and elapsed < 60.0
    _report(1, ok, "max |learned - empirical| = %.3g <= 0.01, %.1fs < 60s"
            % (max_diff, elapsed))
    assert max_diff <= 0.01
    assert elapsed < 60.0


def test_criterion_2_formula_recovery(tmp_path):
    cfg = ExperimentConfig(experiment="learn-formula", lr=2.0, steps=5000,
                           grid_size=11, heldout_size=21,
                           neg_conditional=0.2, out_dir=str(tmp_path / "out"))
    result = run_learn_formula(cfg)
    max_err = result["max_abs_error"]
    mean_err = result["mean_abs_error"]
    ok = max_err <= 0.05 and mean_err <= 0.02
    _report(2, ok, "held-out max = %.4f vs 0.05, mean = %.4f vs 0.02"
            % (max_err, mean_err))
    assert mean_err <= 0.02
    assert max_err <= 0.05


def test_criterion_3_joint_learning_adequacy(tmp_path):
    cfg = ExperimentConfig(experiment="joint", lr=2.0, steps=5000, seed=0,
                           out_dir=str(tmp_path / "out"))
    result = run_joint(cfg)
    max_err = result["max_heldout_abs_error"]
    ok = max_err <= 0.05
    _report(3, ok, "held-out max abs error = %.4f <= 0.05; strength "
            "deviations %s reported, not gated"
            % (max_err, ["%.3f" % d for d in result["strength_abs_deviation"]]))
    assert max_err <= 0.05


def _check_grads(build, values) -> float:
    _, analytic = analytic_grads(build, values)
    numeric = finite_diff_grads(build, values)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        excess = abs(a - n) - (1e-5 + 1e-4 * abs(a))
        worst = max(worst, excess)
    return worst


def test_criterion_4_gradient_check_suite():
    rng = random.Random(40)
    builders = {
        "add": (2, lambda t, r: t.add(r[0], r[1])),
        "sub": (2, lambda t, r: t.sub(r[0], r[1])),
        "mul": (2, lambda t, r: t.mul(r[0], r[1])),
        "div": (2, lambda t, r: t.div(r[0], r[1])),
        "neg": (1, lambda t, r: t.neg(r[0])),
        "one_minus": (1, lambda t, r: t.one_minus(r[0])),
        "log": (1, lambda t, r: t.log(r[0])),
        "sigmoid": (1, lambda t, r: t.sigmoid(r[0])),
        "clamp01": (1, lambda t, r: t.clamp01(r[0])),
        "modus_ponens": (3, lambda t, r: modus_ponens_strength(*r)),
        "fuzzy_and": (2, lambda t, r: fuzzy_and(r[0], r[1])),
        "fuzzy_or": (2, lambda t, r: fuzzy_or(r[0], r[1])),
        "fuzzy_not": (1, lambda t, r: fuzzy_not(r[0])),
        "trainable_mp": (6, lambda t, r: trainable_mp_strength(
            r[0], r[1], FormulaWeights(r[2], r[3], r[4], r[5]))),
    }
    worst = 0.0
    for name, (arity, build) in builders.items():
        for _ in range(100):
            values = [interior(rng, 0.1, 0.9) for _ in range(arity)]
            worst = max(worst, _check_grads(build, values))
    # deduction away from its clamp boundary
    checked = 0
    while checked < 100:
        vals = [interior(rng, 0.1, 0.9) for _ in range(4)]
        s_ab, s_bc, s_b, s_c = vals
        cond = (s_c - s_b * s_bc) / (1.0 - s_b)
        if not 0.02 < cond < 0.98:
            continue
        worst = max(worst, _check_grads(
            lambda t, r: deduction_strength(*r), vals))
        checked += 1
    ok = worst <= 0.0
    _report(4, ok, "worst tolerance excess = %.3g over %d builders x 100 "
            "points" % (worst, len(builders) + 1))
    assert worst <= 0.0


def test_criterion_5_chaining_soundness_equivalence():
    # forward: the two-link inheritance chain closes
    _, kb = fresh_kb()
    load_kb(kb, """
    (InheritanceLink (stv 1.0 1.0) (ConceptNode "sparrow") (ConceptNode "bird"))
    (InheritanceLink (stv 1.0 1.0) (ConceptNode "bird") (ConceptNode "animal"))
    """)
    new_atoms, _ = forward_chain(kb, [make_deduction_rule(kb)],
                                 ChainConfig(max_steps=10, seed=0))
    forward_ok = any(
        format_atom(kb, a) ==
        '(InheritanceLink (ConceptNode "sparrow") (ConceptNode "animal"))'
        for a in new_atoms)

    # backward: proof sets equal brute-force enumeration; values match the
    # closed-form composite within 1e-12
    def closed_form(trace, kb, term):
        children = getattr(trace, "premises", None)
        if children is None:
            return kb.get_tv(trace.atom).strength.value
        s_ab = closed_form(children[0], kb, term)
        s_bc = closed_form(children[1], kb, term)
        var_y, var_z = trace.rule.variables[1][0], trace.rule.variables[2][0]
        s_b = term[trace.binding[var_y]]
        s_c = term[trace.binding[var_z]]
        if s_b >= 1.0 - 1e-6:
            return s_c
        cond = min(1.0, max(0.0, (s_c - s_b * s_bc) / (1.0 - s_b)))
        return min(1.0, max(0.0, s_ab * s_bc + (1.0 - s_ab) * cond))

    rng = random.Random(50)
    names = ["a", "b", "c", "d"]
    proof_sets_ok = True
    max_value_gap = 0.0
    for _ in range(5):
        pairs = set()
        while len(pairs) < rng.randrange(3, 6):
            pairs.add((rng.choice(names), rng.choice(names)))
        for na, nc in itertools.product(names, repeat=2):
            _, kb = fresh_kb()
            concepts = {n: kb.node("ConceptNode", n) for n in names}
            term = {}
            for i, n in enumerate(names):
                set_strength(kb, concepts[n], 0.35 + 0.1 * i)
                term[concepts[n]] = 0.35 + 0.1 * i
            inh = {}
            for x, y in sorted(pairs):
                l = kb.link("InheritanceLink", concepts[x], concepts[y])
                set_strength(kb, l, 0.6 + 0.05 * len(inh))
                inh[(concepts[x], concepts[y])] = l
            assert len(kb) <= 12 + len(pairs)
            rule = make_deduction_rule(kb)
            target = kb.link("InheritanceLink", concepts[na], concepts[nc])
            results = backward_chain(kb, [rule], target,
                                     ChainConfig(max_depth=3))
            got = sorted(_serialize(t) for _, _, t in results)
            expected = sorted(_oracle_proofs(
                kb, set(inh.values()), inh, concepts[na], concepts[nc], 3,
                list(concepts.values())))
            if got != expected:
                proof_sets_ok = False
            for _, strength, trace in results:
                # replay first: with several proofs of one sub-conclusion the
                # stored TV holds whichever application came last, while the
                # closed form follows this trace's own structure
                replayed = trace.replay(kb, {})
                gap = abs(replayed.value - closed_form(trace, kb, term))
                max_value_gap = max(max_value_gap, gap)
    ok = forward_ok and proof_sets_ok and max_value_gap <= 1e-12
    _report(5, ok, "forward closure %s, proof enumeration %s, closed-form "
            "gap %.2g <= 1e-12"
            % (forward_ok, proof_sets_ok, max_value_gap))
    assert forward_ok
    assert proof_sets_ok
    assert max_value_gap <= 1e-12


def test_criterion_6_gradient_connectivity():
    tape, kb = fresh_kb()
    names = ["a", "b", "c", "d", "e"]
    concepts = {n: kb.node("ConceptNode", n) for n in names}
    for i, n in enumerate(names):
        set_strength(kb, concepts[n], 0.60 - 0.05 * i)
    links = []
    for x, y in zip(names, names[1:]):
        l = kb.link("InheritanceLink", concepts[x], concepts[y])
        kb.set_tv(l, TruthValue(tape.parameter(0.8), 1.0))
        links.append(l)
    rule = make_deduction_rule(kb)
    target = parse_atom(kb, '(InheritanceLink (ConceptNode "a") '
                            '(ConceptNode "e"))')
    results = backward_chain(kb, [rule], target, ChainConfig(max_depth=3))
    trace = next(t for _, _, t in results
                 if {leaf.atom for leaf in t.leaves()} == set(links))
    tape.backward(trace.strength)
    grads = [kb.get_tv(l).strength.grad for l in links]
    ok = all(g != 0.0 for g in grads)
    _report(6, ok, "3-step deduction chain leaf grads = %s"
            % ["%.3g" % g for g in grads])
    assert ok


def test_criterion_7_range_closure():
    rng = random.Random(70)
    tape = Tape()
    w = FormulaWeights.create(tape)
    w.w0.value, w.w1.value, w.w2.value, w.w3.value = 4.0, -2.0, 1.0, -1.5
    violations = 0
    for _ in range(10_000):
        r = [tape.constant(rng.random()) for _ in range(4)]
        outs = [modus_ponens_strength(r[0], r[1], r[2]),
                deduction_strength(r[0], r[1], r[2], r[3]),
                fuzzy_and(r[0], r[1]), fuzzy_or(r[0], r[1]), fuzzy_not(r[0]),
                trainable_mp_strength(r[0], r[1], w)]
        violations += sum(not 0.0 <= o.value <= 1.0 for o in outs)

    t2 = Tape()
    ls = LearnableStrength(t2, init=0.5)
    mark = t2.mark()
    escaped = 0
    for step in range(10_000):
        t2.reset_to(mark)
        s = ls.refresh()
        loss = t2.log(s) if step % 2 else t2.log(t2.one_minus(s))
        t2.backward(loss)
        sgd_step([ls.theta], 1.0)
        t2.zero_grads()
        if not 0.0 < ls.value() < 1.0:
            escaped += 1
    ok = violations == 0 and escaped == 0
    _report(7, ok, "%d range violations over 10000 formula draws, %d "
            "strength escapes over 10000 SGD steps at lr=1.0"
            % (violations, escaped))
    assert violations == 0
    assert escaped == 0


def test_criterion_8_determinism(tmp_path):
    reports = []
    for name in ("run1", "run2"):
        run_fruit_colors(_fruit_config(str(tmp_path / name)))
        reports.append((tmp_path / name / "report.json").read_bytes())
    ok = reports[0] == reports[1]
    _report(8, ok, "two seed-7 runs produced byte-identical report.json: %s"
            % ok)
    assert ok
