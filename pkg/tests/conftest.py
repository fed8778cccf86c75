import random

from dpln import AtomSpace, Tape, TruthValue

FD_STEP = 1e-6


def finite_diff_grads(build, values):
    """Central-difference gradients of a scalar function of leaf values.

    ``build(tape, refs) -> VarRef`` constructs the expression on a fresh tape
    from leaf refs created for ``values``.  Independent of backward().
    """
    grads = []
    for i in range(len(values)):
        shifted = list(values)
        shifted[i] = values[i] + FD_STEP
        hi = _eval(build, shifted)
        shifted[i] = values[i] - FD_STEP
        lo = _eval(build, shifted)
        grads.append((hi - lo) / (2 * FD_STEP))
    return grads


def _eval(build, values):
    tape = Tape()
    refs = [tape.parameter(v) for v in values]
    return build(tape, refs).value


def analytic_grads(build, values):
    tape = Tape()
    refs = [tape.parameter(v) for v in values]
    out = build(tape, refs)
    tape.backward(out)
    return out.value, [r.grad for r in refs]


def assert_grads_close(build, values, atol=1e-5, rtol=1e-4):
    _, analytic = analytic_grads(build, values)
    numeric = finite_diff_grads(build, values)
    for a, n in zip(analytic, numeric):
        assert abs(a - n) <= atol + rtol * abs(a), (
            "gradient mismatch: analytic %.10g vs central-diff %.10g" % (a, n))


def fresh_kb():
    tape = Tape()
    return tape, AtomSpace(tape)


def set_strength(kb, atom, s, c=1.0):
    kb.set_tv(atom, TruthValue(kb.tape.constant(s), c))


def interior(rng: random.Random, lo=0.05, hi=0.95):
    return lo + (hi - lo) * rng.random()
