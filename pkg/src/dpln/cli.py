"""Command-line experiment runner.

Commands:
    dpln fruit-colors  --config F [overrides]   learn implication strengths
    dpln learn-formula --config F [overrides]   fit the sigmoid-linear formula
    dpln joint         --config F [overrides]   learn formula + strengths
    dpln chain --kb F [--target S | --forward]  run the chainer on a KB file

Configs are flat key = value text files (TOML-style: quoted strings, numbers,
["lists"], dotted keys for nesting); command-line flags win over the file.
Exit codes: 0 success, 1 validation/parse error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .atomspace import AtomSpace, TruthValue
from .autodiff import Tape
from .chainer import ChainConfig, backward_chain, forward_chain
from .pattern import instantiate, variables_in
from .rules import (DEFAULT_NEG_CONDITIONAL, FormulaWeights,
                    make_modus_ponens_rule, make_rule_set,
                    trainable_mp_strength)
from .sexpr import SexprError, format_atom, load_kb, parse_atom
from .training import (LabeledExample, LearnableStrength, TrainConfig,
                       empirical_frequency, sgd_step, train)


class ConfigError(Exception):
    pass


# -- config files ----------------------------------------------------------

def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; dotted keys nest; '#'/';' start comments."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected key = value" % lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("line %d: empty key" % lineno)
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError("line %d: key %r clashes" % (lineno, key))
        target[parts[-1]] = _parse_value(value, lineno)
    return out


def _parse_value(value: str, lineno: int):
    if value.startswith("[") and value.endswith("]"):
        inner = value[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(v.strip(), lineno) for v in inner.split(",")]
    if value.startswith('"') and value.endswith('"') and len(value) >= 2:
        return value[1:-1]
    if value in ("true", "false"):
        return value == "true"
    try:
        if any(c in value for c in ".eE") and not value.lstrip("+-").isdigit():
            return float(value)
        return int(value)
    except ValueError:
        raise ConfigError("line %d: cannot parse value %r" % (lineno, value)) from None


@dataclass
class ExperimentConfig:
    experiment: str = ""
    kb_path: str | None = None
    fruits: list[str] = field(default_factory=lambda: ["apple", "banana"])
    colors: list[str] = field(default_factory=lambda: ["yellow", "red", "green"])
    true_probabilities: dict = field(default_factory=dict)
    n_samples: int = 500
    lr: float = 0.1
    steps: int = 2000
    seed: int = 0
    out_dir: str = "out"
    neg_conditional: float = DEFAULT_NEG_CONDITIONAL
    grid_size: int = 11
    heldout_size: int = 21

    @classmethod
    def load(cls, path: str | None, overrides: dict,
             defaults: dict | None = None) -> "ExperimentConfig":
        data = {}
        if path is not None:
            data = parse_config_text(Path(path).read_text())
        cfg = cls()
        for key, value in (defaults or {}).items():
            setattr(cfg, key, value)
        mapping = {
            "fruits": "fruits", "colors": "colors", "n_samples": "n_samples",
            "lr": "lr", "steps": "steps", "seed": "seed", "out": "out_dir",
            "kb": "kb_path", "probabilities": "true_probabilities",
            "neg_conditional": "neg_conditional", "grid_size": "grid_size",
            "heldout_size": "heldout_size",
        }
        for key, value in data.items():
            if key not in mapping:
                raise ConfigError("unknown config key %r" % key)
            setattr(cfg, mapping[key], value)
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

    def validate_fruit(self) -> None:
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not self.fruits:
            raise ConfigError("fruits must be nonempty")
        if not self.colors:
            raise ConfigError("colors must be nonempty")
        for fruit in self.fruits:
            probs = self.true_probabilities.get(fruit)
            if not isinstance(probs, dict):
                raise ConfigError("probabilities.%s missing" % fruit)
            missing = [c for c in self.colors if c not in probs]
            if missing:
                raise ConfigError("probabilities.%s missing color(s): %s"
                                  % (fruit, ", ".join(missing)))
            total = sum(float(probs[c]) for c in self.colors)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError("probabilities.%s sum to %.12g, expected 1"
                                  % (fruit, total))


# -- report helpers --------------------------------------------------------

def _round9(obj):
    """Fixes floats to 9 significant digits for byte-stable reports."""
    if isinstance(obj, float):
        return float("%.9g" % obj)
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round9(v) for v in obj]
    return obj


def write_report(out_dir: str, report: dict, loss_rows: list[tuple[int, float]]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(_round9(report), fh, indent=2)
        fh.write("\n")
    with open(out / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in loss_rows:
            writer.writerow([step, "%.9g" % loss])


# -- experiments -----------------------------------------------------------

def run_fruit_colors(cfg: ExperimentConfig) -> dict:
    """Samples fruit instances, learns one implication strength per
    fruit x color pair, and compares each against the empirical frequency."""
    cfg.validate_fruit()
    tape = Tape()
    kb = AtomSpace(tape)
    rng = random.Random(cfg.seed)

    instances: dict[str, list[tuple[int, str]]] = {}
    for fruit in cfg.fruits:
        pred = kb.node("PredicateNode", fruit)
        instances[fruit] = []
        probs = [float(cfg.true_probabilities[fruit][c]) for c in cfg.colors]
        for i in range(cfg.n_samples):
            concept = kb.node("ConceptNode", "%s-%03d" % (fruit, i + 1))
            ev = kb.link("EvaluationLink", pred, concept)
            kb.set_tv(ev, TruthValue(tape.constant(1.0), 1.0))
            color = rng.choices(cfg.colors, weights=probs)[0]
            instances[fruit].append((concept, color))

    mp_rule = make_modus_ponens_rule(kb, cfg.neg_conditional)
    pairs = []
    loss_totals = [0.0] * cfg.steps
    for fruit in cfg.fruits:
        for color in cfg.colors:
            impl = kb.link("ImplicationLink",
                           kb.node("PredicateNode", fruit),
                           kb.node("PredicateNode", color))
            learnable = LearnableStrength(tape, init=0.5,
                                          name="%s->%s" % (fruit, color))
            learnable.attach(kb, impl)
            learnable.refresh()
            dataset = []
            color_pred = kb.node("PredicateNode", color)
            for concept, sampled in instances[fruit]:
                target = kb.link("EvaluationLink", color_pred, concept)
                dataset.append(LabeledExample(target, 1 if sampled == color else 0))
            tc = TrainConfig(learning_rate=cfg.lr, steps=cfg.steps, seed=cfg.seed)
            report = train(kb, [mp_rule], dataset, [learnable.theta], tc,
                           learnables=[learnable])
            for i, loss in enumerate(report.loss_curve):
                loss_totals[i] += loss
            learned = learnable.value()
            empirical = empirical_frequency(dataset)
            pairs.append({
                "fruit": fruit, "color": color,
                "learned": learned, "empirical": empirical,
                "abs_diff": abs(learned - empirical),
            })

    result = {
        "experiment": "fruit-colors",
        "seed": cfg.seed, "n_samples": cfg.n_samples,
        "lr": cfg.lr, "steps": cfg.steps,
        "pairs": pairs,
        "max_abs_diff": max(p["abs_diff"] for p in pairs),
    }
    write_report(cfg.out_dir, result, list(enumerate(loss_totals)))
    return result


def _soft_ce_loss(tape: Tape, preds, targets):
    """Mean soft cross-entropy against real-valued targets in [0, 1]."""
    total = None
    for p, t in zip(preds, targets):
        term = tape.add(tape.mul(tape.constant(t), tape.log(p)),
                        tape.mul(tape.constant(1.0 - t),
                                 tape.log(tape.one_minus(p))))
        total = term if total is None else tape.add(total, term)
    return tape.mul(tape.constant(-1.0 / len(preds)), total)


def _eq1(p_a: float, p_bga: float, p_bgna: float) -> float:
    return p_bga * p_a + p_bgna * (1.0 - p_a)


def run_learn_formula(cfg: ExperimentConfig) -> dict:
    """Fits the trainable sigmoid-linear formula to exact modus ponens targets
    on a training grid; reports held-out error against direct evaluation."""
    if cfg.grid_size < 1 or cfg.heldout_size < 2:
        raise ConfigError("grid sizes must be sensible (>=1 / >=2)")
    tape = Tape()
    weights = FormulaWeights.create(tape)
    grid = [i / (cfg.grid_size - 1) if cfg.grid_size > 1 else 0.5
            for i in range(cfg.grid_size)]
    points = [(x, y) for x in grid for y in grid]
    targets = [_eq1(x, y, cfg.neg_conditional) for x, y in points]

    mark = tape.mark()
    losses = []
    for step in range(cfg.steps):
        tape.reset_to(mark)
        preds = [trainable_mp_strength(tape.constant(x), tape.constant(y), weights)
                 for x, y in points]
        loss = _soft_ce_loss(tape, preds, targets)
        tape.backward(loss)
        sgd_step(weights.refs(), cfg.lr)
        losses.append(loss.value)
        tape.zero_grads()

    held = [i / (cfg.heldout_size - 1) for i in range(cfg.heldout_size)]
    tape.reset_to(mark)
    errors = []
    for x in held:
        for y in held:
            pred = trainable_mp_strength(tape.constant(x), tape.constant(y),
                                         weights)
            errors.append(abs(pred.value - _eq1(x, y, cfg.neg_conditional)))
    result = {
        "experiment": "learn-formula",
        "seed": cfg.seed, "lr": cfg.lr, "steps": cfg.steps,
        "grid_size": cfg.grid_size, "heldout_size": cfg.heldout_size,
        "neg_conditional": cfg.neg_conditional,
        "weights": weights.values(),
        "max_abs_error": max(errors) if errors else 0.0,
        "mean_abs_error": sum(errors) / len(errors) if errors else 0.0,
    }
    write_report(cfg.out_dir, result, list(enumerate(losses)))
    return result


def _joint_dataset(cfg: ExperimentConfig):
    """Mixed-provenance dataset: one block of examples with fully known
    premise strengths (trains the formula) and one block whose implication
    strengths are hidden (trains the truth values)."""
    rng = random.Random(cfg.seed)
    known = []
    for p_a in (0.25, 0.5, 0.75, 1.0):
        for p_bga in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8):
            known.append((p_a, p_bga, _eq1(p_a, p_bga, cfg.neg_conditional)))
    contexts = []
    for k in range(6):
        s_true = 0.15 + 0.7 * rng.random()
        train_pas = (0.6, 0.8, 1.0)
        held_pas = (0.7, 0.9)
        contexts.append((s_true, train_pas, held_pas))
    return known, contexts


def run_joint(cfg: ExperimentConfig) -> dict:
    """Learns the formula weights and hidden implication strengths together;
    gates held-out prediction error, reports (but does not gate) how far the
    learned strengths drift from their generating values."""
    tape = Tape()
    weights = FormulaWeights.create(tape)
    known, contexts = _joint_dataset(cfg)
    learnables = [LearnableStrength(tape, init=0.5, name="s%d" % k)
                  for k in range(len(contexts))]
    params = weights.refs() + [ls.theta for ls in learnables]

    mark = tape.mark()
    losses = []
    for step in range(cfg.steps):
        tape.reset_to(mark)
        preds, targets = [], []
        for p_a, p_bga, target in known:
            preds.append(trainable_mp_strength(tape.constant(p_a),
                                               tape.constant(p_bga), weights))
            targets.append(target)
        for (s_true, train_pas, _), ls in zip(contexts, learnables):
            s_hat = ls.refresh()
            for p_a in train_pas:
                preds.append(trainable_mp_strength(tape.constant(p_a), s_hat,
                                                   weights))
                targets.append(_eq1(p_a, s_true, cfg.neg_conditional))
        loss = _soft_ce_loss(tape, preds, targets)
        tape.backward(loss)
        sgd_step(params, cfg.lr)
        losses.append(loss.value)
        tape.zero_grads()

    tape.reset_to(mark)
    held_errors = []
    strength_dev = []
    for (s_true, _, held_pas), ls in zip(contexts, learnables):
        s_hat = ls.refresh()
        strength_dev.append(abs(ls.value() - s_true))
        for p_a in held_pas:
            pred = trainable_mp_strength(tape.constant(p_a), s_hat, weights)
            held_errors.append(abs(pred.value - _eq1(p_a, s_true,
                                                     cfg.neg_conditional)))
    # held-out block for the known-strength examples: grid midpoints
    for p_a in (0.3, 0.6, 0.9):
        for p_bga in (0.25, 0.45, 0.65):
            pred = trainable_mp_strength(tape.constant(p_a),
                                         tape.constant(p_bga), weights)
            held_errors.append(abs(pred.value - _eq1(p_a, p_bga,
                                                     cfg.neg_conditional)))
    result = {
        "experiment": "joint",
        "seed": cfg.seed, "lr": cfg.lr, "steps": cfg.steps,
        "weights": weights.values(),
        "learned_strengths": [ls.value() for ls in learnables],
        "true_strengths": [c[0] for c in contexts],
        "strength_abs_deviation": strength_dev,
        "max_heldout_abs_error": max(held_errors),
        "mean_heldout_abs_error": sum(held_errors) / len(held_errors),
    }
    write_report(cfg.out_dir, result, list(enumerate(losses)))
    return result


def run_chain(kb_path: str, target: str | None, forward: bool,
              steps: int, depth: int, seed: int,
              neg_conditional: float = DEFAULT_NEG_CONDITIONAL,
              out=None) -> int:
    """Loads a KB file and runs the chainer, printing derived atoms."""
    out = out if out is not None else sys.stdout
    tape = Tape()
    kb = AtomSpace(tape)
    text = Path(kb_path).read_text()
    load_kb(kb, text)
    rules = make_rule_set(kb, neg_conditional)
    if forward:
        config = ChainConfig(max_steps=steps, max_depth=depth, seed=seed)
        new_atoms, _ = forward_chain(kb, rules, config)
        for atom in new_atoms:
            out.write(format_atom(kb, atom, with_tv=True) + "\n")
        return 0
    if target is None:
        raise ConfigError("chain needs --target or --forward")
    target_id = parse_atom(kb, target)
    config = ChainConfig(max_steps=steps, max_depth=depth, seed=seed)
    results = backward_chain(kb, rules, target_id, config)
    for binding, strength, trace in results:
        conclusion = target_id
        if variables_in(kb, target_id):
            conclusion = instantiate(kb, target_id, binding)
        out.write("%s ; strength %.9g\n"
                  % (format_atom(kb, conclusion), strength.value))
    return 0


# -- entry point -----------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--steps", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", dest="out_dir", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpln",
                                     description="Differentiable PLN runner")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("fruit-colors", "learn-formula", "joint"):
        _add_common(subs.add_parser(name))
    chain = subs.add_parser("chain")
    chain.add_argument("--kb", required=True)
    chain.add_argument("--target", default=None)
    chain.add_argument("--forward", action="store_true")
    chain.add_argument("--steps", type=int, default=100)
    chain.add_argument("--depth", type=int, default=5)
    chain.add_argument("--seed", type=int, default=0)
    return parser


_EXPERIMENT_DEFAULTS = {
    "fruit-colors": dict(lr=0.1, steps=2000),
    "learn-formula": dict(lr=2.0, steps=5000),
    "joint": dict(lr=2.0, steps=5000),
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "chain":
            return run_chain(args.kb, args.target, args.forward,
                             args.steps, args.depth, args.seed)
        overrides = {"lr": args.lr, "steps": args.steps, "seed": args.seed,
                     "out_dir": args.out_dir}
        cfg = ExperimentConfig.load(args.config, overrides,
                                    defaults=_EXPERIMENT_DEFAULTS[args.command])
        cfg.experiment = args.command
        runner = {"fruit-colors": run_fruit_colors,
                  "learn-formula": run_learn_formula,
                  "joint": run_joint}[args.command]
        runner(cfg)
        return 0
    except (ConfigError, SexprError, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print("internal error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
