"""Three-input Takagi-Sugeno neuro-fuzzy network with hybrid training.

Classic five-layer layout: fuzzification, product T-norm firing strengths,
normalization, linear rule consequents, weighted sum. Consequent
coefficients are fitted by a global linear least-squares pass; membership
(premise) parameters by one gradient-descent step per epoch, with the
gradients computed analytically and validated against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoverageError, DomainError

TERMS = ("NB", "NM", "NS", "ZE", "PS", "PM", "PB")
TERM_INDEX = {name: i for i, name in enumerate(TERMS)}

RIDGE_LAMBDA = 1e-8


def _as_float_array(x):
    return np.asarray(x, dtype=float)


@dataclass
class Sigmoid:
    """1 / (1 + exp(-a (x - c)))."""

    a: float
    c: float

    kind = "sigmoid"
    param_names = ("a", "c")

    def evaluate(self, x):
        xs = _as_float_array(x)
        t = self.a * (xs - self.c)
        out = np.empty_like(t)
        pos = t >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
        e = np.exp(t[~pos])
        out[~pos] = e / (1.0 + e)
        return out if isinstance(x, np.ndarray) else float(out)

    def gradients(self, x):
        xs = _as_float_array(x)
        s = self.evaluate(xs)
        g = s * (1.0 - s)
        return {"a": (xs - self.c) * g, "c": -self.a * g}


@dataclass
class GBell:
    """Generalized bell 1 / (1 + |(x - c)/a|^(2b)); a, b > 0."""

    a: float
    b: float
    c: float

    kind = "gbell"
    param_names = ("a", "b", "c")

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"GBell needs a > 0 and b > 0, got a={self.a}, b={self.b}")

    def evaluate(self, x):
        xs = _as_float_array(x)
        u = np.abs(xs - self.c) / self.a
        with np.errstate(over="ignore"):
            w = u ** (2.0 * self.b)
        out = 1.0 / (1.0 + w)
        return out if isinstance(x, np.ndarray) else float(out)

    def gradients(self, x):
        xs = _as_float_array(x)
        u = np.abs(xs - self.c) / self.a
        with np.errstate(over="ignore"):
            w = u ** (2.0 * self.b)
        f = 1.0 / (1.0 + w)
        g = f * (1.0 - f)
        pos = u > 0
        safe_u = np.where(pos, u, 1.0)
        da = (2.0 * self.b / self.a) * g
        db = np.where(pos, -2.0 * np.log(safe_u) * g, 0.0)
        dc = np.where(pos, (2.0 * self.b / (self.a * safe_u)) * np.sign(xs - self.c) * g, 0.0)
        return {"a": da, "b": db, "c": dc}


MembershipFunction = Sigmoid | GBell


def mf_eval(mf: MembershipFunction, x: float) -> float:
    """Membership degree of x, always in [0, 1]."""
    if not math.isfinite(x):
        raise DomainError(f"membership input must be finite, got {x}")
    return float(mf.evaluate(x))


@dataclass(frozen=True)
class LinguisticVariable:
    """One input: a universe interval plus the 7 standard terms NB..PB."""

    name: str
    universe: tuple[float, float]
    terms: tuple[MembershipFunction, ...]

    def __post_init__(self):
        lo, hi = self.universe
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"universe must be a finite interval with lo < hi, got {self.universe}")
        if len(self.terms) != len(TERMS):
            raise DomainError(f"expected {len(TERMS)} terms, got {len(self.terms)}")
        centers = [mf.c for mf in self.terms]
        if any(b < a for a, b in zip(centers, centers[1:])):
            raise DomainError(f"term centers must be nondecreasing NB..PB, got {centers}")
        if centers[0] < lo or centers[-1] > hi:
            raise DomainError(f"term centers {centers} fall outside universe {self.universe}")

    def clamp(self, x):
        lo, hi = self.universe
        return np.clip(x, lo, hi)


@dataclass
class Rule:
    """One fuzzy rule: 3 antecedent term indices + linear consequent.

    consequent holds (p, q, s, bias) for z = p*a1 + q*a2 + s*a3 + bias.
    """

    antecedent: tuple[int, int, int]
    consequent: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        if len(self.antecedent) != 3 or any(not 0 <= i < len(TERMS) for i in self.antecedent):
            raise DomainError(f"antecedent must be 3 term indices in 0..6, got {self.antecedent}")
        self.antecedent = tuple(int(i) for i in self.antecedent)
        self.consequent = _as_float_array(self.consequent).copy()
        if self.consequent.shape != (4,) or not np.all(np.isfinite(self.consequent)):
            raise DomainError("consequent must be 4 finite coefficients (p, q, s, bias)")


@dataclass
class AnfisNetwork:
    """3 linguistic inputs, a rule list, and the training learning rate.

    `no_bias` pins every rule's bias coefficient at zero (pure linear
    consequents), for comparison against the default affine form.
    """

    inputs: tuple[LinguisticVariable, LinguisticVariable, LinguisticVariable]
    rules: list[Rule]
    learning_rate: float = 0.01
    no_bias: bool = False

    def __post_init__(self):
        if len(self.inputs) != 3:
            raise DomainError(f"network needs exactly 3 inputs, got {len(self.inputs)}")
        if not 1 <= len(self.rules) <= len(TERMS) ** 3:
            raise DomainError(f"rule count must be in 1..{len(TERMS)**3}, got {len(self.rules)}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise DomainError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.no_bias:
            for r in self.rules:
                r.consequent[3] = 0.0

    def antecedent_matrix(self) -> np.ndarray:
        return np.array([r.antecedent for r in self.rules], dtype=int)

    def consequent_matrix(self) -> np.ndarray:
        return np.stack([r.consequent for r in self.rules])

    def clamp_inputs(self, x: np.ndarray) -> np.ndarray:
        out = _as_float_array(x).copy()
        for i, lv in enumerate(self.inputs):
            out[:, i] = lv.clamp(out[:, i])
        return out


@dataclass(frozen=True)
class TrainingSet:
    """K records of inputs (a1, a2, a3) and scalar targets."""

    inputs: np.ndarray  # (K, 3)
    targets: np.ndarray  # (K,)

    def __post_init__(self):
        object.__setattr__(self, "inputs", _as_float_array(self.inputs))
        object.__setattr__(self, "targets", _as_float_array(self.targets))
        if self.inputs.ndim != 2 or self.inputs.shape[1] != 3:
            raise DomainError(f"inputs must be (K, 3), got {self.inputs.shape}")
        if self.targets.shape != (self.inputs.shape[0],):
            raise DomainError("targets must be one scalar per input record")
        if len(self.targets) < 1:
            raise DomainError("training set must hold at least one record")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise DomainError("training data must be finite")

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_records(cls, records) -> "TrainingSet":
        inputs = [r[0] for r in records]
        targets = [r[1] for r in records]
        return cls(np.array(inputs, dtype=float), np.array(targets, dtype=float))


@dataclass(frozen=True)
class ForwardTrace:
    """Every intermediate layer of one forward evaluation."""

    memberships: np.ndarray  # (3, 7) degree of each input in each term
    firing_strengths: np.ndarray  # (R,) rule T-norm products
    normalized: np.ndarray  # (R,) strengths scaled to sum 1
    rule_outputs: np.ndarray  # (R,) linear consequent values
    weighted_outputs: np.ndarray  # (R,) normalized * rule_outputs
    output: float


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one hybrid epoch; `error` is sum of 0.5*(y - O)^2."""

    error: float
    consequents_updated: bool
    premises_updated: bool
    ridge_fallback: bool = False
    least_squares_skipped: bool = False


def _forward_arrays(net: AnfisNetwork, x_clamped: np.ndarray):
    """Batched layers over a (K, 3) input block. Returns M, alpha, S, beta, Z, O."""
    k = x_clamped.shape[0]
    m = np.empty((k, 3, len(TERMS)))
    for i, lv in enumerate(net.inputs):
        col = x_clamped[:, i]
        for j, mf in enumerate(lv.terms):
            m[:, i, j] = mf.evaluate(col)
    ant = net.antecedent_matrix()
    d0 = m[:, 0, ant[:, 0]]
    d1 = m[:, 1, ant[:, 1]]
    d2 = m[:, 2, ant[:, 2]]
    alpha = d0 * d1 * d2
    s = alpha.sum(axis=1)
    dead = np.flatnonzero(s == 0.0)
    if dead.size:
        bad = x_clamped[dead[0]]
        raise CoverageError(f"no rule fires for input {tuple(bad)}")
    beta = alpha / s[:, None]
    xb = np.hstack([x_clamped, np.ones((k, 1))])
    z = xb @ net.consequent_matrix().T
    o = (beta * z).sum(axis=1)
    return m, alpha, s, beta, z, o


def forward(net: AnfisNetwork, a1: float, a2: float, a3: float) -> ForwardTrace:
    """Run one input triple through all five layers.

    Inputs outside a universe are clamped to its edge. Raises CoverageError
    when no rule fires at all (zero total firing strength).
    """
    x = net.clamp_inputs(np.array([[a1, a2, a3]]))
    m, alpha, _, beta, z, o = _forward_arrays(net, x)
    return ForwardTrace(
        memberships=m[0],
        firing_strengths=alpha[0],
        normalized=beta[0],
        rule_outputs=z[0],
        weighted_outputs=beta[0] * z[0],
        output=float(o[0]),
    )


def forward_batch(net: AnfisNetwork, inputs: np.ndarray) -> np.ndarray:
    """Vectorized outputs for a (K, 3) input block (clamped to universes)."""
    x = net.clamp_inputs(np.atleast_2d(_as_float_array(inputs)))
    return _forward_arrays(net, x)[5]


def total_error(net: AnfisNetwork, data: TrainingSet) -> float:
    """Sum over records of 0.5*(target - output)^2."""
    o = forward_batch(net, data.inputs)
    return float(0.5 * np.sum((data.targets - o) ** 2))


def _premise_params(net: AnfisNetwork):
    """Canonical flat ordering of every premise parameter (mf, name)."""
    out = []
    for lv in net.inputs:
        for mf in lv.terms:
            for name in mf.param_names:
                out.append((mf, name))
    return out


def premise_gradients(net: AnfisNetwork, data: TrainingSet) -> np.ndarray:
    """Analytic dE/dtheta for every premise parameter, in canonical order.

    Backpropagates through output -> normalization -> firing product ->
    membership, batched over the whole training set.
    """
    x = net.clamp_inputs(data.inputs)
    m, _, s, beta, z, o = _forward_arrays(net, x)
    g = o - data.targets
    de_dalpha = g[:, None] * (z - o[:, None]) / s[:, None]
    ant = net.antecedent_matrix()
    d0 = m[:, 0, ant[:, 0]]
    d1 = m[:, 1, ant[:, 1]]
    d2 = m[:, 2, ant[:, 2]]
    excl = (d1 * d2, d0 * d2, d0 * d1)
    grads = []
    for i, lv in enumerate(net.inputs):
        col = x[:, i]
        for j, mf in enumerate(lv.terms):
            used = ant[:, i] == j
            if used.any():
                contrib = (de_dalpha[:, used] * excl[i][:, used]).sum(axis=1)
            else:
                contrib = np.zeros(len(col))
            mf_grads = mf.gradients(col)
            for name in mf.param_names:
                grads.append(float(contrib @ mf_grads[name]))
    return np.array(grads)


def train_epoch(net: AnfisNetwork, data: TrainingSet) -> TrainReport:
    """One hybrid epoch: least squares on consequents, then one gradient step.

    Pass A treats the premises as fixed, making the output linear in every
    consequent coefficient, and solves the global least-squares system; a
    rank-deficient system falls back to a ridge solve (flagged). Pass A is
    skipped (flagged) when the record count is below the coefficient count.
    Pass B steps every premise parameter by -learning_rate * dE/dtheta;
    GBell a/b are floored at 1e-9 and centers clipped to the universe so
    the stepped network stays valid. Reported error is measured after both
    passes.
    """
    x = net.clamp_inputs(data.inputs)
    k = x.shape[0]
    ncol = 3 if net.no_bias else 4
    n_rules = len(net.rules)
    ridge = False
    skipped = k < n_rules * ncol
    if not skipped:
        _, _, _, beta, _, _ = _forward_arrays(net, x)
        xb = np.hstack([x, np.ones((k, 1))])[:, :ncol] if net.no_bias else np.hstack([x, np.ones((k, 1))])
        phi = (beta[:, :, None] * xb[:, None, :]).reshape(k, n_rules * ncol)
        theta, _, rank, _ = np.linalg.lstsq(phi, data.targets, rcond=None)
        if rank < n_rules * ncol:
            gram = phi.T @ phi + RIDGE_LAMBDA * np.eye(n_rules * ncol)
            theta = np.linalg.solve(gram, phi.T @ data.targets)
            ridge = True
        flat = theta.reshape(n_rules, ncol)
        for row, rule in zip(flat, net.rules):
            rule.consequent[:ncol] = row
    stepped = net.learning_rate > 0
    if stepped:
        grads = premise_gradients(net, data)
        for (mf, name), grad in zip(_premise_params(net), grads):
            setattr(mf, name, getattr(mf, name) - net.learning_rate * grad)
        for lv in net.inputs:
            lo, hi = lv.universe
            for mf in lv.terms:
                mf.c = min(max(mf.c, lo), hi)
                if isinstance(mf, GBell):
                    mf.a = max(mf.a, 1e-9)
                    mf.b = max(mf.b, 1e-9)
    return TrainReport(
        error=total_error(net, data),
        consequents_updated=not skipped,
        premises_updated=stepped,
        ridge_fallback=ridge,
        least_squares_skipped=skipped,
    )


def gradient_check(net: AnfisNetwork, data: TrainingSet) -> float:
    """Worst relative gap between analytic and finite-difference gradients.

    Central differences with step 1e-6*max(1, |theta|) per parameter;
    deviation is |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    analytic = premise_gradients(net, data)
    worst = 0.0
    for idx, (mf, name) in enumerate(_premise_params(net)):
        theta = getattr(mf, name)
        h = 1e-6 * max(1.0, abs(theta))
        setattr(mf, name, theta + h)
        e_plus = total_error(net, data)
        setattr(mf, name, theta - h)
        e_minus = total_error(net, data)
        setattr(mf, name, theta)
        numeric = (e_plus - e_minus) / (2.0 * h)
        dev = abs(analytic[idx] - numeric) / max(1.0, abs(analytic[idx]), abs(numeric))
        worst = max(worst, dev)
    return worst


def default_rule_antecedents() -> list[tuple[int, int, int]]:
    """The 16-rule starter base.

    Block A: every {NS, PS} combination over the three inputs (8 rules).
    Block B: {NM, PM} on input 1 crossed with {ZE, PS} on inputs 2 and 3
    (8 rules), extending coverage to larger first-input excursions.
    """
    ns, ze, ps = TERM_INDEX["NS"], TERM_INDEX["ZE"], TERM_INDEX["PS"]
    nm, pm = TERM_INDEX["NM"], TERM_INDEX["PM"]
    block_a = [(i, j, k) for i in (ns, ps) for j in (ns, ps) for k in (ns, ps)]
    block_b = [(i, j, k) for i in (nm, pm) for j in (ze, ps) for k in (ze, ps)]
    return block_a + block_b


def default_network(
    universes,
    *,
    mf_kind: str = "gbell",
    learning_rate: float = 0.01,
    no_bias: bool = False,
    seed: int | None = None,
    names: tuple[str, str, str] = ("a1", "a2", "a3"),
) -> AnfisNetwork:
    """Build the standard 7-term, 16-rule network over three universes.

    Deterministic without a seed: term centers equally spaced, GBell width
    = universe width / 7 with b = 2, sigmoid slope = 10 / width, zero
    consequents. With a seed, centers/widths/shapes are jittered and
    consequents drawn small-random, for randomized property tests.
    """
    if mf_kind not in ("gbell", "sigmoid"):
        raise DomainError(f"mf_kind must be 'gbell' or 'sigmoid', got {mf_kind!r}")
    rng = np.random.default_rng(seed) if seed is not None else None
    lvs = []
    for (lo, hi), name in zip(universes, names):
        width = hi - lo
        spacing = width / (len(TERMS) - 1)
        terms = []
        for j in range(len(TERMS)):
            c = lo + j * spacing
            if rng is not None:
                c = float(np.clip(c + rng.uniform(-0.2, 0.2) * spacing, lo, hi))
            scale = float(rng.uniform(0.7, 1.3)) if rng is not None else 1.0
            if mf_kind == "gbell":
                b = float(rng.uniform(1.5, 2.5)) if rng is not None else 2.0
                terms.append(GBell(a=width / 7 * scale, b=b, c=c))
            else:
                terms.append(Sigmoid(a=10.0 / width * scale, c=c))
        lvs.append(LinguisticVariable(name, (float(lo), float(hi)), tuple(terms)))
    rules = []
    for ant in default_rule_antecedents():
        if rng is not None:
            cons = rng.normal(0.0, 0.5, 4)
            if no_bias:
                cons[3] = 0.0
        else:
            cons = np.zeros(4)
        rules.append(Rule(ant, cons))
    return AnfisNetwork(tuple(lvs), rules, learning_rate=learning_rate, no_bias=no_bias)


SCHEMA_VERSION = 1


def network_to_dict(net: AnfisNetwork) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "anfis-network",
        "learning_rate": net.learning_rate,
        "no_bias": net.no_bias,
        "inputs": [
            {
                "name": lv.name,
                "universe": [lv.universe[0], lv.universe[1]],
                "terms": [
                    {"term": TERMS[j], "kind": mf.kind}
                    | {name: getattr(mf, name) for name in mf.param_names}
                    for j, mf in enumerate(lv.terms)
                ],
            }
            for lv in net.inputs
        ],
        "rules": [
            {"antecedent": list(r.antecedent), "consequent": [float(v) for v in r.consequent]}
            for r in net.rules
        ],
    }


def network_from_dict(doc: dict) -> AnfisNetwork:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"unsupported network schema_version {doc.get('schema_version')!r}")
    if doc.get("kind") != "anfis-network":
        raise DomainError(f"not a network document (kind={doc.get('kind')!r})")
    lvs = []
    for spec in doc["inputs"]:
        terms = []
        for j, term in enumerate(spec["terms"]):
            if term.get("term") != TERMS[j]:
                raise DomainError(f"terms must appear in order {TERMS}, got {term.get('term')!r}")
            if term["kind"] == "sigmoid":
                terms.append(Sigmoid(a=float(term["a"]), c=float(term["c"])))
            elif term["kind"] == "gbell":
                terms.append(GBell(a=float(term["a"]), b=float(term["b"]), c=float(term["c"])))
            else:
                raise DomainError(f"unknown membership kind {term['kind']!r}")
        lo, hi = spec["universe"]
        lvs.append(LinguisticVariable(spec["name"], (float(lo), float(hi)), tuple(terms)))
    rules = [Rule(tuple(r["antecedent"]), np.array(r["consequent"], dtype=float)) for r in doc["rules"]]
    return AnfisNetwork(
        tuple(lvs),
        rules,
        learning_rate=float(doc.get("learning_rate", 0.01)),
        no_bias=bool(doc.get("no_bias", False)),
    )


def save_network(net: AnfisNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n", encoding="utf-8")


def load_network(path) -> AnfisNetwork:
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
