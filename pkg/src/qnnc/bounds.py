"""Closed-form rate and space expressions plus Monte-Carlo estimators.

Everything here is pure arithmetic used by tests and the bench harness:
Shannon entropy, the per-codec expected-length bounds, the queue-space
bound, the x_n / y_n recursions that bound the fixed-width tree encoding,
and seeded Monte-Carlo estimators for the multiset quantities that have
no closed form.

The deep-network tree bound carries an unevaluated additive slack (its
constants are not specified numerically anywhere); reports mark the
value "lower-estimate" and nothing asserts against the absolute number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import EdgeModel
from .succinct import queue_space_bound

_LN2 = math.log(2.0)


def _log2_factorial(n: int) -> float:
    return math.lgamma(n + 1) / _LN2


def entropy_H(probs) -> float:
    """Shannon entropy in bits; 0*log(1/0) counts as 0."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValidationError("probability vector required")
    if (p < -1e-12).any():
        raise ValidationError("probabilities must be nonnegative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValidationError(f"probabilities must sum to 1, got {float(p.sum())}")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def plbg_bound(n_rows: int, n_cols: int, probs) -> float:
    """Expected-length bound M*N*H(p) - log2(N!) for the row-multiset codec."""
    if n_rows < 1 or n_cols < 1:
        raise ValidationError("dimensions must be positive")
    return n_cols * n_rows * entropy_H(probs) - _log2_factorial(n_rows)


def table_bound(n_rows: int, n_cols: int, probs) -> float:
    """The benchmark-table approximation M*N*H(p) - N*log2(N)."""
    if n_rows < 1 or n_cols < 1:
        raise ValidationError("dimensions must be positive")
    return n_cols * n_rows * entropy_H(probs) - n_rows * math.log2(n_rows)


def ubg_bound(n: int, probs) -> float:
    """Expected-length bound N^2*H(p) - 2*log2(N!) for the two-tree codec."""
    if n < 1:
        raise ValidationError("dimension must be positive")
    return n * n * entropy_H(probs) - 2.0 * _log2_factorial(n)


def ktree_bound(k_layers: int, n: int, probs) -> float:
    """Multi-tree bound for a k_layers-deep network of uniform width n.

    ``k_layers`` counts node layers, so the network has k_layers - 1
    weight matrices.  The returned value omits the additive slack terms
    (reported symbolically as zero, a lower estimate).
    """
    if k_layers < 2:
        raise ValidationError("need at least two node layers")
    if n < 1:
        raise ValidationError("dimension must be positive")
    h = entropy_H(probs)
    return (
        (k_layers - 1) * n * n * h
        + (k_layers - 2) * n * h
        - (k_layers - 2) * n * math.log2(n)
    )


def _mc_sample(n_rows, n_cols, model, trials, seed, value_of_multiplicities):
    """Common chunked driver: sample matrices, reduce row multiplicities."""
    if trials < 1:
        raise ValidationError("need at least one trial")
    rng = np.random.default_rng(seed)
    probs = np.asarray(model.float_probabilities())
    log2p = {c: math.log2(v) for c, v in enumerate(probs) if v > 0}
    values = np.empty(trials)
    done = 0
    chunk = max(1, min(trials, (1 << 22) // max(1, n_rows * n_cols)))
    while done < trials:
        batch = min(chunk, trials - done)
        cells = rng.choice(model.m + 1, size=(batch, n_rows, n_cols), p=probs)
        for t, mat in enumerate(cells.tolist()):
            mult: dict[tuple, int] = {}
            for row in mat:
                key = tuple(row)
                mult[key] = mult.get(key, 0) + 1
            values[done + t] = value_of_multiplicities(mult, log2p)
        done += batch
    stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(values.mean()), stderr


def mc_log_multiplicity_term(
    n_rows: int,
    n_cols: int,
    model: EdgeModel,
    trials: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo estimate of E[sum_i log2(k_i!)] over random matrices.

    Returns (mean, standard error).
    """

    def reduce(mult, _log2p):
        return sum(_log2_factorial(k) for k in mult.values())

    return _mc_sample(n_rows, n_cols, model, trials, seed, reduce)


def mc_multiset_entropy(
    n_rows: int,
    n_cols: int,
    model: EdgeModel,
    trials: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the multiset entropy E[-log2 P(multiset)].

    Returns (mean, standard error).
    """

    def reduce(mult, log2p):
        n = sum(mult.values())
        log2prob = _log2_factorial(n)
        for row, k in mult.items():
            row_lp = sum(log2p[c] for c in row)
            log2prob += k * row_lp - _log2_factorial(k)
        return -log2prob

    return _mc_sample(n_rows, n_cols, model, trials, seed, reduce)


def iterative_bound(
    k_layers: int,
    n: int,
    m_list,
    model: EdgeModel,
    mc_trials: int = 2000,
    seed: int = 0,
) -> float:
    """Bound for compressing a network layer by layer with the multiset codec.

    ``k_layers`` counts node layers; ``m_list`` gives the column count of
    each of the k_layers - 1 weight matrices.  The per-layer multiplicity
    expectation is estimated by Monte Carlo; the final log2(N!) pays for
    keeping the output layer ordered.
    """
    m_list = list(m_list)
    if len(m_list) != k_layers - 1:
        raise ValidationError("expected one column count per weight matrix")
    probs = model.float_probabilities()
    total = 0.0
    mc_cache: dict[int, float] = {}
    for cols in m_list:
        if cols not in mc_cache:
            mc_cache[cols], _ = mc_log_multiplicity_term(n, cols, model, mc_trials, seed)
        total += plbg_bound(n, cols, probs) + mc_cache[cols]
    return total + _log2_factorial(n)


@dataclass(frozen=True)
class RecursionTable:
    """Solutions of the coupled length recursions up to n_max."""

    p: float
    x: tuple[float, ...]
    y: tuple[float, ...]


def _binomial_weights(n: int, p: float) -> np.ndarray:
    """C(n,k) p^k q^(n-k) for k=0..n, evaluated in log space."""
    k = np.arange(n + 1)
    lg = math.lgamma
    log_comb = np.array([lg(n + 1) - lg(i + 1) - lg(n - i + 1) for i in k])
    return np.exp(log_comb + k * math.log(p) + (n - k) * math.log(1.0 - p))


def xy_recursion(n_max: int, p: float) -> RecursionTable:
    """Solve the self-referential x_n recursion and the forward y_n recursion.

    x_0 = x_1 = 0; for n >= 2 the k in {0, n} terms are isolated:
        x_n = [ceil(log2(n+1)) + sum_{k=1}^{n-1} w_k (x_k + x_{n-k})] / (1 - p^n - q^n).
    y_0 = 0; y_{n+1} = n + sum_k w_k (y_k + y_{n-k}).
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("p must lie strictly between 0 and 1")
    if n_max < 0:
        raise ValidationError("n_max must be nonnegative")
    q = 1.0 - p
    x = [0.0, 0.0]
    for n in range(2, n_max + 1):
        w = _binomial_weights(n, p)
        interior = sum(w[k] * (x[k] + x[n - k]) for k in range(1, n))
        x.append((math.ceil(math.log2(n + 1)) + interior) / (1.0 - p**n - q**n))
    y = [0.0]
    for n in range(0, n_max):
        w = _binomial_weights(n, p)
        y.append(n + sum(w[k] * (y[k] + y[n - k]) for k in range(n + 1)))
    return RecursionTable(p=p, x=tuple(x[: n_max + 1]), y=tuple(y[: n_max + 1]))


@dataclass(frozen=True)
class BoundReport:
    """Named bound values for one (rows, cols, probs) configuration."""

    n_rows: int
    n_cols: int
    m: int
    h_bits: float
    plbg_bits: float
    table_bits: float
    ubg_bits: float
    ktree_bits: float
    ktree_slack: str
    queue_bits: float
    iterative_bits: float | None = None
    mc_entropy_bits: float | None = None
    mc_stderr: float | None = None
    mc_trials: int | None = None

    def to_text(self) -> str:
        lines = [
            f"rows {self.n_rows}",
            f"cols {self.n_cols}",
            f"colors {self.m}",
            f"entropy_bits_per_cell {self.h_bits:.6f}",
            f"plbg_bound_bits {self.plbg_bits:.3f}",
            f"table_bound_bits {self.table_bits:.3f}",
            f"ubg_bound_bits {self.ubg_bits:.3f}",
            f"ktree_bound_bits {self.ktree_bits:.3f}",
            f"ktree_slack {self.ktree_slack}",
            f"queue_bound_bits {self.queue_bits:.3f}",
        ]
        if self.iterative_bits is not None:
            lines.append(f"iterative_bound_bits {self.iterative_bits:.3f}")
        if self.mc_entropy_bits is not None:
            lines.append(f"mc_multiset_entropy_bits {self.mc_entropy_bits:.4f}")
            lines.append(f"mc_stderr_bits {self.mc_stderr:.4f}")
            lines.append(f"mc_trials {self.mc_trials}")
        return "\n".join(lines)


def compute_report(
    n_rows: int,
    n_cols: int,
    probs,
    k_layers: int = 2,
    mc_trials: int | None = None,
    seed: int = 0,
) -> BoundReport:
    probs = list(probs)
    m = len(probs) - 1
    if m < 1:
        raise ValidationError("need probabilities for color 0 and at least one color")
    # the binary-edge bounds use the probability that an edge exists at all
    p_edge = min(max(1.0 - probs[0], 1e-12), 1.0 - 1e-12)
    binary = (1.0 - p_edge, p_edge)
    report_args = dict(
        n_rows=n_rows,
        n_cols=n_cols,
        m=m,
        h_bits=entropy_H(probs),
        plbg_bits=plbg_bound(n_rows, n_cols, probs),
        table_bits=table_bound(n_rows, n_cols, probs),
        ubg_bits=ubg_bound(n_rows, binary),
        ktree_bits=ktree_bound(k_layers, n_rows, binary),
        ktree_slack="lower-estimate",
        queue_bits=queue_space_bound(n_rows, m),
    )
    if mc_trials:
        model = EdgeModel.from_probabilities(probs)
        mean, stderr = mc_multiset_entropy(n_rows, n_cols, model, mc_trials, seed)
        report_args.update(
            iterative_bits=iterative_bound(
                k_layers, n_rows, [n_cols] * (k_layers - 1), model, min(mc_trials, 4000), seed
            ),
            mc_entropy_bits=mean,
            mc_stderr=stderr,
            mc_trials=mc_trials,
        )
    return BoundReport(**report_args)
