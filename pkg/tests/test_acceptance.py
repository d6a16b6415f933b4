"""Acceptance suite: one test per primary criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one printed
PASS line per criterion with the measured values.  The cross-package
fixture criterion (trained/quantized networks produced by the exporter
package) lives in fixtures/tests/, next to the exporter.
"""

import math
import time

import numpy as np
import pytest

from qnnc.bounds import mc_multiset_entropy, plbg_bound, ubg_bound, xy_recursion
from qnnc.coder import C_TERM_BITS
from qnnc.deepcodec import (
    compress_network_plbg,
    dense_forward,
    infer_network,
)
from qnnc.model import ColorMatrix, EdgeModel, empirical_model
from qnnc.plbg import multiset_log_prob, plbg_decode, plbg_encode
from qnnc.randgen import GenSpec, gen_codebook, gen_matrix, gen_network
from qnnc.succinct import ActivationKind, PhaseTimer, infer_layer, queue_space_bound
from qnnc.ubg import BinaryAdjacency, bipartite_iso, ubg_decode, ubg_encode

FAIR = EdgeModel((1, 1))
LOG2_FACT_16 = math.lgamma(17) / math.log(2)


def sorted_rows(cells: np.ndarray):
    return sorted(map(tuple, cells.tolist()))


# ---------------------------------------------------------------------------
# shared corpora (built once per session)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def roundtrip_corpus():
    """500 seeded random matrices, N and M in 1..32, m in {1, 4, 16},
    with their encodings, decodings, and the elapsed wall time."""
    rng = np.random.default_rng(20240501)
    instances = []
    t0 = time.perf_counter()
    for _ in range(500):
        n = int(rng.integers(1, 33))
        cols = int(rng.integers(1, 33))
        m = int(rng.choice([1, 4, 16]))
        cells = rng.integers(0, m + 1, size=(n, cols))
        mat = ColorMatrix.from_array(cells, m=m)
        model = empirical_model(mat)
        stream = plbg_encode(mat, model)
        decoded = plbg_decode(stream, model, cols)
        instances.append((mat, model, stream, decoded))
    elapsed = time.perf_counter() - t0
    return instances, elapsed


@pytest.fixture(scope="module")
def network_corpus():
    """200 seeded networks with 2..4 weight matrices, widths <= 32,
    m <= 16: compressed containers, inference outputs, oracle outputs,
    queue metrics, and a direct stream-preservation check on layer 0."""
    rng = np.random.default_rng(20240502)
    results = []
    for trial in range(200):
        k_matrices = int(rng.integers(2, 5))
        widths = [int(w) for w in rng.integers(1, 33, size=k_matrices + 1)]
        m = int(rng.integers(1, 17))
        probs = tuple(np.full(m + 1, 1.0 / (m + 1)))
        net = gen_network(
            GenSpec(rows=1, cols=1, probs=probs, seed=trial, kind="network"), widths
        )
        container = compress_network_plbg(net)
        x = rng.uniform(-1.0, 1.0, size=net.input_width)
        metrics = []
        y = infer_network(
            container, x, ActivationKind.RELU, ActivationKind.IDENTITY, metrics_out=metrics
        )
        want = dense_forward(net, x, ActivationKind.RELU, ActivationKind.IDENTITY)
        first = container.layers[0]
        if container.num_matrices > 1:
            _, stream_out, _ = infer_layer(
                first.payload, first.model(), first.codebook(), x, ActivationKind.RELU
            )
            streams_identical = (
                stream_out.data == first.payload.data
                and stream_out.bit_length == first.payload.bit_length
            )
        else:
            streams_identical = True
        results.append(
            {
                "container": container,
                "y": y,
                "want": want,
                "metrics": metrics,
                "streams_identical": streams_identical,
            }
        )
    return results


@pytest.fixture(scope="module")
def table_scale_bench():
    """Single-matrix benchmark at the two reported shapes, m=16, with the
    empirical model; phases instrumented; wall time recorded."""
    out = {}
    t0 = time.perf_counter()
    for cols, rows in [(784, 50), (200, 100)]:
        spec = GenSpec(rows=rows, cols=cols, probs=tuple([1.0 / 17] * 17), seed=424242)
        rng = spec.rng()
        mat = gen_matrix(spec, rng)
        model = empirical_model(mat)
        stream = plbg_encode(mat, model)
        probs = [c / model.total for c in model.counts]
        h = -sum(p * math.log2(p) for p in probs if p > 0)
        bound = cols * rows * h - rows * math.log2(rows)
        timer = PhaseTimer()
        x = rng.uniform(-1.0, 1.0, size=cols)
        y, stream_out, metrics = infer_layer(
            stream, model, gen_codebook(16, rng), x, timing=timer
        )
        assert stream_out.data == stream.data
        out[(cols, rows)] = {
            "observed": stream.payload_bits,
            "bound": bound,
            "timer": timer,
            "metrics": metrics,
        }
    out["elapsed"] = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_lossless_round_trip(roundtrip_corpus):
    """500 random matrices round-trip exactly up to row order, under 30 s."""
    instances, elapsed = roundtrip_corpus
    for mat, _, _, decoded in instances:
        assert sorted_rows(decoded.cells) == sorted_rows(mat.cells)
    assert elapsed < 30.0
    print(f"\ncriterion 01 PASS - 500/500 exact round trips in {elapsed:.1f}s (< 30s)")


def test_criterion_02_rate_vs_oracle(roundtrip_corpus):
    """Every payload within 64 bits of its ideal codelength; mean overhead
    at 8x8 binary below 4 bits over 1000 instances."""
    instances, _ = roundtrip_corpus
    worst = -math.inf
    for mat, model, stream, _ in instances:
        slack = stream.payload_bits - multiset_log_prob(mat, model)
        worst = max(worst, slack)
        assert slack <= C_TERM_BITS
    rng = np.random.default_rng(20240503)
    overhead = []
    for _ in range(1000):
        mat = ColorMatrix.from_array(rng.integers(0, 2, size=(8, 8)), m=1)
        overhead.append(plbg_encode(mat, FAIR).payload_bits - multiset_log_prob(mat, FAIR))
    mean_overhead = float(np.mean(overhead))
    assert mean_overhead < 4.0
    print(
        f"\ncriterion 02 PASS - worst per-instance slack {worst:.2f} <= {C_TERM_BITS} bits; "
        f"mean 8x8 overhead {mean_overhead:+.2f} < 4 bits"
    )


def test_criterion_03_permutation_saving():
    """Mean payload at 16x16 binary p=1/2 beats the 256-bit labeled ideal
    by about log2(16!), within 8 bits of slack."""
    rng = np.random.default_rng(20240504)
    payloads = [
        plbg_encode(ColorMatrix.from_array(rng.integers(0, 2, size=(16, 16)), m=1), FAIR).payload_bits
        for _ in range(300)
    ]
    mean_payload = float(np.mean(payloads))
    threshold = 256.0 - LOG2_FACT_16 + 8.0
    assert mean_payload < threshold
    print(
        f"\ncriterion 03 PASS - mean payload {mean_payload:.1f} < {threshold:.1f} bits "
        f"(labeled ideal 256, predicted saving {LOG2_FACT_16:.1f})"
    )


def test_criterion_04_network_inference_correctness(network_corpus):
    """200 random multi-layer networks: compressed inference matches the
    dense oracle to 1e-9, argmax agrees 200/200, streams preserved."""
    argmax_hits = 0
    for res in network_corpus:
        np.testing.assert_allclose(res["y"], res["want"], rtol=0.0, atol=1e-9)
        if int(np.argmax(res["y"])) == int(np.argmax(res["want"])):
            argmax_hits += 1
        assert res["streams_identical"]
    assert argmax_hits == len(network_corpus) == 200
    print(
        "\ncriterion 04 PASS - 200/200 networks match the dense oracle "
        "(<= 1e-9 per component), argmax 200/200, streams bit-identical"
    )


def test_criterion_05_succinct_dynamic_space(network_corpus):
    """Measured queue bits never exceed 2N(m+1) + 4N(m+1)log2((m+2)/(m+1));
    growth is at most linear: max bits at N=64 within 8x of N=8."""
    checked = 0
    for res in network_corpus:
        container = res["container"]
        for rec, met in zip(container.layers[:-1], res["metrics"]):
            assert met.max_bits <= queue_space_bound(rec.rows, rec.m)
            checked += 1
    maxima = {}
    for n in (8, 64):
        rng = np.random.default_rng(20240505)
        worst = 0
        for _ in range(5):
            spec = GenSpec(
                rows=n, cols=16, probs=tuple([1.0 / 17] * 17), seed=int(rng.integers(1 << 30))
            )
            r2 = spec.rng()
            mat = gen_matrix(spec, r2)
            model = empirical_model(mat)
            _, _, met = infer_layer(
                plbg_encode(mat, model), model, gen_codebook(16, r2), r2.uniform(-1, 1, 16)
            )
            worst = max(worst, met.max_bits)
        maxima[n] = worst
    assert maxima[64] <= 8 * maxima[8]
    print(
        f"\ncriterion 05 PASS - {checked} layer runs under the space bound; "
        f"max queue bits N=64/N=8 = {maxima[64]}/{maxima[8]} = "
        f"{maxima[64] / maxima[8]:.2f} <= 8"
    )


def test_criterion_06_ubg_invariance_and_round_trip():
    """Unlabeled codec: bit-identical under 50 rearrangements per graph
    (20 graphs, N=12); decode isomorphic to input for all N <= 8."""
    rng = np.random.default_rng(20240506)
    for _ in range(20):
        g = BinaryAdjacency.from_array(rng.integers(0, 2, size=(12, 12)))
        ref = ubg_encode(g, FAIR)
        for _ in range(50):
            rows, cols = rng.permutation(12), rng.permutation(12)
            other = ubg_encode(
                BinaryAdjacency.from_array(g.cells[np.ix_(rows, cols)]), FAIR
            )
            assert other.data == ref.data and other.bit_length == ref.bit_length
    checked = 0
    for n in range(1, 9):
        for p in (0.2, 0.5, 0.8):
            for _ in range(10):
                g = BinaryAdjacency.from_array((rng.random((n, n)) < p).astype(int))
                rep = ubg_decode(ubg_encode(g, FAIR), FAIR)
                assert bipartite_iso(rep, g)
                checked += 1
    print(
        f"\ncriterion 06 PASS - 20x50 rearrangements bit-identical; "
        f"{checked} exhaustive-oracle round trips isomorphic (N <= 8)"
    )


def test_criterion_07_ubg_saving_vs_plbg():
    """On 300 shared graphs (N=16, p=1/2) the two-tree codec beats the
    row-multiset codec by roughly log2(16!) bits."""
    rng = np.random.default_rng(20240507)
    gaps = []
    for _ in range(300):
        cells = rng.integers(0, 2, size=(16, 16))
        ubg_bits = ubg_encode(BinaryAdjacency.from_array(cells), FAIR).payload_bits
        plbg_bits = plbg_encode(ColorMatrix.from_array(cells, m=1), FAIR).payload_bits
        gaps.append(plbg_bits - ubg_bits)
    gap = float(np.mean(gaps))
    low, high = 0.25 * LOG2_FACT_16, 2.0 * LOG2_FACT_16
    assert low <= gap <= high
    print(
        f"\ncriterion 07 PASS - mean saving {gap:.1f} bits in [{low:.1f}, {high:.1f}] "
        f"(predicted about {LOG2_FACT_16:.1f})"
    )


def test_criterion_08_bound_calculators():
    """Recursion base cases and closed-form identities; Monte-Carlo
    multiset entropy within 3 standard errors of the exact 1.5 bits."""
    table = xy_recursion(2, 0.5)
    assert table.x[0] == 0.0 and table.x[1] == 0.0
    assert table.x[2] == pytest.approx(4.0, abs=1e-12)
    assert table.y[0] == 0.0 and table.y[1] == 0.0
    assert table.y[2] == pytest.approx(1.0, abs=1e-12)
    for n in range(1, 101):
        gap = plbg_bound(n, n, [0.5, 0.5]) - ubg_bound(n, [0.5, 0.5])
        assert abs(gap - math.lgamma(n + 1) / math.log(2)) <= 1e-9
    mean, stderr = mc_multiset_entropy(2, 1, FAIR, trials=100000, seed=20240508)
    assert abs(mean - 1.5) <= 3 * stderr
    print(
        f"\ncriterion 08 PASS - x2=4, y2=1, gap identity to 1e-9 for N<=100; "
        f"MC entropy {mean:.4f} within 3 SE ({stderr:.4f}) of 1.5"
    )


def test_criterion_09_table_scale_methodology(table_scale_bench):
    """Observed payload within +-5% of MNH(p) - N log2 N at (784,50) and
    (200,100) with m=16, under 5 minutes."""
    details = []
    for shape in [(784, 50), (200, 100)]:
        rec = table_scale_bench[shape]
        ratio = rec["observed"] / rec["bound"]
        assert 0.95 <= ratio <= 1.05
        details.append(f"{shape[0]}x{shape[1]}: {rec['observed']}/{rec['bound']:.0f} = {ratio:.4f}")
    assert table_scale_bench["elapsed"] < 300.0
    print(
        f"\ncriterion 09 PASS - {'; '.join(details)}; "
        f"elapsed {table_scale_bench['elapsed']:.1f}s < 300s"
    )


def test_criterion_10_timing_breakdown(table_scale_bench):
    """Table construction plus arithmetic decode/re-encode take the
    majority of compressed-inference time on the 784x50 case."""
    timer = table_scale_bench[(784, 50)]["timer"]
    pct = timer.percentages()
    combined = pct["pmf"] + pct["coding"]
    assert combined > 50.0
    print(
        f"\ncriterion 10 PASS - pmf {pct['pmf']:.1f}% + coding {pct['coding']:.1f}% "
        f"= {combined:.1f}% > 50% of compressed inference"
    )
