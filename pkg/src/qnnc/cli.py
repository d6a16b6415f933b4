"""Command-line surface: compress, decompress, infer, entropy, bench, gen.

``bench`` reproduces the benchmark methodology end to end: sample a
matrix, compress it against its empirical model, run compressed
inference with queue and phase instrumentation, verify against the dense
product, and append one CSV row per trial.  Alongside the CSV it renders
two PNG figures (rate versus bound, queue occupancy) unless figures are
disabled.

Exit codes: 0 success, 1 usage error, 2 format/validation error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bounds import compute_report, table_bound
from .deepcodec import (
    Mode,
    NetworkContainer,
    QuantizedNetwork,
    compress_network_ktree,
    compress_network_plbg,
    container_from_network,
    decompress_network,
    infer_network,
)
from .errors import QnncError, ValidationError, VerificationError
from .model import empirical_model
from .plbg import multiset_log_prob, plbg_encode
from .randgen import GENERATOR_NAME, GenSpec, gen_codebook, gen_matrix, gen_network
from .succinct import ActivationKind, PhaseTimer, QueueMetrics, infer_layer, queue_space_bound


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


@dataclass
class BenchRow:
    """One benchmark trial, mirroring the reported table columns."""

    trial: int
    shape: str
    m: int
    table_bound_bits: float
    ideal_bits: float
    observed_bits: int
    avg_queue_bits: float
    max_queue_bits: int
    compressed_infer_s: float
    uncompressed_infer_s: float
    pct_pmf: float
    pct_arith: float
    generator: str
    seed: int


def _parse_probs(text: str) -> tuple[float, ...]:
    try:
        probs = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse probabilities {text!r}") from None
    if len(probs) < 2:
        raise ValidationError("need at least two comma-separated probabilities")
    return probs


def _read_vector(path: str) -> np.ndarray:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    values = []
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValidationError(f"{path}:{i}: not a number: {line!r}") from None
    if not values:
        raise ValidationError(f"{path} holds no numbers")
    return np.asarray(values, dtype=np.float64)


def _read_container(path: str) -> NetworkContainer:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    return NetworkContainer.parse(blob)


def _write_bytes(path: str, blob: bytes) -> None:
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from None


def _softmax(y: np.ndarray) -> np.ndarray:
    z = np.exp(y - y.max())
    return z / z.sum()


def cmd_gen(args) -> int:
    probs = _parse_probs(args.probs)
    if args.layers:
        widths = [int(t) for t in args.layers.split(",")]
        spec = GenSpec(rows=1, cols=1, probs=probs, seed=args.seed, kind="network")
        net = gen_network(spec, widths)
    else:
        spec = GenSpec(rows=args.rows, cols=args.cols, probs=probs, seed=args.seed)
        rng = spec.rng()
        mat = gen_matrix(spec, rng)
        net = QuantizedNetwork(((mat, gen_codebook(spec.m, rng)),))
    container = container_from_network(net)
    _write_bytes(args.out, container.serialize())
    widths = "x".join(str(w) for w in net.widths())
    print(f"wrote {args.out}: raw container, widths {widths}, seed {args.seed} ({GENERATOR_NAME})")
    return 0


def cmd_compress(args) -> int:
    container = _read_container(getattr(args, "in"))
    if container.mode != Mode.RAW:
        raise ValidationError("compress expects a raw-mode container")
    net = decompress_network(container)
    if args.mode == "plbg":
        compressed = compress_network_plbg(net)
    else:
        compressed = compress_network_ktree(net)
    _write_bytes(args.out, compressed.serialize())
    print("layer,shape,m,table_bound_bits,payload_bits,stored")
    for idx, rec in enumerate(compressed.layers):
        probs = [c / sum(rec.counts) for c in rec.counts]
        bound = table_bound(rec.rows, rec.cols, probs)
        if compressed.mode == Mode.PLBG:
            stored = "raw" if idx == compressed.num_matrices - 1 else "stream"
        else:
            stored = "tree-stream" if idx == 0 else "joint"
        print(
            f"{idx},{rec.rows}x{rec.cols},{rec.m},{bound:.1f},"
            f"{rec.payload.bit_length},{stored}"
        )
    raw_bits = sum(8 * len(rec.payload.data) for rec in container.layers)
    print(f"total payload: {compressed.payload_bits()} bits (raw stores {raw_bits})")
    return 0


def cmd_decompress(args) -> int:
    container = _read_container(getattr(args, "in"))
    net = decompress_network(container)
    _write_bytes(args.out, container_from_network(net).serialize())
    print(f"wrote {args.out}: raw container, widths {'x'.join(map(str, net.widths()))}")
    return 0


def cmd_infer(args) -> int:
    container = _read_container(args.model)
    x = _read_vector(args.input)
    activation = ActivationKind.from_name(args.activation)
    final = ActivationKind.IDENTITY
    metrics: list[QueueMetrics] = []
    y = infer_network(container, x, activation, final, metrics_out=metrics)
    if args.final == "softmax":
        y = _softmax(y)
    if args.argmax:
        print(int(np.argmax(y)))
    else:
        for v in y:
            print(f"{v:.12g}")
    if args.stats:
        for idx, met in enumerate(metrics):
            rec = container.layers[idx]
            bound = queue_space_bound(rec.rows, rec.m)
            print(
                f"# layer {idx}: avg_queue_bits={met.avg_bits:.1f} "
                f"max_queue_bits={met.max_bits} bound={bound:.1f} "
                f"entries_max={met.entries_max}",
                file=sys.stderr,
            )
    return 0


def cmd_entropy(args) -> int:
    report = compute_report(
        args.rows,
        args.cols,
        _parse_probs(args.probs),
        k_layers=args.k_layers,
        mc_trials=args.mc_trials,
        seed=args.seed,
    )
    print(report.to_text())
    return 0


def _bench_trial(trial: int, spec: GenSpec, rng, verify_tol: float) -> BenchRow:
    mat = gen_matrix(spec, rng)
    codebook = gen_codebook(spec.m, rng)
    model = empirical_model(mat)
    probs = [c / model.total for c in model.counts]
    stream = plbg_encode(mat, model)
    x = rng.uniform(-1.0, 1.0, size=mat.cols)

    timer = PhaseTimer()
    t0 = time.perf_counter()
    y, stream_out, metrics = infer_layer(
        stream, model, codebook, x, ActivationKind.IDENTITY, timing=timer
    )
    compressed_s = time.perf_counter() - t0
    if stream_out.data != stream.data or stream_out.bit_length != stream.bit_length:
        raise VerificationError(f"trial {trial}: re-encoded stream diverged")

    # dense reference against the canonical-order matrix
    order = np.lexsort(mat.cells.T[::-1])
    weights = codebook.as_array()[mat.cells[order]]
    t0 = time.perf_counter()
    reference = weights @ x
    uncompressed_s = time.perf_counter() - t0
    if not np.allclose(y, reference, rtol=0.0, atol=verify_tol):
        raise VerificationError(f"trial {trial}: compressed inference diverged from dense product")

    pct = timer.percentages()
    return BenchRow(
        trial=trial,
        shape=f"{mat.rows}x{mat.cols}",
        m=mat.m,
        table_bound_bits=table_bound(mat.rows, mat.cols, probs),
        ideal_bits=multiset_log_prob(mat, model),
        observed_bits=stream.payload_bits,
        avg_queue_bits=metrics.avg_bits,
        max_queue_bits=metrics.max_bits,
        compressed_infer_s=compressed_s,
        uncompressed_infer_s=uncompressed_s,
        pct_pmf=pct["pmf"],
        pct_arith=pct["coding"],
        generator=GENERATOR_NAME,
        seed=spec.seed,
    )


def _bench_figures(rows: list[BenchRow], csv_path: Path, n_rows: int, m: int) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    bound = [r.table_bound_bits for r in rows]
    observed = [r.observed_bits for r in rows]

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    ax.scatter(bound, observed, s=14, alpha=0.7, label="trials")
    lim = [min(min(bound), min(observed)), max(max(bound), max(observed))]
    ax.plot(lim, lim, "k--", linewidth=1, label="observed = bound")
    ax.set_xlabel("table bound  MNH(p) - N log2 N  [bits]")
    ax.set_ylabel("observed payload [bits]")
    ax.set_title("Observed rate vs. bound")
    ax.legend()
    fig.tight_layout()
    rate_path = csv_path.with_suffix(".rate.png")
    fig.savefig(rate_path, dpi=120)
    plt.close(fig)
    paths.append(rate_path)

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    trials = [r.trial for r in rows]
    ax.plot(trials, [r.max_queue_bits for r in rows], ".-", label="max queue bits")
    ax.plot(trials, [r.avg_queue_bits for r in rows], ".-", label="avg queue bits")
    ax.axhline(queue_space_bound(n_rows, m), color="k", linestyle="--", label="space bound")
    ax.set_xlabel("trial")
    ax.set_ylabel("coded queue size [bits]")
    ax.set_title("Dynamic space during compressed inference")
    ax.legend()
    fig.tight_layout()
    queue_path = csv_path.with_suffix(".queue.png")
    fig.savefig(queue_path, dpi=120)
    plt.close(fig)
    paths.append(queue_path)
    return paths


def cmd_bench(args) -> int:
    probs = _parse_probs(args.probs)
    spec = GenSpec(rows=args.rows, cols=args.cols, probs=probs, seed=args.seed)
    rng = spec.rng()
    rows: list[BenchRow] = []
    for trial in range(args.trials):
        rows.append(_bench_trial(trial, spec, rng, verify_tol=1e-9))
    csv_path = Path(args.csv)
    try:
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0]).keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow(asdict(row))
    except OSError as exc:
        raise ValidationError(f"cannot write {args.csv}: {exc}") from None
    mean_obs = float(np.mean([r.observed_bits for r in rows]))
    mean_bound = float(np.mean([r.table_bound_bits for r in rows]))
    print(f"wrote {csv_path} ({len(rows)} trials)")
    print(f"mean observed {mean_obs:.1f} bits, mean table bound {mean_bound:.1f} bits")
    print(f"mean max queue {np.mean([r.max_queue_bits for r in rows]):.1f} bits "
          f"(bound {queue_space_bound(args.rows, spec.m):.1f})")
    if args.figures:
        for p in _bench_figures(rows, csv_path, args.rows, spec.m):
            print(f"wrote {p}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="qnnc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic raw container")
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--probs", required=True, help="comma list p0,p1,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", help="width chain like 8,4,3 (overrides rows/cols)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compress", help="compress a raw container")
    p.add_argument("--in", required=True)
    p.add_argument("--mode", choices=["plbg", "ktree"], default="plbg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="expand a container back to raw")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("infer", help="run inference from a container")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="one number per line")
    p.add_argument("--activation", default="identity", choices=["identity", "relu", "sigmoid"])
    p.add_argument("--final", default="identity", choices=["identity", "softmax"])
    p.add_argument("--argmax", action="store_true")
    p.add_argument("--stats", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("entropy", help="print bound report for a configuration")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--k-layers", type=int, default=2)
    p.add_argument("--mc-trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("bench", help="generate/compress/infer/verify loop, CSV + figures")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3
    except QnncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
