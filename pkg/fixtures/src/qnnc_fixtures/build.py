"""Build fixture bundles: trained, quantized, exported, cross-checkable.

A bundle directory holds:

* ``model.qnnc``        raw container of the quantized network
* ``inputs.txt``        test vectors, one comma-separated vector per line
* ``expected.txt``      exporter-side dense logits for each input, same layout
* ``report.json``       dims, quantization config, accuracies, seed

Expected outputs are computed by this package's own forward pass on the
quantized weights (ReLU hidden layers, raw logits), so any disagreement
on the codec side points at a real incompatibility.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datasets, mlp, quantize
from .qnnc_io import write_raw_container

CLIP = 0.16


@dataclass(frozen=True)
class FixtureSpec:
    dataset: str  # synthetic-blobs | mnist-small
    dims: tuple[int, ...]
    levels: int  # odd, so 0 is a level
    seed: int = 0
    n_test: int = 100

    def __post_init__(self) -> None:
        if len(self.dims) < 2:
            raise ValueError("need input and output widths at least")
        if self.levels % 2 == 0 or self.levels < 3:
            raise ValueError("level count must be odd so color 0 can be the zero weight")


def export_network(float_weights, levels: int) -> tuple[bytes, list[np.ndarray]]:
    """Quantize every matrix and serialize the raw container."""
    layers = []
    quantized = []
    for w in float_weights:
        q = quantize.quantize_weights(w, levels, CLIP)
        cells, codebook = quantize.colorize(q, levels, CLIP)
        layers.append((cells, codebook))
        quantized.append(q)
    return write_raw_container(layers), quantized


def build_fixture(spec: FixtureSpec, outdir: Path) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    x, y = datasets.load(spec.dataset, spec.dims[0], spec.dims[-1], spec.seed)
    (x_train, y_train), (x_test, y_test) = datasets.train_test_split(x, y, spec.n_test)

    weights = mlp.train(
        list(spec.dims), x_train, y_train, seed=spec.seed, epochs=100, weight_range=CLIP
    )
    train_acc = mlp.accuracy(weights, x_train, y_train)
    test_acc = mlp.accuracy(weights, x_test, y_test)

    blob, quantized = export_network(weights, spec.levels)
    quant_test_acc = mlp.accuracy(quantized, x_test, y_test)
    logits = mlp.forward(quantized, x_test)

    (outdir / "model.qnnc").write_bytes(blob)
    _write_vectors(outdir / "inputs.txt", x_test)
    _write_vectors(outdir / "expected.txt", logits)
    report = {
        "dataset": spec.dataset,
        "dims": list(spec.dims),
        "levels": spec.levels,
        "clip": CLIP,
        "level_spacing": 2 * CLIP / (spec.levels - 1),
        "seed": spec.seed,
        "n_test": spec.n_test,
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "quantized_test_accuracy": quant_test_acc,
    }
    (outdir / "report.json").write_text(json.dumps(report, indent=2))
    return report


def _write_vectors(path: Path, rows: np.ndarray) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in np.atleast_2d(rows):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_vectors(path: Path) -> np.ndarray:
    return np.array(
        [
            [float(tok) for tok in line.split(",")]
            for line in Path(path).read_text().splitlines()
            if line.strip()
        ]
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qnnc-fixtures", description=__doc__)
    parser.add_argument("--dataset", default="synthetic-blobs",
                        choices=["synthetic-blobs", "mnist-small"])
    parser.add_argument("--dims", default="8,4,3", help="width chain, e.g. 64,16,16,10")
    parser.add_argument("--levels", type=int, default=17)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-test", type=int, default=100)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        spec = FixtureSpec(
            dataset=args.dataset,
            dims=tuple(int(t) for t in args.dims.split(",")),
            levels=args.levels,
            seed=args.seed,
            n_test=args.n_test,
        )
        report = build_fixture(spec, Path(args.out))
    except (ValueError, mlp.TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
