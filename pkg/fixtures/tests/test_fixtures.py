import json

import numpy as np
import pytest

from qnnc_fixtures import datasets, mlp, quantize
from qnnc_fixtures.build import FixtureSpec, build_fixture, read_vectors
from qnnc_fixtures.qnnc_io import read_raw_container, write_raw_container


class TestQuantize:
    def test_grid_includes_zero_and_endpoints(self):
        grid = quantize.level_grid(17, 0.16)
        assert grid[0] == -0.16 and grid[-1] == 0.16
        assert 0.0 in grid
        assert np.allclose(np.diff(grid), 0.02)

    def test_even_levels_rejected(self):
        with pytest.raises(ValueError):
            quantize.level_grid(16, 0.16)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        w = rng.normal(0, 0.2, size=(20, 20))
        for levels in (17, 33, 65):
            once = quantize.quantize_weights(w, levels, 0.16)
            twice = quantize.quantize_weights(once, levels, 0.16)
            assert np.array_equal(once, twice)

    def test_clipping(self):
        w = np.array([[-5.0, 5.0]])
        q = quantize.quantize_weights(w, 17, 0.16)
        assert q.tolist() == [[-0.16, 0.16]]

    def test_color_zero_is_zero_weight(self):
        weights, color_of = quantize.codebook_and_colors(17, 0.16)
        assert weights[0] == 0.0
        assert color_of[0.0] == 0
        assert list(weights[1:]) == sorted(weights[1:])

    def test_all_zero_weights_map_to_color_zero(self):
        cells, codebook = quantize.colorize(np.zeros((4, 6)), 17, 0.16)
        assert not cells.any()
        assert codebook[0] == 0.0

    def test_colorize_round_trip(self):
        rng = np.random.default_rng(1)
        q = quantize.quantize_weights(rng.normal(0, 0.1, (8, 8)), 33, 0.16)
        cells, codebook = quantize.colorize(q, 33, 0.16)
        assert np.array_equal(codebook[cells], q)


class TestContainerIO:
    def test_write_read_round_trip(self):
        rng = np.random.default_rng(2)
        layers = []
        for rows, cols in [(5, 8), (3, 5)]:
            q = quantize.quantize_weights(rng.normal(0, 0.1, (rows, cols)), 17, 0.16)
            layers.append(quantize.colorize(q, 17, 0.16))
        blob = write_raw_container(layers)
        back = read_raw_container(blob)
        for (cells, weights), (cells2, weights2) in zip(layers, back):
            assert np.array_equal(cells, cells2)
            assert np.array_equal(weights, weights2)

    def test_header_fields(self):
        cells, weights = quantize.colorize(np.zeros((2, 3)), 17, 0.16)
        blob = write_raw_container([(cells, weights)])
        assert blob[:4] == b"QNNC"
        assert blob[4:6] == b"\x01\x00"  # version 1 little-endian
        assert blob[6] == 0  # raw mode


class TestMlp:
    def test_forward_shapes(self):
        weights = mlp.init_weights([6, 4, 3], seed=0)
        single = mlp.forward(weights, np.zeros(6))
        batch = mlp.forward(weights, np.zeros((5, 6)))
        assert single.shape == (3,) and batch.shape == (5, 3)

    def test_trains_blobs(self):
        x, y = datasets.synthetic_blobs(8, 3, seed=7)
        (xt, yt), (xv, yv) = datasets.train_test_split(x, y, 100)
        weights = mlp.train([8, 4, 3], xt, yt, seed=7, epochs=30)
        assert mlp.accuracy(weights, xv, yv) > 0.8

    def test_divergence_detected(self):
        x, y = datasets.synthetic_blobs(4, 2, seed=0, n_per_class=40)
        with np.errstate(all="ignore"), pytest.raises(mlp.TrainingDiverged):
            mlp.train([4, 3, 2], x, y, seed=0, epochs=30, lr=1e9)


class TestBuildFixture:
    def test_bundle_contents(self, tmp_path):
        spec = FixtureSpec(dataset="synthetic-blobs", dims=(8, 4, 3), levels=17, seed=7)
        report = build_fixture(spec, tmp_path)
        assert (tmp_path / "model.qnnc").exists()
        inputs = read_vectors(tmp_path / "inputs.txt")
        expected = read_vectors(tmp_path / "expected.txt")
        assert inputs.shape == (100, 8) and expected.shape == (100, 3)
        assert report["level_spacing"] == pytest.approx(0.02)
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["quantized_test_accuracy"] == report["quantized_test_accuracy"]

    def test_expected_matches_own_container(self, tmp_path):
        # parse the exported container and re-run the dense pass on it
        spec = FixtureSpec(dataset="synthetic-blobs", dims=(8, 4, 3), levels=33, seed=1)
        build_fixture(spec, tmp_path)
        layers = read_raw_container((tmp_path / "model.qnnc").read_bytes())
        weights = [codebook[cells] for cells, codebook in layers]
        inputs = read_vectors(tmp_path / "inputs.txt")
        expected = read_vectors(tmp_path / "expected.txt")
        np.testing.assert_allclose(mlp.forward(weights, inputs), expected, atol=1e-12)

    def test_even_levels_rejected(self):
        with pytest.raises(ValueError):
            FixtureSpec(dataset="synthetic-blobs", dims=(8, 4, 3), levels=16)
