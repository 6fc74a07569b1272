import math

import numpy as np
import pytest

from odeflow.errors import (
    InvalidInputError,
    UndefinedCorrelationError,
    UnsupportedAnalysisError,
    ZeroMatrixError,
)
from odeflow.fieldflow import AffineField, ConstantField, NetField, NetSpec
from odeflow.numerics import Rng
from odeflow.spectral import (
    SpectralReport,
    affine_of,
    default_truncation,
    eigen_report,
    read_spectral_csv,
    singular_entropy,
    spearman,
    write_spectral_csv,
)


class TestSingularEntropy:
    def test_identity_gives_ln_k(self):
        for k in (1, 2, 3, 4):
            h = singular_entropy(np.eye(4), k)
            assert abs(h - math.log(k)) <= 1e-12

    def test_frozen_two_value_spectrum(self):
        # diag(3, 1), k=2: weights (0.75, 0.25)
        h = singular_entropy(np.diag([3.0, 1.0]), 2)
        assert h == pytest.approx(0.5623351446188083, abs=1e-12)

    def test_frozen_four_value_spectrum(self):
        # diag(2, 1, 1, 0), k=4: weights (0.5, 0.25, 0.25, 0) -> 1.5 ln 2
        h = singular_entropy(np.diag([2.0, 1.0, 1.0, 0.0]), 4)
        assert h == pytest.approx(1.5 * math.log(2.0), abs=1e-12)

    def test_scale_invariance(self):
        rng = Rng(21)
        a = rng.normal((5, 5))
        base = singular_entropy(a, 3)
        for c in (1e-6, 3.7, 1e6):
            assert abs(singular_entropy(c * a, 3) - base) <= 1e-12

    def test_rank_one_is_zero(self):
        u = np.array([1.0, 2.0, -1.0])
        a = np.outer(u, u)
        assert singular_entropy(a, 3) <= 1e-12

    def test_rotation_is_maximal(self):
        th = 0.7
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert singular_entropy(rot, 2) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_default_k_is_quarter_dimension(self):
        a = np.diag([2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        assert singular_entropy(a) == singular_entropy(a, 2)

    def test_rejects_bad_k(self):
        with pytest.raises(InvalidInputError):
            singular_entropy(np.eye(3), 0)
        with pytest.raises(InvalidInputError):
            singular_entropy(np.eye(3), 4)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ZeroMatrixError):
            singular_entropy(np.zeros((3, 3)), 2)


class TestDefaultTruncation:
    def test_quarter_rounded_up(self):
        assert [default_truncation(d) for d in (1, 2, 4, 5, 8, 9, 16)] == [1, 1, 1, 2, 2, 3, 4]


class TestAffineOf:
    def test_affine_field_returns_copies(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([5.0, 6.0])
        f = AffineField(a, b)
        got_a, got_b = affine_of(f)
        got_a[0, 0] = 99.0
        got_b[0] = 99.0
        assert f.a[0, 0] == 1.0 and f.b[0] == 5.0

    def test_depth_one_net_exposes_its_layer(self):
        spec = NetSpec(dim=2, depth=1, width=2)
        params = np.arange(6, dtype=np.float64)
        a, b = affine_of(NetField(spec, params))
        assert np.array_equal(a, params[:4].reshape(2, 2))
        assert np.array_equal(b, params[4:])

    def test_deeper_nets_rejected(self):
        spec = NetSpec(dim=2, depth=2, width=3)
        f = NetField(spec, np.zeros(spec.param_count))
        with pytest.raises(UnsupportedAnalysisError):
            affine_of(f)

    def test_constant_field_rejected(self):
        with pytest.raises(UnsupportedAnalysisError):
            affine_of(ConstantField(np.ones(2)))


class TestEigenReport:
    def test_fast_slow_split(self):
        r = eigen_report(np.diag([10.0, 1.0, 0.05]), fast_threshold=5.0, k=2)
        assert r.n_fast == 1
        assert r.n_slow == 1
        assert np.allclose(r.eig_magnitudes, [10.0, 1.0, 0.05])

    def test_magnitudes_descend(self):
        r = eigen_report(Rng(4).normal((6, 6)))
        assert np.all(np.diff(r.eig_magnitudes) <= 1e-15)

    def test_entropy_matches_standalone(self):
        a = Rng(9).normal((4, 4))
        r = eigen_report(a, k=3)
        assert r.h_svd == pytest.approx(singular_entropy(a, 3), abs=1e-15)
        assert r.k == 3 and r.singular_values.shape == (3,)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            eigen_report(np.zeros((2, 3)))
        with pytest.raises(InvalidInputError):
            eigen_report(np.eye(2), fast_threshold=1.0)
        with pytest.raises(ZeroMatrixError):
            eigen_report(np.zeros((2, 2)))

    def test_report_guards(self):
        with pytest.raises(InvalidInputError):
            SpectralReport(
                attribute=0,
                eig_magnitudes=np.ones(2),
                n_fast=0,
                n_slow=0,
                fast_threshold=5.0,
                h_svd=0.0,
                k=2,
                singular_values=np.ones(1),
            )
        with pytest.raises(InvalidInputError):
            SpectralReport(
                attribute=0,
                eig_magnitudes=np.ones(2),
                n_fast=0,
                n_slow=0,
                fast_threshold=5.0,
                h_svd=math.log(2.0) + 1e-6,
                k=2,
                singular_values=np.ones(2),
            )


class TestSpearman:
    def test_perfect_and_reversed(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        assert spearman(xs, [10.0, 20.0, 30.0, 40.0]) == pytest.approx(1.0, abs=1e-15)
        assert spearman(xs, [4.0, 3.0, 2.0, 1.0]) == pytest.approx(-1.0, abs=1e-15)

    def test_frozen_partial_order(self):
        assert spearman([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5, abs=1e-15)

    def test_tie_uses_average_ranks(self):
        # ranks x: (1.5, 1.5, 3), y: (1, 2, 3) -> 1.5/sqrt(1.5*2)
        got = spearman([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        assert got == pytest.approx(1.5 / math.sqrt(3.0), abs=1e-15)

    def test_monotone_transform_invariance(self):
        rng = Rng(13)
        xs = rng.normal(20)
        ys = rng.normal(20)
        assert spearman(np.exp(xs), ys) == pytest.approx(spearman(xs, ys), abs=1e-12)

    def test_constant_input_rejected(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_shape_validation(self):
        with pytest.raises(InvalidInputError):
            spearman([1.0], [2.0])
        with pytest.raises(InvalidInputError):
            spearman([1.0, 2.0], [1.0, 2.0, 3.0])


class TestSpectralCsv:
    def _reports(self):
        return [
            eigen_report(np.diag([10.0, 1.0, 0.05]), attribute=0, k=2),
            eigen_report(Rng(2).normal((2, 2)), attribute=1, k=1),
        ]

    def test_round_trip_values(self, tmp_path):
        path = tmp_path / "spec.csv"
        reports = self._reports()
        write_spectral_csv(path, reports)
        rows = read_spectral_csv(path)
        assert len(rows) == 2
        for row, rep in zip(rows, reports):
            assert row["attribute"] == rep.attribute
            assert row["k"] == rep.k
            assert row["h_svd"] == pytest.approx(rep.h_svd, rel=1e-8)
            # eigenvalue columns are padded with zeros out to the fixed width
            assert len(row["top_eigs"]) == 8
            assert row["top_eigs"][3] == 0.0

    def test_writes_are_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_spectral_csv(a, self._reports())
        write_spectral_csv(b, self._reports())
        assert a.read_bytes() == b.read_bytes()

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "spec.csv"
        path.write_text("h_svd,attribute\n0.5,0\n")
        with pytest.raises(InvalidInputError):
            read_spectral_csv(path)

    def test_short_row_rejected(self, tmp_path):
        path = tmp_path / "spec.csv"
        write_spectral_csv(path, self._reports())
        lines = path.read_text().splitlines()
        path.write_text("\n".join([lines[0], "0,0.5,2"]) + "\n")
        with pytest.raises(InvalidInputError):
            read_spectral_csv(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "spec.csv"
        write_spectral_csv(path, self._reports())
        text = path.read_text().replace("0.05", "oops")
        path.write_text(text)
        with pytest.raises(InvalidInputError):
            read_spectral_csv(path)
