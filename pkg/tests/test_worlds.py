import numpy as np
import pytest

from odeflow.errors import InvalidInputError, UnsatisfiableConditionError
from odeflow.numerics import Rng
from odeflow import worlds
from odeflow.worlds import (
    AttributeSpace,
    hard_labels,
    hard_regress,
    make_world,
    sample_latent,
    soft_logits,
    soft_logits_vjp,
    soft_regress,
    world_from_items,
    world_to_items,
)


class TestAttributeSpace:
    def test_counts(self):
        s = AttributeSpace((2, 4))
        assert s.n_attributes == 2

    def test_rejects_degenerate(self):
        with pytest.raises(InvalidInputError):
            AttributeSpace(())
        with pytest.raises(InvalidInputError):
            AttributeSpace((2, 1))


class TestMakeWorld:
    def test_catalog_structure(self):
        for variant, names, cards in [
            ("blobs", ("sign-1", "sign-2"), (2, 2)),
            ("xor", ("sector-parity", "radius-band"), (2, 2)),
            ("ring", ("radius-band", "sector"), (2, 4)),
            ("wheel", ("sector", "radius-band"), (6, 2)),
        ]:
            w = make_world(variant, dim=4)
            assert w.attribute_names == names
            assert w.space.cardinalities == cards

    def test_wheel_sector_count_configurable(self):
        assert make_world("wheel", sectors=9).space.cardinalities == (9, 2)

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidInputError):
            make_world("spiral")
        with pytest.raises(InvalidInputError):
            make_world("blobs", dim=1)
        with pytest.raises(InvalidInputError):
            make_world("xor", beta=0.0)
        with pytest.raises(InvalidInputError):
            make_world("wheel", sectors=1)


class TestHardLabels:
    def test_blobs_signs(self):
        w = make_world("blobs", dim=3)
        pts = np.array([[2.0, -1.0, 9.0], [-2.0, 1.0, 9.0]])
        assert hard_labels(w, pts).tolist() == [[1, 0], [0, 1]]

    def test_xor_parity_alternates_every_45_degrees(self):
        w = make_world("xor", dim=2)
        rho = w.radius + 0.5
        for k in range(8):
            theta = k * np.pi / 4
            p = rho * np.array([np.cos(theta), np.sin(theta)])
            assert hard_regress(w, p).tolist() == [k % 2, 1]

    def test_xor_parity_sector_edges(self):
        w = make_world("xor", dim=2)
        for theta, expected in [(np.radians(22.4), 0), (np.radians(22.6), 1)]:
            p = 12.0 * np.array([np.cos(theta), np.sin(theta)])
            assert hard_regress(w, p)[0] == expected

    def test_xor_radius_band_splits_at_shell_median(self):
        w = make_world("xor", dim=2)
        assert hard_regress(w, np.array([11.4, 0.0]))[1] == 0
        assert hard_regress(w, np.array([12.6, 0.0]))[1] == 1
        assert hard_regress(w, np.array([12.0, 0.0]))[1] == 0  # boundary tie

    def test_ring_radius_band(self):
        w = make_world("ring", dim=2)
        r = w.radius
        assert hard_regress(w, np.array([r + 0.5, 0.0]))[0] == 1  # outside
        assert hard_regress(w, np.array([r - 0.5, 0.0]))[0] == 0  # inside
        assert hard_regress(w, np.array([r, 0.0]))[0] == 0  # boundary tie

    def test_ring_sectors_follow_quadrants(self):
        # sector centers at 45/135/225/315 degrees: sector k covers quadrant k
        w = make_world("ring", dim=2)
        quadrant_points = [(1.0, 0.5), (-0.5, 1.0), (-1.0, -0.5), (0.5, -1.0)]
        for k, (x, y) in enumerate(quadrant_points):
            assert hard_regress(w, np.array([x, y]))[1] == k

    def test_sector_axis_tie_takes_smaller_index(self):
        w = make_world("ring", dim=2)
        # theta = 0 is equidistant from centers 0 and 3
        assert hard_regress(w, np.array([2.0, 0.0]))[1] == 0

    def test_wheel_floor_sectors(self):
        w = make_world("wheel", dim=2, sectors=6)
        for k in range(6):
            theta = (k + 0.5) * 2 * np.pi / 6
            p = np.array([np.cos(theta), np.sin(theta)])
            assert hard_regress(w, 2.0 * p)[0] == k

    def test_hard_equals_argmax_of_soft(self):
        rng = Rng(3)
        for variant in worlds.VARIANTS:
            w = make_world(variant, dim=3)
            pts = rng.normal((64, 3))
            logits = soft_logits(w, pts)
            lab = hard_labels(w, pts)
            for j in range(w.space.n_attributes):
                assert np.array_equal(lab[:, j], np.argmax(logits[j], axis=1))

    def test_extra_dimensions_are_inert(self):
        w2 = make_world("xor", dim=2)
        w8 = make_world("xor", dim=8)
        p2 = np.array([0.3, -1.4])
        p8 = np.concatenate([p2, 7.0 * np.ones(6)])
        assert hard_regress(w2, p2).tolist() == hard_regress(w8, p8).tolist()


class TestSoftLogitsVjp:
    @pytest.mark.parametrize("variant", worlds.VARIANTS)
    def test_matches_finite_differences(self, variant):
        w = make_world(variant, dim=3)
        rng = Rng(17)
        pts = rng.normal((5, 3)) + 0.1  # keep away from the origin kink
        cots = [rng.normal((5, c)) for c in w.space.cardinalities]
        grad = soft_logits_vjp(w, pts, cots)

        def scalar(p):
            logits = soft_logits(w, p)
            return sum(float(np.sum(c * l)) for c, l in zip(cots, logits))

        eps = 1e-6
        for r in range(5):
            for c in range(3):
                bumped = pts.copy()
                bumped[r, c] += eps
                dipped = pts.copy()
                dipped[r, c] -= eps
                fd = (scalar(bumped) - scalar(dipped)) / (2 * eps)
                assert grad[r, c] == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_origin_gets_zero_angular_gradient(self):
        w = make_world("ring", dim=2)
        pts = np.zeros((1, 2))
        cots = [np.zeros((1, 2)), np.ones((1, 4))]
        grad = soft_logits_vjp(w, pts, cots)
        assert np.all(np.isfinite(grad))
        assert np.allclose(grad, 0.0)

    def test_shape_validation(self):
        w = make_world("xor", dim=2)
        with pytest.raises(InvalidInputError):
            soft_logits_vjp(w, np.zeros((2, 2)), [np.zeros((2, 2))])
        with pytest.raises(InvalidInputError):
            soft_logits_vjp(w, np.zeros((2, 2)), [np.zeros((2, 3)), np.zeros((2, 2))])


class TestSampling:
    def test_deterministic_given_seed(self):
        w = make_world("blobs", dim=4)
        a = sample_latent(w, Rng(5), m=32)
        b = sample_latent(w, Rng(5), m=32)
        assert np.array_equal(a, b)

    def test_conditioning_enforces_label(self):
        for variant in worlds.VARIANTS:
            w = make_world(variant, dim=2)
            for i, card in enumerate(w.space.cardinalities):
                for v in range(card):
                    pts = sample_latent(w, Rng(11), condition=(i, v), m=40)
                    assert np.all(hard_labels(w, pts)[:, i] == v)

    def test_single_point_shape(self):
        w = make_world("xor", dim=5)
        p = sample_latent(w, Rng(1))
        assert p.shape == (5,)

    def test_blobs_coordinate_zero_is_bimodal(self):
        w = make_world("blobs", dim=2)
        pts = sample_latent(w, Rng(2), m=4000)
        x = pts[:, 0]
        assert np.mean(np.abs(x) > 1.0) > 0.8  # mass concentrated away from 0
        assert abs(np.mean(x > 0) - 0.5) < 0.05  # balanced components

    def test_unsatisfiable_condition_raises(self):
        # a ring this wide never sees a point outside its radius band
        w = make_world("ring", dim=2, radius=500.0)
        with pytest.raises(UnsatisfiableConditionError):
            sample_latent(w, Rng(0), condition=(0, 1), m=1)

    def test_xor_shell_geometry(self):
        w = make_world("xor", dim=3)
        pts = sample_latent(w, Rng(8), m=4000)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        # thin shell around the configured radius
        assert abs(np.mean(rho) - w.radius) < 0.05
        assert np.std(rho) == pytest.approx(w.shell_sigma, rel=0.1)
        # angles cluster on multiples of 45 degrees
        offset = np.abs((theta + np.pi / 8) % (np.pi / 4) - np.pi / 8)
        assert np.mean(offset < 3 * w.angle_sigma) > 0.99
        # both attributes balanced
        lab = hard_labels(w, pts)
        assert abs(np.mean(lab[:, 0]) - 0.5) < 0.05
        assert abs(np.mean(lab[:, 1]) - 0.5) < 0.05
        # padding coordinate stays standard normal
        assert abs(np.mean(pts[:, 2])) < 0.1
        assert np.std(pts[:, 2]) == pytest.approx(1.0, abs=0.1)

    def test_bad_condition_rejected(self):
        w = make_world("xor", dim=2)
        with pytest.raises(InvalidInputError):
            sample_latent(w, Rng(0), condition=(5, 0), m=1)
        with pytest.raises(InvalidInputError):
            sample_latent(w, Rng(0), condition=(0, 2), m=1)


class TestDescriptorRoundTrip:
    @pytest.mark.parametrize("variant", worlds.VARIANTS)
    def test_round_trip(self, variant):
        w = make_world(variant, dim=7, beta=3.5)
        assert world_from_items(world_to_items(w)) == w

    def test_unknown_key_rejected(self):
        items = world_to_items(make_world("blobs")) + [("radius", "2.0")]
        with pytest.raises(InvalidInputError):
            world_from_items(items)

    def test_duplicate_key_rejected(self):
        items = world_to_items(make_world("xor"))
        with pytest.raises(InvalidInputError):
            world_from_items(items + [("dim", "3")])

    def test_missing_variant_rejected(self):
        with pytest.raises(InvalidInputError):
            world_from_items([("dim", "2")])

    def test_bad_value_rejected(self):
        with pytest.raises(InvalidInputError):
            world_from_items([("variant", "xor"), ("dim", "two")])
