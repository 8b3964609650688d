"""Geometry layer: Vec3, oriented boxes, and the BVH queries."""

import math

import numpy as np
import pytest

from trackplan.geometry import Bvh, ObstacleBox, Vec3, build_bvh

from oracles import brute_distance, brute_occluded, box_distance, segment_hits_box


def _rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def _random_boxes(rng: np.random.Generator, n: int) -> list[ObstacleBox]:
    boxes = []
    for _ in range(n):
        cx, cy = rng.uniform(-80, 80, size=2)
        cz = rng.uniform(0, 40)
        hx, hy = rng.uniform(0.5, 12, size=2)
        hz = rng.uniform(0.5, 18)
        yaw = rng.uniform(-math.pi, math.pi)
        boxes.append(ObstacleBox(Vec3(cx, cy, cz), Vec3(hx, hy, hz), yaw))
    return boxes


# -- Vec3 / ObstacleBox ------------------------------------------------------

def test_vec3_arithmetic_and_norm():
    a = Vec3(1.0, 2.0, 3.0)
    b = Vec3(-1.0, 0.5, 2.0)
    assert (a - b).to_array() == pytest.approx([2.0, 1.5, 1.0])
    assert a.norm() == pytest.approx(math.sqrt(14.0))
    assert Vec3.from_array(np.array([4.0, 5.0, 6.0])) == Vec3(4.0, 5.0, 6.0)


def test_vec3_rejects_non_finite():
    with pytest.raises(ValueError):
        Vec3(math.nan, 0.0, 0.0)
    with pytest.raises(ValueError):
        Vec3(0.0, math.inf, 0.0)


def test_obstacle_box_rejects_non_positive_extents():
    with pytest.raises(ValueError):
        ObstacleBox(Vec3(0, 0, 0), Vec3(0.0, 1.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        ObstacleBox(Vec3(0, 0, 0), Vec3(1.0, -2.0, 1.0), 0.0)


def test_obstacle_box_top():
    b = ObstacleBox(Vec3(0, 0, 10.0), Vec3(1, 1, 4.0), 0.0)
    assert b.top == pytest.approx(14.0)


# -- distance queries --------------------------------------------------------

def test_empty_world_queries():
    bvh = build_bvh([], inflation=0.0)
    assert bvh.distance(Vec3(3, 4, 5)) == math.inf
    assert not bvh.segment_occluded(Vec3(0, 0, 0), Vec3(10, 10, 10))
    assert np.all(np.isinf(bvh.batch_distance(np.zeros((4, 3)))))
    occ = bvh.batch_segment_occluded(np.zeros((4, 3)), np.ones((4, 3)))
    assert not occ.any()


def test_axis_aligned_box_distance_hand_values():
    box = ObstacleBox(Vec3(0, 0, 5.0), Vec3(2.0, 3.0, 5.0), 0.0)
    bvh = build_bvh([box], inflation=0.0)
    assert bvh.distance(Vec3(0, 0, 5)) == 0.0          # inside
    assert bvh.distance(Vec3(5.0, 0, 5)) == pytest.approx(3.0)
    assert bvh.distance(Vec3(0, 0, 14.0)) == pytest.approx(4.0)
    # corner: offset (1, 2, 2) past the (2, 3, 10) extents
    assert bvh.distance(Vec3(3.0, 5.0, 12.0)) == pytest.approx(3.0)


def test_rotated_box_distance_matches_oracle():
    rng = _rng(5)
    boxes = _random_boxes(rng, 40)
    bvh = build_bvh(boxes, inflation=0.0)
    for _ in range(300):
        p = Vec3(*rng.uniform(-100, 100, size=2), rng.uniform(-5, 50))
        assert bvh.distance(p) == pytest.approx(brute_distance(p, boxes),
                                                rel=1e-12, abs=1e-12)


def test_inflation_shifts_distance():
    box = ObstacleBox(Vec3(0, 0, 5.0), Vec3(2.0, 2.0, 2.0), 0.0)
    plain = build_bvh([box], inflation=0.0)
    padded = build_bvh([box], inflation=1.5)
    p = Vec3(10.0, 0, 5.0)
    assert plain.distance(p) == pytest.approx(8.0)
    assert padded.distance(p) == pytest.approx(6.5)
    assert padded.distance(p) == pytest.approx(
        box_distance(p.x, p.y, p.z, box, inflation=1.5))


def test_scalar_and_batch_distance_bit_identical():
    rng = _rng(9)
    boxes = _random_boxes(rng, 60)
    bvh = build_bvh(boxes, inflation=1.5)
    pts = np.column_stack([rng.uniform(-100, 100, 200),
                           rng.uniform(-100, 100, 200),
                           rng.uniform(-5, 50, 200)])
    batch = bvh.batch_distance(pts)
    for k in range(pts.shape[0]):
        assert bvh.distance(Vec3(*pts[k])) == batch[k]


# -- segment occlusion -------------------------------------------------------

def test_segment_through_box_is_occluded():
    box = ObstacleBox(Vec3(0, 0, 5.0), Vec3(2.0, 2.0, 5.0), 0.0)
    bvh = build_bvh([box], inflation=0.0)
    assert bvh.segment_occluded(Vec3(-10, 0, 5), Vec3(10, 0, 5))
    assert not bvh.segment_occluded(Vec3(-10, 10, 5), Vec3(10, 10, 5))
    # segment ending on the face counts as blocked (closed intervals)
    assert bvh.segment_occluded(Vec3(-10, 0, 5), Vec3(-2.0, 0, 5))


def test_degenerate_segment_inside_box():
    box = ObstacleBox(Vec3(0, 0, 5.0), Vec3(2.0, 2.0, 5.0), 0.0)
    bvh = build_bvh([box], inflation=0.0)
    assert bvh.segment_occluded(Vec3(0, 0, 5), Vec3(0, 0, 5))
    assert not bvh.segment_occluded(Vec3(8, 0, 5), Vec3(8, 0, 5))


def test_rotated_segment_occlusion_matches_oracle():
    rng = _rng(17)
    boxes = _random_boxes(rng, 40)
    bvh = build_bvh(boxes, inflation=0.0)
    for _ in range(300):
        a = Vec3(*rng.uniform(-100, 100, 2), rng.uniform(-5, 50))
        b = Vec3(*rng.uniform(-100, 100, 2), rng.uniform(-5, 50))
        assert bvh.segment_occluded(a, b) == brute_occluded(a, b, boxes)
        assert segment_hits_box(a, b, boxes[0]) == brute_occluded(a, b, [boxes[0]])


def test_scalar_and_batch_occlusion_agree():
    rng = _rng(23)
    boxes = _random_boxes(rng, 50)
    bvh = build_bvh(boxes, inflation=0.0)
    a = np.column_stack([rng.uniform(-100, 100, 150),
                         rng.uniform(-100, 100, 150),
                         rng.uniform(-5, 50, 150)])
    b = np.column_stack([rng.uniform(-100, 100, 150),
                         rng.uniform(-100, 100, 150),
                         rng.uniform(-5, 50, 150)])
    batch = bvh.batch_segment_occluded(a, b)
    for k in range(a.shape[0]):
        assert bvh.segment_occluded(Vec3(*a[k]), Vec3(*b[k])) == batch[k]


def test_single_box_bvh_is_valid():
    box = ObstacleBox(Vec3(1, 2, 3), Vec3(1, 1, 1), 0.3)
    bvh = build_bvh([box], inflation=0.0)
    assert bvh.n_boxes == 1
    assert bvh.distance(Vec3(1, 2, 3)) == 0.0
