import numpy as np
import pytest

from motioncond.condition import ConditionTensors, rasterize_user_trajectory
from motioncond.grid import BitMask2D, FlowField
from motioncond.propagate import densify, warp_clip
from motioncond.synth import ground_truth, render_clip

from oracles import idw_oracle, warp_oracle


def _cond(traj, mask):
    traj = np.asarray(traj, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.uint8)
    n = traj.shape[0]
    return ConditionTensors(traj=traj, mask_seq=np.repeat(mask[None, :, :, None], n, axis=0))


# ---------------------------------------------------------------------------
# densify


def test_densify_single_site_constant_field():
    traj = np.zeros((3, 8, 8, 2))
    traj[1, 4, 4] = [5.0, 0.0]
    traj[2, 4, 4] = [5.0, 0.0]
    dense = densify(_cond(traj, np.ones((8, 8))))
    # constant in exact arithmetic; w*v/w leaves 1-ulp noise off-site
    assert np.allclose(dense.flow[1], [5.0, 0.0], rtol=0, atol=1e-12)
    assert np.allclose(dense.flow[2], [5.0, 0.0], rtol=0, atol=1e-12)
    assert np.all(dense.flow[0] == 0.0)
    assert np.array_equal(dense.flow[1, 4, 4], [5.0, 0.0])


def test_densify_zero_mask_zero_field():
    traj = np.zeros((2, 8, 8, 2))
    traj[1, 2, 2] = [1.0, 1.0]
    dense = densify(_cond(traj, np.zeros((8, 8))))
    assert np.all(dense.flow == 0.0)


def test_densify_two_sites_midpoint_average():
    traj = np.zeros((2, 4, 12, 2))
    traj[1, 0, 0] = [2.0, 0.0]
    traj[1, 0, 10] = [6.0, 4.0]
    dense = densify(_cond(traj, np.ones((4, 12))))
    assert np.allclose(dense.flow[1, 0, 5], [4.0, 2.0], rtol=0, atol=1e-12)


def test_densify_exact_at_sites(rng):
    traj = np.zeros((3, 10, 10, 2))
    sites = [(1, 1), (7, 3), (4, 8)]
    for y, x in sites:
        traj[1:, y, x] = rng.normal(size=(2, 2)) + 3.0
    dense = densify(_cond(traj, np.ones((10, 10))))
    for y, x in sites:
        assert np.array_equal(dense.flow[1:, y, x], traj[1:, y, x])


def test_densify_zero_outside_mask():
    traj = np.zeros((2, 8, 8, 2))
    traj[1, 3, 3] = [1.0, -2.0]
    mask = np.zeros((8, 8))
    mask[2:6, 2:6] = 1
    dense = densify(_cond(traj, mask))
    assert np.all(dense.flow[1][mask == 0] == 0.0)
    assert np.all(dense.flow[1][mask == 1] == [1.0, -2.0])


def test_densify_unconstrained_mask_raises():
    traj = np.zeros((2, 8, 8, 2))
    mask = np.ones((8, 8))
    with pytest.raises(ValueError, match="unconstrained motion region"):
        densify(_cond(traj, mask))


def test_densify_empty_mask_no_sites_is_zero():
    dense = densify(_cond(np.zeros((3, 4, 4, 2)), np.zeros((4, 4))))
    assert np.all(dense.flow == 0.0)


def test_densify_matches_oracle(rng):
    traj = np.zeros((3, 6, 7, 2))
    sites = [(0, 2), (5, 5), (3, 1)]
    for y, x in sites:
        traj[1:, y, x] = rng.normal(size=(2, 2)) + 2.0
    mask = (rng.random((6, 7)) < 0.7).astype(np.uint8)
    for y, x in sites:
        mask[y, x] = 1
    dense = densify(_cond(traj, mask))
    for i in (1, 2):
        expect = idw_oracle(
            [(x, y) for y, x in sites],
            [traj[i, y, x] for y, x in sites],
            mask,
            2.0,
        )
        assert np.allclose(dense.flow[i], expect, rtol=0, atol=1e-12)


def test_densify_from_stroke_block_is_exact_inside():
    brush = np.ones((16, 16), dtype=np.uint8)
    cond = rasterize_user_trajectory([[(5.0, 5.0), (5.0, 11.0)]], length=4, k=4, brush=BitMask2D(brush))
    dense = densify(cond)
    # the painted block pixels are sites: the field reproduces them exactly
    assert np.all(dense.flow[3, 4:8, 4:8, 1] == 6.0)
    assert np.all(dense.flow[3, 4:8, 4:8, 0] == 0.0)


# ---------------------------------------------------------------------------
# warp_clip


def test_warp_zero_flow_identity_bit_exact(rng):
    first = rng.random((6, 7, 3))
    clip = warp_clip(first, FlowField(np.zeros((4, 6, 7, 2))))
    for i in range(4):
        assert np.array_equal(clip.frames[i], first)


def test_warp_uniform_shift_right():
    first = np.zeros((4, 6, 3))
    first[:, 2, :] = 1.0  # bright column at x = 2
    flow = np.zeros((2, 4, 6, 2))
    flow[1, :, :, 0] = 1.0
    clip = warp_clip(first, FlowField(flow))
    assert np.all(clip.frames[1][:, 3, :] == 1.0)
    assert np.all(clip.frames[1][:, 2, :] == 0.0)
    # border column clamps to the reference edge value
    assert np.all(clip.frames[1][:, 0, :] == first[:, 0, :])


def test_warp_matches_oracle(rng):
    first = rng.random((5, 5, 3))
    flow = np.zeros((3, 5, 5, 2))
    flow[1:] = rng.normal(scale=1.5, size=(2, 5, 5, 2))
    clip = warp_clip(first, FlowField(flow))
    for i in range(3):
        expect = np.clip(warp_oracle(first, flow[i]), 0.0, 1.0)
        assert np.allclose(clip.frames[i], expect, rtol=0, atol=1e-12)


def test_warp_shape_mismatch():
    with pytest.raises(ValueError):
        warp_clip(np.zeros((4, 4, 3)), FlowField(np.zeros((2, 4, 5, 2))))


def test_warp_by_ground_truth_reproduces_scene(two_blob_scene, arc_scene):
    for spec in (two_blob_scene, arc_scene):
        clip = render_clip(spec)
        gt = ground_truth(spec)
        warped = warp_clip(clip.frames[0], gt.flow)
        for i in range(spec.length):
            vis = gt.visibility.masks[i].astype(bool)
            err = np.abs(warped.frames[i] - clip.frames[i])[vis]
            assert err.max() <= 2.0 / 255.0 + 1e-12
