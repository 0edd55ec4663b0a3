"""Cost fusion, exact assignment, gating, and the three-level cascade."""

import numpy as np
import pytest

from adaptrack import (
    BBox,
    CascadeConfig,
    CostMatrix,
    TrackSnapshot,
    TrackState,
    build_cost_matrix,
    fused_cost,
    gate_by_iou,
    iou_cost,
    run_cascade,
    solve_assignment,
)
from helpers import make_det, random_boxes, unit
from oracles import assignment_oracle


def snap(x, y, w=10.0, h=10.0, feature=None, state=TrackState.Tracked):
    return TrackSnapshot(BBox(x, y, w, h), feature, state)


class TestCascadeConfig:
    def test_defaults(self):
        cfg = CascadeConfig()
        assert cfg.th_high == 0.6
        assert cfg.th_low == 0.1
        assert cfg.max_cost == 1.4

    def test_validation(self):
        with pytest.raises(ValueError):
            CascadeConfig(th_low=0.7, th_high=0.6)
        with pytest.raises(ValueError):
            CascadeConfig(iou_min=1.5)
        with pytest.raises(ValueError):
            CascadeConfig(max_cost=0.0)


class TestCostMatrix:
    def test_read_only_and_shape(self):
        m = CostMatrix(np.array([[0.5, 1.0], [1.5, 2.0]]))
        assert m.shape == (2, 2)
        with pytest.raises(ValueError):
            m.values[0, 0] = 0.0

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            CostMatrix(np.array([[2.1]]))
        with pytest.raises(ValueError):
            CostMatrix(np.array([[-0.1]]))
        with pytest.raises(ValueError):
            CostMatrix(np.array([[np.inf]]))
        CostMatrix(np.array([[0.0, 2.0]]))

    def test_must_be_2d(self):
        with pytest.raises(ValueError):
            CostMatrix(np.zeros(3))


class TestFusedCost:
    def test_hand_example(self):
        # overlap cost 0.3 (iou 70/100), appearance cost 0.4 (dot 0.6)
        det = make_det(1, 0, 0, 10, 7, s_det=0.7, s_loc=0.8,
                       embedding=unit(1, 0))
        track_box = BBox(0, 0, 10, 10)
        feature = unit(0.6, 0.8)
        got = fused_cost(det, track_box, feature)
        assert abs(got - 0.52) <= 1e-12

    def test_perfect_pair_is_free(self):
        e = unit(0.5, 0.5, 0.7)
        det = make_det(1, 0, 0, s_det=0.3, s_loc=0.4, embedding=e)
        assert fused_cost(det, BBox(0, 0, 10, 10), e) <= 1e-15

    def test_motion_only_limit(self):
        det = make_det(1, 2, 0, s_det=0.0, s_loc=1.0, embedding=unit(1, 0))
        track_box = BBox(0, 0, 10, 10)
        assert fused_cost(det, track_box, unit(0, 1)) == iou_cost(det.box, track_box)

    def test_missing_embedding_pays_worst_case(self):
        det = make_det(1, 0, 0, s_det=0.9, s_loc=1.0)
        got = fused_cost(det, BBox(0, 0, 10, 10), unit(1, 0))
        assert got == 0.9  # geo 0 plus 1.0 * s_det

    def test_unweighted_mode(self):
        det = make_det(1, 5, 0, s_det=0.3, s_loc=0.2, embedding=unit(1, 0))
        track_box = BBox(0, 0, 10, 10)
        got = fused_cost(det, track_box, unit(0, 1), confidence_weighted=False)
        assert abs(got - (iou_cost(det.box, track_box) + 1.0)) <= 1e-12

    def test_monotone_in_overlap(self):
        track_box = BBox(0, 0, 10, 10)
        prev = None
        for offset in np.linspace(9.0, 0.0, 12):
            det = make_det(1, float(offset), 0, s_det=0.8, s_loc=0.9)
            cur = fused_cost(det, track_box, None)
            if prev is not None:
                assert cur <= prev + 1e-12
            prev = cur

    def test_monotone_in_similarity(self):
        det_box_feature = unit(1, 0, 0)
        track_box = BBox(0, 0, 10, 10)
        prev = None
        for t in np.linspace(0.0, 1.0, 12):
            # rotate the track feature from orthogonal to aligned
            feat = unit(float(t), float(1.0 - t), 0.0)
            det = make_det(1, 0, 0, s_det=0.8, s_loc=0.9, embedding=det_box_feature)
            cur = fused_cost(det, track_box, feat)
            if prev is not None:
                assert cur <= prev + 1e-12
            prev = cur

    def test_weights_scale_their_terms(self):
        track_box = BBox(0, 0, 10, 10)
        det_lo = make_det(1, 5, 0, s_det=0.5, s_loc=0.3)
        det_hi = make_det(1, 5, 0, s_det=0.5, s_loc=0.9)
        assert fused_cost(det_hi, track_box, None) > fused_cost(det_lo, track_box, None)
        det_lo = make_det(1, 5, 0, s_det=0.3, s_loc=0.5, embedding=unit(1, 0))
        det_hi = make_det(1, 5, 0, s_det=0.9, s_loc=0.5, embedding=unit(1, 0))
        feat = unit(0, 1)
        assert fused_cost(det_hi, track_box, feat) > fused_cost(det_lo, track_box, feat)


class TestBuildCostMatrix:
    def test_empty_inputs(self):
        assert build_cost_matrix([], [snap(0, 0)]).shape == (0, 1)
        assert build_cost_matrix([make_det(1, 0, 0)], []).shape == (1, 0)

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(60)
        dets = []
        for i, b in enumerate(random_boxes(rng, 5)):
            emb = None if i == 2 else unit(*rng.normal(size=6))
            dets.append(make_det(1, b.x, b.y, b.w, b.h,
                                 s_det=float(rng.uniform(0.3, 1.0)),
                                 s_loc=float(rng.uniform(0.3, 1.0)),
                                 embedding=emb))
        tracks = []
        for j, b in enumerate(random_boxes(rng, 4)):
            feat = None if j == 1 else unit(*rng.normal(size=6))
            tracks.append(TrackSnapshot(b, feat, TrackState.Tracked))
        for weighted in (True, False):
            m = build_cost_matrix(dets, tracks, confidence_weighted=weighted)
            for i, d in enumerate(dets):
                for j, t in enumerate(tracks):
                    want = fused_cost(d, t.box, t.feature, confidence_weighted=weighted)
                    assert abs(m.values[i, j] - want) <= 1e-12


class TestSolveAssignment:
    def test_two_by_two(self):
        res = solve_assignment(np.array([[1.0, 2.0], [2.0, 4.0]]), max_cost=10.0)
        assert set(res.matches) == {(0, 1), (1, 0)}
        assert res.unmatched_detections == ()
        assert res.unmatched_tracks == ()

    def test_all_over_ceiling(self):
        res = solve_assignment(np.array([[5.0, 6.0], [7.0, 8.0]]), max_cost=1.0)
        assert res.matches == ()
        assert res.unmatched_detections == (0, 1)
        assert res.unmatched_tracks == (0, 1)

    def test_zero_diagonal(self):
        m = np.ones((4, 4))
        np.fill_diagonal(m, 0.0)
        res = solve_assignment(m)
        assert set(res.matches) == {(i, i) for i in range(4)}

    def test_empty(self):
        res = solve_assignment(np.zeros((0, 3)))
        assert res.matches == ()
        assert res.unmatched_tracks == (0, 1, 2)

    def test_rectangular_partitions(self):
        res = solve_assignment(np.array([[0.1, 0.2, 0.9, 0.4], [0.5, 0.1, 0.2, 0.3]]))
        assert len(res.matches) == 2
        used_d = {i for i, _ in res.matches}
        used_t = {j for _, j in res.matches}
        assert used_d | set(res.unmatched_detections) == {0, 1}
        assert used_t | set(res.unmatched_tracks) == {0, 1, 2, 3}

    def test_matches_brute_force(self):
        import math

        rng = np.random.default_rng(61)
        for _ in range(150):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 6))
            costs = rng.uniform(0, 2, size=(n, m))
            res = solve_assignment(costs)
            total = math.fsum(costs[i, j] for i, j in res.matches)
            assert total == assignment_oracle(costs)

    def test_scale_invariance(self):
        rng = np.random.default_rng(62)
        for _ in range(25):
            costs = rng.uniform(0, 2, size=(4, 5))
            base = solve_assignment(costs, max_cost=1.4)
            for scale in (0.25, 3.0, 17.0):
                scaled = solve_assignment(costs * scale, max_cost=1.4 * scale)
                assert set(scaled.matches) == set(base.matches)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            solve_assignment(np.array([[np.nan]]))


class TestGateByIou:
    def test_demotes_disjoint_pairs(self):
        dets = [make_det(1, 0, 0), make_det(1, 100, 100)]
        tracks = [snap(1, 0), snap(300, 300)]
        res = solve_assignment(build_cost_matrix(dets, tracks))
        gated = gate_by_iou(res, dets, tracks, iou_min=0.1)
        assert gated.matches == ((0, 0),)
        assert 1 in gated.unmatched_detections
        assert 1 in gated.unmatched_tracks

    def test_keeps_overlapping_pairs(self):
        dets = [make_det(1, 0, 0)]
        tracks = [snap(2, 0)]
        res = solve_assignment(build_cost_matrix(dets, tracks))
        gated = gate_by_iou(res, dets, tracks, iou_min=0.1)
        assert gated.matches == ((0, 0),)

    def test_counts_conserved(self):
        # three matched pairs at overlaps 1.0, ~0.4, 0.0; only the last drops
        dets = [make_det(1, 0, 0), make_det(1, 50, 50), make_det(1, 200, 0)]
        tracks = [snap(0, 0), snap(54, 50), snap(250, 0)]
        res = solve_assignment(build_cost_matrix(dets, tracks))
        assert len(res.matches) == 3
        gated = gate_by_iou(res, dets, tracks, iou_min=0.1)
        assert len(gated.matches) == 2
        n_d = len(gated.matches) + len(gated.unmatched_detections)
        n_t = len(gated.matches) + len(gated.unmatched_tracks)
        assert n_d == len(dets)
        assert n_t == len(tracks)


class TestRunCascade:
    def test_high_conf_matches_tracked_at_level_one(self):
        dets = [make_det(1, 0, 0, s_det=0.9)]
        tracks = [snap(1, 0)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert res.matches == ((0, 0),)
        assert res.level_results[0].matches == ((0, 0),)

    def test_low_conf_matches_at_level_two(self):
        # the far high-confidence detection leaves the track unmatched at
        # level one; the overlapping low-confidence one claims it at level two
        dets = [
            make_det(1, 500, 500, s_det=0.9),
            make_det(1, 1, 0, s_det=0.3),
        ]
        tracks = [snap(0, 0)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert (1, 0) in res.matches
        assert res.level_results[1].matches == ((1, 0),)
        assert 0 in res.unmatched_high_detections

    def test_below_floor_discarded(self):
        dets = [make_det(1, 0, 0, s_det=0.05)]
        tracks = [snap(0, 0)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert res.matches == ()
        assert res.discarded_detections == (0,)
        assert res.unmatched_detections == ()

    def test_lost_tracks_skip_level_two(self):
        dets = [make_det(1, 1, 0, s_det=0.3)]
        tracks = [snap(0, 0, state=TrackState.Lost)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert res.matches == ()
        assert res.unmatched_tracks == (0,)

    def test_new_tracks_claimed_at_level_three(self):
        dets = [make_det(1, 1, 0, s_det=0.9)]
        tracks = [snap(0, 0, state=TrackState.New)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert res.matches == ((0, 0),)
        assert res.level_results[2].matches == ((0, 0),)

    def test_lost_track_eligible_at_level_one(self):
        dets = [make_det(1, 1, 0, s_det=0.9)]
        tracks = [snap(0, 0, state=TrackState.Lost)]
        res = run_cascade(dets, tracks, CascadeConfig())
        assert res.matches == ((0, 0),)
        assert res.level_results[0].matches == ((0, 0),)

    def test_one_to_one_across_levels(self):
        rng = np.random.default_rng(63)
        states = [TrackState.New, TrackState.Tracked, TrackState.Lost]
        for _ in range(50):
            dets = [
                make_det(1, b.x, b.y, b.w, b.h, s_det=float(rng.uniform(0, 1)))
                for b in random_boxes(rng, int(rng.integers(0, 8)), span=60)
            ]
            tracks = [
                TrackSnapshot(b, None, states[int(rng.integers(0, 3))])
                for b in random_boxes(rng, int(rng.integers(0, 8)), span=60)
            ]
            res = run_cascade(dets, tracks, CascadeConfig())
            d_used = [i for i, _ in res.matches]
            t_used = [j for _, j in res.matches]
            assert len(d_used) == len(set(d_used))
            assert len(t_used) == len(set(t_used))
            assert sorted(d_used + list(res.unmatched_detections)
                          + list(res.discarded_detections)) == list(range(len(dets)))
            assert sorted(t_used + list(res.unmatched_tracks)) == list(range(len(tracks)))

    def test_empty_inputs(self):
        res = run_cascade([], [], CascadeConfig())
        assert res.matches == ()
        res = run_cascade([], [snap(0, 0)], CascadeConfig())
        assert res.unmatched_tracks == (0,)
