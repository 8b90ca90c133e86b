import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whospeaks.scoring import (
    DerReport,
    DiarTimeline,
    false_alarm_fraction,
    read_timeline_csv,
    score_der,
    write_labels_csv,
)

P = 0.040


def tl(frames, period=P):
    return DiarTimeline(frames=tuple(frozenset(f) for f in frames), frame_period_s=period)


class TestScoreDer:
    def test_identical_timelines_score_zero(self):
        ref = tl([{0}, {0}, set(), {1}, {0, 1}])
        report = score_der(ref, ref, collar_s=0.0)
        assert report.der == 0.0
        assert report.errors_s == 0.0

    def test_all_silent_hypothesis_is_total_miss(self):
        ref = tl([{0}] * 10)
        hyp = tl([set()] * 10)
        report = score_der(ref, hyp, collar_s=0.0)
        assert report.der == 1.0
        assert report.miss_s == pytest.approx(10 * P)
        assert report.false_alarm_s == 0.0

    def test_hand_counted_ten_frame_case(self):
        # ref: A speaks frames 1-8 (0-indexed 0..7); hyp: A 0..4, B 5, silent 6..7, A 8..9
        ref = tl([{0}] * 8 + [set()] * 2)
        hyp = tl([{0}] * 5 + [{1}] + [set()] * 2 + [{0}] * 2)
        report = score_der(ref, hyp, collar_s=0.0)
        assert report.miss_s == pytest.approx(2 * P)
        assert report.speaker_error_s == pytest.approx(1 * P)
        assert report.false_alarm_s == pytest.approx(2 * P)
        assert report.scored_speech_s == pytest.approx(8 * P)
        assert report.der == pytest.approx(0.625)

    def test_overlap_counts_each_speaker(self):
        ref = tl([{0, 1}] * 4)
        hyp = tl([{0}] * 4)
        report = score_der(ref, hyp, collar_s=0.0)
        assert report.scored_speech_s == pytest.approx(8 * P)
        assert report.der == pytest.approx(0.5)  # one miss per frame

    def test_collar_forgives_boundary_frames(self):
        ref = tl([{0}] * 5 + [set()] * 5)
        hyp = tl([{0}] * 6 + [set()] * 4)  # one frame late on the offset
        assert score_der(ref, hyp, collar_s=0.0).der > 0
        assert score_der(ref, hyp, collar_s=P).der == 0.0

    def test_frame_period_mismatch_rejected(self):
        with pytest.raises(ValueError, match="period"):
            score_der(tl([{0}]), tl([{0}], period=0.02))

    def test_short_hypothesis_counts_as_silent(self):
        ref = tl([{0}] * 4)
        hyp = tl([{0}] * 2)
        report = score_der(ref, hyp, collar_s=0.0)
        assert report.miss_s == pytest.approx(2 * P)

    def test_empty_reference_with_false_alarms(self):
        ref = tl([set()] * 4)
        hyp = tl([{0}] * 4)
        report = score_der(ref, hyp, collar_s=0.0)
        assert report.scored_speech_s == 0.0
        assert report.der == float("inf")
        assert score_der(ref, ref, collar_s=0.0).der == 0.0

    def test_optimal_mapping_fixes_consistent_relabel(self):
        ref = tl([{0}] * 5 + [{1}] * 5)
        hyp = tl([{1}] * 5 + [{0}] * 5)  # ids swapped consistently
        assert score_der(ref, hyp, collar_s=0.0, mapping="identity").der == 1.0
        assert score_der(ref, hyp, collar_s=0.0, mapping="optimal").der == 0.0

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 10_000))
    def test_optimal_mapping_invariant_to_hyp_permutation(self, seed):
        rng = np.random.default_rng(seed)
        T = 30
        ref_frames = [set(np.nonzero(rng.integers(0, 2, 3))[0].tolist()) for _ in range(T)]
        hyp_frames = [set(np.nonzero(rng.integers(0, 2, 3))[0].tolist()) for _ in range(T)]
        perm = rng.permutation(3)
        hyp_perm = [{int(perm[i]) for i in f} for f in hyp_frames]
        a = score_der(tl(ref_frames), tl(hyp_frames), collar_s=0.0, mapping="optimal")
        b = score_der(tl(ref_frames), tl(hyp_perm), collar_s=0.0, mapping="optimal")
        assert a.der == pytest.approx(b.der)

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 10_000))
    def test_errors_nonincreasing_in_collar(self, seed):
        rng = np.random.default_rng(seed)
        T = 40
        ref_frames = []
        cur: set = set()
        for _ in range(T):
            if rng.uniform() < 0.2:
                cur = set(np.nonzero(rng.integers(0, 2, 2))[0].tolist())
            ref_frames.append(set(cur))
        hyp_frames = [set(np.nonzero(rng.integers(0, 2, 2))[0].tolist()) for _ in range(T)]
        ref, hyp = tl(ref_frames), tl(hyp_frames)
        errors = [
            score_der(ref, hyp, collar_s=c).errors_s for c in (0.0, P / 2, P, 2 * P, 4 * P)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))

    def test_components_reproduce_der_ratio(self):
        rng = np.random.default_rng(1)
        T = 25
        ref = tl([set(np.nonzero(rng.integers(0, 2, 3))[0].tolist()) for _ in range(T)])
        hyp = tl([set(np.nonzero(rng.integers(0, 2, 3))[0].tolist()) for _ in range(T)])
        r = score_der(ref, hyp, collar_s=P)
        assert r.false_alarm_s >= 0 and r.miss_s >= 0 and r.speaker_error_s >= 0
        if r.scored_speech_s > 0:
            assert r.der == pytest.approx(
                (r.false_alarm_s + r.miss_s + r.speaker_error_s) / r.scored_speech_s
            )


class TestFalseAlarmFraction:
    def test_counts_nonempty_frames(self):
        hyp = tl([set(), {0}, set(), {1}])
        assert false_alarm_fraction(hyp) == 0.5

    def test_empty_timeline(self):
        assert false_alarm_fraction(tl([])) == 0.0


class TestCsvInterchange:
    def test_labels_roundtrip(self, tmp_path):
        labels = np.array([[1, 0], [1, 1], [0, 0]], dtype=np.uint8)
        path = tmp_path / "labels.csv"
        write_labels_csv(labels, P, path)
        timeline = read_timeline_csv(path)
        assert timeline.frame_period_s == pytest.approx(P)
        assert timeline.frames == (frozenset({0}), frozenset({0, 1}), frozenset())

    def test_bitmask_schema(self, tmp_path):
        path = tmp_path / "timeline.csv"
        path.write_text(
            "# frame_period_s=0.040000\n"
            "t,map_bitmask,p_speak_0,p_speak_1\n"
            "0,1,0.9,0.1\n1,3,0.8,0.7\n2,0,0.1,0.2\n"
        )
        timeline = read_timeline_csv(path)
        assert timeline.frames == (frozenset({0}), frozenset({0, 1}), frozenset())

    def test_unknown_schema_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="schema"):
            read_timeline_csv(path)


class TestDerReport:
    def test_ratio_definition(self):
        r = DerReport(false_alarm_s=1.0, miss_s=2.0, speaker_error_s=3.0, scored_speech_s=12.0)
        assert r.der == pytest.approx(0.5)
        assert r.errors_s == pytest.approx(6.0)
