"""Tests for batch_processor module."""

import threading

import pytest

from batch_processor import ParallelTrialRunner, ProgressTracker


class FakeClock:
    def __init__(self, start=100.0):
        self.now = start

    def __call__(self):
        return self.now


class TestProgressTracker:
    """Test the ProgressTracker class."""

    def test_throttles_updates(self, mocker):
        """Test that callbacks closer than the interval are dropped."""
        clock = FakeClock()
        callback = mocker.Mock()
        tracker = ProgressTracker(10, callback, clock=clock)

        tracker.update(1, "first")
        tracker.update(1, "too soon")
        clock.now += 0.6
        tracker.update(1, "later")

        assert [c.args[1] for c in callback.call_args_list] == ["first", "later"]

    def test_always_reports_completion(self, mocker):
        """Test that the final update is reported even when throttled."""
        clock = FakeClock()
        callback = mocker.Mock()
        tracker = ProgressTracker(2, callback, clock=clock)

        tracker.update(1)
        tracker.update(1, "done")

        callback.assert_called_with(100.0, "done")

    def test_eta_and_stats(self):
        """Test ETA and processing rate from the injected clock."""
        clock = FakeClock()
        tracker = ProgressTracker(4, clock=clock)
        assert tracker.get_eta() is None

        clock.now += 2.0
        tracker.update(2)
        stats = tracker.get_stats()

        assert tracker.get_eta() == pytest.approx(2.0)
        assert stats["progress_percent"] == 50.0
        assert stats["processing_rate"] == pytest.approx(1.0)

    def test_empty_batch_is_complete(self):
        """Test that an empty batch reports 100 percent."""
        assert ProgressTracker(0).progress_percent == 100.0


class TestParallelTrialRunner:
    """Test the ParallelTrialRunner class."""

    @pytest.mark.parametrize("workers", [None, 1, 3])
    def test_results_in_index_order(self, workers):
        """Test that results come back in index order for any worker count."""
        runner = ParallelTrialRunner(max_workers=workers)
        results = runner.run(range(20), lambda i: i * i)

        assert results == [i * i for i in range(20)]

    def test_sequential_runs_in_calling_thread(self):
        """Test that one worker runs trials in the calling thread."""
        seen = []
        runner = ParallelTrialRunner(max_workers=1)
        runner.run(range(3), lambda i: seen.append(threading.get_ident()))

        assert set(seen) == {threading.get_ident()}

    def test_progress_reported(self, mocker):
        """Test that progress ends at 100 percent."""
        callback = mocker.Mock()
        ParallelTrialRunner(max_workers=2).run(range(5), lambda i: i, callback)

        assert callback.call_args_list[-1].args[0] == 100.0

    @pytest.mark.parametrize("workers", [1, 2])
    def test_failure_propagates(self, workers):
        """Test that a failing trial raises out of run."""
        def trial(i):
            if i == 3:
                raise RuntimeError("boom")
            return i

        with pytest.raises(RuntimeError, match="boom"):
            ParallelTrialRunner(max_workers=workers).run(range(6), trial)
