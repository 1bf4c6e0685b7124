"""
Batch execution utilities for Monte Carlo trials.

This module provides progress tracking and a thread-pool runner that
executes independent trials and returns their results in index order, so
parallel and sequential runs aggregate identically.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ProgressTracker:
    """Tracks and reports progress of batch operations."""

    def __init__(
        self,
        total_items: int,
        update_callback: Optional[Callable[[float, str], None]] = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        """Initialize progress tracker.

        Args:
            total_items: Total number of items to process
            update_callback: Optional callback taking
                (progress_percent, status_message)
            clock: Time source in seconds
        """
        self.total_items = total_items
        self.processed_items = 0
        self.clock = clock
        self.start_time = clock()
        self.update_callback = update_callback
        self.last_update_time = float("-inf")
        self.update_interval = 0.5  # Report at most twice per second

    def update(self, increment: int = 1, status: str = "") -> None:
        """Update progress and call callback if provided.

        Args:
            increment: Number of items processed
            status: Optional status message
        """
        self.processed_items += increment
        current_time = self.clock()
        finished = self.processed_items >= self.total_items

        # Throttle updates, but always report completion
        if finished or current_time - self.last_update_time >= self.update_interval:
            if self.update_callback:
                self.update_callback(self.progress_percent, status)
            self.last_update_time = current_time

    @property
    def progress_percent(self) -> float:
        if self.total_items == 0:
            return 100.0
        return (self.processed_items / self.total_items) * 100

    def get_eta(self) -> Optional[float]:
        """Calculate estimated time to completion in seconds.

        Returns:
            Estimated seconds remaining, or None if cannot calculate
        """
        if self.processed_items == 0:
            return None

        elapsed_time = self.clock() - self.start_time
        if elapsed_time <= 0:
            return None
        rate = self.processed_items / elapsed_time
        remaining_items = self.total_items - self.processed_items
        return remaining_items / rate

    def get_stats(self) -> Dict[str, Any]:
        """Get current processing statistics.

        Returns:
            Dictionary with processing stats
        """
        elapsed_time = self.clock() - self.start_time
        rate = self.processed_items / elapsed_time if elapsed_time > 0 else 0

        return {
            "total_items": self.total_items,
            "processed_items": self.processed_items,
            "progress_percent": self.progress_percent,
            "elapsed_time": elapsed_time,
            "processing_rate": rate,
            "eta_seconds": self.get_eta(),
        }


class ParallelTrialRunner:
    """Run independent trials on a thread pool, results in index order."""

    def __init__(self, max_workers: Optional[int] = None):
        """Initialize the runner.

        Args:
            max_workers: Maximum number of worker threads; 1 runs inline
                and None lets the executor choose
        """
        self.max_workers = max_workers

    def run(
        self,
        indices: Sequence[int],
        trial_func: Callable[[int], T],
        progress_callback: Optional[Callable[[float, str], None]] = None,
    ) -> List[T]:
        """Run ``trial_func`` for every index.

        Args:
            indices: Trial indices
            trial_func: Function computing one trial from its index
            progress_callback: Optional progress callback

        Returns:
            Results in the order of ``indices``

        Raises:
            Exception: The first trial failure, after logging it
        """
        tracker = ProgressTracker(len(indices), progress_callback)

        if self.max_workers == 1:
            return self._run_sequential(indices, trial_func, tracker)

        workers = self.max_workers or "default"
        logger.debug(f"Running {len(indices)} trials with {workers} workers")

        results: Dict[int, T] = {}
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_index = {
                executor.submit(trial_func, index): index for index in indices
            }

            for future in as_completed(future_to_index):
                index = future_to_index[future]
                try:
                    results[index] = future.result()
                except Exception as e:
                    logger.error(f"Error in trial {index}: {e}")
                    for pending in future_to_index:
                        pending.cancel()
                    raise
                tracker.update(1, f"Completed trial {index}")

        return [results[index] for index in indices]

    def _run_sequential(
        self,
        indices: Sequence[int],
        trial_func: Callable[[int], T],
        tracker: ProgressTracker,
    ) -> List[T]:
        """Fallback sequential processing."""
        results = []
        for index in indices:
            try:
                results.append(trial_func(index))
            except Exception as e:
                logger.error(f"Error in trial {index}: {e}")
                raise
            tracker.update(1, f"Completed trial {index}")
        return results
