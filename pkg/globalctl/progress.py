"""
Progress bars for long batch loops (Monte Carlo trials, oracle sweeps).
Built on tqdm.

Example:

    from globalctl.progress import progress_iter

    for trial in progress_iter(range(trials), desc="Trials", unit="trials"):
        run_one(trial)
"""

from tqdm import tqdm


def progress_iter(
    iterable,
    desc: str = "Processing",
    unit: str = "items",
    enabled: bool = True,
    total: int = None,
):
    """
    Wrap an iterable with a progress bar.

    When disabled, returns the iterable unchanged.

    Args:
        iterable: Any iterable to wrap
        desc: Description shown before the progress bar
        unit: Unit name shown in progress stats
        enabled: Whether to show progress (False = passthrough)
        total: Total count if known (auto-detected for sequences)

    Returns:
        Iterator that yields items from the iterable
    """
    if not enabled:
        return iterable

    return tqdm(iterable, desc=desc, unit=unit, total=total)
