"""Native AGC loop: window comparator over post-gain wideband power.

The loop starts at its upper limit, measures wideband power during the
preamble, and steps one index at a time until the post-gain power falls
inside the target window. The index is then frozen for the payload. The
default window (-20, -12) dBm is wider than the 6 dB gain step, so the walk
cannot oscillate and always reaches a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import FrozenAgcError, UsageError
from .rxsim import GainTable, LinkBudget, PacketScenario, Phase, effective_snr

DEFAULT_TARGET_WINDOW_DBM = (-20.0, -12.0)


@dataclass(frozen=True)
class AgcState:
    current_index: int
    upper_limit: int
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM
    frozen: bool = False
    step_count: int = 0


def agc_step(state: AgcState, measured_wideband_dbm: float, table: GainTable) -> AgcState:
    """One comparator decision on a wideband power measurement.

    Too hot (above the window) steps the index down, too cold steps it up,
    in-window leaves it alone. The index never leaves [0, upper_limit].
    """
    if state.frozen:
        raise FrozenAgcError("cannot step a frozen AGC")
    table.check_index(state.current_index)
    low, high = state.target_window_dbm
    post_gain = measured_wideband_dbm + table.gains_db[state.current_index]
    index = state.current_index
    if post_gain > high:
        index = max(0, index - 1)
    elif post_gain < low:
        index = min(state.upper_limit, index + 1)
    return replace(state, current_index=index, step_count=state.step_count + 1)


def run_preamble_agc(
    scenario: PacketScenario,
    upper_limit: int,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> int:
    """Converge on the preamble and return the frozen gain index.

    The measurement includes the interferer only when it arrived before the
    freeze. Starting at the upper limit makes the walk a descent: the loop
    settles on the highest index whose post-gain power does not overshoot
    the window, which maximizes sensitivity under the cap.
    """
    table.check_index(upper_limit)
    low, high = target_window_dbm
    if high - low <= table.max_step_db:
        raise UsageError("target window must be wider than the largest gain step")
    state = AgcState(
        current_index=upper_limit,
        upper_limit=upper_limit,
        target_window_dbm=(low, high),
    )
    # A one-directional walk over G indices needs at most G steps; 2G is a
    # defensive bound that can only trip on a broken comparator.
    for _ in range(2 * table.size):
        measured = effective_snr(
            scenario, state.current_index, Phase.PREAMBLE, table, budget
        ).wideband_dbm
        stepped = agc_step(state, measured, table)
        if stepped.current_index == state.current_index:
            state = stepped
            break
        state = stepped
    state = replace(state, frozen=True)
    return state.current_index
