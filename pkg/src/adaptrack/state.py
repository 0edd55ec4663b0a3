"""Track lifecycle states, shared by the association and tracker stages."""

from enum import IntEnum

__all__ = ["TrackState"]


class TrackState(IntEnum):
    """Lifecycle of a trajectory.

    New      born, not yet confirmed; dies immediately if unmatched
    Tracked  confirmed and currently matched
    Lost     confirmed but coasting on prediction; may be re-acquired
    Removed  terminal
    """

    New = 0
    Tracked = 1
    Lost = 2
    Removed = 3
