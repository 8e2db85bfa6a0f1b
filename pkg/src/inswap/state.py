"""Temperature ladders and replica states."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class TemperatureLadder:
    """Increasing list of positive temperatures ``tau_1 < ... < tau_K``.

    ``strict=False`` is reserved for heated ladders in relaxation studies,
    where several of the lowest slots are raised to a common floor; ordering
    is then not enforced.
    """

    taus: tuple[float, ...]
    strict: bool = True

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        object.__setattr__(self, "taus", taus)
        if not taus:
            raise InvalidArgumentError("temperature ladder is empty")
        if any(not np.isfinite(t) or t <= 0 for t in taus):
            raise InvalidArgumentError(f"temperatures must be positive and finite: {taus}")
        diffs = np.diff(taus)
        if self.strict and np.any(diffs <= 0):
            raise InvalidArgumentError(f"temperatures must be strictly increasing: {taus}")

    def __len__(self) -> int:
        return len(self.taus)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.taus)

    def heated(self, n_slots: int, floor: float) -> "TemperatureLadder":
        """Raise the ``n_slots`` lowest temperatures to at least ``floor``."""
        if not 0 <= n_slots <= len(self.taus):
            raise InvalidArgumentError(f"cannot heat {n_slots} of {len(self.taus)} slots")
        taus = tuple(max(t, floor) if i < n_slots else t for i, t in enumerate(self.taus))
        return TemperatureLadder(taus, strict=False)


@dataclass(frozen=True)
class ReplicaState:
    """K positions, one per temperature slot.

    ``coords`` has shape ``(K, d)``.  ``sweep`` counts completed sampler steps
    and ``swap_attempts`` counts parallel-tempering swap attempts; both drive
    deterministic schedules.  ``energies`` and ``grads`` cache per-coordinate
    potential values and are kept in sync by the samplers.
    """

    coords: np.ndarray
    ladder: TemperatureLadder
    sweep: int = 0
    swap_attempts: int = 0
    energies: np.ndarray | None = field(default=None, compare=False, repr=False)
    grads: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2:
            raise InvalidArgumentError(f"coords must have shape (K, d), got {coords.shape}")
        if coords.shape[0] != len(self.ladder):
            raise InvalidArgumentError(
                f"{coords.shape[0]} coordinates for a ladder of {len(self.ladder)} temperatures"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def K(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def taus(self) -> np.ndarray:
        return self.ladder.array

    def with_coords(self, coords: np.ndarray, energies: np.ndarray | None = None,
                    grads: np.ndarray | None = None, **changes) -> "ReplicaState":
        if changes.keys() - {"sweep", "swap_attempts"}:
            return replace(self, coords=coords, energies=energies, grads=grads, **changes)
        # hot path for samplers: skip re-validation, only copy and freeze
        coords = np.array(coords, dtype=float)
        if coords.shape != self.coords.shape:
            return replace(self, coords=coords, energies=energies, grads=grads, **changes)
        coords.setflags(write=False)
        new = object.__new__(ReplicaState)
        set_ = object.__setattr__
        set_(new, "coords", coords)
        set_(new, "ladder", self.ladder)
        set_(new, "sweep", changes.get("sweep", self.sweep))
        set_(new, "swap_attempts", changes.get("swap_attempts", self.swap_attempts))
        set_(new, "energies", energies)
        set_(new, "grads", grads)
        return new

    def with_ladder(self, ladder: TemperatureLadder) -> "ReplicaState":
        return replace(self, ladder=ladder)


def replica_state(coords: Sequence, taus: Sequence[float]) -> ReplicaState:
    """Convenience constructor from raw coordinates and temperatures."""
    return ReplicaState(np.asarray(coords, dtype=float), TemperatureLadder(tuple(taus)))
