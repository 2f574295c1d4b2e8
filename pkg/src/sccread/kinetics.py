"""Continuous-time jump dynamics on a user-declared level system.

This is the slow, fully general counterpart of the two-state machinery
in :mod:`sccread.ctmc`: an explicit Gillespie sampler over any finite
set of levels, with rates that are piecewise constant in time (pulse
sequences).  Its role in the package is twofold: modelling multi-level
pulse sequences (e.g. pump/probe initialization), and serving as an
independent reference implementation that the specialized two-state
fast paths are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownLevelError, UnknownTransitionError

__all__ = ["Transition", "LevelSystem", "Trajectory", "simulate_sequence"]


@dataclass(frozen=True)
class Transition:
    """A directed transition between two named levels.

    ``emits_photon`` marks transitions that produce a photon;
    ``collected`` marks the subset of those whose photon reaches the
    detector.  ``name`` defaults to ``"source->target"``.
    """

    source: str
    target: str
    rate: float
    emits_photon: bool = False
    collected: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.name is None:
            object.__setattr__(self, "name", f"{self.source}->{self.target}")
        if not np.isfinite(self.rate) or self.rate < 0.0:
            raise ValueError(f"rate of {self.name!r} must be finite and >= 0")
        if self.source == self.target:
            raise ValueError(f"transition {self.name!r} is a self-loop")
        if self.collected and not self.emits_photon:
            raise ValueError(f"transition {self.name!r} is collected but emits no photon")


@dataclass(frozen=True)
class LevelSystem:
    """A finite set of levels plus the transitions connecting them."""

    levels: tuple[str, ...]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("level names must be unique")
        names = [t.name for t in self.transitions]
        if len(set(names)) != len(names):
            raise ValueError("transition names must be unique")
        known = set(self.levels)
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in known:
                    raise UnknownLevelError(f"transition {t.name!r} references unknown level {end!r}")

    def level_index(self, name: str) -> int:
        try:
            return self.levels.index(name)
        except ValueError:
            raise UnknownLevelError(f"unknown level {name!r}") from None

    def transition_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.transitions)


@dataclass(frozen=True)
class Trajectory:
    """One sampled realization of a pulse sequence.

    ``states`` has one more entry than ``jump_times`` (it includes the
    initial level); all times are absolute seconds from the start of the
    sequence and strictly increasing.  ``photon_times`` holds detection
    times of collected photons.  The arrays are read-only.
    """

    jump_times: np.ndarray
    states: np.ndarray
    photon_times: np.ndarray
    total_duration: float
    seed: int

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        st = np.asarray(self.states, dtype=np.int64)
        ph = np.asarray(self.photon_times, dtype=float)
        if st.size != jt.size + 1:
            raise ValueError("states must have exactly one more entry than jump_times")
        if jt.size and np.any(np.diff(jt) <= 0.0):
            raise ValueError("jump_times must be strictly increasing")
        if ph.size and np.any(np.diff(ph) < 0.0):
            raise ValueError("photon_times must be non-decreasing")
        for arr, nm in ((jt, "jump_times"), (st, "states"), (ph, "photon_times")):
            arr.flags.writeable = False
            object.__setattr__(self, nm, arr)

    def count_photons(self, t0: float = 0.0, t1: float | None = None) -> int:
        """Number of collected photons with detection time in [t0, t1)."""
        if t1 is None:
            t1 = self.total_duration
        return int(np.count_nonzero((self.photon_times >= t0) & (self.photon_times < t1)))

    def state_at(self, t: float) -> int:
        """Level index occupied at absolute time ``t``."""
        if t < 0.0 or t > self.total_duration:
            raise ValueError("t outside the simulated interval")
        return int(self.states[np.searchsorted(self.jump_times, t, side="right")])


def simulate_sequence(system: LevelSystem, segments, initial: str, seed: int) -> Trajectory:
    """Run a Gillespie simulation of a piecewise-constant pulse sequence.

    Parameters
    ----------
    system : LevelSystem
    segments : sequence of (duration, overrides)
        ``duration`` in seconds (>= 0); ``overrides`` maps transition
        names to the rate that applies during the segment (transitions
        not named keep their declared rate).  An unknown name raises
        :class:`UnknownTransitionError`.
    initial : str
        Level occupied at time zero.
    seed : int
        Seeds ``Generator(PCG64(SeedSequence(seed)))``.  Each step draws
        one uniform for the waiting time (inverse CDF) and, if a jump
        happens, one uniform to pick the transition by cumulative rate.

    Returns
    -------
    Trajectory
    """
    state = system.level_index(initial)
    known = set(system.transition_names())
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    jump_times: list[float] = []
    states = [state]
    photons: list[float] = []
    t = 0.0
    for duration, overrides in segments:
        if duration < 0.0 or not np.isfinite(duration):
            raise ValueError(f"segment duration must be finite and >= 0, got {duration!r}")
        for name, rate in overrides.items():
            if name not in known:
                raise UnknownTransitionError(f"override references unknown transition {name!r}")
            if not np.isfinite(rate) or rate < 0.0:
                raise ValueError(f"override rate for {name!r} must be finite and >= 0")
        # per-level outgoing tables for this segment
        table: list[list[tuple[float, int, bool]]] = [[] for _ in system.levels]
        for tr in system.transitions:
            rate = overrides.get(tr.name, tr.rate)
            if rate > 0.0:
                table[system.level_index(tr.source)].append(
                    (rate, system.level_index(tr.target), tr.collected))
        seg_end = t + duration
        while True:
            out = table[state]
            total = sum(r for r, _, _ in out)
            if total <= 0.0:
                break
            dwell = -np.log1p(-rng.random()) / total
            if t + dwell >= seg_end:
                break
            t += dwell
            pick = rng.random() * total
            acc = 0.0
            for rate, target, collected in out:
                acc += rate
                if pick < acc or (rate, target, collected) is out[-1]:
                    if collected:
                        photons.append(t)
                    state = target
                    break
            jump_times.append(t)
            states.append(state)
        t = seg_end
    return Trajectory(jump_times=np.array(jump_times), states=np.array(states),
                      photon_times=np.array(photons), total_duration=t, seed=seed)
