"""Chlorine kinetics in the processed-water tank and the treatment delay.

Concentration is tracked as mg per gallon.  The decay constant K is given in
1/day and converted internally to 1/minute.  Two integration modes exist:

* ``well_mixed`` (default): dy/dt = F_in*(c_in - y)/V - K*y
* ``unscaled``:        dy/dt = F_in*c_in - K*y

Both use explicit Euler at the simulation step.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from ._kernels import _chlorine_step
from .errors import ConfigError, QualityError

MINUTES_PER_DAY = 1440.0

WELL_MIXED = "well_mixed"
UNSCALED = "unscaled"
MODES = (WELL_MIXED, UNSCALED)


@dataclass(frozen=True)
class ChlorineState:
    """Tank 2 chlorine concentration and the tank volume proxy."""

    y_c: float       # mg per gallon
    volume: float    # gallons (tank pressure / capacitance)

    def __post_init__(self):
        if self.y_c < 0:
            raise QualityError("chlorine concentration must be >= 0")


def k_per_minute(k_per_day: float) -> float:
    return k_per_day / MINUTES_PER_DAY


def step_chlorine(state: ChlorineState, inflow: float, c_in: float,
                  outflow: float, dt: float, k_per_day: float,
                  mode: str = WELL_MIXED) -> ChlorineState:
    """One explicit-Euler step of the tank chlorine balance.

    ``inflow``/``outflow`` are the tank's volumetric flows (GPM); in the
    well-mixed form only the inflow changes the concentration, the outflow
    leaves at the tank concentration.
    """
    if inflow < 0 or outflow < 0:
        raise ConfigError("tank flows must be >= 0")
    if k_per_day < 0:
        raise ConfigError("decay rate must be >= 0")
    if dt <= 0:
        raise ConfigError("dt must be > 0")
    k_min = k_per_minute(k_per_day)
    if k_min * dt >= 1.0:
        raise ConfigError(
            f"explicit Euler unstable: K*dt = {k_min * dt:.3g} >= 1")
    if mode not in MODES:
        raise ConfigError(f"unknown chlorine mode {mode!r}")
    if mode == WELL_MIXED and state.volume <= 0:
        raise QualityError("well-mixed balance needs a nonempty tank")
    y_next = _chlorine_step(state.y_c, state.volume, inflow, c_in, dt,
                            k_min, mode == UNSCALED)
    return replace(state, y_c=y_next)


class TransportDelay:
    """FIFO of (flow GPM, concentration mg/gal) slots through the
    flocculation/treatment block.

    The buffer length is detention time / dt and is fixed after
    construction; what enters at step k leaves at k + length.
    """

    def __init__(self, detention_min: float, dt: float,
                 fill_flow: float = 0.0, fill_concentration: float = 0.0):
        if detention_min <= 0 or dt <= 0:
            raise ConfigError("detention time and dt must be > 0")
        length = detention_min / dt
        if abs(length - round(length)) > 1e-9:
            raise ConfigError(
                "detention time must be a whole number of steps "
                f"({detention_min} min / {dt} min)")
        self.length = int(round(length))
        self._slots = deque(
            [(fill_flow, fill_concentration)] * self.length,
            maxlen=self.length)

    def push_pop(self, flow: float, concentration: float):
        """Append the entering slot; return the slot leaving detention."""
        out = self._slots[0]
        self._slots.append((flow, concentration))
        return out

    def peek(self, ahead: int):
        """Slot that will pop ``ahead`` steps from now (0 = next pop).

        Beyond the buffer the answer would depend on future pushes; callers
        supply their own assumption in that case.
        """
        if not 0 <= ahead < self.length:
            raise ConfigError(f"peek index {ahead} outside buffer")
        return self._slots[ahead]

    def content_volume(self, dt: float) -> float:
        """Total water volume (gal) currently in the buffer."""
        return sum(f for f, _ in self._slots) * dt

    def __len__(self):
        return self.length
