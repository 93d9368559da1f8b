"""Circuit padding state machines and the two built-in machines."""

from .machine import (
    BUILTIN_MACHINES,
    CLIENT_EVENTS,
    MachineInstance,
    MachineSpecError,
    PaddingEvent,
    PaddingMachineSpec,
    SendPadding,
    StateSpec,
    Uniform,
    UniformInt,
    builtin_dropmark_def_machine,
    builtin_setup_machine,
    cells_in_window,
    instance,
    step,
)

__all__ = [
    "BUILTIN_MACHINES",
    "CLIENT_EVENTS",
    "MachineInstance",
    "MachineSpecError",
    "PaddingEvent",
    "PaddingMachineSpec",
    "SendPadding",
    "StateSpec",
    "Uniform",
    "UniformInt",
    "builtin_dropmark_def_machine",
    "builtin_setup_machine",
    "cells_in_window",
    "instance",
    "step",
]
