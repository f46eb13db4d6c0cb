"""Shared enumerations for epidemic phases and behavioural alternatives."""

from enum import IntEnum


class Phase(IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    INFECTIOUS = 2  # infectious in the community
    HOSPITALIZED = 3
    ICU = 4
    QUARANTINE = 5
    RECOVERED = 6
    DEAD = 7


# column names used in metrics and CSV output, in Phase order
PHASE_COLUMNS = (
    "susceptible",
    "exposed",
    "infectious",
    "hospitalized",
    "icu",
    "quarantine",
    "recovered",
    "dead",
)

# phases in which an agent carries the virus and counts towards prevalence
INFECTED_PHASES = (Phase.INFECTIOUS, Phase.HOSPITALIZED, Phase.ICU, Phase.QUARANTINE)


class Alternative(IntEnum):
    ACCEPT = 0
    REJECT = 1
