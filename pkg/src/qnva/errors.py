"""Exception hierarchy shared by every layer of the simulator."""


class QNVAError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(QNVAError, ValueError):
    """Invalid scenario parameters (sizes, accuracy degree, behaviors)."""


class MalformedSequenceError(QNVAError, ValueError):
    """A proof sequence contains a partially cryptic tuple."""


class DegenerateForgeError(QNVAError):
    """The forger has too few cryptic tuples to place the required bits."""


class ProtocolError(QNVAError):
    """An aggregator received events in an order the state machine forbids."""


class HarnessError(QNVAError):
    """The simulated network was asked to deliver an inconsistent phase."""
