"""
Error hierarchy for globalctl.

Every error is a ValueError so callers that guard contract violations with
``except ValueError`` keep working. ``code`` is the stable name written into
the CLI's machine-readable error document.
"""


class GlobalControlError(ValueError):
    """Base class for all globalctl errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# =============================================================================
# Layout
# =============================================================================


class InsufficientLength(GlobalControlError):
    """The chain cannot host the requested units, stations and margins."""


class InsufficientMargins(GlobalControlError):
    """Triple-CU work needs more payload-free units than the layout has."""


class LayoutError(GlobalControlError):
    """Inconsistent layout configuration."""


class LevelOutOfRange(GlobalControlError):
    """Concatenation level outside 0..concat_depth."""


class NonCanonicalLabels(GlobalControlError):
    """Station labels do not follow the canonical hierarchy."""


# =============================================================================
# State and instruction set
# =============================================================================


class LengthMismatch(GlobalControlError):
    """A pattern or vector does not match the chain length."""


class PatternError(GlobalControlError):
    """An initial pattern is unknown or cannot be hosted by the layout."""


class NonUnitaryError(GlobalControlError):
    """A matrix handed to the kernel is not unitary."""


class QuantumControlledReset(GlobalControlError):
    """A controlled reset found a control cell in superposition."""


class UnknownMacro(GlobalControlError):
    """Macro name outside the supported set."""


class InvalidInstruction(GlobalControlError):
    """Instruction fields are malformed."""


class ProgramParseError(GlobalControlError):
    """A pulse program file violates its schema."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class FingerprintMismatch(GlobalControlError):
    """A pulse program was built for a different layout."""


class StateTooLarge(GlobalControlError):
    """The dense oracle was asked for more qubits than it supports."""


# =============================================================================
# Protocols
# =============================================================================


class NoCuFound(GlobalControlError):
    """No control unit is present where one is required."""


class MultipleCusActive(GlobalControlError):
    """More than one control unit is present where exactly one is required."""


class OutOfMargins(GlobalControlError):
    """A transport would push a control unit off the chain."""


class SameQubitError(GlobalControlError):
    """Two-qubit gate control and target coincide."""


class StrayControlError(GlobalControlError):
    """The B sublattice holds ones other than the expected control units."""


class MissingSwitchingStation(GlobalControlError):
    """The protocol needs switching stations but the layout has none."""


class AncillaNotClear(GlobalControlError):
    """The syndrome ancilla is not Classical 0."""


class SyndromeNotClassical(GlobalControlError):
    """The ancilla did not end in a basis state after extraction."""


class CusNotDeployed(GlobalControlError):
    """The three redundant control units are not at their expected sites."""


# =============================================================================
# Compiler
# =============================================================================


class ConvergenceFailure(GlobalControlError):
    """The pulse-parameter solver did not reach the residual tolerance."""

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class CircuitError(GlobalControlError):
    """A circuit op is invalid for the layout or out of order."""


# =============================================================================
# Command line
# =============================================================================


class UsageError(GlobalControlError):
    """Unknown flag, missing argument or bad choice on the command line."""
