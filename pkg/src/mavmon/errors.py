"""Exception hierarchy shared across the toolchain.

Front-end errors carry a source span (line, col) when one is known; runtime
evaluation errors are deliberately small because the interpreter converts
them into monitor verdicts rather than letting them escape.
"""

from __future__ import annotations


class MavmonError(Exception):
    """Base class for every error raised by this package."""


class SpecError(MavmonError):
    """A problem in a protocol spec (parse, scope, or resolution)."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col or 0}: {message}"
        super().__init__(message)


class DslSyntaxError(SpecError):
    pass


class UnboundRecursionVariable(SpecError):
    pass


class DuplicateRoleId(SpecError):
    pass


class EmptyChoice(SpecError):
    pass


class UnknownMessageLabel(SpecError):
    pass


class RefinementInvalid(SpecError):
    """A refinement failed validation; carries the full report."""

    def __init__(self, report, line=None, col=None):
        self.report = report
        super().__init__(str(report), line, col)


class DefiniteAssignmentError(SpecError):
    pass


class DuplicateContextVar(SpecError):
    pass


class AmbiguousBranch(SpecError):
    """Two branches of one choice bind the same message schema."""


# -- dialect ingestion ------------------------------------------------------

class DialectError(MavmonError):
    pass


class XmlMalformed(DialectError):
    pass


class UnknownFieldType(DialectError):
    pass


class DuplicateMessageId(DialectError):
    pass


# -- expression evaluation --------------------------------------------------

class EvalError(MavmonError):
    """Base for runtime evaluation failures inside guards/updates."""


class UnboundVariable(EvalError):
    pass


class TypeMismatch(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class ArithmeticOverflow(EvalError):
    """Signed 64-bit intermediate left its range; treated like DivisionByZero."""


# -- graph / synthesis ------------------------------------------------------

class UnguardedLoop(MavmonError):
    """An epsilon cycle survived into compression (unreachable after WF)."""


class WfRequired(MavmonError):
    """Synthesis refused a graph that has not passed all four checks."""


class NonBooleanRefinement(MavmonError):
    pass


class UnresolvableVariable(MavmonError):
    pass


# -- framing / harness ------------------------------------------------------

class FramingError(MavmonError):
    pass


class BadMagic(FramingError):
    pass


class BadCrc(FramingError):
    pass


class UnknownMsgId(FramingError):
    def __init__(self, msg_id: int):
        self.msg_id = msg_id
        super().__init__(f"unknown message id {msg_id}")


class UnknownScenario(MavmonError):
    pass


class BuildFailed(MavmonError):
    """The C toolchain bridge failed to build the emitted monitor."""


class DifferentialMismatch(MavmonError):
    """Interpreter and compiled monitor disagreed on some step."""

    def __init__(self, trace_index: int, step_index: int, interp_verdict: str, compiled_verdict: str):
        self.trace_index = trace_index
        self.step_index = step_index
        self.interp_verdict = interp_verdict
        self.compiled_verdict = compiled_verdict
        super().__init__(
            f"trace {trace_index} step {step_index}: interpreter={interp_verdict} "
            f"compiled={compiled_verdict}"
        )
