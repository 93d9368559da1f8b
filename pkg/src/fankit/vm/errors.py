"""Exceptions raised by the assembler, validator and interpreter."""


class AssemblerError(Exception):
    """Base class for errors found while assembling source text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AsmSyntaxError(AssemblerError):
    pass


class UnknownMnemonic(AssemblerError):
    pass


class RegisterOutOfRange(AssemblerError):
    pass


class JumpOutOfRange(AssemblerError):
    pass


class ValidationError(Exception):
    """A decoded instruction stream is not an acceptable program."""


class VMTrap(Exception):
    """Execution stopped abnormally. The sandbox is left as it was at the trap."""


class SandboxFault(VMTrap):
    def __init__(self, addr, width, reason="out of bounds"):
        self.addr = addr
        self.width = width
        super().__init__(f"{reason}: [{addr:#x}, +{width})")


class InstructionBudgetExceeded(VMTrap):
    pass


class BadHostCall(VMTrap):
    pass


class DivisionByZero(VMTrap):
    pass


class OutOfPluginMemory(VMTrap):
    pass
