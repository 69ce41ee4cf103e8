"""Exception hierarchy shared by the model, simulator, controller and CLI."""


class VibromanipError(Exception):
    pass


class ConfigError(VibromanipError, ValueError):
    """A parameter block violates one of its invariants.

    ``field`` names the offending dotted key when known so the CLI can point at it.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.message = message
        self.field = field
        self.line = line

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(self.field)
        prefix = ", ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


class GraspOutsideObject(VibromanipError, ValueError):
    pass


class NonFiniteState(VibromanipError, ArithmeticError):
    pass


class OriginSingularity(VibromanipError, ValueError):
    pass


class DegenerateTarget(VibromanipError, ValueError):
    pass


class ZeroAngularVelocity(VibromanipError, ValueError):
    pass


class Infeasible(VibromanipError):
    pass


class PhaseTimeout(VibromanipError):
    def __init__(self, phase, elapsed, budget):
        super().__init__(f"phase {phase} exceeded its budget ({elapsed:.3f} s > {budget:.3f} s)")
        self.phase = phase
        self.elapsed = elapsed
        self.budget = budget
