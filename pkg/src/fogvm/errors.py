from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Violation:
    """One problem found in a scenario or placement.

    ``ref`` names the offending vm/server/rack id (None for global issues).
    ``slack`` is rhs - lhs for capacity violations, so it is negative.
    """

    code: str
    ref: int | None
    message: str = ""
    slack: float | None = None


class FogVmError(Exception):
    pass


class ScenarioError(FogVmError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(f"{v.code}({v.ref}): {v.message}" for v in violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class UnknownVm(FogVmError, KeyError):
    def __init__(self, vid):
        self.vid = vid
        super().__init__(f"unknown vm {vid}")


class UnknownServer(FogVmError, KeyError):
    def __init__(self, sid):
        self.sid = sid
        super().__init__(f"unknown server {sid}")


class FormulationTooLarge(FogVmError):
    pass


class NonIntegralSolution(FogVmError):
    pass


class InconsistentLinearization(FogVmError):
    pass


class TooLargeForOracle(FogVmError):
    pass


class UnsatisfiableParams(FogVmError):
    pass


class Infeasible(FogVmError):
    pass
