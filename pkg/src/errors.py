from typing import Optional


class DonationProtocolError(Exception):
    """Root of every error raised by the package."""

    exit_code = 1


class ConfigError(DonationProtocolError):
    pass


class LedgerFormatError(DonationProtocolError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class UnknownUnitError(DonationProtocolError):
    def __init__(self, unit_id: str, line: Optional[int] = None):
        self.unit_id = unit_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown receiving unit '{unit_id}'{where}")


class QuarterError(DonationProtocolError):
    pass


class HarnessConfigError(DonationProtocolError):
    pass


class PathError(DonationProtocolError):
    pass


class ChartError(DonationProtocolError):
    pass


class ProtocolInvariantError(DonationProtocolError):
    """
    A falsified engine invariant. Always an engine bug, never bad input.
    """

    exit_code = 2

    def __init__(self, message: str, donor: Optional[str] = None,
                 unit: Optional[str] = None, quarter: Optional[int] = None):
        self.donor = donor
        self.unit = unit
        self.quarter = quarter
        where = ", ".join(
            f"{k}={v}" for k, v in (("donor", donor), ("unit", unit), ("quarter", quarter))
            if v is not None
        )
        super().__init__(f"{message} [{where}]" if where else message)


class GrammarViolation(ProtocolInvariantError):
    pass
