from typing import Any, Dict, List, Optional


class HeatFrameError(Exception):
    """Base class for every failure raised by heatframe services."""

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": str(self)}


class ConfigurationError(HeatFrameError):
    pass


class SpectralIndexError(HeatFrameError, IndexError):
    pass


class SpectralDomainError(HeatFrameError, ValueError):
    pass


class ParameterError(HeatFrameError, ValueError):
    pass


class DegenerateInputError(HeatFrameError, ValueError):
    pass


class FitError(HeatFrameError):
    pass


class ConstructionError(HeatFrameError):
    pass


class ContractError(HeatFrameError):
    pass


class CubatureError(HeatFrameError):
    """Cubature weights failed positivity, the ball bracket, or exactness."""

    def __init__(self, message: str, offending: Optional[List[int]] = None):
        super().__init__(message)
        self.offending = list(offending or [])

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["offending_centers"] = self.offending
        return data


class DualConstructionError(HeatFrameError):
    def __init__(self, message: str, level: int, residual_norm: float):
        super().__init__(message)
        self.level = level
        self.residual_norm = residual_norm

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update({"level": self.level, "residual_norm": self.residual_norm})
        return data


class FrameFormatError(HeatFrameError):
    def __init__(self, message: str, found: Optional[str] = None, expected: Optional[str] = None):
        super().__init__(message)
        self.found = found
        self.expected = expected
