import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.errors import InvalidParameter


class PowerLawFTSParams(BaseModel):
    """ln p(t) = A + B (t_c - t)^m"""
    model_config = ConfigDict(frozen=True)

    A: float
    B: float
    t_c: float
    m: float

    @model_validator(mode="after")
    def _check(self) -> 'PowerLawFTSParams':
        if self.m == 0:
            raise InvalidParameter("Exponent m must be non-zero")
        return self

    @property
    def is_bubble_shape(self) -> bool:
        """B < 0 and 0 < m < 1: accelerating growth with finite price at t_c"""
        return self.B < 0 and 0 < self.m < 1


class LPPLParams(BaseModel):
    """FTS power law decorated with oscillations periodic in ln(t_c - t)"""
    model_config = ConfigDict(frozen=True)

    A: float
    B: float
    t_c: float
    m: float
    C1: float = 0.0
    C2: float = 0.0
    omega: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self) -> 'LPPLParams':
        if self.m == 0:
            raise InvalidParameter("Exponent m must be non-zero")
        return self

    @property
    def amplitude(self) -> float:
        return math.hypot(self.C1, self.C2)

    @property
    def phase(self) -> float:
        return math.atan2(self.C2, self.C1)

    @property
    def scaling_ratio(self) -> float:
        """Preferred scaling ratio g = exp(2π/ω) of the discrete scale invariance"""
        return math.exp(2 * math.pi / self.omega)

    @property
    def is_bubble_shape(self) -> bool:
        return self.B < 0 and 0 < self.m < 1

    def as_fts(self) -> PowerLawFTSParams:
        """Drop the oscillation"""
        return PowerLawFTSParams(A=self.A, B=self.B, t_c=self.t_c, m=self.m)


class ExpFitParams(BaseModel):
    """Log-linear null: ln p(t) = a + b t"""
    model_config = ConfigDict(frozen=True)

    a: float
    b: float


class FeedbackODEParams(BaseModel):
    """dp/dt = c p^2 started at p(0) = p0"""
    model_config = ConfigDict(frozen=True)

    p0: float = Field(gt=0)
    c: float = Field(gt=0)

    @property
    def t_c(self) -> float:
        return 1.0 / (self.c * self.p0)
