import math
from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, Dict, Any, List, Union, Literal


class SpaceKind(str, Enum):
    TORUS = "torus"
    JACOBI = "jacobi"


class CutoffKind(str, Enum):
    TYPE_A = "A"
    TYPE_B = "B"
    TYPE_C = "C"


class EnvelopeForm(str, Enum):
    POLYNOMIAL = "polynomial"
    SUBEXPONENTIAL = "subexponential"


class NormMethod(str, Enum):
    LP_DECOMP = "lp_decomp"
    PHI_VARIANT = "phi_variant"
    HEAT = "heat"
    SEQUENCE = "sequence"
    FRAME_COEFF = "frame_coeff"


class Flavor(str, Enum):
    CLASSICAL = "classical"
    NONCLASSICAL = "nonclassical"


class SpaceType(str, Enum):
    BESOV = "B"
    TRIEBEL_LIZORKIN = "F"
    SOBOLEV = "H"


class FrameVariant(str, Enum):
    FRAME1 = "frame1"
    DUAL = "dual"
    TIGHT = "tight"


class TransformDirection(str, Enum):
    ANALYZE_DUAL = "analyze_dual"
    ANALYZE_PRIMAL = "analyze_primal"
    SYNTHESIZE = "synthesize"


class Provenance(str, Enum):
    ANALYSIS_PRIMAL = "analysis_primal"
    ANALYSIS_DUAL = "analysis_dual"
    SYNTHETIC = "synthetic"


class EquivalencePair(str, Enum):
    LP_VS_HEAT = "lp_vs_heat"
    LP_VS_SEQ = "lp_vs_seq"
    LP_VS_PHI = "lp_vs_phi"
    F_P2_VS_HSP = "F_p2_vs_Hsp"


class JacksonStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    EXACT = "exact"
    INCONCLUSIVE = "inconclusive"


class TaskKind(str, Enum):
    BUILD = "build"
    VERIFY = "verify"
    NORMS = "norms"
    APPROX = "approx"
    REPORT = "report"


class SpaceDescriptor(BaseModel):
    kind: SpaceKind = SpaceKind.TORUS
    alpha: float = 0.0
    beta: float = 0.0
    N: int = 512
    resolution: Optional[int] = None

    @field_validator("alpha", "beta")
    @classmethod
    def check_jacobi_parameter(cls, value: float) -> float:
        if value <= -1:
            raise ValueError("Jacobi parameters must exceed -1")
        return value

    @field_validator("N")
    @classmethod
    def check_truncation(cls, value: int) -> int:
        if value < 1:
            raise ValueError("truncation N must be a positive integer")
        return value


class FrameDescriptor(BaseModel):
    b: float = 2.0
    gamma: Union[float, Literal["auto"]] = 1.0
    levels: int = 6
    variant: FrameVariant = FrameVariant.TIGHT
    epsilon: float = 1.0

    @field_validator("b")
    @classmethod
    def check_base(cls, value: float) -> float:
        if value <= 1:
            raise ValueError("dilation base b must exceed 1")
        return value

    @field_validator("levels")
    @classmethod
    def check_levels(cls, value: int) -> int:
        if value < 0:
            raise ValueError("levels must be nonnegative")
        return value

    @field_validator("epsilon")
    @classmethod
    def check_epsilon(cls, value: float) -> float:
        if not 0 < value <= 1:
            raise ValueError("cut-off smoothness parameter must lie in (0, 1]")
        return value


class TaskDescriptor(BaseModel):
    task: TaskKind = TaskKind.VERIFY
    suite: str = "all"
    trials: int = 100
    seed: int = 0
    function: str = "random:seed=0"
    methods: List[NormMethod] = [NormMethod.LP_DECOMP, NormMethod.HEAT, NormMethod.SEQUENCE]
    s: List[float] = [1.0]
    p: List[float] = [2.0]
    q: List[float] = [2.0]
    nmax: int = 400

    @field_validator("trials", "nmax")
    @classmethod
    def check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("counts must be positive")
        return value

    @field_validator("p", "q")
    @classmethod
    def check_exponents(cls, values: List[float]) -> List[float]:
        if not values or any(not v > 0 for v in values):
            raise ValueError("p and q must be nonempty lists of values in (0, inf]")
        return values


class RunConfig(BaseModel):
    space: SpaceDescriptor = SpaceDescriptor()
    frame: FrameDescriptor = FrameDescriptor()
    task: TaskDescriptor = TaskDescriptor()
    frame_path: Optional[str] = None
    output: Optional[str] = None
    report_dir: str = "reports"


class SpaceParams(BaseModel):
    s: float = 1.0
    p: float = 2.0
    q: float = 2.0
    flavor: Flavor = Flavor.CLASSICAL
    d: Optional[float] = None
    b: float = 2.0
    squared: bool = False

    @property
    def m(self) -> int:
        """Smallest nonnegative integer strictly above s."""
        return max(0, math.floor(self.s) + 1)


class DoublingReport(BaseModel):
    c0_hat: float
    d_hat: float
    reverse_c_hat: float
    samples: int
    comparison_max: Optional[float] = None


class GrowthEntry(BaseModel):
    k: int
    sup_norm: float
    bound: float
    violated: bool


class GrowthReport(BaseModel):
    epsilon: float
    entries: List[GrowthEntry]

    @property
    def violations(self) -> int:
        return sum(1 for entry in self.entries if entry.violated)


class Envelope(BaseModel):
    form: EnvelopeForm
    c: float
    sigma: Optional[float] = None
    kappa: Optional[float] = None
    beta: Optional[float] = None
    r2: float = 0.0
    decades: float = 0.0
    points: int = 0
    flagged: bool = False


class ComposeReport(BaseModel):
    c_natural_hat: float
    envelope: Envelope
    inequality_violations: int
    triples: int


class CubatureReport(BaseModel):
    lam: float
    moments: int
    moment_residual: float
    min_weight: float
    bracket_ok: bool


class FrameBoundsReport(BaseModel):
    lower_hat: float
    upper_hat: float
    trials: int
    which: str = "primal"


class NormReport(BaseModel):
    value: float
    method: NormMethod
    space: SpaceType
    s: float
    p: float
    q: float
    flavor: Flavor = Flavor.CLASSICAL
    grid: Dict[str, Any] = {}


class EquivalenceReport(BaseModel):
    pair: str
    min_ratio: float
    max_ratio: float
    count: int
    ratios: List[float] = []

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio


class ApproxCurve(BaseModel):
    n: List[int]
    sigma: List[float]
    sigma_best: Optional[List[float]] = None
    s: float
    p: float
    tau: float
    slope_hat: Optional[float] = None


class JacksonReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    slope_hat: float
    status: JacksonStatus
    passed: bool = Field(alias="pass")
    fit_range: List[int] = []


class SuiteResult(BaseModel):
    name: str
    passed: bool
    details: Dict[str, Any] = {}
    failures: List[str] = []

    @model_validator(mode="after")
    def failures_imply_failed(self):
        if self.failures and self.passed:
            self.passed = False
        return self
