"""Configuration dataclasses and the published default constants."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

SAMPLE_RATE = 16000

# Framing and training setup used throughout (K, hop, K_in, L_in).
DFT_SIZE = 256
HOP = 128
K_IN = 132
L_IN = 5
MINIBATCH = 128
LEARNING_RATE = 2e-4
VALIDATION_FRACTION = 0.2

# Envelope length for the STOI approximation.
STOI_N = 30
STOI_BANDS = 15

LOSS_NAMES = ("mse", "2cl", "3cl", "pw-filt", "pw-pesq", "pw-stoi")


@dataclass(frozen=True)
class StftConfig:
    dft_size: int = DFT_SIZE
    hop: int = HOP
    k_in: int = K_IN

    def __post_init__(self):
        if self.dft_size < 4 or self.dft_size % 2:
            raise ValueError(f"dft_size must be even and >= 4, got {self.dft_size}")
        if self.hop * 2 != self.dft_size:
            raise ValueError("hop must equal dft_size / 2 (50% overlap)")
        if self.k_in < self.n_bins or self.k_in % 4:
            raise ValueError(
                f"k_in={self.k_in} must be >= {self.n_bins} and divisible by 4"
            )

    @property
    def n_bins(self) -> int:
        """Number of nonredundant bins, K/2 + 1."""
        return self.dft_size // 2 + 1

    @classmethod
    def for_size(cls, dft_size: int) -> "StftConfig":
        """Config for an arbitrary K with the smallest admissible k_in."""
        n_bins = dft_size // 2 + 1
        k_in = n_bins + (-n_bins) % 4
        return cls(dft_size=dft_size, hop=dft_size // 2, k_in=k_in)


@dataclass(frozen=True)
class LoudnessConfig:
    """Simplified PESQ-style loudness model.

    Band power is mapped to loudness with a Zwicker power law referenced to
    an absolute hearing threshold. Distortion constants mirror the public
    P.862 description; all are configurable.
    """

    version: str = "simplified-1"
    n_bands: int = 42
    zwicker_power: float = 0.23
    loudness_scale: float = 0.1866055
    # dB SPL assigned to a full-scale sinusoid when placing the threshold.
    full_scale_spl_db: float = 90.0
    masking_fraction: float = 0.25
    asym_offset: float = 0.1
    asym_exponent: float = 1.2
    asym_floor: float = 3.0
    asym_cap: float = 12.0


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.0
    lambda1: float = 0.2
    lambda2: float = 0.8
    theta1: float = 0.1
    theta2: float = 0.0309
    gamma1: float = 0.92
    gamma2: float = 0.6
    lpc_order: int = 16

    def __post_init__(self):
        for name in ("alpha", "beta", "lambda1", "lambda2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.alpha + self.beta > 1.0:
            raise ValueError(
                f"alpha + beta must not exceed 1, got {self.alpha + self.beta}"
            )
        if self.theta1 <= 0 or self.theta2 <= 0:
            raise ValueError("theta1 and theta2 must be positive")
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.lpc_order < 1:
            raise ValueError("lpc_order must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **overrides) -> "LossWeights":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


def default_weights(loss_name: str) -> LossWeights:
    """Selected weights per loss: 2CL alpha=0.5, 3CL (0.1, 0.8)."""
    if loss_name == "3cl":
        return LossWeights(alpha=0.1, beta=0.8)
    return LossWeights()


@dataclass
class OptimizeConfig:
    loss: str = "2cl"
    weights: LossWeights = field(default_factory=LossWeights)
    step_size: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-13
    mask_max: float = 2.0
    init: str = "ones"

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class TrainConfig:
    loss: str = "2cl"
    weights: LossWeights = field(default_factory=LossWeights)
    epochs: int = 200
    batch_size: int = MINIBATCH
    learning_rate: float = LEARNING_RATE
    optimizer: str = "sgd"
    hidden: tuple[int, ...] = (256, 256)
    context: int = L_IN
    validation_fraction: float = VALIDATION_FRACTION
    patience: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.context % 2 == 0:
            raise ValueError("context must be odd (centered window)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
