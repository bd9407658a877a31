"""Hyperparameters of a silhouette fitting run."""

from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import settings
from core.losses import LossWeights


class FitConfig(BaseModel):
    """Sharpness, loss weights, Adam hyperparameters and iteration budget"""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(default_factory=lambda: settings.SIGMA, gt=0)
    weights: LossWeights = Field(default_factory=LossWeights)
    adam_alpha: float = Field(default_factory=lambda: settings.ADAM_ALPHA, gt=0)
    adam_beta1: float = Field(default_factory=lambda: settings.ADAM_BETA1, gt=0, lt=1)
    adam_beta2: float = Field(default_factory=lambda: settings.ADAM_BETA2, gt=0, lt=1)
    adam_eps: float = Field(default_factory=lambda: settings.ADAM_EPS, gt=0)
    iterations: int = Field(default_factory=lambda: settings.FIT_ITERATIONS, ge=0)
    # (first iteration, sigma) pairs; sigma holds until the next entry
    sigma_schedule: List[Tuple[int, float]] = Field(default_factory=list)
    color_enabled: bool = False
    color_weight: float = Field(default_factory=lambda: settings.COLOR_WEIGHT, ge=0)
    truncate: bool = False
    num_workers: int = Field(default_factory=lambda: settings.NUM_WORKERS, ge=1)

    @field_validator("sigma_schedule")
    @classmethod
    def _check_schedule(cls, schedule: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        previous = None
        for iteration, sigma in schedule:
            if iteration < 0:
                raise ValueError(f"schedule iteration must be non-negative, got {iteration}")
            if not sigma > 0:
                raise ValueError(f"schedule sigma must be positive, got {sigma}")
            if previous is not None and iteration <= previous:
                raise ValueError("schedule iterations must be strictly increasing")
            previous = iteration
        return schedule

    @model_validator(mode="after")
    def _check_color_weight(self) -> "FitConfig":
        if self.color_enabled and self.color_weight == 0:
            raise ValueError("color fitting needs a positive color weight")
        return self

    def sigma_at(self, iteration: int) -> float:
        """Sharpness in effect at an iteration"""
        sigma = self.sigma
        for start, scheduled in self.sigma_schedule:
            if iteration < start:
                break
            sigma = scheduled
        return sigma
