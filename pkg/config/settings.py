import os
from dotenv import load_dotenv
from typing import List

# Load environment variables
load_dotenv()

class Settings:
    """Configuration settings for the soft rasterizer and silhouette fitting"""

    # Soft rasterizer
    SIGMA: float = float(os.getenv("SOFTRAS_SIGMA", "3e-5"))

    # Camera and images
    IMAGE_SIZE: int = int(os.getenv("SOFTRAS_IMAGE_SIZE", "64"))
    CAMERA_DISTANCE: float = float(os.getenv("SOFTRAS_CAMERA_DISTANCE", "2.732"))
    FOV_Y: float = float(os.getenv("SOFTRAS_FOV_Y", "30"))

    # Template mesh
    TEMPLATE_SUBDIVISIONS: int = 3
    TEMPLATE_RADIUS: float = float(os.getenv("SOFTRAS_TEMPLATE_RADIUS", "0.375"))

    # Loss weights and optimizer
    LAMBDA: float = float(os.getenv("SOFTRAS_LAMBDA", "0.01"))
    MU: float = float(os.getenv("SOFTRAS_MU", "0.001"))
    ADAM_ALPHA: float = float(os.getenv("SOFTRAS_ADAM_ALPHA", "1e-4"))
    ADAM_BETA1: float = 0.9
    ADAM_BETA2: float = 0.999
    ADAM_EPS: float = 1e-8
    COLOR_WEIGHT: float = 1.0
    FIT_ITERATIONS: int = int(os.getenv("SOFTRAS_FIT_ITERATIONS", "2000"))

    # Runtime
    NUM_WORKERS: int = int(os.getenv("SOFTRAS_NUM_WORKERS", "1"))
    LOG_LEVEL: str = os.getenv("SOFTRAS_LOG_LEVEL", "INFO")
    FIT_LOG_EVERY: int = int(os.getenv("SOFTRAS_FIT_LOG_EVERY", "100"))

    # Evaluation
    VOXEL_RESOLUTION: int = int(os.getenv("SOFTRAS_VOXEL_RESOLUTION", "32"))
    VOXEL_MARGIN: float = 0.05
    RAY_JITTER: float = 1e-7

    # Business Rules
    NEAR_PLANE: float = 0.1
    MAX_SUBDIVISIONS: int = 6
    TRUNCATION_EPS: float = 1e-7
    COLOR_EPS: float = 1e-8
    DEGENERATE_AREA: float = 1e-12

    # Gradient checking
    GRADCHECK_TRIALS: int = 100
    GRADCHECK_SEED: int = 7
    GRADCHECK_STEP: float = 1e-4
    GRADCHECK_TOLERANCE: float = 1e-4

    def validate(self) -> List[str]:
        """Validate that the configured values are usable"""
        problems = []
        positive_values = [
            ("SOFTRAS_SIGMA", self.SIGMA),
            ("SOFTRAS_CAMERA_DISTANCE", self.CAMERA_DISTANCE),
            ("SOFTRAS_TEMPLATE_RADIUS", self.TEMPLATE_RADIUS),
            ("SOFTRAS_ADAM_ALPHA", self.ADAM_ALPHA),
            ("SOFTRAS_IMAGE_SIZE", self.IMAGE_SIZE),
            ("SOFTRAS_NUM_WORKERS", self.NUM_WORKERS),
            ("SOFTRAS_FIT_LOG_EVERY", self.FIT_LOG_EVERY),
        ]

        for key_name, key_value in positive_values:
            if not key_value > 0:
                problems.append(f"{key_name} must be positive, got {key_value}")

        if not 0 < self.FOV_Y < 180:
            problems.append(f"SOFTRAS_FOV_Y must lie in (0, 180), got {self.FOV_Y}")
        if self.LAMBDA < 0 or self.MU < 0:
            problems.append("SOFTRAS_LAMBDA and SOFTRAS_MU must be non-negative")
        if self.FIT_ITERATIONS < 0:
            problems.append(f"SOFTRAS_FIT_ITERATIONS must be non-negative, got {self.FIT_ITERATIONS}")
        if self.VOXEL_RESOLUTION < 2:
            problems.append(f"SOFTRAS_VOXEL_RESOLUTION must be at least 2, got {self.VOXEL_RESOLUTION}")

        return problems

# Global settings instance
settings = Settings()
