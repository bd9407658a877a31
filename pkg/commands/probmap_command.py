import time
from typing import Any, Dict

from config.settings import settings
from core.soft_raster import face_probability_map
from utils.image_utils import silhouette_to_image, write_pgm
from .base_command import BaseCommand

# Screen-space triangle used to show how sigma shapes a probability map
REFERENCE_TRIANGLE = ((-0.6, -0.5), (0.6, -0.5), (0.0, 0.6))


class ProbmapCommand(BaseCommand):
    """Probability map of a single reference triangle"""

    def __init__(self):
        super().__init__(
            name="probmap",
            description="Renders the per-triangle probability map D for a given sharpness."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["out"]):
                return self.create_error_response("Missing required field: out", "ARGUMENT_ERROR", 2)

            start_time = time.time()
            size = self.option(input_data, "size", settings.IMAGE_SIZE)
            sigma = self.option(input_data, "sigma", settings.SIGMA)
            probability = face_probability_map(REFERENCE_TRIANGLE, size, size, sigma)
            write_pgm(silhouette_to_image(probability), input_data["out"])

            result = {
                "out": str(input_data["out"]),
                "sigma": sigma,
                "size": size,
                "mean_probability": float(probability.values.mean()),
            }
            self.log_execution(input_data, result, time.time() - start_time)
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
