import time
from typing import Any, Dict

import numpy as np

from config.settings import settings
from core.camera import Camera
from core.soft_raster import render_color, render_hard, render_soft
from utils.image_utils import mask_to_image, silhouette_to_image, write_pgm, write_ppm
from .base_command import BaseCommand


class RenderCommand(BaseCommand):
    """Render one silhouette (soft, hard or vertex color) of a mesh"""

    def __init__(self):
        super().__init__(
            name="render",
            description="Renders a soft or hard silhouette, or a vertex-color image, from one camera."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["mesh", "out"]):
                return self.create_error_response("Missing required fields: mesh, out", "ARGUMENT_ERROR", 2)

            start_time = time.time()
            mesh = self.load_mesh(input_data["mesh"])
            size = self.option(input_data, "size", settings.IMAGE_SIZE)
            camera = Camera(
                azimuth=self.option(input_data, "azimuth", 0.0),
                elevation=self.option(input_data, "elevation", 0.0),
                distance=self.option(input_data, "distance", settings.CAMERA_DISTANCE),
                width=size,
                height=size,
            )
            sigma = self.option(input_data, "sigma", settings.SIGMA)
            truncate = bool(input_data.get("truncate", False))
            out = input_data["out"]

            if input_data.get("color"):
                mode = "color"
                image = render_color(mesh, camera, sigma, truncate)
                write_ppm(image, out)
                coverage = float(np.mean(np.any(image > 0, axis=2)))
            elif input_data.get("hard"):
                mode = "hard"
                mask = render_hard(mesh, camera)
                write_pgm(mask_to_image(mask), out)
                coverage = float(mask.values.mean())
            else:
                mode = "soft"
                silhouette = render_soft(mesh, camera, sigma, truncate)
                image = silhouette_to_image(silhouette)
                write_pgm(image, out)
                coverage = float(np.mean(image.as_array() >= 128))

            result = {
                "mode": mode,
                "out": str(out),
                "size": size,
                "coverage": coverage,
            }
            self.log_execution(input_data, result, time.time() - start_time)
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
