import time
from typing import Any, Dict, List

from config.settings import settings
from core.camera import Camera
from core.errors import ManifestError
from core.fit_config import FitConfig
from core.fitting import View, ViewSet, evaluate_2d_iou, fit_async
from core.losses import LossWeights
from core.mesh import save_obj
from utils.image_utils import image_to_mask, read_pgm
from utils.table_io import read_manifest, write_loss_history
from .base_command import BaseCommand


class FitCommand(BaseCommand):
    """Fit a template mesh to the silhouettes listed in a views manifest"""

    def __init__(self):
        super().__init__(
            name="fit",
            description="Deforms a template with Adam until its soft silhouettes match the manifest's targets."
        )

    def _load_views(self, manifest_path: str) -> ViewSet:
        views: List[View] = []
        for index, entry in enumerate(read_manifest(manifest_path)):
            line_number = index + 2
            if not entry.image_path.is_file():
                raise ManifestError(f"image {entry.image_path} not found", line_number)
            image = read_pgm(entry.image_path)
            camera = Camera(
                azimuth=entry.azimuth,
                elevation=entry.elevation,
                distance=entry.distance,
                width=image.width,
                height=image.height,
            )
            views.append(View(camera, image_to_mask(image)))
        return ViewSet(views)

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["template", "manifest", "out", "log"]):
                return self.create_error_response(
                    "Missing required fields: template, manifest, out, log", "ARGUMENT_ERROR", 2
                )

            start_time = time.time()
            template = self.load_mesh(input_data["template"])
            views = self._load_views(input_data["manifest"])

            weight_options = {
                key: value
                for key, value in (("lambda", input_data.get("lambda")), ("mu", input_data.get("mu")))
                if value is not None
            }
            config_options = {
                key: input_data[source]
                for key, source in (
                    ("sigma", "sigma"),
                    ("adam_alpha", "alpha"),
                    ("iterations", "iters"),
                    ("num_workers", "workers"),
                )
                if input_data.get(source) is not None
            }
            config = FitConfig(
                weights=LossWeights(**weight_options),
                truncate=bool(input_data.get("truncate", False)),
                **config_options,
            )

            self.logger.info(
                f"Fitting {template.vertex_count}-vertex template to {len(views)} views "
                f"for {config.iterations} iterations"
            )
            fitted, history = await fit_async(template, views, config)
            save_obj(fitted, input_data["out"])
            write_loss_history(history, input_data["log"])
            per_view_iou, mean_iou = evaluate_2d_iou(fitted, views)

            final = history[-1] if history else None
            result = {
                "iterations": config.iterations,
                "views": len(views),
                "out": str(input_data["out"]),
                "log": str(input_data["log"]),
                "final_loss": final.as_row(len(history) - 1) if final else None,
                "mean_2d_iou": mean_iou,
                "per_view_2d_iou": per_view_iou,
            }
            self.log_execution(input_data, result, time.time() - start_time)
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
