import time
from pathlib import Path
from typing import Any, Dict

from config.settings import settings
from core.camera import ViewSetName, view_set_cameras
from core.soft_raster import render_hard
from utils.image_utils import mask_to_image, write_pgm
from utils.table_io import write_manifest
from .base_command import BaseCommand


class GenViewsCommand(BaseCommand):
    """Hard-silhouette targets for a named view set plus their manifest"""

    def __init__(self):
        super().__init__(
            name="genviews",
            description="Writes one hard-silhouette PGM per camera of a view set and a views manifest."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["mesh", "outdir", "manifest"]):
                return self.create_error_response(
                    "Missing required fields: mesh, outdir, manifest", "ARGUMENT_ERROR", 2
                )

            start_time = time.time()
            mesh = self.load_mesh(input_data["mesh"])
            view_set = ViewSetName(self.option(input_data, "viewset", ViewSetName.RING24))
            size = self.option(input_data, "size", settings.IMAGE_SIZE)
            outdir = Path(input_data["outdir"])
            outdir.mkdir(parents=True, exist_ok=True)

            cameras = view_set_cameras(view_set, size=size)
            entries = []
            for index, camera in enumerate(cameras):
                image_path = outdir / f"view_{index:03d}.pgm"
                write_pgm(mask_to_image(render_hard(mesh, camera)), image_path)
                entries.append((camera, image_path))
            write_manifest(entries, input_data["manifest"])

            self.logger.info(f"Generated {len(cameras)} {view_set.value} views in {outdir}")
            result = {
                "viewset": view_set.value,
                "views": len(cameras),
                "outdir": str(outdir),
                "manifest": str(input_data["manifest"]),
            }
            self.log_execution(input_data, result, time.time() - start_time)
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
