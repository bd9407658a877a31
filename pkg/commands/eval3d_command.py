import time
from typing import Any, Dict

from config.settings import settings
from core.voxel_eval import default_bounds, iou_3d, voxelize
from .base_command import BaseCommand


class Eval3dCommand(BaseCommand):
    """Volumetric IoU between two closed meshes"""

    def __init__(self):
        super().__init__(
            name="eval3d",
            description="Voxelizes two meshes over shared bounds and reports their 3D IoU."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["mesh", "ref"]):
                return self.create_error_response("Missing required fields: mesh, ref", "ARGUMENT_ERROR", 2)

            start_time = time.time()
            mesh = self.load_mesh(input_data["mesh"])
            reference = self.load_mesh(input_data["ref"])
            resolution = self.option(input_data, "resolution", settings.VOXEL_RESOLUTION)

            bounds = default_bounds(mesh, reference)
            grid = voxelize(mesh, resolution, bounds)
            reference_grid = voxelize(reference, resolution, bounds)
            result = {
                "iou_3d": iou_3d(grid, reference_grid),
                "resolution": resolution,
                "occupied_cells": grid.occupied_count,
                "reference_occupied_cells": reference_grid.occupied_count,
            }
            self.log_execution(input_data, result, time.time() - start_time)
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
