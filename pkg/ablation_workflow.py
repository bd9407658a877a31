from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional
import asyncio
import logging
import time

import pandas as pd

from config.settings import settings
from core.camera import ViewSetName, view_set_cameras
from core.fit_config import FitConfig
from core.fitting import ViewSet, evaluate_2d_iou, fit_async
from core.losses import LossWeights, flattening_loss, laplacian_loss
from core.mesh import Mesh, edge_adjacency, vertex_adjacency
from core.shapes import ellipsoid, flat_box, template_sphere
from core.voxel_eval import mesh_iou_3d

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "variant", "iterations", "lambda", "mu", "views",
    "final_iou_loss", "laplacian", "flattening", "mean_2d_iou", "iou_3d",
]


class Study(str, Enum):
    REGULARIZERS = "regularizers"
    VIEWS = "views"


@dataclass(frozen=True)
class Variant:
    """One fitting setup of a study"""

    name: str
    target: Mesh
    view_set: ViewSetName
    weights: LossWeights


def study_variants(study: Study) -> List[Variant]:
    """Variants compared by a study, the reference setup first"""
    study = Study(study)
    if study is Study.REGULARIZERS:
        target = ellipsoid()
        return [
            Variant("full", target, ViewSetName.RING24, LossWeights()),
            Variant("no_laplacian", target, ViewSetName.RING24, LossWeights(lambda_=0.0)),
            Variant("no_flattening", target, ViewSetName.RING24, LossWeights(mu=0.0)),
        ]
    target = flat_box()
    return [
        Variant("ring24", target, ViewSetName.RING24, LossWeights()),
        Variant("grid120", target, ViewSetName.GRID120, LossWeights()),
    ]


class AblationWorkflow:
    """Fits every variant of a study concurrently and tabulates the outcome"""

    def __init__(self, iterations: int, size: int = None, truncate: bool = False, template: Optional[Mesh] = None):
        self.iterations = iterations
        self.size = settings.IMAGE_SIZE if size is None else size
        self.truncate = truncate
        self.template = template if template is not None else template_sphere()

    async def run_variant(self, variant: Variant) -> Dict[str, Any]:
        """Fit one variant and measure the regularizers, 2D IoU and 3D IoU of the result"""
        views = ViewSet.from_mesh(variant.target, view_set_cameras(variant.view_set, size=self.size))
        config = FitConfig(weights=variant.weights, iterations=self.iterations, truncate=self.truncate)
        fitted, history = await fit_async(self.template, views, config)

        laplacian_value, _ = laplacian_loss(fitted, vertex_adjacency(fitted))
        flattening_value, _ = flattening_loss(fitted, edge_adjacency(fitted))
        _, mean_iou = evaluate_2d_iou(fitted, views)
        return {
            "variant": variant.name,
            "iterations": self.iterations,
            "lambda": variant.weights.lambda_,
            "mu": variant.weights.mu,
            "views": len(views),
            "final_iou_loss": history[-1].iou if history else None,
            "laplacian": laplacian_value,
            "flattening": flattening_value,
            "mean_2d_iou": mean_iou,
            "iou_3d": mesh_iou_3d(fitted, variant.target),
        }

    async def run_study(self, study: Study) -> Dict[str, Any]:
        """Run all variants of a study; failed variants are reported, not raised"""
        start_time = time.time()
        variants = study_variants(study)
        logger.info(f"Ablation {Study(study).value}: {len(variants)} variants, {self.iterations} iterations")

        results = await asyncio.gather(*[
            self.run_variant(variant) for variant in variants
        ], return_exceptions=True)

        rows = []
        failed = []
        for variant, result in zip(variants, results):
            if isinstance(result, Exception):
                logger.error(f"Variant {variant.name} failed: {result}")
                failed.append({"variant": variant.name, "error": str(result)})
            else:
                rows.append(result)

        report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        logger.info(f"Ablation {Study(study).value} finished in {time.time() - start_time:.2f}s")
        return {
            "success": not failed,
            "study": Study(study).value,
            "report": report,
            "failed_variants": failed,
        }
