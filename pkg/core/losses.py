"""Silhouette IoU, Laplacian and flattening losses, the color l2 loss, and their gradients."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse

from config.settings import settings
from core.errors import LossError
from core.mesh import EdgeAdjacency, Mesh, VertexAdjacency
from core.soft_raster import BinaryMask, SoftSilhouette

logger = logging.getLogger(__name__)


class LossWeights(BaseModel):
    """Weights of the Laplacian (lambda) and flattening (mu) terms"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default_factory=lambda: settings.LAMBDA, ge=0, alias="lambda")
    mu: float = Field(default_factory=lambda: settings.MU, ge=0)


@dataclass(frozen=True)
class LossComponents:
    """Unweighted loss values"""

    iou: float
    laplacian: float
    flattening: float
    color: Optional[float] = None


@dataclass(frozen=True)
class LossReport:
    """Loss components and their weighted total"""

    iou: float
    laplacian: float
    flattening: float
    color: Optional[float]
    total: float

    def as_row(self, iteration: int) -> dict:
        return {
            "iter": iteration,
            "iou": self.iou,
            "laplacian": self.laplacian,
            "flattening": self.flattening,
            "color": self.color,
            "total": self.total,
        }


def iou_loss(soft: SoftSilhouette, target: BinaryMask) -> Tuple[float, np.ndarray]:
    """1 - |S_hat * S|_1 / |S_hat + S - S_hat * S|_1 and its gradient w.r.t. S_hat"""
    predicted = np.asarray(soft.values, dtype=np.float64)
    mask = np.asarray(target.values, dtype=np.float64)
    if predicted.shape != mask.shape:
        raise LossError(f"soft silhouette shape {predicted.shape} does not match target {mask.shape}")

    intersection = float(np.sum(predicted * mask))
    union = float(np.sum(predicted + mask - predicted * mask))
    if union == 0.0:
        logger.warning("IoU loss on two empty silhouettes; returning zero loss and gradient")
        return 0.0, np.zeros_like(predicted)

    loss = 1.0 - intersection / union
    gradient = -(mask * union - intersection * (1.0 - mask)) / union ** 2
    return loss, gradient


@lru_cache(maxsize=8)
def uniform_laplacian(adjacency: VertexAdjacency) -> sparse.csr_matrix:
    """Sparse operator v -> v - mean of one-ring neighbors"""
    indptr, indices = adjacency.as_csr()
    degrees = np.diff(indptr)
    if np.any(degrees == 0):
        raise LossError(f"vertex {int(np.argmax(degrees == 0))} has no neighbors")

    vertex_count = len(degrees)
    weights = np.repeat(1.0 / degrees, degrees)
    neighbor_mean = sparse.csr_matrix((weights, indices, indptr), shape=(vertex_count, vertex_count))
    return (sparse.identity(vertex_count, format="csr") - neighbor_mean).tocsr()


def laplacian_loss(mesh: Mesh, adjacency: VertexAdjacency) -> Tuple[float, np.ndarray]:
    """sum_i |v_i - mean_{j in N(i)} v_j|^2 and its exact gradient"""
    operator = uniform_laplacian(adjacency)
    if operator.shape[0] != mesh.vertex_count:
        raise LossError(f"adjacency covers {operator.shape[0]} vertices, mesh has {mesh.vertex_count}")

    offsets = operator @ mesh.vertices
    loss = float(np.sum(offsets ** 2))
    gradient = 2.0 * (operator.T @ offsets)
    return loss, np.asarray(gradient)


def flattening_loss(mesh: Mesh, edge_adjacency: EdgeAdjacency) -> Tuple[float, np.ndarray]:
    """sum over interior edges of (cos theta + 1)^2 with cos theta = -n_left . n_right"""
    if len(edge_adjacency) == 0:
        raise LossError("flattening loss needs at least one interior edge")

    face_pairs = edge_adjacency.faces
    tris = mesh.vertices[mesh.faces]
    u = tris[:, 1] - tris[:, 0]
    w = tris[:, 2] - tris[:, 0]
    normals = np.cross(u, w)
    lengths = np.linalg.norm(normals, axis=1)

    incident = np.unique(face_pairs)
    degenerate = 0.5 * lengths[incident] <= settings.DEGENERATE_AREA
    if degenerate.any():
        raise LossError(f"face {int(incident[np.argmax(degenerate)])} is degenerate")

    safe_lengths = np.where(lengths > 0, lengths, 1.0)
    unit = normals / safe_lengths[:, None]
    left = unit[face_pairs[:, 0]]
    right = unit[face_pairs[:, 1]]
    alignment = np.einsum("ij,ij->i", left, right)
    loss = float(np.sum((1.0 - alignment) ** 2))

    # Back through the dot product, the normalization and the cross product
    d_alignment = -2.0 * (1.0 - alignment)
    d_unit = np.zeros_like(unit)
    np.add.at(d_unit, face_pairs[:, 0], d_alignment[:, None] * right)
    np.add.at(d_unit, face_pairs[:, 1], d_alignment[:, None] * left)
    d_normal = (d_unit - unit * np.einsum("ij,ij->i", unit, d_unit)[:, None]) / safe_lengths[:, None]
    d_u = np.cross(w, d_normal)
    d_w = np.cross(d_normal, u)
    corner_grad = np.stack([-(d_u + d_w), d_u, d_w], axis=1)

    gradient = np.zeros_like(mesh.vertices)
    np.add.at(gradient, mesh.faces.ravel(), corner_grad.reshape(-1, 3))
    return loss, gradient


def color_l2_loss(rendered: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error over pixels and channels"""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if rendered.shape != target.shape:
        raise LossError(f"rendered image shape {rendered.shape} does not match target {target.shape}")

    difference = rendered - target
    loss = float(np.mean(difference ** 2))
    return loss, 2.0 * difference / difference.size


def total_loss(
    components: LossComponents,
    weights: LossWeights,
    color_weight: float = settings.COLOR_WEIGHT,
) -> LossReport:
    """L = L_iou + lambda * L_lap + mu * L_fl (+ color_weight * L_color)"""
    values = [components.iou, components.laplacian, components.flattening]
    if components.color is not None:
        values.append(components.color)
    if not all(math.isfinite(value) for value in values):
        raise LossError(f"non-finite loss component in {components}")

    total = components.iou + weights.lambda_ * components.laplacian + weights.mu * components.flattening
    if components.color is not None:
        total += color_weight * components.color

    return LossReport(
        iou=components.iou,
        laplacian=components.laplacian,
        flattening=components.flattening,
        color=components.color,
        total=total,
    )


def weighted_vertex_gradient(
    iou_gradient: np.ndarray,
    laplacian_gradient: np.ndarray,
    flattening_gradient: np.ndarray,
    weights: LossWeights,
) -> np.ndarray:
    """Combine per-vertex gradients with the same weights as total_loss"""
    return iou_gradient + weights.lambda_ * laplacian_gradient + weights.mu * flattening_gradient
