"""
Constant-velocity Kalman filter over bounding-box state.

State: ``[cx, cy, s, r, vcx, vcy, vs, vr]`` where ``s`` is the box area and
``r = w / h`` its aspect ratio; velocities are per frame. Observation is
``[cx, cy, s, r]``. All functions are pure: they take a ``MotionState`` and
return a new one.

Position and area noise scale with the current box height ``h = sqrt(s / r)``
(position std ``weight * h``, area std ``weight * h**2``); aspect noise is
absolute.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from ..errors import CovarianceError, InvalidDetectionError
from .base import Detection
from .geometry import BoundingBox

AREA_FLOOR = 1e-6
ASPECT_MIN = 1e-3
ASPECT_MAX = 1e3
HEIGHT_FLOOR = 1.0

_NDIM = 4


class NoiseConfig(BaseModel):
    """Height-relative standard deviations of the process, measurement and initial noise."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    measurement_position: float = Field(default=1 / 20, gt=0.0, description="px per px of height")
    measurement_area: float = Field(default=1 / 10, gt=0.0, description="px^2 per px^2 of height")
    measurement_aspect: float = Field(default=0.05, gt=0.0, description="absolute")
    process_position: float = Field(default=1 / 40, gt=0.0)
    process_area: float = Field(default=1 / 40, gt=0.0)
    process_aspect: float = Field(default=0.01, gt=0.0)
    process_velocity_position: float = Field(default=1 / 160, gt=0.0)
    process_velocity_area: float = Field(default=1 / 160, gt=0.0)
    process_velocity_aspect: float = Field(default=0.005, gt=0.0)
    initial_velocity_scale: float = Field(
        default=10.0, gt=0.0, description="Initial velocity std as a multiple of measurement std"
    )

    def measurement_std(self, height: float) -> NDArray[np.float64]:
        return np.array(
            [
                self.measurement_position * height,
                self.measurement_position * height,
                self.measurement_area * height**2,
                self.measurement_aspect,
            ]
        )

    def process_std(self, height: float) -> NDArray[np.float64]:
        return np.array(
            [
                self.process_position * height,
                self.process_position * height,
                self.process_area * height**2,
                self.process_aspect,
                self.process_velocity_position * height,
                self.process_velocity_position * height,
                self.process_velocity_area * height**2,
                self.process_velocity_aspect,
            ]
        )


@dataclass(frozen=True, slots=True)
class MotionState:
    """Gaussian belief over the 8-dimensional box state."""

    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]


@lru_cache(maxsize=1)
def transition_matrix() -> NDArray[np.float64]:
    f = np.eye(2 * _NDIM)
    f[:_NDIM, _NDIM:] = np.eye(_NDIM)
    f.setflags(write=False)
    return f


@lru_cache(maxsize=1)
def observation_matrix() -> NDArray[np.float64]:
    h = np.eye(_NDIM, 2 * _NDIM)
    h.setflags(write=False)
    return h


def state_height(mean: NDArray[np.float64]) -> float:
    """Box height ``sqrt(s / r)`` of a state mean, floored at ``HEIGHT_FLOOR``."""
    s = max(float(mean[2]), AREA_FLOOR)
    r = min(max(float(mean[3]), ASPECT_MIN), ASPECT_MAX)
    return max(float(np.sqrt(s / r)), HEIGHT_FLOOR)


def process_noise(cfg: NoiseConfig, height: float) -> NDArray[np.float64]:
    return np.diag(np.square(cfg.process_std(height)))


def measurement_noise(cfg: NoiseConfig, height: float) -> NDArray[np.float64]:
    return np.diag(np.square(cfg.measurement_std(height)))


def box_to_observation(box: BoundingBox) -> NDArray[np.float64]:
    """``(x, y, w, h)`` to ``(cx, cy, s, r)``."""
    if box.is_degenerate():
        raise InvalidDetectionError(f"degenerate box w={box.w} h={box.h}")
    return np.array(
        [box.x + box.w / 2.0, box.y + box.h / 2.0, box.w * box.h, box.w / box.h],
        dtype=np.float64,
    )


def init_state(d: Detection, cfg: NoiseConfig) -> MotionState:
    """Start a track at the detection with zero velocity."""
    z = box_to_observation(d.box)
    mean = np.concatenate([z, np.zeros(_NDIM)])
    std = cfg.measurement_std(max(d.box.h, HEIGHT_FLOOR))
    variances = np.concatenate([std, std * cfg.initial_velocity_scale]) ** 2
    return MotionState(mean=mean, covariance=np.diag(variances))


def predict(st: MotionState, cfg: NoiseConfig) -> MotionState:
    """One constant-velocity step of one frame."""
    f = transition_matrix()
    mean = f @ st.mean
    mean[2] = max(mean[2], 0.0)
    covariance = f @ st.covariance @ f.T + process_noise(cfg, state_height(st.mean))
    return MotionState(mean=mean, covariance=covariance)


def update(st: MotionState, d: Detection, cfg: NoiseConfig) -> MotionState:
    """
    Correct the state with an assigned detection.

    Raises:
        InvalidDetectionError: the detection box is degenerate.
        CovarianceError: the innovation covariance is not positive definite.
    """
    z = box_to_observation(d.box)
    h = observation_matrix()
    projected_mean = h @ st.mean
    ph_t = st.covariance @ h.T
    innovation_cov = h @ ph_t + measurement_noise(cfg, state_height(st.mean))
    try:
        factor = scipy.linalg.cho_factor(innovation_cov, lower=True, check_finite=True)
        gain = scipy.linalg.cho_solve(factor, ph_t.T, check_finite=False).T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise CovarianceError(f"innovation covariance not positive definite: {exc}") from exc

    mean = st.mean + gain @ (z - projected_mean)
    mean[2] = max(mean[2], 0.0)
    mean[3] = min(max(mean[3], ASPECT_MIN), ASPECT_MAX)
    covariance = st.covariance - gain @ innovation_cov @ gain.T
    covariance = (covariance + covariance.T) / 2.0
    return MotionState(mean=mean, covariance=covariance)


def state_to_box(st: MotionState) -> BoundingBox:
    cx, cy, s, r = st.mean[:_NDIM]
    s = max(float(s), AREA_FLOOR)
    r = min(max(float(r), ASPECT_MIN), ASPECT_MAX)
    w = float(np.sqrt(s * r))
    h = float(np.sqrt(s / r))
    return BoundingBox(x=float(cx) - w / 2.0, y=float(cy) - h / 2.0, w=w, h=h)
