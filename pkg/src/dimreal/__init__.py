"""dimreal: a desk-scale real-time diminished-reality privacy pipeline."""

from .detection import (Detection2D, DetectorNoise, GroundTruthDetector,
                        PrivacyState, TrackedObject, Tracker,
                        bbox3d_from_detection, estimate_region_depth)
from .geometry import (CalibrationState, Point3, Pose, calibrate_relative,
                       camera_world_pose, compose, invert, transform_point)
from .inpaint import (BaselineEngine, DsttConfig, DsttEngine, EngineResult,
                      InpaintEngine, InpaintMemory, memory_push, weighted_l1)
from .masks import (BinaryMask, MaskGenSpec, adjust_mask_area, gen_mask,
                    merge_private_masks, redact)
from .pipeline import (ChangeQueue, ConfirmCalibration, Pipeline, PointCloud,
                       SetCalibration, StageTiming, ToggleObject, apply_changes,
                       export_ply, load_ply, transplant_pointcloud, upscale2x)
from .scene import (BackgroundSpec, CameraIntrinsics, EllipseShape, FrameRGBD,
                    GroundTruth, ObjectSpec, RectShape, SceneRenderer, SceneSpec,
                    TextureSpec, TrajectoryParams, camera_trajectory,
                    default_scene, load_scene, render_frame)

__version__ = "0.1.0"
