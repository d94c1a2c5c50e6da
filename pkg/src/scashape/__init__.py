"""Monocular fisheye shape estimation for soft continuum arms."""

from .liegroup import (Pose, StrainTwist, exp_pose, exp_rotation, hat3,
                       pose_compose, pose_inverse, vee3)
from .strainbasis import (BasisFamily, BasisSpec, StrainField, bend_twist_basis,
                          eval_kappa, eval_omega, param_count)
from .rodmodel import IntegratorSpec, ShapeSample, integrate_shape, tangent_at, tip_pose
from .camera import (BoundaryObservation, OmniCameraModel, Silhouette,
                     load_camera, pixel_to_sphere, project_point, save_camera,
                     sphere_to_pixel, synthesize_camera, tube_silhouette)
from .estimator import (FitOptions, FitResult, ObservationSet, linear_weights,
                        residuals, solve_shape)
from .calibration import (BaseCalibProblem, ConstrainedTipOffset,
                          SensorCalibProblem, estimate_base_pose,
                          estimate_sensor_transforms, sensor_to_tip)
from .dataset import Dataset, SchemaError, read_dataset, write_dataset
from .experiments import (ComparisonReport, PressureGrid, SyntheticScenario,
                          compare_bases, generate_grid, miscalibrated_camera,
                          region_of, tip_errors)

__version__ = "0.1.0"
