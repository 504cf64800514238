"""Radar respiration measurement of a moving subject.

Simulates FMCW MIMO radar data of a breathing target, forms polar radar
images, and estimates the respiratory interval either from the brightest
pixel (conventional) or by fusing periodicity-weighted estimates across the
target region (proposed).
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .sim_core import (ArrayLayout, DataCube, MotionModel, RadarParams, RangeProfiles, SceneConfig,
                       build_virtual_array, default_layout, range_transform, sample_motion,
                       synthesize_cube)
from .imaging import (ImageSequence, IntensityMap, PolarGrid, RegionMask, clutter_free_intensity,
                      default_grid, extract_region, form_image, locate_target, mean_intensity,
                      steering_weights, suppress_clutter, taylor_weights)
from .respiration import (AcfSlice, DisplacementTrack, IntervalEstimate, IntervalSeries,
                          PipelineConfig, VelocityTrack, conventional_estimate, displacement,
                          estimate_interval, fuse_intervals, periodicity_residual, run_proposed,
                          short_time_acf, velocity)
from .pipeline import ProcessedRadar, process_cube
from .eval_harness import (MetricsReport, acquisition_rate, align_series, compare_methods,
                           correlation, rms_error)
from .config import RunConfig, load_config, parse_config
