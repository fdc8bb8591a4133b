"""Digital-twin ray-tracing simulator and 1-bit RIS phase optimizer."""

__version__ = "0.1.0"

from .scene import (Scene, Facet, Material, RisPanel, Antenna, Deployment,
                    SceneParseError, SceneValidationError, load_scene,
                    serialize_scene, validate_scene, ris_element_positions,
                    with_receiver, C0)
from .channel import (PropagationPath, ChannelSnapshot, segment_occluded,
                      mirror_point, trace_paths, path_coefficient,
                      direct_channel, ris_link_channels, channel_snapshot,
                      snapshot_to_json, snapshot_from_json)
from .ris import (PhaseConfig, CandidateSet, CONTINUOUS, ONE_BIT, all_zero,
                  from_bits, quantize_phases, invert, apply_config, bit_grid,
                  config_to_json, config_from_json)
from .optimize import (SearchReport, analytic_phases, dt_cir, dt_dpo,
                       iterative_search, exhaustive_search, random_search)
from .evaluate import (GridSpec, CoverageMap, PerturbationSpec, TwinGapRecord,
                       TwinGapReport, received_power, rsrp_db, rsrp_gain_db,
                       operation_count, coverage_map, default_grid,
                       coverage_to_csv, coverage_to_ppm, perturb_scene,
                       twin_gap_experiment, twin_gap_to_json, twin_gap_to_csv)
