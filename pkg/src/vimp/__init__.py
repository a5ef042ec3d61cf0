"""Importance-map video annotation: paint, propagate, re-encode at a fixed bitrate."""

from .codec import (
    EncodeResult,
    EncoderConfig,
    RegionMetrics,
    mock_decode,
    mock_encode_two_pass,
    psnr,
    region_metrics,
)
from .errors import VimpError
from .flow import FlowField, FlowParams, FlowStore, estimate_flow, import_flow, precompute_sequence
from .map_engine import (
    ImportanceVolume,
    Stroke,
    StrokeDelta,
    apply_delta,
    average_volumes,
    new_volume,
    normalize,
    read_vimp,
    stroke_kernel,
    write_vimp,
)
from .propagation import DecayPolicy, propagate_stroke, warp_delta
from .qp_mapping import DeltaQpMap, block_means, parse_qpmap, serialize_qpmap, to_delta_qp
from .video_io import EdgeMask, FrameBuffer, FrameSequence, load_y4m, sobel_edges, write_y4m

__version__ = "0.1.0"
