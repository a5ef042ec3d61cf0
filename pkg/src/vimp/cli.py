"""Command-line entry points: ingest videos, precompute flow, serve the
annotation backend, and run standalone encodes/metrics/aggregation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import codec as mock_codec
from .codec import EncoderConfig, format_psnr, psnr, region_metrics, stats_dict
from .external import EncoderAdapter
from .flow import FlowParams, FlowStore, precompute_sequence
from .map_engine import average_volumes, read_vimp, write_vimp
from .qp_mapping import volume_to_delta_qp
from .service import AnnotationService, ServiceConfig, VideoLibrary, create_app
from .video_io import load_y4m, write_y4m


def _load_vimp(path: str):
    with open(path, "rb") as fh:
        return read_vimp(fh)


def _load_y4m(path: str):
    with open(path, "rb") as fh:
        return load_y4m(fh)


def cmd_serve(args) -> int:
    import uvicorn

    adapter = EncoderAdapter(args.adapter_cmd) if args.adapter_cmd else None
    config = ServiceConfig(
        data_dir=Path(args.data_dir),
        codec=args.codec,
        min_annotation_seconds=args.min_seconds,
        adapter=adapter,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_ingest(args) -> int:
    library = VideoLibrary(Path(args.data_dir))
    if args.bitrate is None and args.target_psnr is None:
        print("ingest: provide --bitrate or --target-psnr", file=sys.stderr)
        return 2
    bitrate = args.bitrate
    if bitrate is None:
        seq = _load_y4m(args.y4m)
        bitrate, achieved = calibrate_bitrate(seq, args.target_psnr)
        print(f"calibrated bitrate {bitrate:.0f} bit/s "
              f"(PSNR {format_psnr(achieved)} for target {args.target_psnr})")
    asset = library.ingest(args.y4m, args.id, bitrate)
    print(f"ingested {args.id}: {asset.meta['width']}x{asset.meta['height']}, "
          f"{asset.meta['frames']} frames, {asset.meta['bitrate']:.0f} bit/s")
    return 0


def cmd_flow(args) -> int:
    library = VideoLibrary(Path(args.data_dir))
    asset = library.get(args.id)
    params = FlowParams(block=args.block, search_range=args.search_range)
    store = FlowStore(asset.flow_path)
    count = precompute_sequence(asset.sequence(), params, store)
    print(f"flow for {args.id}: {count} fields at {asset.flow_path}")
    return 0


def cmd_encode(args) -> int:
    if args.id:
        library = VideoLibrary(Path(args.data_dir))
        asset = library.get(args.id)
        seq = asset.sequence()
        bitrate = args.bitrate or asset.meta["bitrate"]
    else:
        seq = _load_y4m(args.y4m)
        if args.bitrate is None:
            print("encode: --bitrate is required with --y4m", file=sys.stderr)
            return 2
        bitrate = args.bitrate
    dqp = None
    if args.map:
        dqp = volume_to_delta_qp(_load_vimp(args.map))
    cfg = EncoderConfig(target_bitrate=float(bitrate))
    result = mock_codec.mock_encode_two_pass(seq, dqp, cfg)
    with open(args.out, "wb") as fh:
        write_y4m(result.reconstruction, fh)
    if args.bitstream:
        mock_codec.save_bitstream(result, args.bitstream)
    if args.stats_json:
        with open(args.stats_json, "w") as fh:
            json.dump(stats_dict(result), fh, indent=2)
    print(f"encoded {result.total_bits} bits at base QP {result.base_qp:.3f}, "
          f"PSNR {format_psnr(result.psnr_overall)}")
    return 0


def cmd_metrics(args) -> int:
    ref = _load_y4m(args.ref)
    rec = _load_y4m(args.rec)
    overall = psnr(ref, rec)
    print(f"psnr {format_psnr(overall)}")
    if args.map:
        vol = _load_vimp(args.map)
        m = region_metrics(ref, rec, vol, threshold=args.threshold)
        print(f"psnr_in {format_psnr(m.psnr_in)}")
        print(f"psnr_out {format_psnr(m.psnr_out)}")
        print(f"weighted_psnr {format_psnr(m.weighted_psnr)}")
    return 0


def cmd_average(args) -> int:
    volumes = [_load_vimp(p) for p in args.maps]
    avg = average_volumes(volumes)
    with open(args.out, "wb") as fh:
        write_vimp(avg, fh)
    print(f"averaged {len(volumes)} maps -> {args.out}")
    return 0


def calibrate_bitrate(seq, target_psnr: float, tolerance_db: float = 0.1,
                      max_iterations: int = 24) -> tuple[float, float]:
    """Bisect the bitrate until the baseline encode PSNR meets the target.

    Returns (bitrate, achieved PSNR).  Clamps to the achievable range
    when the target lies outside it.
    """
    min_bits, max_bits = mock_codec.achievable_bits_range(seq)
    duration = seq.duration_seconds
    lo = min_bits / duration * 1.001
    hi = max_bits / duration * 0.999

    def encode_psnr(rate: float) -> float:
        result = mock_codec.mock_encode_two_pass(
            seq, None, EncoderConfig(target_bitrate=rate))
        return result.psnr_overall

    psnr_lo = encode_psnr(lo)
    psnr_hi = encode_psnr(hi)
    if target_psnr <= psnr_lo:
        return lo, psnr_lo
    if target_psnr >= psnr_hi:
        return hi, psnr_hi
    achieved = psnr_lo
    mid = lo
    for _ in range(max_iterations):
        mid = (lo + hi) / 2.0
        achieved = encode_psnr(mid)
        if abs(achieved - target_psnr) <= tolerance_db:
            break
        if achieved < target_psnr:
            lo = mid
        else:
            hi = mid
    return mid, achieved


def cmd_calibrate(args) -> int:
    library = VideoLibrary(Path(args.data_dir))
    asset = library.get(args.id)
    bitrate, achieved = calibrate_bitrate(asset.sequence(), args.psnr,
                                          tolerance_db=args.tolerance)
    asset.meta["bitrate"] = float(bitrate)
    from .service import _write_json

    _write_json(asset.root / "meta.json", asset.meta)
    print(f"bitrate for {args.id}: {bitrate:.0f} bit/s "
          f"(PSNR {format_psnr(achieved)} for target {args.psnr})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vimp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default="data")
    p.add_argument("--codec", choices=("mock", "external"), default="mock")
    p.add_argument("--min-seconds", type=float, default=180.0)
    p.add_argument("--adapter-cmd", default=None,
                   help="external encoder command template")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="register a Y4M video")
    p.add_argument("--y4m", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--data-dir", default="data")
    p.add_argument("--bitrate", type=float, default=None)
    p.add_argument("--target-psnr", type=float, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("flow", help="precompute optical flow for a video")
    p.add_argument("--id", required=True)
    p.add_argument("--data-dir", default="data")
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--search-range", type=int, default=24)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("encode", help="two-pass encode with an importance map")
    p.add_argument("--id", default=None)
    p.add_argument("--y4m", default=None)
    p.add_argument("--data-dir", default="data")
    p.add_argument("--map", default=None, help="importance volume (VIMP)")
    p.add_argument("--bitrate", type=float, default=None)
    p.add_argument("--out", required=True, help="reconstruction Y4M path")
    p.add_argument("--bitstream", default=None)
    p.add_argument("--stats-json", default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("metrics", help="PSNR and region metrics")
    p.add_argument("--ref", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--map", default=None)
    p.add_argument("--threshold", type=int, default=160)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("average", help="average importance maps across annotators")
    p.add_argument("--maps", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("calibrate-bitrate",
                       help="find the bitrate hitting a target PSNR")
    p.add_argument("--id", required=True)
    p.add_argument("--data-dir", default="data")
    p.add_argument("--psnr", type=float, default=25.0)
    p.add_argument("--tolerance", type=float, default=0.1)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
