"""Adapter for delegating encodes to an external two-pass encoder.

The adapter is a command template run once per pass with the literal
placeholders {input.y4m} {dqp.vdqp} {bitrate} {pass} {statsfile} {out}.
Contract: each pass appends/rewrites the stats file with one line per
frame, "frame <n> bits <b>"; pass 2 writes the bitstream to {out} and
the decoded reconstruction next to it at {out}.y4m.  The mock codec
remains the default; this path exists so a patched production encoder
accepting per-macroblock quant offsets can be swapped in.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .codec import EncodeResult, EncoderConfig, psnr
from .errors import AdapterError, CapabilityError
from .qp_mapping import DeltaQpMap, serialize_qpmap
from .video_io import load_y4m

PLACEHOLDERS = ("{input.y4m}", "{dqp.vdqp}", "{bitrate}", "{pass}", "{statsfile}", "{out}")


@dataclass
class EncoderAdapter:
    command: str  # template containing the PLACEHOLDERS tokens

    def build_command(self, input_y4m: str, dqp_path: str, bitrate: float,
                      pass_index: int, statsfile: str, out: str) -> list[str]:
        filled = self.command
        for token, value in zip(PLACEHOLDERS, (
                input_y4m, dqp_path, f"{bitrate:g}", str(pass_index), statsfile, out)):
            filled = filled.replace(token, str(value))
        return shlex.split(filled)


def parse_stats_file(path: Path) -> list[int]:
    """Parse "frame <n> bits <b>" lines into per-frame bit counts."""
    bits: dict[int, int] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise AdapterError(f"stats file unreadable: {exc}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4 or parts[0] != "frame" or parts[2] != "bits":
            raise AdapterError(f"malformed stats line {line!r}")
        try:
            bits[int(parts[1])] = int(parts[3])
        except ValueError:
            raise AdapterError(f"malformed stats line {line!r}") from None
    if not bits:
        raise AdapterError(f"stats file {path} contains no frame lines")
    ordered = sorted(bits)
    if ordered != list(range(len(ordered))):
        raise AdapterError(f"stats file frame indices not contiguous: {ordered[:8]}...")
    return [bits[i] for i in ordered]


def external_encode(seq_path: str | Path, dqp: DeltaQpMap, cfg: EncoderConfig,
                    adapter: EncoderAdapter | None,
                    workdir: str | Path | None = None) -> EncodeResult:
    """Run a two-pass external encode of the Y4M at ``seq_path``.

    Writes the offset map in the VDQP interchange format, invokes the
    adapter command for pass 1 then pass 2, and collects the bitstream,
    the decoded reconstruction and the per-frame bits.  Raises
    CapabilityError when no adapter is configured.
    """
    if adapter is None:
        raise CapabilityError(
            "no external encoder adapter configured; use the mock codec or "
            "provide an adapter command template")
    cfg.validate()
    seq_path = Path(seq_path)
    if workdir is None:
        tmp = tempfile.mkdtemp(prefix="vimp-ext-")
        workdir = Path(tmp)
    else:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)

    dqp_path = workdir / "offsets.vdqp"
    with open(dqp_path, "wb") as fh:
        serialize_qpmap(dqp, fh)
    statsfile = workdir / "passlog.txt"
    out = workdir / "encoded.bin"

    for pass_index in (1, 2):
        cmd = adapter.build_command(str(seq_path), str(dqp_path), cfg.target_bitrate,
                                    pass_index, str(statsfile), str(out))
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise AdapterError(
                f"adapter pass {pass_index} exited {proc.returncode}: "
                f"{proc.stderr.strip()[-2000:]}")

    per_frame_bits = parse_stats_file(statsfile)
    recon_path = Path(str(out) + ".y4m")
    if not out.exists():
        raise AdapterError(f"adapter did not produce bitstream {out}")
    if not recon_path.exists():
        raise AdapterError(f"adapter did not produce reconstruction {recon_path}")
    with open(recon_path, "rb") as fh:
        recon = load_y4m(fh)
    with open(seq_path, "rb") as fh:
        source = load_y4m(fh)
    if recon.frame_count != source.frame_count:
        raise AdapterError(
            f"adapter reconstruction has {recon.frame_count} frames, "
            f"source has {source.frame_count}")
    return EncodeResult(
        bitstream=str(out),
        reconstruction=recon,
        per_frame_bits=per_frame_bits,
        base_qp=math.nan,
        pass1_stats=None,
        psnr_overall=psnr(source, recon),
        qp_grids=[],
    )
