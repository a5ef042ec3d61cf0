"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as the
criteria execute.
"""

import hashlib
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from vimp.codec import (
    LATTICE,
    EncoderConfig,
    compute_qp_grid,
    dqp_to_lattice,
    mock_decode,
    mock_encode_two_pass,
    region_metrics,
)
from vimp.flow import FlowField, FlowParams, FlowStore, precompute_sequence
from vimp.kernels import sad_search
from vimp.map_engine import (
    ImportanceVolume,
    Stroke,
    apply_delta,
    new_volume,
    normalize,
    read_vimp,
    stroke_kernel,
    vimp_bytes,
)
from vimp.propagation import DecayPolicy, propagate_stroke
from vimp.qp_mapping import DeltaQpMap, parse_qpmap, qpmap_bytes, to_delta_qp, volume_to_delta_qp
from vimp.service import ServiceConfig, VideoLibrary, create_app
from vimp.video_io import load_y4m, y4m_bytes

from .conftest import make_y4m, smooth_texture
from .golden import build
from .test_codec import rate_for_qp
from .test_flow import brute_force_flow
from .test_propagation import DictFlows, splat_oracle, uniform_flow, zero_flows
from .test_service import FakeClock


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL", flush=True)
        raise
    else:
        print(f"\n[ACCEPTANCE] {name}: PASS", flush=True)


def test_initialization_and_normalization():
    with criterion("initialization & normalization (mean 127 +/- 0.5, < 1 s)"):
        vol = new_volume(800, 450, 90)
        assert (vol.maps == 127).all()

        rng = np.random.default_rng(99)
        for _ in range(8):
            stroke = Stroke(
                frame=int(rng.integers(0, 90)),
                cx=float(rng.uniform(0, 800)), cy=float(rng.uniform(0, 450)),
                radius=float(rng.uniform(20, 120)),
                strength=int(rng.integers(40, 256)),
                polarity="paint" if rng.random() < 0.7 else "erase",
            )
            vol = apply_delta(vol, stroke_kernel(stroke))

        start = time.perf_counter()
        result = normalize(vol)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"normalize took {elapsed:.3f} s"
        assert abs(result.volume.maps.mean(dtype=np.float64) - 127.0) <= 0.5

        again = normalize(result.volume)
        diff = np.abs(result.volume.maps.astype(np.int16)
                      - again.volume.maps.astype(np.int16))
        assert diff.max() <= 1


def test_delta_qp_mapping():
    with criterion("delta-QP mapping (exact endpoints, strict monotone)"):
        endpoints = to_delta_qp(np.array([[[255.0, 0.0, 127.5]]])).frames[0, 0]
        assert endpoints[0] == -10.0
        assert endpoints[1] == 10.0
        assert endpoints[2] == 0.0

        rng = np.random.default_rng(5)
        for _ in range(1000):
            grid = rng.uniform(0, 255, (2, 3))
            dqp = to_delta_qp(grid[None, ...]).frames[0]
            assert dqp.max() <= 10.0 and dqp.min() >= -10.0
            flat_m = grid.ravel()
            flat_d = dqp.ravel().astype(np.float64)
            for i in range(len(flat_m)):
                for j in range(len(flat_m)):
                    if flat_m[i] > flat_m[j]:
                        assert flat_d[i] < flat_d[j]


def test_propagation_criterion():
    with criterion("propagation (zero-flow profile, 1% mass conservation)"):
        vol = new_volume(8, 8, 50)
        delta = stroke_kernel(Stroke(0, 3, 3, 1, 100, "paint"))
        assert delta.values.max() == 100
        out = propagate_stroke(vol, delta, zero_flows(8, 8, 50), DecayPolicy(40))
        assert out.maps[10, 3, 3] - 127 == 75
        assert out.maps[40, 3, 3] - 127 == 0
        assert (out.maps[41:] == 127).all()

        rng = np.random.default_rng(21)
        h = w = 48
        frames = 9
        base = ImportanceVolume(w, h, np.full((frames, h, w), 100, np.uint8))
        stroke_d = stroke_kernel(Stroke(0, 24, 24, 6, 90, "paint"))
        fields = {t: FlowField(
            t,
            (0.8 * np.sin(np.arange(w) / 8.0)[None, :]
             + np.zeros((h, 1))).astype(np.float32),
            (0.6 * np.cos(np.arange(h) / 6.0)[:, None]
             + np.zeros((1, w))).astype(np.float32))
            for t in range(frames)}
        out = propagate_stroke(base, stroke_d, DictFlows(fields), DecayPolicy(40))
        mass0 = float(stroke_d.values.sum())
        policy = DecayPolicy(40)
        for k in range(1, frames):
            added = float((out.maps[k].astype(np.float64) - 100.0).sum())
            assert added == pytest.approx(policy.weight(k) * mass0, rel=0.01)

        # frames before the stroke never change + small-grid oracle equality
        vol2 = new_volume(12, 12, 6)
        d2 = stroke_kernel(Stroke(2, 6, 6, 3, 80, "paint"))
        f2 = {t: FlowField(t, rng.uniform(-1, 1, (12, 12)).astype(np.float32),
                           rng.uniform(-1, 1, (12, 12)).astype(np.float32))
              for t in range(6)}
        got = propagate_stroke(vol2, d2, DictFlows(f2), DecayPolicy(40))
        assert (got.maps[:2] == 127).all()
        dense = np.zeros((12, 12))
        dense[d2.y0:d2.y0 + d2.values.shape[0],
              d2.x0:d2.x0 + d2.values.shape[1]] = d2.values
        running = dense
        for k in range(1, 4):
            running = splat_oracle(running, f2[2 + k - 1].dx, f2[2 + k - 1].dy)
            contribution = np.floor(np.abs(policy.weight(k) * running) + 0.5) \
                * np.sign(running)
            want = np.clip(127.0 + contribution, 0, 255).astype(np.uint8)
            assert (got.maps[2 + k] == want).all()


def test_flow_estimator_criterion():
    with criterion("flow estimator (zero on identity, shift recovery vs oracle)"):
        rng = np.random.default_rng(31)
        frame = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        dx, dy = sad_search(frame, frame, 16, 8)
        assert not dx.any() and not dy.any()

        block, search = 8, 8
        for shift in range(-search, search + 1):
            moved = np.roll(frame, shift, axis=1)
            got_dx, got_dy = sad_search(frame, moved, block, search)
            for by in range(4):
                for bx in range(4):
                    x0, x1 = bx * block, (bx + 1) * block
                    if 0 <= x0 + shift and x1 + shift <= 32:
                        assert got_dx[by, bx] == shift
                        assert got_dy[by, bx] == 0

        other = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        want_dx, want_dy = brute_force_flow(frame, other, 8, 5)
        got_dx, got_dy = sad_search(frame, other, 8, 5)
        assert (got_dx == want_dx).all() and (got_dy == want_dy).all()


def _textured_seq(rng, frames=16, width=64, height=64):
    lumas = [smooth_texture(rng, height, width) for _ in range(frames)]
    return load_y4m(make_y4m(width, height, frames, chroma="mono",
                             luma_frames=lumas))


def test_baseline_equivalence_criterion():
    with criterion("baseline equivalence (bit-exact zero map, offset neutrality)"):
        rng = np.random.default_rng(41)
        seq = _textured_seq(rng, frames=6)
        cfg = EncoderConfig(target_bitrate=rate_for_qp(seq, 28))
        plain = mock_encode_two_pass(seq, None, cfg)
        zeros = mock_encode_two_pass(
            seq, DeltaQpMap.zeros(seq.mb_cols, seq.mb_rows, 6), cfg)
        assert plain.bitstream == zeros.bitstream
        assert plain.per_frame_bits == zeros.per_frame_bits

        for offset in (2.0, -3.0, 0.5):
            off = DeltaQpMap(seq.mb_cols, seq.mb_rows,
                             np.full((6, seq.mb_rows, seq.mb_cols), offset,
                                     dtype=np.float32))
            res = mock_encode_two_pass(seq, off, cfg)
            assert res.base_qp == pytest.approx(plain.base_qp - offset,
                                                abs=1.0 / LATTICE)
            lat = dqp_to_lattice(off, seq.mb_rows, seq.mb_cols, 6)
            zer = dqp_to_lattice(None, seq.mb_rows, seq.mb_cols, 6)
            for f in range(6):
                _, c1 = compute_qp_grid(int(round(res.base_qp * LATTICE)), lat[f], f)
                _, c0 = compute_qp_grid(int(round(plain.base_qp * LATTICE)), zer[f], f)
                unclamped = ~(c1 | c0)
                assert (res.qp_grids[f][unclamped]
                        == plain.qp_grids[f][unclamped]).all()


def test_rate_control_criterion():
    with criterion("rate control (+/- 2% across QP 10-45, monotone, < 10 s)"):
        rng = np.random.default_rng(51)
        from .test_codec import bits_at_qp

        for clip_seed in (0, 1):
            clip_rng = np.random.default_rng(1000 + clip_seed)
            seq = _textured_seq(clip_rng, frames=16)
            start = time.perf_counter()
            for target_qp in (10, 17, 24, 31, 38, 45):
                rate = rate_for_qp(seq, target_qp)
                res = mock_encode_two_pass(seq, None,
                                           EncoderConfig(target_bitrate=rate))
                target_bits = rate * seq.duration_seconds
                assert abs(res.total_bits - target_bits) <= 0.02 * target_bits
            elapsed = time.perf_counter() - start
            assert elapsed < 10.0, f"rate control took {elapsed:.2f} s per clip"

            sweep = [bits_at_qp(seq, q) for q in range(0, 52)]
            assert all(a >= b for a, b in zip(sweep, sweep[1:]))


def test_perceptual_steering_criterion():
    with criterion("perceptual steering (>= 1 dB in-region gain at matched bits)"):
        rng = np.random.default_rng(61)
        seq = _textured_seq(rng, frames=8)
        maps = np.zeros((8, 64, 64), dtype=np.uint8)
        maps[:, :, :32] = 255
        vol = normalize(ImportanceVolume(64, 64, maps)).volume

        cfg = EncoderConfig(target_bitrate=rate_for_qp(seq, 30))
        baseline = mock_encode_two_pass(seq, None, cfg)
        mb = region_metrics(seq, baseline.reconstruction, vol, threshold=160)

        gains = []
        for qp_range in (10.0, 5.0):
            res = mock_encode_two_pass(seq, volume_to_delta_qp(vol, qp_range), cfg)
            assert abs(res.total_bits - baseline.total_bits) \
                <= 0.02 * baseline.total_bits
            m = region_metrics(seq, res.reconstruction, vol, threshold=160)
            gains.append(m.psnr_in - mb.psnr_in)
            assert m.psnr_out < mb.psnr_out
        assert gains[0] >= 1.0
        assert gains[1] < gains[0]  # halving the range shrinks the gain


def test_formats_and_persistence_criterion(tmp_path):
    with criterion("formats & persistence (goldens, crash-restart, finalize policy)"):
        golden_dir = Path(__file__).parent / "golden"
        built = build.build_all()
        for name, data in built.items():
            assert data == (golden_dir / name).read_bytes(), name
        vol = read_vimp((golden_dir / "sample.vimp").read_bytes())
        assert vimp_bytes(vol) == (golden_dir / "sample.vimp").read_bytes()
        dqp = parse_qpmap((golden_dir / "sample.vdqp").read_bytes())
        assert qpmap_bytes(dqp) == (golden_dir / "sample.vdqp").read_bytes()
        decoded = mock_decode((golden_dir / "clip.vmck").read_bytes())
        assert y4m_bytes(decoded.reconstruction) \
            == (golden_dir / "clip_recon.y4m").read_bytes()

        # service crash-restart + finalize timing
        rng = np.random.default_rng(71)
        lumas = [smooth_texture(rng, 32, 48) for _ in range(6)]
        y4m = tmp_path / "v.y4m"
        y4m.write_bytes(make_y4m(48, 32, 6, chroma="mono", luma_frames=lumas))
        library = VideoLibrary(tmp_path / "data")
        seq = load_y4m(y4m.read_bytes())
        asset = library.ingest(y4m, "vid", bitrate=rate_for_qp(seq, 30))
        precompute_sequence(asset.sequence(), FlowParams(block=16, search_range=4),
                            FlowStore(asset.flow_path))

        clock = FakeClock()
        config = ServiceConfig(data_dir=tmp_path / "data", clock=clock,
                               decay=DecayPolicy(horizon=5))
        client = TestClient(create_app(config), raise_server_exceptions=False)
        sid = client.post("/sessions", json={"video_id": "vid",
                                             "user_id": "u"}).json()["session_id"]
        client.post(f"/sessions/{sid}/strokes", json=[
            {"frame": 0, "cx": 20, "cy": 16, "radius": 6,
             "strength": 80, "polarity": "paint"}])

        clock.advance(10)
        r = client.post(f"/sessions/{sid}/finalize")
        assert r.status_code == 403
        assert r.json()["remaining_seconds"] == 170

        def digest(root):
            return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
                    for p in sorted(root.rglob("*")) if p.is_file()}

        map_before = client.get(f"/sessions/{sid}/map").content
        before = digest(tmp_path / "data")
        client2 = TestClient(create_app(
            ServiceConfig(data_dir=tmp_path / "data", clock=clock,
                          decay=DecayPolicy(horizon=5))),
            raise_server_exceptions=False)
        assert digest(tmp_path / "data") == before
        assert client2.get(f"/sessions/{sid}/map").content == map_before

        clock.advance(171)
        assert client2.post(f"/sessions/{sid}/finalize").status_code == 200
