"""Golden-file stability: every binary format is pinned byte for byte."""

from pathlib import Path

from vimp.codec import mock_decode
from vimp.flow import flow_bytes, import_flow
from vimp.map_engine import read_vimp, vimp_bytes
from vimp.qp_mapping import parse_qpmap, qpmap_bytes
from vimp.video_io import load_y4m, y4m_bytes

from .golden import build

GOLDEN = Path(__file__).parent / "golden"


def golden(name: str) -> bytes:
    return (GOLDEN / name).read_bytes()


def test_builders_reproduce_committed_goldens():
    built = build.build_all()
    for name, data in built.items():
        assert data == golden(name), f"{name} drifted from its golden bytes"


def test_vimp_golden_roundtrip():
    data = golden("sample.vimp")
    vol = read_vimp(data)
    assert vimp_bytes(vol) == data
    assert vol.maps.shape == (3, 6, 8)


def test_vflo_golden_roundtrip():
    data = golden("sample.vflo")
    fields = import_flow(data)
    assert flow_bytes(fields) == data
    assert len(fields) == 2


def test_vdqp_golden_roundtrip():
    data = golden("sample.vdqp")
    dqp = parse_qpmap(data)
    assert qpmap_bytes(dqp) == data
    assert (dqp.mb_rows, dqp.mb_cols, dqp.frame_count) == (2, 3, 2)


def test_y4m_golden_roundtrip():
    data = golden("clip.y4m")
    seq = load_y4m(data)
    assert y4m_bytes(seq) == data


def test_vmck_golden_decodes_to_golden_reconstruction():
    decoded = mock_decode(golden("clip.vmck"))
    assert y4m_bytes(decoded.reconstruction) == golden("clip_recon.y4m")


def test_vmck_golden_reencodes_bit_exact():
    result = build.golden_encode(golden("clip.y4m"))
    assert bytes(result.bitstream) == golden("clip.vmck")
    assert y4m_bytes(result.reconstruction) == golden("clip_recon.y4m")
