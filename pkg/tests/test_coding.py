import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bwrmesh as bw
from bwrmesh.coding import (
    CoefficientLayout,
    decode_image,
    encode_image,
    payload_bit_budget,
)
from bwrmesh.errors import CodecError, HierarchyFormatError


@given(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    st.floats(min_value=1e-9, max_value=1e3),
)
@settings(max_examples=200)
def test_quantize_half_step_bound(x, delta):
    q = bw.quantize([x], delta)[0]
    # half-step bound up to float rounding of x/delta and q*delta
    slack = 4 * np.finfo(float).eps * max(abs(x), abs(q * delta))
    assert abs(q * delta - x) <= delta / 2 + slack


def test_quantize_rejects_bad_delta():
    with pytest.raises(CodecError):
        bw.quantize([1.0], 0.0)
    with pytest.raises(CodecError):
        bw.dequantize([1], -1.0)


def test_default_delta_scale():
    assert np.isclose(bw.default_delta(2.0), 2.0 * 2.0**-16)


def test_layout_pixels_unique(octa):
    layout = CoefficientLayout(octa, 3)
    assert (layout.height, layout.width) == (16, 16)
    seen = set()
    for pos in layout.positions:
        for i, j in pos:
            assert (int(i), int(j)) not in seen
            seen.add((int(i), int(j)))
    # exactly the coefficient pixels are marked, the rest are fillers
    assert layout.role.sum() == 12 + 48 + 192


def test_layout_tree_consistent(octa):
    layout = CoefficientLayout(octa, 3)
    from bwrmesh.subdivision import SubdivisionStep

    step = SubdivisionStep(octa)
    for e in range(12):
        parent = tuple(layout.positions[0][e])
        block = layout.child_block(*map(int, parent))
        for slot, child in enumerate(step.child_edges_of[e]):
            expect = (block[0] + slot // 2, block[1] + slot % 2)
            assert tuple(layout.positions[1][child]) == expect


def test_layout_filler_pixels_have_no_children(octa):
    layout = CoefficientLayout(octa, 2)
    for i in range(0, layout.llh, 2):
        for j in range(0, layout.llw, 2):
            assert layout.child_block(i, j) is None


def test_filler_is_group_mean(sphere_hierarchy):
    img = bw.map_to_image(sphere_hierarchy)
    layout = img.layout
    for i in range(0, layout.llh, 2):
        for j in range(0, layout.llw, 2):
            group = img.values[i : i + 2, j : j + 2]
            role = layout.role[i : i + 2, j : j + 2]
            if role[0, 0]:
                continue
            expect = int(np.rint(group[role].mean())) if role.any() else 0
            assert group[0, 0] == expect


def test_map_unmap_round_trip(sphere_hierarchy):
    img = bw.map_to_image(sphere_hierarchy)
    back = img.unmap()
    for w, wq in zip(sphere_hierarchy.coefficients, back):
        assert np.all(np.abs(w - wq) <= img.delta / 2 + 1e-15)


def test_codec_lossless_at_full_budget(sphere_hierarchy):
    img = bw.map_to_image(sphere_hierarchy)
    payload, bits, planes = encode_image(img)
    out, used = decode_image(payload, bits, planes, img.layout, img.delta)
    assert np.array_equal(out.values, img.values)
    assert used == bits


def test_codec_error_non_increasing_over_budgets(sphere_hierarchy):
    img = bw.map_to_image(sphere_hierarchy)
    payload, bits, planes = encode_image(img)
    budgets = [int(bits * f) for f in (0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0)]
    errors = []
    for budget in budgets:
        out, _ = decode_image(
            payload, bits, planes, img.layout, img.delta, budget_bits=budget
        )
        err = np.linalg.norm((out.values - img.values).astype(float))
        errors.append(err)
    for a, b in zip(errors, errors[1:]):
        assert b <= a + 1e-9
    assert errors[-1] == 0.0


def test_codec_all_zero_image(octa):
    h = bw.bwr_remesh(bw.octahedron_base(bw.icosphere(3)), bw.icosphere(3), 1)
    zero = bw.MultiresHierarchy(
        base=h.base, levels=1, coefficients=[np.zeros(12)],
        provenance=[np.zeros(12, dtype=np.uint8)], config=h.config,
        bbox_diag=h.bbox_diag,
    )
    img = bw.map_to_image(zero)
    payload, bits, planes = encode_image(img)
    out, _ = decode_image(payload, bits, planes, img.layout, img.delta)
    assert np.array_equal(out.values, img.values)


def test_bitstream_file_round_trip(tmp_path, sphere_hierarchy):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    p = tmp_path / "sphere.bwc"
    bw.save_bitstream(stream, p)
    back = bw.load_bitstream(p)
    assert back.payload == stream.payload
    assert back.payload_bits == stream.payload_bits
    assert back.delta == stream.delta
    assert back.retries == stream.retries
    img, base, config, diag, used = bw.decode(back)
    assert np.array_equal(base.faces, sphere_hierarchy.base.faces)
    assert config == sphere_hierarchy.config


def test_bitstream_rejects_corruption(tmp_path, sphere_hierarchy):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    p = tmp_path / "sphere.bwc"
    bw.save_bitstream(stream, p)
    blob = bytearray(p.read_bytes())
    blob[50] ^= 0xFF
    p.write_bytes(bytes(blob))
    with pytest.raises(HierarchyFormatError):
        bw.load_bitstream(p)


def test_base_mesh_f32_coords(tmp_path, sphere_hierarchy):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    _, base, _, _, _ = bw.decode(stream)
    assert np.allclose(base.vertices, sphere_hierarchy.base.vertices, atol=1e-6)


def test_payload_bit_budget_footnote():
    assert payload_bit_budget(0.25, 65538) == 16384


def test_reconstruct_full_budget_equals_quantized_synth(sphere_hierarchy, sphere_ref):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    mesh, achieved, rep = bw.reconstruct_at_bpv(
        stream, float("inf"), 3, sphere_ref
    )
    # oracle: synthesize with quantized coefficients over the f32 base
    img = bw.map_to_image(sphere_hierarchy)
    _, base, config, diag, _ = bw.decode(stream)
    oracle = bw.MultiresHierarchy(
        base=base, levels=3, coefficients=img.unmap(),
        provenance=sphere_hierarchy.provenance, config=config, bbox_diag=diag,
    )
    expect = bw.synthesize(oracle, 3)
    assert np.array_equal(mesh.vertices, expect.vertices)
    assert rep.psnr_db > 50.0


def test_reconstruct_psnr_monotone(sphere_hierarchy, sphere_ref):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    values = []
    for bpv in (0.125, 0.5, 2.0):
        _, _, rep = bw.reconstruct_at_bpv(stream, bpv, 3, sphere_ref)
        values.append(rep.psnr_db)
    assert values[0] <= values[1] <= values[2]


def test_reconstruct_level_range_checked(sphere_hierarchy):
    stream = bw.encode_hierarchy(sphere_hierarchy)
    with pytest.raises(CodecError):
        bw.reconstruct_at_bpv(stream, 1.0, 9)


def test_layout_needs_a_level(octa):
    with pytest.raises(CodecError):
        CoefficientLayout(octa, 0)
