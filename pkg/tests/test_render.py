from pathlib import Path
from xml.etree import ElementTree

import numpy as np
import pytest

from leastpriv.empirical import Dataset, audit_matrix, split_dataset
from leastpriv.errors import LeakageError
from leastpriv.frontier import FrontierPoint, Provenance, enumerate_deterministic
from leastpriv.instances import deterministic_label_joint
from leastpriv.render import (
    COLD,
    HOT,
    NEUTRAL,
    HeatmapSpec,
    diverging_rgb,
    render_frontier_svg,
    render_heatmap_svg,
)

GOLDEN = Path(__file__).parent / "golden"
NS = "{http://www.w3.org/2000/svg}"


def _cells(svg: bytes):
    root = ElementTree.fromstring(svg)
    return [r for r in root.iter(f"{NS}rect") if r.get("stroke") == "#333333" and r.get("fill") != "none"]


def _no_external_refs(svg: bytes):
    text = svg.decode()
    assert "href" not in text and "url(" not in text and "@import" not in text
    assert "<image" not in text and "<script" not in text


def test_golden_single_zero_cell():
    svg = render_heatmap_svg(HeatmapSpec(("T",), ("S",), [[0.0]]))
    assert svg == (GOLDEN / "heatmap_1x1_zero.svg").read_bytes()
    (cell,) = _cells(svg)
    assert cell.get("fill") == "#ffffff"


def test_two_by_two_monotone():
    svg = render_heatmap_svg(HeatmapSpec(("a", "b"), ("c", "d"), [[-1.0, 0.0], [0.0, 1.0]]))
    fills = [c.get("fill") for c in _cells(svg)]
    assert fills == ["#2166ac", "#ffffff", "#ffffff", "#b2182b"]
    ElementTree.fromstring(svg)
    _no_external_refs(svg)


def test_color_scale_monotone():
    vals = np.linspace(-2, 2, 81)
    # the scale passes through white, so no single channel is monotone;
    # red minus blue rises steadily from the cold end to the hot end
    warmth = [int(r) - int(b) for r, _, b in (diverging_rgb(v, 2.0) for v in vals)]
    assert all(b > a for a, b in zip(warmth, warmth[1:]))
    assert diverging_rgb(0.0, 2.0) == NEUTRAL
    assert diverging_rgb(2.0, 2.0) == HOT and diverging_rgb(-5.0, 2.0) == COLD


def test_shape_mismatch_rejected():
    with pytest.raises(LeakageError):
        HeatmapSpec(("a",), ("b", "c"), [[0.0]])


def test_labels_escaped_and_cells_labeled():
    svg = render_heatmap_svg(HeatmapSpec(("<t&>",), ("s",), [[0.12345]]))
    ElementTree.fromstring(svg)
    assert b"&lt;t&amp;&gt;" in svg and b">0.123<" in svg


def test_audit_heatmap_deterministic():
    rng = np.random.default_rng(0)
    ds = Dataset({k: rng.integers(0, 2, 400) for k in ("a", "b", "c", "z")})
    m = audit_matrix(ds, split_dataset(ds, 0), ["a", "b"], ["a", "b", "c"], ["z"])
    one = render_heatmap_svg(HeatmapSpec.from_matrix(m))
    assert one == render_heatmap_svg(HeatmapSpec.from_matrix(m))
    assert len(_cells(one)) == 6


def test_frontier_plot():
    pts = enumerate_deterministic(deterministic_label_joint(4, [0, 1, 0, 1]), 2)
    svg = render_frontier_svg(pts)
    root = ElementTree.fromstring(svg)
    _no_external_refs(svg)
    assert [ln for ln in root.iter(f"{NS}line") if ln.get("class") == "diagonal"]
    circles = list(root.iter(f"{NS}circle"))
    assert len(circles) == len(pts)
    # the perfect-LPP witness sits on the y-axis at height 1
    x0 = min(float(c.get("cx")) for c in circles)
    on_axis = [c for c in circles if float(c.get("cx")) == x0]
    assert len({c.get("cy") for c in on_axis}) > 1
    assert svg == render_frontier_svg(pts)


def test_frontier_plot_single_origin():
    p = FrontierPoint(0.0, 0.0, 0.0, 0.0, "d", Provenance.ENUMERATED)
    root = ElementTree.fromstring(render_frontier_svg([p]))
    (c,) = list(root.iter(f"{NS}circle"))
    axes = [ln for ln in root.iter(f"{NS}line") if ln.get("class") != "diagonal"]
    assert c.get("cx") == axes[0].get("x1") and c.get("cy") == axes[0].get("y1")
