import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import random_state, two_blocks
from ftrcontact.artifacts import convergence_plots, line_plot_svg, read_csv, read_vtk, write_csv, write_vtk
from ftrcontact.filter import J_TYPE, THETA_TYPE, IterationRecord


def test_vtk_round_trip_is_bit_exact(tmp_path, rng):
    mesh = two_blocks()
    z = random_state(mesh, rng, 0.05) + 1e-17 * rng.normal(size=mesh.n_dofs)
    write_vtk(tmp_path / "s.vtk", mesh, z)
    st = read_vtk(tmp_path / "s.vtk")
    assert np.array_equal(st.z, z)
    assert np.array_equal(st.triangles, mesh.triangles)
    assert np.array_equal(st.body, mesh.body)
    assert np.allclose(st.reference, mesh.vertices, atol=1e-15)


def test_vtk_rejects_mismatched_state(tmp_path):
    mesh = two_blocks()
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "s.vtk", mesh, np.zeros(4))


def records():
    return [IterationRecord(0, -0.1, 0.3, 0.5, 0.95, 1.0 / 3.0, THETA_TYPE, 4),
            IterationRecord(1, -0.2, 0.0, 0.5, float("nan"), 1e-9, J_TYPE, 6)]


def test_csv_is_deterministic_and_exact(tmp_path):
    write_csv(tmp_path / "a.csv", records())
    write_csv(tmp_path / "b.csv", records())
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = read_csv(tmp_path / "a.csv")
    assert list(rows[0]) == list(IterationRecord.CSV_FIELDS)
    assert float(rows[0]["chi"]) == 1.0 / 3.0
    assert math.isnan(float(rows[1]["rho"]))
    assert rows[1]["step_type"] == J_TYPE


def test_svg_is_well_formed_with_gaps_in_data():
    svg = line_plot_svg({"a": ([0, 1, 2, 3], [1.0, 0.0, float("nan"), 1e-8]), "b&c": ([0, 1], [1e3, 1e2])},
                        "t <1>")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 3


def test_convergence_plots_write_two_files(tmp_path):
    paths = convergence_plots(records(), tmp_path, "phase1")
    assert [p.name for p in paths] == ["phase1_chi.svg", "phase1_theta_delta.svg"]
    for p in paths:
        ET.parse(p)
