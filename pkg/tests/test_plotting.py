import xml.etree.ElementTree as ET

import numpy as np
import pytest

from coopmilp.avoidance import Obstacle
from coopmilp.drills import AttackerSpec, DefenderSpec, DrillGeometry, DrillInstance, DrillKind
from coopmilp.dynamics import TimeGrid, VehicleState
from coopmilp.plotting import Canvas, drill_svg, trajectory_svg
from coopmilp.sim import simulate

NS = "{http://www.w3.org/2000/svg}"


def _traj():
    grid = TimeGrid.uniform(4, 0.5)
    u = np.array([[0.5, 0.0], [0.5, 0.2], [-0.5, 0.0], [-0.5, -0.2]])
    return VehicleState(0.0, 0.0, 0.0, 0.0), u, grid


def test_trajectory_svg_is_deterministic_and_well_formed():
    start, u, grid = _traj()
    obs = [Obstacle.static(0.3, 0.1, 0.05)]
    a = trajectory_svg(start, u, grid, obs, [0.5, 1.0], added_times=[1.0], title="path")
    assert a == trajectory_svg(start, u, grid, obs, [0.5, 1.0], added_times=[1.0], title="path")
    root = ET.fromstring(a)
    assert root.tag == NS + "svg"
    assert len(root.findall(NS + "circle")) >= 2  # obstacle and start marker
    assert len(root.findall(NS + "polyline")) == 2
    assert root.find(NS + "text").text == "path"


def test_drill_svg_draws_each_step():
    inst = DrillInstance(DrillKind.DRILL2, [DefenderSpec(VehicleState(0.5, 0.0, 0.0, 0.0))],
                         [AttackerSpec(0.99, 0.0, -0.2, 0.0)], DrillGeometry(0.3, 8, 0.1, 8, 0.2, 8),
                         TimeGrid.uniform(5, 1.0), TimeGrid.uniform(20, 0.25), avoid_times=[2.5, 5.0])
    u = [np.zeros((5, 2))]
    trace = simulate(inst, u)
    svg = drill_svg(inst, u, trace)
    assert svg == drill_svg(inst, u, simulate(inst, u))
    root = ET.fromstring(svg)
    # zone, 20 intercept polygons, 20 warning polygons
    assert len(root.findall(NS + "polygon")) == 41


def test_canvas_maps_box_corners():
    cv = Canvas.fit(np.array([[0.0, 0.0], [1.0, 1.0]]), pad=0.0)
    assert cv.px(0.0, 0.0) == ("24", "456")
    assert cv.px(1.0, 1.0) == ("456", "24")


def test_unknown_marker():
    cv = Canvas.fit(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        cv.marker(0, 0, "star", "black")
