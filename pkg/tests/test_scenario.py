from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import SCENARIO_DIR, FIXTURE_IDS, make_context, straight_scenario_dict
from planloop.geometry import angle_diff
from planloop.scenario import (
    DEFAULT_AGENT_CAP,
    AgentObservation,
    AgentCategory,
    GoalType,
    Pose,
    ScenarioError,
    Trajectory,
    TrafficLight,
    agent_observation_at,
    from_ego_frame,
    load_scenario,
    parse_scenario,
    planning_context_at,
    pose_from_frame,
    pose_to_frame,
    resample_trajectory,
    select_nearest_agents,
    to_ego_frame,
)
from planloop.dynamics import VehicleParams


def _parse(d):
    return parse_scenario(d, source="test")


# --- loading the bundled fixtures ---


@pytest.mark.parametrize("scenario_id", FIXTURE_IDS)
def test_bundled_fixture_loads(scenario_id):
    sc = load_scenario(SCENARIO_DIR / f"{scenario_id}.json")
    assert sc.scenario_id == scenario_id
    assert sc.resolution == 0.5
    assert sc.history_steps == 4
    assert sc.plan_steps == 16
    assert sc.n_frames == len(sc.ego.motion.poses)
    # enough frames for at least one full planning window
    assert sc.n_frames > sc.history_steps + sc.plan_steps


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.json")


def test_load_scenario_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(p)


# --- schema validation ---


def test_defaults_fill_in():
    d = straight_scenario_dict()
    del d["agents"]
    del d["instruction"]
    sc = _parse(d)
    assert sc.resolution == 0.5
    assert sc.history_horizon == 2.0
    assert sc.plan_horizon == 8.0
    assert sc.agents == ()
    assert sc.instruction.goal is GoalType.FOLLOW_LANE


def test_unknown_top_level_key_rejected():
    d = straight_scenario_dict()
    d["frames"] = []
    with pytest.raises(ScenarioError, match="frames"):
        _parse(d)


def test_unknown_map_key_rejected():
    d = straight_scenario_dict()
    d["map"]["lanes"] = 2
    with pytest.raises(ScenarioError, match="lanes"):
        _parse(d)


def test_missing_id_rejected():
    d = straight_scenario_dict()
    del d["id"]
    with pytest.raises(ScenarioError, match=r"\.id"):
        _parse(d)


def test_ragged_time_grid_rejected():
    d = straight_scenario_dict()
    d["ego_log"][3]["t"] = 1.7
    with pytest.raises(ScenarioError, match="frame spacing"):
        _parse(d)


def test_agent_grid_alignment_rejected():
    d = straight_scenario_dict(agents=[{
        "id": "a", "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": 0.25, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": 0.0}],
    }])
    with pytest.raises(ScenarioError, match=r"agents\[0\]"):
        _parse(d)


def test_stop_line_requires_light():
    d = straight_scenario_dict()
    d["map"]["stop_line_s"] = 30.0
    with pytest.raises(ScenarioError, match="stop_line_s"):
        _parse(d)


def test_light_requires_stop_line():
    d = straight_scenario_dict(light="red")
    with pytest.raises(ScenarioError, match="stop_line_s"):
        _parse(d)


def test_stop_line_outside_corridor_rejected():
    d = straight_scenario_dict(light="red", stop_line_s=9000.0)
    with pytest.raises(ScenarioError, match="stop_line_s"):
        _parse(d)


def test_bool_is_not_a_number():
    d = straight_scenario_dict()
    d["ego_log"][0]["v"] = True
    with pytest.raises(ScenarioError, match=r"ego_log\[0\]"):
        _parse(d)


def test_non_finite_rejected():
    d = straight_scenario_dict()
    d["ego_log"][2]["x"] = float("nan")
    with pytest.raises(ScenarioError, match=r"ego_log\[2\]"):
        _parse(d)


def test_unknown_light_value():
    d = straight_scenario_dict()
    d["map"]["traffic_light"] = "purple"
    with pytest.raises(ScenarioError, match="purple"):
        _parse(d)


def test_unknown_agent_category():
    d = straight_scenario_dict(agents=[{
        "id": "a", "category": "hovercraft", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": 0.0, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": 0.0}],
    }])
    with pytest.raises(ScenarioError, match="hovercraft"):
        _parse(d)


def test_duplicate_agent_ids_rejected():
    agent = {
        "id": "dup", "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": 0.0, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": 0.0}],
    }
    d = straight_scenario_dict(agents=[agent, dict(agent)])
    with pytest.raises(ScenarioError, match="dup"):
        _parse(d)


def test_integer_agent_ids_become_strings():
    d = straight_scenario_dict(agents=[{
        "id": 7, "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": 0.0, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": 0.0}],
    }])
    sc = _parse(d)
    assert sc.agents[0].agent_id == "7"


def test_centerline_needs_two_distinct_points():
    d = straight_scenario_dict()
    d["map"]["centerline"] = [[0.0, 0.0]]
    with pytest.raises(ScenarioError, match="centerline"):
        _parse(d)
    d["map"]["centerline"] = [[0.0, 0.0], [0.0, 0.0]]
    with pytest.raises(ScenarioError, match="centerline"):
        _parse(d)


def test_error_message_names_nested_field():
    d = straight_scenario_dict(agents=[{
        "id": "a", "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [
            {"t": 0.0, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": 0.0},
            {"t": 0.5, "x": 0.0, "y": 5.0, "yaw": 0.0, "v": "fast"},
        ],
    }])
    with pytest.raises(ScenarioError, match=r"agents\[0\]\.log\[1\]\.v"):
        _parse(d)


# --- pose frames ---


def test_frame_transform_oracle():
    anchor = Pose(10.0, 5.0, math.pi / 2.0)
    local = pose_to_frame(Pose(10.0, 8.0, math.pi / 2.0), anchor)
    assert local.x == pytest.approx(3.0, abs=1e-12)
    assert local.y == pytest.approx(0.0, abs=1e-12)
    assert local.yaw == pytest.approx(0.0, abs=1e-12)
    # a point to the anchor's left lands at positive local y
    left = pose_to_frame(Pose(8.0, 5.0, math.pi / 2.0), anchor)
    assert left.y == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-100, 100), st.floats(-100, 100), st.floats(-math.pi, math.pi),
    st.floats(-100, 100), st.floats(-100, 100), st.floats(-math.pi, math.pi),
)
def test_frame_round_trip(ax, ay, ayaw, px, py, pyaw):
    anchor = Pose(ax, ay, ayaw)
    p = Pose(px, py, pyaw)
    back = pose_from_frame(pose_to_frame(p, anchor), anchor)
    assert back.x == pytest.approx(p.x, abs=1e-9)
    assert back.y == pytest.approx(p.y, abs=1e-9)
    assert abs(angle_diff(back.yaw, p.yaw)) < 1e-9


def test_to_ego_frame_origin_is_exact():
    ctx = make_context(ego_pose=Pose(12.3, -4.5, 0.77), velocity=6.0)
    ego_ctx = to_ego_frame(ctx)
    assert ego_ctx.ego.pose == Pose(0.0, 0.0, 0.0)
    back = from_ego_frame(ego_ctx, ctx.ego.pose)
    assert back.ego.pose.x == pytest.approx(ctx.ego.pose.x, abs=1e-12)
    for a, b in zip(back.map.centerline, ctx.map.centerline):
        assert a[0] == pytest.approx(b[0], abs=1e-9)
        assert a[1] == pytest.approx(b[1], abs=1e-9)


def test_pose_wraps_yaw_on_construction():
    p = Pose(0.0, 0.0, 3 * math.pi)
    assert p.yaw == pytest.approx(math.pi)
    q = Pose(0.0, 0.0, -math.pi)
    assert q.yaw == pytest.approx(math.pi)


# --- agent selection ---


def _obs_at(agent_id: str, x: float, y: float) -> AgentObservation:
    traj = Trajectory(poses=(Pose(x, y, 0.0),), dt=0.5, start_time=0.0)
    return AgentObservation(
        agent_id=agent_id, category=AgentCategory.VEHICLE, length=4.0, width=1.8,
        pose=Pose(x, y, 0.0), velocity=0.0, predicted=traj,
    )


def test_select_nearest_agents_caps_and_sorts():
    obs = [_obs_at(f"a{i:02d}", 100.0 - i, 0.0) for i in range(40)]
    kept = select_nearest_agents(obs, Pose(0.0, 0.0, 0.0), cap=DEFAULT_AGENT_CAP)
    assert len(kept) == 32
    dists = [math.hypot(o.pose.x, o.pose.y) for o in kept]
    assert dists == sorted(dists)
    assert kept[0].agent_id == "a39"  # the closest one


def test_select_nearest_agents_distance_tie_breaks_by_id():
    obs = [_obs_at("b", 5.0, 0.0), _obs_at("a", -5.0, 0.0), _obs_at("c", 0.0, 5.0)]
    kept = select_nearest_agents(obs, Pose(0.0, 0.0, 0.0), cap=2)
    assert [o.agent_id for o in kept] == ["a", "b"]


# --- trajectory resampling and sampling ---


def test_resample_identity():
    traj = Trajectory(poses=tuple(Pose(k, 0.0, 0.0) for k in range(5)), dt=0.5, start_time=0.0)
    assert resample_trajectory(traj, 0.5) is traj


def test_resample_downsample_picks_knots():
    traj = Trajectory(poses=tuple(Pose(k, 0.0, 0.0) for k in range(9)), dt=0.25, start_time=0.0)
    down = resample_trajectory(traj, 0.5)
    assert [p.x for p in down.poses] == [0, 2, 4, 6, 8]
    assert down.dt == 0.5


def test_resample_upsample_interpolates_positions():
    traj = Trajectory(poses=(Pose(0.0, 0.0, 0.0), Pose(1.0, 2.0, 0.4)), dt=0.5, start_time=1.0)
    up = resample_trajectory(traj, 0.25)
    assert len(up.poses) == 3
    mid = up.poses[1]
    assert (mid.x, mid.y) == pytest.approx((0.5, 1.0))
    assert mid.yaw == pytest.approx(0.2)
    assert up.start_time == 1.0


def test_resample_upsample_yaw_crosses_branch_cut():
    a, b = math.pi - 0.1, -math.pi + 0.1
    traj = Trajectory(poses=(Pose(0.0, 0.0, a), Pose(1.0, 0.0, b)), dt=0.5, start_time=0.0)
    mid = resample_trajectory(traj, 0.25).poses[1]
    # shortest arc passes through pi, not zero
    ux = math.cos(a) + math.cos(b)
    uy = math.sin(a) + math.sin(b)
    expected = math.atan2(uy, ux)
    assert abs(angle_diff(mid.yaw, expected)) < 1e-12
    assert abs(angle_diff(mid.yaw, math.pi)) < 1e-9


def test_resample_incompatible_ratio_rejected():
    traj = Trajectory(poses=tuple(Pose(k, 0.0, 0.0) for k in range(5)), dt=0.5, start_time=0.0)
    with pytest.raises(ValueError):
        resample_trajectory(traj, 0.3)


def test_trajectory_sample_hits_knots_exactly():
    traj = Trajectory(
        poses=tuple(Pose(k * 1.7, k * 0.3, 0.01 * k) for k in range(6)),
        dt=0.5, start_time=2.0,
    )
    for k, p in enumerate(traj.poses):
        got = traj.sample(2.0 + 0.5 * k)
        assert got == p
    mid = traj.sample(2.25)
    assert mid.x == pytest.approx(0.85)
    before = traj.sample(-10.0)
    after = traj.sample(100.0)
    assert before == traj.poses[0]
    assert after == traj.poses[-1]


# --- planning context assembly ---


def test_agent_observation_clamps_to_log_end():
    d = straight_scenario_dict(agents=[{
        "id": "a", "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": k * 0.5, "x": float(k), "y": 5.0, "yaw": 0.0, "v": 2.0}
                for k in range(6)],
    }])
    sc = _parse(d)
    obs = agent_observation_at(sc.agents[0], 2.0, sc.plan_steps, sc.resolution)
    # only one future knot remains past t=2.0 in a six-frame log
    assert len(obs.predicted.poses) == 2
    assert obs.predicted.poses[0].x == 4.0
    assert obs.predicted.poses[-1].x == 5.0
    past_end = agent_observation_at(sc.agents[0], 2.5, sc.plan_steps, sc.resolution)
    assert len(past_end.predicted.poses) == 1


def test_planning_context_requires_history():
    sc = _parse(straight_scenario_dict())
    with pytest.raises(ValueError):
        planning_context_at(sc, 3, VehicleParams(), 32)


def test_planning_context_contents():
    d = straight_scenario_dict(agents=[{
        "id": "near", "category": "vehicle", "length_m": 4.0, "width_m": 1.8,
        "log": [{"t": k * 0.5, "x": 30.0, "y": 1.0, "yaw": 0.0, "v": 0.0}
                for k in range(41)],
    }])
    sc = _parse(d)
    veh = VehicleParams()
    ctx = planning_context_at(sc, 6, veh, 32)
    assert ctx.timestamp == 3.0
    assert ctx.ego.pose.x == pytest.approx(24.0)
    assert ctx.ego.velocity == 8.0
    assert ctx.ego.length == veh.length
    assert len(ctx.ego.history.poses) == sc.history_steps + 1
    assert ctx.ego.history.poses[-1] == ctx.ego.pose
    assert [o.agent_id for o in ctx.observations] == ["near"]
    # nonreactive prediction is the logged future on the plan horizon
    assert len(ctx.observations[0].predicted.poses) == sc.plan_steps + 1
    assert ctx.map.speed_limit == 10.0
    assert ctx.instruction.goal is GoalType.FOLLOW_LANE
    assert ctx.system.wheelbase == veh.wheelbase


def test_planning_context_serializes_back_to_json():
    # the parsed scenario mirrors the raw dict it came from
    d = straight_scenario_dict(light="yellow", stop_line_s=50.0)
    sc = _parse(d)
    assert sc.map.traffic_light is TrafficLight.YELLOW
    assert sc.map.stop_line_s == 50.0
    assert json.loads(json.dumps(d))["map"]["stop_line_s"] == 50.0
