"""Text interface for external planners plus the token decoding stack.

A planning context serializes to a fixed, line-oriented scene text with four
sections (SYSTEM, INSTRUCTION, OBSERVATIONS, EGO_STATE). A planner completion
is free-form reasoning text followed by a TRAJECTORY: block of (x, y, yaw)
triples, one per line. The wire protocol for remote planners is a single
JSON request {prompt, max_tokens, temperature, top_p} answered by
{completion}, over HTTP POST or one line of stdin/stdout to a child process.

Remote failures never raise; they come back as PlanFailure records with a
machine-readable reason (timeout, connection, missing_block, wrong_length,
non_finite).
"""

from __future__ import annotations

import enum
import json
import math
import re
import select
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np
import requests

from .scenario import (
    PlanningContext,
    Pose,
    Trajectory,
    to_ego_frame,
    transform_trajectory,
)

_POSE_LINE = re.compile(
    r"^\(?\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)?$"
)


class FailureReason(str, enum.Enum):
    TIMEOUT = "timeout"
    CONNECTION = "connection"
    MISSING_BLOCK = "missing_block"
    WRONG_LENGTH = "wrong_length"
    NON_FINITE = "non_finite"


@dataclass(frozen=True)
class PlanFailure:
    reason: FailureReason
    detail: str = ""


@dataclass(frozen=True)
class PlannerOutput:
    trace_text: str
    trajectory: Trajectory


class PlanParseError(ValueError):
    def __init__(self, reason: FailureReason, detail: str) -> None:
        super().__init__(f"{reason.value}: {detail}")
        self.reason = reason
        self.detail = detail


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def serialize_context(ctx: PlanningContext) -> tuple[str, dict[str, tuple[int, int]]]:
    """Render the scene text and the character span of each section.

    Numbers print with three decimals. Sections appear in the fixed order
    SYSTEM, INSTRUCTION, OBSERVATIONS, EGO_STATE; the spans partition the
    whole string.
    """
    sys_lines = [
        "SYSTEM:",
        (
            f"heading={'ccw' if ctx.system.heading_ccw else 'cw'} "
            f"yaw_zero={ctx.system.yaw_zero_axis}_axis "
            f"length_m={_fmt(ctx.system.length)} width_m={_fmt(ctx.system.width)} "
            f"wheelbase_m={_fmt(ctx.system.wheelbase)}"
        ),
        f"velocity_mps={_fmt(ctx.ego.velocity)} acceleration_mps2={_fmt(ctx.ego.acceleration)}",
    ]
    note = ctx.instruction.free_text if ctx.instruction.free_text else "none"
    instr_lines = ["INSTRUCTION:", f"goal={ctx.instruction.goal.value}", f"note={note}"]

    stop_s = "none" if ctx.map.stop_line_s is None else _fmt(ctx.map.stop_line_s)
    centerline = ";".join(f"{_fmt(x)},{_fmt(y)}" for x, y in ctx.map.centerline)
    obs_lines = [
        "OBSERVATIONS:",
        (
            f"map half_width_m={_fmt(ctx.map.lane_half_width)} "
            f"speed_limit_mps={_fmt(ctx.map.speed_limit)} "
            f"light={ctx.map.traffic_light.value} stop_line_s={stop_s}"
        ),
        f"centerline {centerline}",
    ]
    for obs in ctx.observations:
        future = ";".join(
            f"{_fmt(p.x)},{_fmt(p.y)},{_fmt(p.yaw)}" for p in obs.predicted.poses
        )
        obs_lines.append(
            f"agent id={obs.agent_id} category={obs.category.value} "
            f"x={_fmt(obs.pose.x)} y={_fmt(obs.pose.y)} yaw={_fmt(obs.pose.yaw)} "
            f"v={_fmt(obs.velocity)} length_m={_fmt(obs.length)} "
            f"width_m={_fmt(obs.width)} future={future}"
        )

    ego_lines = [
        "EGO_STATE:",
        (
            f"pose t={_fmt(ctx.timestamp)} x={_fmt(ctx.ego.pose.x)} "
            f"y={_fmt(ctx.ego.pose.y)} yaw={_fmt(ctx.ego.pose.yaw)} "
            f"v={_fmt(ctx.ego.velocity)} a={_fmt(ctx.ego.acceleration)}"
        ),
    ]
    hist = ctx.ego.history
    for i, p in enumerate(hist.poses):
        t = hist.start_time + i * hist.dt
        ego_lines.append(
            f"history t={_fmt(t)} x={_fmt(p.x)} y={_fmt(p.y)} yaw={_fmt(p.yaw)}"
        )

    spans: dict[str, tuple[int, int]] = {}
    text = ""
    for name, lines in (
        ("SYSTEM", sys_lines),
        ("INSTRUCTION", instr_lines),
        ("OBSERVATIONS", obs_lines),
        ("EGO_STATE", ego_lines),
    ):
        start = len(text)
        text += "\n".join(lines) + "\n"
        spans[name] = (start, len(text))
    return text, spans


def format_planner_output(
    trace_text: str, trajectory: Trajectory, precision: int | None = None
) -> str:
    """Compose a completion: reasoning text, then the TRAJECTORY block.

    With the default full precision the text round-trips bit-exactly through
    :func:`parse_planner_output`.
    """

    def num(v: float) -> str:
        return repr(v) if precision is None else f"{v:.{precision}f}"

    lines = []
    if trace_text:
        lines.append(trace_text)
    lines.append("TRAJECTORY:")
    lines.extend(f"({num(p.x)}, {num(p.y)}, {num(p.yaw)})" for p in trajectory.poses)
    return "\n".join(lines) + "\n"


def parse_planner_output(
    text: str, horizon_steps: int, dt: float, start_time: float
) -> PlannerOutput:
    """Parse a completion into trace text and a trajectory.

    Raises PlanParseError with reason missing_block when no TRAJECTORY: line
    exists, wrong_length when the pose count is not horizon_steps + 1, and
    non_finite for NaN/inf coordinates.
    """
    lines = text.splitlines()
    marker = None
    for i, line in enumerate(lines):
        if line.strip() == "TRAJECTORY:":
            marker = i
            break
    if marker is None:
        raise PlanParseError(FailureReason.MISSING_BLOCK, "no TRAJECTORY: line found")
    poses: list[Pose] = []
    for line in lines[marker + 1 :]:
        if not line.strip():
            continue
        m = _POSE_LINE.match(line.strip())
        if not m:
            break
        try:
            x, y, yaw = (float(g) for g in m.groups())
        except ValueError:
            break
        if not all(math.isfinite(v) for v in (x, y, yaw)):
            raise PlanParseError(FailureReason.NON_FINITE, f"non-finite pose: {line.strip()}")
        poses.append(Pose(x, y, yaw))
    expected = horizon_steps + 1
    if len(poses) != expected:
        raise PlanParseError(
            FailureReason.WRONG_LENGTH, f"expected {expected} poses, got {len(poses)}"
        )
    trace_text = "\n".join(lines[:marker]).rstrip("\n")
    return PlannerOutput(
        trace_text=trace_text,
        trajectory=Trajectory(poses=tuple(poses), dt=dt, start_time=start_time),
    )


# ---------------------------------------------------------------------------
# Decoding stack
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    top_p: float = 0.75
    seed: int = 0
    max_tokens: int = 4096


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction)."""
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0:
        raise ValueError("softmax needs at least one logit")
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def temperature_scale(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Divide logits by a strictly positive temperature."""
    if temperature <= 0.0:
        raise ValueError("temperature must be positive (0 selects argmax upstream)")
    return np.asarray(logits, dtype=float) / temperature


def top_p_sample(probs: np.ndarray, p: float, rng: np.random.Generator) -> int:
    """Nucleus sampling: renormalized inverse CDF over the smallest prefix of
    descending-probability tokens whose mass reaches p. Ties order by
    ascending index."""
    if not 0.0 < p <= 1.0:
        raise ValueError("top_p must be in (0, 1]")
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    cum = np.cumsum(sorted_probs)
    cut = int(np.searchsorted(cum, p, side="left"))
    cut = min(cut, len(probs) - 1)
    kept = sorted_probs[: cut + 1]
    kept = kept / kept.sum()
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(kept), u, side="right"))
    j = min(j, cut)
    return int(order[j])


def decode_token(
    logits: np.ndarray, params: SamplingParams, rng: np.random.Generator | None = None
) -> int:
    """One decoding step. Temperature 0 short-circuits to argmax (ties to the
    lowest index) and ignores top_p; otherwise scale, softmax, nucleus-sample.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1 or logits.size == 0:
        raise ValueError("logits must be a non-empty 1-d array")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if params.temperature == 0.0:
        return int(np.argmax(logits))
    if rng is None:
        rng = np.random.default_rng(params.seed)
    probs = softmax(temperature_scale(logits, params.temperature))
    return top_p_sample(probs, params.top_p, rng)


# ---------------------------------------------------------------------------
# Remote endpoints
# ---------------------------------------------------------------------------


class Endpoint:
    """A thing that answers one JSON request with one JSON response."""

    def request(self, payload: dict, timeout: float) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass


class HttpEndpoint(Endpoint):
    def __init__(self, url: str) -> None:
        self.url = url

    def request(self, payload: dict, timeout: float) -> dict:
        try:
            resp = requests.post(self.url, json=payload, timeout=timeout)
        except requests.Timeout as exc:
            raise PlanParseError(FailureReason.TIMEOUT, str(exc)) from exc
        except requests.RequestException as exc:
            raise PlanParseError(FailureReason.CONNECTION, str(exc)) from exc
        if resp.status_code != 200:
            raise PlanParseError(FailureReason.CONNECTION, f"HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise PlanParseError(FailureReason.MISSING_BLOCK, "response is not JSON") from exc


class ProcessEndpoint(Endpoint):
    """Child process speaking one JSON line per request on stdin/stdout.

    The child is spawned lazily and kept alive across requests; a timeout
    kills it (the next request respawns a fresh one).
    """

    def __init__(self, command: str) -> None:
        self.command = command
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def request(self, payload: dict, timeout: float) -> dict:
        try:
            proc = self._ensure()
        except OSError as exc:
            raise PlanParseError(FailureReason.CONNECTION, str(exc)) from exc
        try:
            proc.stdin.write(json.dumps(payload) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise PlanParseError(FailureReason.CONNECTION, str(exc)) from exc
        ready, _, _ = select.select([proc.stdout], [], [], timeout)
        if not ready:
            self.close()
            raise PlanParseError(FailureReason.TIMEOUT, f"no response within {timeout}s")
        line = proc.stdout.readline()
        if not line:
            self.close()
            raise PlanParseError(FailureReason.CONNECTION, "endpoint closed its stdout")
        try:
            return json.loads(line)
        except ValueError as exc:
            raise PlanParseError(FailureReason.MISSING_BLOCK, "response is not JSON") from exc

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.poll() is None:
                self._proc.kill()
                self._proc.wait()
            self._proc = None


def open_endpoint(endpoint: str) -> Endpoint:
    """URL -> HTTP endpoint; anything else is a child-process command line."""
    if endpoint.startswith(("http://", "https://")):
        return HttpEndpoint(endpoint)
    return ProcessEndpoint(endpoint)


def remote_plan(
    endpoint: Endpoint,
    context: PlanningContext,
    horizon_steps: int,
    dt: float,
    params: SamplingParams,
    timeout: float = 10.0,
) -> PlannerOutput | PlanFailure:
    """Ask a remote planner for one plan. Never raises on remote misbehavior;
    malformed, missing, truncated, or slow responses become PlanFailure.

    The prompt is serialized from the ego frame (ego pose exactly at the
    origin) and the completion is read in that frame, then mapped back to
    world coordinates.
    """
    prompt, _ = serialize_context(to_ego_frame(context))
    payload = {
        "prompt": prompt,
        "max_tokens": params.max_tokens,
        "temperature": params.temperature,
        "top_p": params.top_p,
    }
    try:
        response = endpoint.request(payload, timeout)
        completion = response.get("completion") if isinstance(response, dict) else None
        if not isinstance(completion, str):
            raise PlanParseError(FailureReason.MISSING_BLOCK, "no completion field")
        output = parse_planner_output(completion, horizon_steps, dt, context.timestamp)
    except PlanParseError as exc:
        return PlanFailure(reason=exc.reason, detail=exc.detail)
    world = transform_trajectory(output.trajectory, context.ego.pose, inverse=True)
    return PlannerOutput(trace_text=output.trace_text, trajectory=world)
