"""End-to-end teleoperation: a scripted WebSocket client steers the
winding-gap scenario to its goal using protocol messages only."""

import asyncio
import contextlib
import json

import websockets

from efkesim.planar import Scenario
from efkesim.teleop import TeleopServer, TeleopSession


async def _drive_to_goal() -> dict:
    scenario = Scenario.bundled("winding_gap")
    session = TeleopSession(scenario, real_time_factor=200.0)
    server = TeleopServer(session, host="127.0.0.1", port=0)
    ready = asyncio.Event()
    outcome = {}

    # the reference route, keyed by simulated time
    script = [(0.0, "+x"), (14.5, "+y"), (29.5, "+x")]

    async def client():
        await ready.wait()
        async with websockets.connect(f"ws://127.0.0.1:{server._bound_port}") as ws:
            hello = json.loads(await ws.recv())
            assert hello["type"] == "hello"
            assert hello["scenario"]["goal"] is not None
            idx = 0
            async for raw in ws:
                msg = json.loads(raw)
                if msg.get("type") != "state":
                    continue
                t = msg["t_s"]
                while idx < len(script) and script[idx][0] <= t:
                    await ws.send(json.dumps(
                        {"type": "command", "direction": script[idx][1]}
                    ))
                    idx += 1
                if msg["goal_reached"]:
                    await ws.send(json.dumps({"type": "command", "direction": "stop"}))
                    outcome["goal_time_s"] = t
                    outcome["pose"] = msg["pose"]
                    return
                if t > 60.0:
                    outcome["timeout_pose"] = msg["pose"]
                    return

    server_task = asyncio.create_task(server.run(ready=ready))
    try:
        await asyncio.wait_for(client(), timeout=120.0)
    finally:
        server_task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await server_task
    return outcome


def test_scripted_client_reaches_goal():
    outcome = asyncio.run(_drive_to_goal())
    assert "goal_time_s" in outcome, f"goal not reached: {outcome}"
    print(f"\n[PASS] criterion-7 scripted WebSocket client reached the goal at "
          f"{outcome['goal_time_s']:.1f} s (sim time)")


def test_disconnect_reverts_to_stop():
    async def scenario() -> bool:
        session = TeleopSession(Scenario.bundled("winding_gap"), real_time_factor=100.0)
        server = TeleopServer(session, host="127.0.0.1", port=0)
        ready = asyncio.Event()
        task = asyncio.create_task(server.run(ready=ready))
        try:
            await ready.wait()
            async with websockets.connect(f"ws://127.0.0.1:{server._bound_port}") as ws:
                await ws.recv()  # hello
                await ws.send(json.dumps({"type": "command", "direction": "+x"}))
                while session.state.command != "+x":
                    await asyncio.sleep(0.01)
            for _ in range(100):
                if session.state.command == "stop":
                    break
                await asyncio.sleep(0.01)
            return session.state.command == "stop"
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    assert asyncio.run(scenario())
