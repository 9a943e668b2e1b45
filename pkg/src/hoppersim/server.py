"""Telemetry and command server for the ground station.

JSON text frames over WebSocket.  Envelope:

    {"type": "telemetry" | "cmd" | "ack" | "err", "seq": <int>, "payload": {...}}

On connect the server answers with an ``ack`` whose payload carries the
granted role, the FSM transition table and the verb gating, so the UI
derives its command gating from the same table as the server.  Any number
of observers may watch; exactly one commander may send commands.  The
server runs an asyncio loop in a background thread and talks to the
simulation loop only through its inbound queue and the telemetry feed.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading

import websockets

from .mission_fsm import transition_table_export
from .simulation import CommandMsg

COMMAND_VERBS = ("offboard", "arm", "takeoff", "track", "land", "abort", "kill", "heartbeat")


class TelemetryServer:
    """Bridges WebSocket sessions to the simulation's queues."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8765):
        self.host = host
        self.port = port
        self.inbox: "queue.Queue[CommandMsg]" = queue.Queue()
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._started = threading.Event()
        self._observers: set = set()
        self._commander = None
        self._seq = 0
        self._stop: asyncio.Future | None = None

    # ------------------------------------------------------------- lifecycle

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run_loop, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=5.0):
            raise RuntimeError("telemetry server failed to start")

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set_result, None)
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _run_loop(self) -> None:
        asyncio.run(self._serve())

    async def _serve(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = self._loop.create_future()
        async with websockets.serve(self._session, self.host, self.port):
            self._started.set()
            await self._stop

    # ------------------------------------------------------------- frames

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _frame(self, ftype: str, payload: dict) -> str:
        return json.dumps({"type": ftype, "seq": self._next_seq(), "payload": payload},
                          separators=(",", ":"))

    def publish(self, record) -> None:
        """Broadcast one telemetry record to every session (thread-safe)."""
        if self._loop is None:
            return
        frame = self._frame("telemetry", record.payload())
        self._loop.call_soon_threadsafe(self._broadcast, frame)

    def _broadcast(self, frame: str) -> None:
        for ws in list(self._observers):
            try:
                asyncio.ensure_future(ws.send(frame))
            except Exception:
                self._observers.discard(ws)

    # ------------------------------------------------------------- sessions

    @staticmethod
    def _requested_role(ws) -> str:
        try:
            path = ws.request.path
        except AttributeError:
            return "commander"
        if "role=observer" in path:
            return "observer"
        return "commander"

    async def _session(self, ws) -> None:
        role = self._requested_role(ws)
        is_commander = False
        if role == "commander":
            if self._commander is not None:
                await ws.send(self._frame("err", {"reason": "commander role already taken"}))
                await ws.close(code=1008, reason="commander taken")
                return
            self._commander = ws
            is_commander = True
            self.inbox.put(CommandMsg(kind="commander_connected"))
        hello = {
            "role": role,
            "verbs": list(COMMAND_VERBS),
            "fsm": transition_table_export(),
        }
        await ws.send(self._frame("ack", hello))
        self._observers.add(ws)
        try:
            async for raw in ws:
                await self._on_message(ws, raw, is_commander)
        except websockets.ConnectionClosed:
            pass
        finally:
            self._observers.discard(ws)
            if is_commander:
                self._commander = None
                self.inbox.put(CommandMsg(kind="commander_disconnected"))

    async def _on_message(self, ws, raw, is_commander: bool) -> None:
        try:
            msg = json.loads(raw)
            ftype = msg["type"]
            payload = msg.get("payload", {})
            cmd_seq = int(msg.get("seq", 0))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            await ws.send(self._frame("err", {"reason": "malformed frame"}))
            return
        if ftype != "cmd":
            await ws.send(self._frame("err", {"reason": f"unsupported frame type {ftype!r}",
                                              "cmd_seq": cmd_seq}))
            return
        if not is_commander:
            await ws.send(self._frame("err", {"reason": "observer sessions cannot command",
                                              "cmd_seq": cmd_seq}))
            return
        verb = str(payload.get("cmd", ""))
        if verb not in COMMAND_VERBS:
            await ws.send(self._frame("err", {"reason": f"unknown verb {verb!r}",
                                              "cmd_seq": cmd_seq}))
            return
        raw_cmd = verb
        if verb == "takeoff":
            if "alt" not in payload:
                await ws.send(self._frame("err", {"reason": "takeoff requires 'alt'",
                                                  "cmd_seq": cmd_seq}))
                return
            raw_cmd = f"takeoff {payload['alt']}"

        loop = asyncio.get_running_loop()
        fut: asyncio.Future = loop.create_future()

        def on_result(ok: bool, detail: str) -> None:
            loop.call_soon_threadsafe(self._resolve, fut, ok, detail)

        self.inbox.put(CommandMsg(kind="command", raw=raw_cmd, on_result=on_result))
        try:
            ok, detail = await asyncio.wait_for(fut, timeout=5.0)
        except asyncio.TimeoutError:
            await ws.send(self._frame("err", {"reason": "command timed out", "cmd_seq": cmd_seq}))
            return
        if ok:
            await ws.send(self._frame("ack", {"cmd": verb, "cmd_seq": cmd_seq, "detail": detail}))
        else:
            await ws.send(self._frame("err", {"cmd": verb, "cmd_seq": cmd_seq, "reason": detail}))

    @staticmethod
    def _resolve(fut: asyncio.Future, ok: bool, detail: str) -> None:
        if not fut.done():
            fut.set_result((ok, detail))
