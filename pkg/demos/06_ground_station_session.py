"""Operating a live simulation over the wire protocol.

Starts the telemetry server and a real-time simulation in this process,
then connects a WebSocket commander that walks the vehicle through
sync, arm and takeoff while printing the telemetry it gets back, and
finally aborts the flight.  The same protocol drives the browser ground
station; any number of extra observers could watch the same frames.
"""

import asyncio
import json
import threading

import numpy as np

from hoppersim import SimConfig
from hoppersim.server import TelemetryServer
from hoppersim.simulation import Simulation

PORT = 8765

server = TelemetryServer(port=PORT)
server.start()
config = SimConfig(duration=30.0)
sim = Simulation(config, inbox=server.inbox, on_telemetry=server.publish,
                 pace_realtime=True)
sim_thread = threading.Thread(target=sim.run, daemon=True)
sim_thread.start()


async def operator():
    import websockets

    async with websockets.connect(f"ws://127.0.0.1:{PORT}/") as ws:
        hello = json.loads(await ws.recv())
        print(f"connected as {hello['payload']['role']}; "
              f"verbs: {', '.join(hello['payload']['verbs'])}")

        seq = 0

        async def command(verb, **payload):
            nonlocal seq
            seq += 1
            payload["cmd"] = verb
            await ws.send(json.dumps({"type": "cmd", "seq": seq, "payload": payload}))
            while True:
                msg = json.loads(await ws.recv())
                if msg["type"] in ("ack", "err") and msg["payload"].get("cmd_seq") == seq:
                    print(f"  {verb}: {msg['type']} ({msg['payload'].get('detail') or msg['payload'].get('reason')})")
                    return

        await command("offboard")
        await asyncio.sleep(0.3)
        await command("arm")
        await asyncio.sleep(0.3)
        await command("takeoff", alt=1.0)

        printed = 0
        while printed < 12:
            msg = json.loads(await ws.recv())
            if msg["type"] != "telemetry":
                continue
            pay = msg["payload"]
            alt = -pay["p"][2]
            print(f"  t={pay['t']:6.2f}  state={pay['fsm_state']:9s}  alt={alt:5.2f} m  "
                  f"thrust={pay['inputs']['thrust']:5.2f} N")
            printed += 1
            await ws.send(json.dumps({"type": "cmd", "seq": 1000 + printed,
                                      "payload": {"cmd": "heartbeat"}}))
            await asyncio.sleep(0.4)

        await command("abort")


asyncio.run(operator())
sim_thread.join(timeout=60.0)
server.stop()
print(f"mission over: {sim.fsm_state.value}")
