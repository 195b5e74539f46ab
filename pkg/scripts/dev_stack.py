#!/usr/bin/env python3
"""Launch a demo stack: registry, one engine per dialect, and the gateway.

Prints one JSON line with the service URLs once everything is up, then
blocks until stdin closes or SIGTERM arrives.  Used by the web console's
end-to-end tests and handy for manual poking.
"""
from __future__ import annotations

import argparse
import json
import signal
import socket
import sys
import tempfile
import threading
import time

import httpx
import uvicorn

from rulemesh.engine import RuleEngine
from rulemesh.gateway import create_gateway_app
from rulemesh.middleware import create_app
from rulemesh.registry import RegistryStore, create_registry_app

PERSON_ADULT_DRL = (
    "declare Person\n name: string\n age: integer\nend\n"
    "declare Adult\n name: string\nend\n"
)
PERSON_ADULT_CLIPS = (
    "(deftemplate Person (slot name (type STRING)) (slot age (type INTEGER)))\n"
    "(deftemplate Adult (slot name (type STRING)))\n"
)


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def serve(app, port: int) -> uvicorn.Server:
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError(f"server on port {port} did not start")
        time.sleep(0.01)
    return server


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--assets", default=None, help="serve the built console from here")
    parser.add_argument("--with-demo-ks", action="store_true",
                        help="create a 'demo' knowledge set on both engines")
    args = parser.parse_args()

    data_dir = tempfile.mkdtemp(prefix="rulemesh-registry-")
    registry_port = free_port()
    registry_url = f"http://127.0.0.1:{registry_port}"
    servers = [serve(create_registry_app(RegistryStore(data_dir)), registry_port)]

    engines = {}
    for title, dialect in [("drl.engine", "drl-mini"), ("clips.engine", "clips-mini")]:
        port = free_port()
        url = f"http://127.0.0.1:{port}"
        app = create_app(
            RuleEngine(dialect),
            title=title,
            registry_url=registry_url,
            replica_group="demo-group",
            advertise_url=url,
        )
        servers.append(serve(app, port))
        engines[title] = url

    gateway_port = free_port()
    gateway_url = f"http://127.0.0.1:{gateway_port}"
    servers.append(serve(create_gateway_app(registry_url, args.assets), gateway_port))

    if args.with_demo_ks:
        declarations = {
            "drl.engine": PERSON_ADULT_DRL,
            "clips.engine": PERSON_ADULT_CLIPS,
        }
        for title, url in engines.items():
            httpx.put(
                f"{url}/management/knowledge-sets",
                json={"knowledge_sets": [
                    {"name": "demo", "declarations": declarations[title]}
                ]},
            ).raise_for_status()

    print(json.dumps({"registry": registry_url, "gateway": gateway_url,
                      "engines": engines}), flush=True)

    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    reader = threading.Thread(target=lambda: (sys.stdin.read(), stop.set()), daemon=True)
    reader.start()
    stop.wait()
    for server in reversed(servers):
        server.should_exit = True


if __name__ == "__main__":
    main()
