"""Scripted WebSocket probe for a running delivery server.

Creates a job against the REST API (or attaches to an existing one with
--job-id), starts the stream, registers over WebSocket, drains the session,
and reports packet counts, reassembly losses, and pacing statistics.

Usage:
  python3 -m adsplice serve &            # in one shell
  python3 scripts/ws_probe.py --api http://127.0.0.1:8080 \
      --source /path/to/corpus --mode vod
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import httpx
from websockets.asyncio.client import connect

from adsplice.admeta import AdPolicy
from adsplice.corpus import POLICY_NAME
from adsplice.mmtp import PT_METADATA, Depacketizer, parse_one


def create_job(api: str, source: Path, mode: str, engine: str, speed: float) -> str:
    body = {
        "mode": mode,
        "source_uri": str(source),
        "engine": engine,
        "target_policy": AdPolicy.load(source / POLICY_NAME).targets,
    }
    if mode == "live_sim":
        body["speed"] = speed
    r = httpx.post(f"{api}/jobs", json=body)
    r.raise_for_status()
    return r.json()["job_id"]


def wait_ready(api: str, job_id: str, timeout: float = 600.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = httpx.get(f"{api}/jobs/{job_id}").json()
        if job["status"] in ("ready", "streaming"):
            return job
        if job["status"] == "failed":
            raise RuntimeError(f"job failed: {job.get('error')}")
        time.sleep(0.2)
    raise TimeoutError(f"job {job_id} not ready after {timeout}s")


async def drain(ws_url: str, job_id: str) -> dict:
    depkt = Depacketizer()
    stats = {"packets": 0, "bytes": 0, "mpus": 0, "metadata_packets": 0}
    t0 = time.perf_counter()
    first = last = None
    async with connect(ws_url, max_size=None) as ws:
        await ws.send(json.dumps(
            {"type": "register", "client_id": "probe", "job_id": job_id}
        ))
        ack = json.loads(await ws.recv())
        if ack != {"type": "ack"}:
            raise RuntimeError(f"registration rejected: {ack}")
        while True:
            raw = await ws.recv()
            now = time.perf_counter() - t0
            if not isinstance(raw, (bytes, bytearray)):
                msg = json.loads(raw)
                if msg.get("type") == "end":
                    break
                continue
            packet = parse_one(bytes(raw))
            stats["packets"] += 1
            stats["bytes"] += len(raw)
            if packet.payload_type == PT_METADATA:
                stats["metadata_packets"] += 1
                continue
            if first is None:
                first = now
            last = now
            stats["mpus"] += len(depkt.push(packet))
    depkt.close()
    stats["losses"] = len(depkt.losses)
    stats["first_media_s"] = round(first or 0.0, 3)
    stats["last_media_s"] = round(last or 0.0, 3)
    return stats


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--api", default="http://127.0.0.1:8080")
    parser.add_argument("--source", type=Path,
                        help="corpus directory for a new job")
    parser.add_argument("--job-id", help="attach to an existing job instead")
    parser.add_argument("--mode", choices=("vod", "live_sim"), default="vod")
    parser.add_argument("--engine", default="xcorr")
    parser.add_argument("--speed", type=float, default=1.0)
    args = parser.parse_args(argv)

    if not args.job_id and not args.source:
        parser.error("either --source (new job) or --job-id is required")

    job_id = args.job_id or create_job(
        args.api, args.source, args.mode, args.engine, args.speed
    )
    print(f"job: {job_id}")
    job = wait_ready(args.api, job_id)
    print(f"status: {job['status']}; stats: {job['stats']}")

    ws_url = httpx.post(f"{args.api}/jobs/{job_id}/start-stream").json()["ws_url"]
    print(f"streaming from {ws_url}")
    stats = asyncio.run(drain(ws_url, job_id))
    print(json.dumps(stats, indent=2))
    if stats["losses"]:
        print("FAIL: reassembly losses", file=sys.stderr)
        return 1
    print("gap-free: all MPUs reconstructed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
