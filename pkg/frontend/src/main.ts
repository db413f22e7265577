/**
 * Browser wiring: job console form, playback canvas, stats plot.
 *
 * Flow: create a job over REST, poll it to ready while showing the server
 * specs and processing time, start the stream, register on the WebSocket,
 * and hand every message to the PlayerSession. A requestAnimationFrame loop
 * drives the render tick and redraws the stats plot.
 */

import { JobApi, JobRequest, JobView, describeError } from "./api.js";
import { PlayerSession, RenderSink, registrationMessage } from "./player.js";
import { PlaybackStats } from "./stats.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

class CanvasSink implements RenderSink {
  private ctx: CanvasRenderingContext2D;
  private image: ImageData | null = null;

  constructor(private canvas: HTMLCanvasElement, private status: HTMLElement) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  paintFrame(width: number, height: number, luma: Uint8Array): void {
    if (this.canvas.width !== width || this.canvas.height !== height) {
      this.canvas.width = width;
      this.canvas.height = height;
      this.image = null;
    }
    if (this.image === null) {
      this.image = this.ctx.createImageData(width, height);
    }
    const rgba = this.image.data;
    for (let i = 0; i < luma.length; i++) {
      const v = luma[i];
      const at = i * 4;
      rgba[at] = v;
      rgba[at + 1] = v;
      rgba[at + 2] = v;
      rgba[at + 3] = 255;
    }
    this.ctx.putImageData(this.image, 0, 0);
  }

  streamEnded(): void {
    this.status.textContent = "stream ended";
  }
}

function drawStats(canvas: HTMLCanvasElement, stats: PlaybackStats): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null || stats.history.length === 0) {
    return;
  }
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const history = stats.history;
  const tMax = Math.max(history[history.length - 1].atMs, 1);
  const yMax = Math.max(stats.receivedMs, 1);
  const seriesList: Array<{ color: string; value: (i: number) => number }> = [
    { color: "#2b8a3e", value: (i) => history[i].playedMs },
    { color: "#1971c2", value: (i) => history[i].bufferedMs },
  ];
  for (const series of seriesList) {
    ctx.strokeStyle = series.color;
    ctx.beginPath();
    for (let i = 0; i < history.length; i++) {
      const x = (history[i].atMs / tMax) * (width - 2) + 1;
      const y = height - 1 - (series.value(i) / yMax) * (height - 2);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    }
    ctx.stroke();
  }
}

function renderJob(view: JobView, target: HTMLElement): void {
  const specs = view.stats.server_specs;
  const lines = [`status: ${view.status}`];
  if (specs !== undefined) {
    lines.push(`server: ${specs.cores} cores, ${specs.mem_mb} MB (v${specs.version})`);
    lines.push(`cpu: ${specs.cpu_model}`);
  }
  if (view.stats.processing_ms !== undefined) {
    lines.push(`processing time: ${view.stats.processing_ms} ms`);
  }
  if (view.stats.segments_processed !== undefined) {
    lines.push(`segments processed: ${view.stats.segments_processed}`);
  }
  if (view.stats.intervals_found !== undefined) {
    lines.push(`ad intervals: ${view.stats.intervals_found}`);
  }
  if (view.error !== undefined) {
    lines.push(`error: ${view.error}`);
  }
  target.textContent = lines.join("\n");
}

function startPlayback(wsUrl: string, jobId: string, status: HTMLElement): void {
  const sink = new CanvasSink(el<HTMLCanvasElement>("screen"), status);
  const session = new PlayerSession(sink);
  const statsCanvas = el<HTMLCanvasElement>("stats-plot");
  const counters = el<HTMLElement>("counters");
  const socket = new WebSocket(wsUrl);
  socket.binaryType = "arraybuffer";
  socket.onopen = () => {
    socket.send(registrationMessage(`web-${Date.now()}`, jobId));
    status.textContent = "registered, waiting for media";
  };
  socket.onmessage = (event: MessageEvent) => {
    if (typeof event.data === "string") {
      session.handleMessage(event.data);
    } else {
      session.handleMessage(new Uint8Array(event.data as ArrayBuffer));
    }
  };
  socket.onerror = () => {
    status.textContent = "websocket error";
  };

  const t0 = performance.now();
  let last = t0;
  const tick = (now: number) => {
    session.advance(now - last);
    last = now;
    session.stats.sample(now - t0);
    drawStats(statsCanvas, session.stats);
    counters.textContent =
      `painted ${session.framesPainted} frames | ` +
      `played ${(session.stats.playedMs / 1000).toFixed(1)} s | ` +
      `buffered ${(session.stats.bufferedMs / 1000).toFixed(1)} s | ` +
      `packets ${session.stats.packets} | ` +
      `malformed ${session.stats.malformedPackets} | lost ${session.stats.lostMpus}`;
    if (!session.drained || socket.readyState !== WebSocket.CLOSED) {
      requestAnimationFrame(tick);
    }
  };
  requestAnimationFrame(tick);
}

function main(): void {
  const status = el<HTMLElement>("status");
  const jobPanel = el<HTMLElement>("job-panel");
  const form = el<HTMLFormElement>("job-form");
  const startButton = el<HTMLButtonElement>("start-stream");
  let api = new JobApi("");
  let jobId: string | null = null;

  form.onsubmit = async (event) => {
    event.preventDefault();
    api = new JobApi(el<HTMLInputElement>("api-base").value);
    let policy: Record<string, string>;
    try {
      policy = JSON.parse(el<HTMLTextAreaElement>("policy").value);
    } catch (err) {
      status.textContent = `bad policy JSON: ${err}`;
      return;
    }
    const request: JobRequest = {
      mode: el<HTMLSelectElement>("mode").value as JobRequest["mode"],
      source_uri: el<HTMLInputElement>("source-uri").value,
      engine: el<HTMLSelectElement>("engine").value as JobRequest["engine"],
      target_policy: policy,
      speed: Number(el<HTMLInputElement>("speed").value) || 1.0,
    };
    try {
      const created = await api.createJob(request);
      jobId = created.job_id;
      status.textContent = `job ${jobId} created`;
      const ready = await api.waitReady(jobId);
      renderJob(ready, jobPanel);
      status.textContent = `job ${jobId}: ${ready.status}`;
      startButton.disabled = false;
    } catch (err) {
      status.textContent = describeError(err);
    }
  };

  startButton.onclick = async () => {
    if (jobId === null) {
      return;
    }
    try {
      const { ws_url } = await api.startStream(jobId);
      startPlayback(ws_url, jobId, status);
    } catch (err) {
      status.textContent = describeError(err);
    }
  };
}

main();
