/**
 * End-to-end parity: labels saved through the session/API code path must be
 * byte-identical to regions grown by the library for the same seeds, and
 * must survive a server restart.
 *
 * Needs the Python package and its `dynoscan` entry point installed; the
 * suite skips itself otherwise.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";

const W = 64;
const H = 16;
const FRAMES = 20;

// one scripted (frame, u, v, eps) triple per frame
const TRIPLES = Array.from({ length: FRAMES }, (_, k) => ({
  frame: k,
  u: (7 * k + 3) % W,
  v: 4 + (k % 9),
  eps: [0.25, 0.4, 0.6, 0.8][k % 4],
}));

const SENSOR_FLAGS = ["--set", `sensor.width=${W}`, "--set", `sensor.height=${H}`];

// closed textured room with one parked box: every pixel is occupied
const SCENE = {
  name: "parity_room",
  duration: 2.0,
  seed: 7,
  sensor: { w: W, h: H },
  noise: { range_sigma: 0.01, intensity_sigma: 0.5 },
  statics: [
    { type: "plane", normal: [1, 0, 0], offset: 8.0, material: 600, amplitude: 150, scale: 1.0, salt: 0 },
    { type: "plane", normal: [1, 0, 0], offset: -8.0, material: 600, amplitude: 150, scale: 1.0, salt: 1 },
    { type: "plane", normal: [0, 1, 0], offset: 8.0, material: 600, amplitude: 150, scale: 1.0, salt: 2 },
    { type: "plane", normal: [0, 1, 0], offset: -8.0, material: 600, amplitude: 150, scale: 1.0, salt: 3 },
    { type: "plane", normal: [0, 0, 1], offset: 2.0, material: 350, amplitude: 80, scale: 1.0, salt: 4 },
    { type: "plane", normal: [0, 0, 1], offset: -2.0, material: 250, amplitude: 80, scale: 1.0, salt: 5 },
  ],
  actors: [
    {
      size: [0.8, 0.8, 1.7],
      material: 3000,
      waypoints: [
        { t: 0.0, pos: [4.0, 0.0, -0.72] },
        { t: 2.0, pos: [4.0, 0.0, -0.72] },
      ],
    },
  ],
  ego: [
    { t: 0.0, pos: [0, 0, 0], yaw: 0.0 },
    { t: 2.0, pos: [0, 0, 0], yaw: 0.0 },
  ],
};

// grows the same triples directly with the library and writes the expected file
const ORACLE = `
import sys
from dynoscan.config import PipelineConfig
from dynoscan.frames import FrameFile, project
from dynoscan.labels import write_labels_jsonl
from dynoscan.segmentation import estimate_ground_plane, region_grow

frames_path, out_path = sys.argv[1], sys.argv[2]
triples = [tuple(map(float, row.split(","))) for row in sys.argv[3].split(";")]
cfg = PipelineConfig(width=${W}, height=${H})
sensor = cfg.sensor()
source = FrameFile(frames_path)
labels = []
for frame_index, u, v, eps in triples:
    frame = source.frame(int(frame_index))
    image = project(frame, sensor)
    plane = estimate_ground_plane(frame, cfg.ground_iterations,
                                  cfg.plane_tolerance, cfg.ground_seed)
    grown = region_grow(image, [(int(u), int(v))], sensor, plane, eps,
                        cfg.grow_max_points)
    labels.append(grown.label)
write_labels_jsonl(labels, out_path)
`;

const available = spawnSync("python3", ["-c", "import dynoscan"]).status === 0;

let work: string;
let framesPath: string;
let uiLabelsPath: string;
let expectedPath: string;
let server: ChildProcess | undefined;

function run(cmd: string, args: string[]): void {
  const out = spawnSync(cmd, args, { encoding: "utf8" });
  if (out.status !== 0) {
    throw new Error(`${cmd} ${args.join(" ")} failed:\n${out.stdout}${out.stderr}`);
  }
}

/** Start `dynoscan serve` on an ephemeral port and wait for the banner. */
function startServer(): Promise<{ child: ChildProcess; base: string }> {
  const child = spawn(
    "dynoscan",
    ["serve", "--frames", framesPath, "--labels", uiLabelsPath,
     "--port", "0", ...SENSOR_FLAGS],
    { env: { ...process.env, PYTHONUNBUFFERED: "1" } },
  );
  return new Promise((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => {
      child.kill();
      reject(new Error(`server did not come up:\n${buffer}`));
    }, 30_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const m = buffer.match(/http:\/\/127\.0\.0\.1:(\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve({ child, base: `http://127.0.0.1:${m[1]}` });
      }
    });
    child.stderr!.on("data", (chunk: Buffer) => (buffer += chunk.toString()));
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}):\n${buffer}`));
    });
  });
}

function stopServer(child: ChildProcess): Promise<void> {
  return new Promise((resolve) => {
    child.removeAllListeners("exit");
    child.once("exit", () => resolve());
    child.kill();
  });
}

describe.skipIf(!available)("annotator parity with the batch pipeline", () => {
  beforeAll(() => {
    work = fs.mkdtempSync(path.join(os.tmpdir(), "annotator-parity-"));
    framesPath = path.join(work, "frames.dynf");
    uiLabelsPath = path.join(work, "ui.jsonl");
    expectedPath = path.join(work, "expected.jsonl");
    const scenePath = path.join(work, "scene.json");
    fs.writeFileSync(scenePath, JSON.stringify(SCENE));
    run("dynoscan", ["simulate", "--scene", scenePath, "--frames-out", framesPath]);
    const tripleArg = TRIPLES.map((t) => `${t.frame},${t.u},${t.v},${t.eps}`).join(";");
    run("python3", ["-c", ORACLE, framesPath, expectedPath, tripleArg]);
  }, 120_000);

  afterAll(async () => {
    // signal-killed children have exitCode null but signalCode set
    if (server && server.exitCode === null && server.signalCode === null) {
      await stopServer(server);
    }
    fs.rmSync(work, { recursive: true, force: true });
  }, 30_000);

  it("saves byte-identical labels and round-trips a restart", async () => {
    const first = await startServer();
    server = first.child;
    const drafts = new Map<number, number[]>();
    try {
      const client = new Client(first.base);
      const session = new AnnotationSession(client, await client.meta());
      expect(session.frameCount).toBe(FRAMES);
      for (const triple of TRIPLES) {
        session.index = triple.frame;
        session.growEps = triple.eps;
        await session.click(triple.u, triple.v);
        await session.save();
        drafts.set(
          triple.frame,
          [...(await session.draft(triple.frame))].sort((a, b) => a - b),
        );
      }
    } finally {
      await stopServer(first.child);
    }

    const saved = fs.readFileSync(uiLabelsPath);
    const expected = fs.readFileSync(expectedPath);
    expect(saved.equals(expected)).toBe(true);
    expect(drafts.size).toBe(FRAMES);

    // a fresh server over the same label file must serve the same labels
    const second = await startServer();
    server = second.child;
    try {
      const client = new Client(second.base);
      for (const triple of TRIPLES) {
        const line = await client.label(triple.frame);
        expect(line.idx).toEqual(drafts.get(triple.frame));
      }
    } finally {
      await stopServer(second.child);
    }
  }, 120_000);
});
