"""
A scripted annotation session
=============================

Starts the label server on a freshly simulated sequence and walks through the
calls a labeling frontend makes: read metadata, click a pixel to grow a
region, save the label, then restart the server and confirm the label file
survives. Everything here also works from a browser against `dynoscan serve`.
"""

import json
import urllib.request

import numpy as np

from dynoscan.config import PipelineConfig
from dynoscan.frames import SensorModel
from dynoscan.simulator import Actor, Box, Plane, Scene, simulate
from dynoscan.server import AnnotationServer

LABELS_PATH = "demo_labels.jsonl"

sensor = SensorModel(w=64, h=16, beta_up=np.pi / 4, beta_fov=np.pi / 2,
                     rate_hz=10.0)
statics = [
    Box(np.array([8.0, -8.0, -0.8]), np.array([8.3, 8.0, 3.0]), 600.0, amplitude=150.0),
    Box(np.array([-8.3, -8.0, -0.8]), np.array([-8.0, 8.0, 3.0]), 600.0, amplitude=150.0),
    Box(np.array([-8.0, 8.0, -0.8]), np.array([8.0, 8.3, 3.0]), 600.0, amplitude=150.0),
    Box(np.array([-8.0, -8.3, -0.8]), np.array([8.0, -8.0, 3.0]), 600.0, amplitude=150.0),
    Plane(np.array([0.0, 0.0, 1.0]), -0.8, 350.0),
]
parked = Actor(size=np.array([0.6, 0.6, 1.7]), material=3000.0,
               waypoints=[(0.0, np.array([4.0, 0.0, -0.8])),
                          (1.0, np.array([4.0, 0.0, -0.8]))])
ego = [(0.0, np.zeros(3), 0.0), (1.0, np.zeros(3), 0.0)]
sim = simulate(Scene(sensor=sensor, statics=statics, actors=[parked], ego=ego,
                     duration=1.0, seed=21))

config = PipelineConfig(width=sensor.w, height=sensor.h, beta_up=sensor.beta_up,
                        beta_fov=sensor.beta_fov, rate_hz=sensor.rate_hz)


def call(base, path, method="GET", body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method)
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


server = AnnotationServer(sim.frames, config, LABELS_PATH)
server.start()
base = f"http://127.0.0.1:{server.port}"
print(f"server on {base}, labels in {LABELS_PATH}")

meta = call(base, "/meta")
print(f"meta: {meta['frames']} frames, "
      f"{meta['sensor']['w']}x{meta['sensor']['h']} grid")

# "click" the parked box: pixel (32, 8) looks straight ahead at its center
grown = call(base, "/frames/0/grow", "POST", {"u": 32, "v": 8, "eps": 0.4})
print(f"grow from (32, 8): {len(grown['indices'])} pixels, "
      f"truncated={grown['truncated']}")

saved = call(base, "/labels/0", "PUT",
             {"t": sim.frames[0].timestamp, "idx": grown["indices"]})
print(f"saved label for frame 0: {saved}")
server.shutdown()

# a new server over the same file re-binds labels by timestamp
server = AnnotationServer(sim.frames, config, LABELS_PATH)
server.start()
base = f"http://127.0.0.1:{server.port}"
label = call(base, "/labels/0")
print(f"after restart, frame 0 still has {len(label['idx'])} labeled pixels")
server.shutdown()

with open(LABELS_PATH) as fh:
    print(f"label file line: {fh.readline().strip()[:72]} ...")
