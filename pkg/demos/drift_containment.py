"""
How much odometry drift can the detector absorb?
================================================

All movement decisions compare positions inside a short sliding window, so
pose error only matters over the window span, not over the whole recording.
This demo injects growing random-walk drift into otherwise exact poses and
watches precision and recall respond.
"""

import math

import numpy as np

from dynoscan.config import PipelineConfig
from dynoscan.egomotion import world_to_relative
from dynoscan.evaluation import evaluate_labels, wilcoxon_signed_rank
from dynoscan.frames import SensorModel
from dynoscan.pipeline import run
from dynoscan.simulator import Actor, DriftParams, Plane, Scene, inject_drift, simulate

DURATION = 4.0
DRIFT_LEVELS = [0.0, 0.1, 0.2, 0.5, 1.0]   # rotation sigma, degrees per frame

sensor = SensorModel(w=64, h=16, beta_up=np.pi / 4, beta_fov=np.pi / 2,
                     rate_hz=10.0)

walls = [Plane(np.array(n, dtype=float), off, 600.0, amplitude=150.0, salt=i)
         for i, (n, off) in enumerate([((1.0, 0, 0), 8.0), ((1.0, 0, 0), -8.0),
                                       ((0, 1.0, 0), 8.0), ((0, 1.0, 0), -8.0)])]
statics = walls + [Plane(np.array([0.0, 0.0, 1.0]), -0.8, 350.0, salt=4),
                   Plane(np.array([0.0, 0.0, 1.0]), 3.0, 250.0, salt=5)]
walker = Actor(size=np.array([0.6, 0.6, 1.7]), material=3000.0,
               waypoints=[(0.0, np.array([4.0, -3.0, -0.72])),
                          (DURATION, np.array([4.0, 3.0, -0.72]))])
ego = [(0.0, np.zeros(3), 0.0), (DURATION, np.zeros(3), 0.0)]

sim = simulate(Scene(sensor=sensor, statics=statics, actors=[walker], ego=ego,
                     duration=DURATION, seed=7))
exact = world_to_relative(sim.world)
config = PipelineConfig(width=sensor.w, height=sensor.h, beta_up=sensor.beta_up,
                        beta_fov=sensor.beta_fov, rate_hz=sensor.rate_hz)

print(f"{len(sim.frames)} frames; sweeping per-frame drift levels\n")
print("sigma_r [deg/frame]  sigma_t [m/frame]  precision  recall     f1")

f1_series = {}
for sigma_deg in DRIFT_LEVELS:
    params = DriftParams(sigma_t=sigma_deg / 10.0, sigma_r=math.radians(sigma_deg),
                         seed=42)
    poses = inject_drift(exact, params)
    results = list(run(sim.frames, config, odometry_in=poses))
    report = evaluate_labels([r.label for r in results], sim.labels)
    m = report.micro
    print(f"{sigma_deg:19.1f}  {params.sigma_t:17.2f}  {m.precision:9.3f}"
          f"  {m.recall:6.3f}  {m.f1:5.3f}")
    f1_series[sigma_deg] = np.array([f.metrics.f1 for f in report.frames
                                     if not f.counts.empty])

# paired per-frame comparison: is the heaviest drift measurably worse?
clean, worst = f1_series[0.0], f1_series[DRIFT_LEVELS[-1]]
n = min(len(clean), len(worst))
test = wilcoxon_signed_rank(clean[:n], worst[:n])
print(f"\npaired f1, clean vs {DRIFT_LEVELS[-1]:.1f} deg/frame: "
      f"W={test.statistic:.1f}, p={test.p_value:.2e} ({test.method})")
if test.p_value > 0.05:
    print("no significant degradation: the window kept the drift contained")
else:
    print("significant degradation: this drift level exceeds the window's slack")
