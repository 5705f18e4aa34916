"""Generate the bundled hall_3ped reference scene.

A 20 x 20 m hall with four pillars, three walkers on circular loops, and a
sensor riding a figure-eight at ~0.5 m/s for 30 s (300 frames at 10 Hz).
Materials are tuned so walkers stand out against the room while wall texture
stays below the default foreground threshold at hall ranges; pillar edges do
cross it, which keeps the static-track path honestly exercised.

Run from the repository root:  python tools/make_reference_scene.py
"""

import json
import math
import pathlib

DURATION = 30.0
OUT = pathlib.Path(__file__).resolve().parents[1] / "src/dynoscan/scenes/hall_3ped.json"


def circle_waypoints(cx, cy, radius, speed, phase, clockwise, dt):
    # boxes ride 8 cm above the floor so only a sliver of each walker falls
    # inside the ground-plane exclusion band
    sign = -1.0 if clockwise else 1.0
    omega = sign * speed / radius
    n = int(round(DURATION / dt))
    points = []
    for k in range(n + 1):
        t = round(k * dt, 6)
        a = phase + omega * t
        points.append({"t": t, "pos": [round(cx + radius * math.cos(a), 4),
                                       round(cy + radius * math.sin(a), 4),
                                       -0.72]})
    return points


def figure_eight_waypoints(radius=1.2, dt=0.25):
    """Two tangent circles crossing at the origin; yaw follows the tangent,
    unwrapped so linear interpolation never jumps across the +-pi seam."""
    half = DURATION / 2.0
    points = []
    n = int(round(DURATION / dt))
    for k in range(n + 1):
        t = round(k * dt, 6)
        if t <= half:
            phi = 2.0 * math.pi * t / half
            x = radius - radius * math.cos(phi)
            y = radius * math.sin(phi)
            yaw = math.pi / 2.0 - phi
        else:
            psi = 2.0 * math.pi * (t - half) / half
            x = -radius + radius * math.cos(psi)
            y = radius * math.sin(psi)
            yaw = -1.5 * math.pi + psi
        points.append({"t": t, "pos": [round(x, 4), round(y, 4), 0.0],
                       "yaw": round(yaw, 6)})
    return points


def pillar(cx, cy, half=0.225):
    # uniform surface: the foreground then sees only the stable silhouette
    # strips, not a texture-flicker cloud that could fake a moving track
    return {"type": "box",
            "min": [round(cx - half, 3), round(cy - half, 3), -0.8],
            "max": [round(cx + half, 3), round(cy + half, 3), 3.2],
            "material": 900}


def main():
    statics = [
        {"type": "plane", "normal": [1, 0, 0], "offset": 10.0,
         "material": 600, "amplitude": 200, "scale": 1.0},
        {"type": "plane", "normal": [1, 0, 0], "offset": -10.0,
         "material": 600, "amplitude": 200, "scale": 1.0},
        {"type": "plane", "normal": [0, 1, 0], "offset": 10.0,
         "material": 600, "amplitude": 200, "scale": 1.0},
        {"type": "plane", "normal": [0, 1, 0], "offset": -10.0,
         "material": 600, "amplitude": 200, "scale": 1.0},
        {"type": "plane", "normal": [0, 0, 1], "offset": -0.8, "material": 350},
        {"type": "plane", "normal": [0, 0, 1], "offset": 3.2, "material": 250},
        pillar(6.5, 6.5), pillar(-6.5, 6.5), pillar(6.5, -6.5), pillar(-6.5, -6.5),
    ]
    walkers = [
        # (center, radius, speed m/s, phase, clockwise, waypoint step s)
        ((0.0, 6.2), 2.4, 0.8, 0.0, False, 0.5),
        ((-6.4, -2.6), 1.8, 1.1, 2.0 * math.pi / 3.0, True, 0.3),
        ((5.8, -3.5), 1.7, 1.4, 4.0 * math.pi / 3.0, False, 0.25),
    ]
    actors = [{"size": [0.6, 0.6, 1.7], "material": 3000,
               "waypoints": circle_waypoints(cx, cy, r, v, phase, cw, dt)}
              for (cx, cy), r, v, phase, cw, dt in walkers]
    doc = {
        "name": "hall_3ped",
        "duration": DURATION,
        "seed": 414,
        "sensor": {"w": 1024, "h": 64},
        "noise": {"range_sigma": 0.01, "intensity_sigma": 0.5},
        "statics": statics,
        "actors": actors,
        "ego": figure_eight_waypoints(),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
