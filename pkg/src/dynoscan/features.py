"""Oriented corner features and binary descriptors on intensity images.

A compact ORB-style front end: segment-test corners on the 8-bit normalized
image, orientation from the patch intensity centroid, and a 256-bit descriptor
of rotation-steered pixel-pair comparisons.  Azimuth wraps everywhere; the
vertical axis clamps.  Everything is deterministic: the comparison pattern is
generated once from a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InsufficientFeaturesError, InsufficientMatchesError
from .frames import NO_POINT, IntensityImage, normalize_u8

FAST_THRESHOLD = 20          # on the 0..255 normalized scale
FAST_ARC = 9                 # contiguous ring pixels required
PATCH_RADIUS = 7             # orientation / descriptor patch
DESCRIPTOR_BITS = 256
DESCRIPTOR_SEED = 7          # fixes the comparison pattern for all time
DEFAULT_MAX_FEATURES = 500
TILE = 32                    # bucketing tile edge, pixels
LOWE_RATIO = 0.8
MIN_CORNERS = 8
MIN_PAIRS = 4

# radius-3 ring, clockwise from 12 o'clock: (du, dv) offsets
RING = ((0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
        (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3))

# arc_table[p] is true when 16-bit ring pattern p contains a circular run of
# FAST_ARC set bits; built by AND-ing the doubled pattern with shifts of itself
_p = np.arange(1 << 16, dtype=np.uint32)
_x = _p | (_p << np.uint32(16))
for _ in range(FAST_ARC - 1):
    _x = _x & (_x >> np.uint32(1))
ARC_TABLE = _x != 0
del _p, _x


def _pattern() -> tuple[np.ndarray, np.ndarray]:
    """The 256 fixed comparison point pairs, offsets within the patch."""
    rng = np.random.default_rng(DESCRIPTOR_SEED)
    pts = rng.normal(0.0, PATCH_RADIUS / 2.0, size=(DESCRIPTOR_BITS, 4))
    pts = np.clip(np.round(pts), -PATCH_RADIUS, PATCH_RADIUS).astype(np.int64)
    return pts[:, :2], pts[:, 2:]


PATTERN_A, PATTERN_B = _pattern()

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@dataclass
class Feature:
    u: int
    v: int
    score: float
    orientation: float            # radians
    descriptor: np.ndarray        # (32,) uint8, 256 bits


@dataclass
class MatchSet:
    pairs: list[tuple[Feature, Feature]]    # (previous, current)
    x_prev: np.ndarray                      # (k, 3) lifted 3D points, frame i-1
    y_curr: np.ndarray                      # (k, 3) lifted 3D points, frame i

    def __len__(self) -> int:
        return len(self.pairs)


def _ring_stack(img: np.ndarray) -> np.ndarray:
    """(16, h, w) ring samples; horizontal wrap, vertical rows near the border
    are garbage and must be masked by the caller."""
    out = np.empty((len(RING),) + img.shape, dtype=np.int16)
    for k, (du, dv) in enumerate(RING):
        out[k] = np.roll(np.roll(img, -dv, axis=0), -du, axis=1)
    return out


def corner_response(img_u8: np.ndarray, occupied: np.ndarray,
                    threshold: int = FAST_THRESHOLD) -> np.ndarray:
    """Segment-test corner score per pixel, 0 where the test fails.

    A pixel is a corner when at least FAST_ARC contiguous ring pixels are all
    brighter than center + threshold or all darker than center - threshold.
    The score is the total ring contrast beyond the threshold.
    """
    h, w = img_u8.shape
    img = img_u8.astype(np.int16)
    ring = _ring_stack(img)
    center = img[None, :, :]
    brighter = ring >= center + threshold
    darker = ring <= center - threshold

    weights = (np.uint32(1) << np.arange(16, dtype=np.uint32))[:, None, None]
    code_b = (brighter.astype(np.uint32) * weights).sum(axis=0)
    code_d = (darker.astype(np.uint32) * weights).sum(axis=0)
    is_corner = (ARC_TABLE[code_b] | ARC_TABLE[code_d]) & occupied
    is_corner[:3, :] = False
    is_corner[h - 3:, :] = False

    excess = np.maximum(np.abs(ring - center) - threshold, 0).sum(axis=0)
    return np.where(is_corner, excess.astype(np.float64), 0.0)


def _orientations(img: np.ndarray, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Intensity-centroid angle per keypoint; patch clamps vertically."""
    h, w = img.shape
    span = np.arange(-PATCH_RADIUS, PATCH_RADIUS + 1)
    du, dv = np.meshgrid(span, span)
    disk = du * du + dv * dv <= PATCH_RADIUS * PATCH_RADIUS
    out = np.empty(len(us))
    for i, (u, v) in enumerate(zip(us, vs)):
        rows = v + dv
        valid = disk & (rows >= 0) & (rows < h)
        cols = (u + du) % w
        patch = img[np.clip(rows, 0, h - 1), cols] * valid
        m10 = float((du * patch).sum())
        m01 = float((dv * patch).sum())
        out[i] = np.arctan2(m01, m10)
    return out


def _descriptors(smooth: np.ndarray, us: np.ndarray, vs: np.ndarray,
                 angles: np.ndarray) -> np.ndarray:
    """(n, 32) uint8 steered binary descriptors."""
    h, w = smooth.shape
    out = np.empty((len(us), DESCRIPTOR_BITS // 8), dtype=np.uint8)
    for i, (u, v, th) in enumerate(zip(us, vs, angles)):
        c, s = np.cos(th), np.sin(th)

        def sample(offsets):
            du = np.round(c * offsets[:, 0] - s * offsets[:, 1]).astype(np.int64)
            dv = np.round(s * offsets[:, 0] + c * offsets[:, 1]).astype(np.int64)
            return smooth[np.clip(v + dv, 0, h - 1), (u + du) % w]

        bits = sample(PATTERN_A) < sample(PATTERN_B)
        out[i] = np.packbits(bits)
    return out


def detect_features(image: IntensityImage, max_count: int = DEFAULT_MAX_FEATURES,
                    threshold: int = FAST_THRESHOLD) -> list[Feature]:
    """Corner features, score-ranked and spatially bucketed.

    At most ``ceil(max_count / tiles)`` features survive per 32x32 tile so one
    high-contrast object cannot monopolize the budget.  Fewer than 8 corners
    anywhere raises InsufficientFeaturesError.
    """
    if image.occupied_count() == 0:
        raise InsufficientFeaturesError("image has no occupied pixels")
    img = normalize_u8(image.intensity)
    score = corner_response(img, image.occupied, threshold)
    # non-max suppression over the 8-neighborhood, wrap at the seam
    local_max = ndimage.maximum_filter(score, size=3, mode=("nearest", "wrap"))
    score = np.where((score > 0) & (score >= local_max), score, 0.0)

    vs, us = np.nonzero(score)
    if len(us) < MIN_CORNERS:
        raise InsufficientFeaturesError(f"only {len(us)} corners detected")
    order = np.lexsort((us, vs, -score[vs, us]))
    us, vs = us[order], vs[order]

    n_tiles = max(1, -(-image.w // TILE) * -(-image.h // TILE))
    cap = max(1, -(-max_count // n_tiles))
    taken: dict[tuple[int, int], int] = {}
    keep = []
    for i, (u, v) in enumerate(zip(us, vs)):
        tile = (int(v) // TILE, int(u) // TILE)
        if taken.get(tile, 0) >= cap:
            continue
        taken[tile] = taken.get(tile, 0) + 1
        keep.append(i)
        if len(keep) >= max_count:
            break
    us, vs = us[keep], vs[keep]

    smooth = ndimage.uniform_filter(img.astype(np.float64), size=3,
                                    mode=("nearest", "wrap"))
    angles = _orientations(img.astype(np.float64), us, vs)
    descs = _descriptors(smooth, us, vs, angles)
    return [Feature(int(u), int(v), float(score[v, u]), float(a), d)
            for u, v, a, d in zip(us, vs, angles, descs)]


def hamming(d1: np.ndarray, d2: np.ndarray) -> int:
    return int(_POPCOUNT[np.bitwise_xor(d1, d2)].sum())


def match_features(prev: list[Feature], curr: list[Feature],
                   ratio: float = LOWE_RATIO) -> list[tuple[int, int, int]]:
    """Mutual nearest neighbors under Hamming distance with a ratio filter.

    Returns (prev index, curr index, distance) triples.  A match survives only
    if each side is the other's nearest neighbor and the best distance is
    below ``ratio`` times the second best (ambiguous matches are dropped).
    """
    if not prev or not curr:
        raise InsufficientMatchesError("cannot match empty feature lists")
    d_prev = np.stack([f.descriptor for f in prev])
    d_curr = np.stack([f.descriptor for f in curr])
    xor = np.bitwise_xor(d_prev[:, None, :], d_curr[None, :, :])
    dist = _POPCOUNT[xor].sum(axis=2).astype(np.int64)

    fwd = dist.argmin(axis=1)
    bwd = dist.argmin(axis=0)
    out = []
    for i, j in enumerate(fwd):
        if bwd[j] != i:
            continue
        best = dist[i, j]
        row = dist[i].copy()
        row[j] = np.iinfo(np.int64).max
        second = row.min() if len(row) > 1 else np.iinfo(np.int64).max
        if best < ratio * second:
            out.append((i, int(j), int(best)))
    return out


def build_match_set(prev_feats: list[Feature], curr_feats: list[Feature],
                    prev_image: IntensityImage, curr_image: IntensityImage,
                    prev_xyz: np.ndarray, curr_xyz: np.ndarray,
                    ratio: float = LOWE_RATIO) -> MatchSet:
    """Match two frames and lift surviving pairs to 3D correspondences.

    Features sit on occupied pixels by construction, but both endpoints are
    re-checked against ``source_index`` before lifting.  Fewer than 4 lifted
    pairs raises InsufficientMatchesError.
    """
    pairs = []
    xs, ys = [], []
    for i, j, _ in match_features(prev_feats, curr_feats, ratio):
        fp, fc = prev_feats[i], curr_feats[j]
        sp = int(prev_image.source_index[fp.v, fp.u])
        sc = int(curr_image.source_index[fc.v, fc.u])
        if sp == NO_POINT or sc == NO_POINT:
            continue
        pairs.append((fp, fc))
        xs.append(prev_xyz[sp])
        ys.append(curr_xyz[sc])
    if len(pairs) < MIN_PAIRS:
        raise InsufficientMatchesError(f"only {len(pairs)} lifted match pairs")
    return MatchSet(pairs, np.array(xs), np.array(ys))
