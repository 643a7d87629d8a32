import json
import time

import numpy as np

import sys
sys.path.insert(0, "tests")
from conftest import room_doc

from dreamslab.scene import load_world, world_at, render_gt
from dreamslab.geometry import camera_pose
from dreamslab.scene import CameraIntrinsics
from dreamslab.splat import GaussianMap
from dreamslab.mapper import FrameOracle, SensorModel, predict_frame_gaussians, integrate_frame
from dreamslab.plan import PlannerConfig, extract_free_space, UNKNOWN, FREE, OCCUPIED

spec = load_world(json.dumps(room_doc()))
K = CameraIntrinsics.with_fov90(64, 64)
sensor = SensorModel(sigma_depth=0.0, p_invalid=0.0, stride=1)
gmap = GaussianMap()

t0 = time.time()
frame = 0
for px, py in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]:
    for yaw in [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]:
        pose = camera_pose(px, py, 1.2, yaw)
        gt = render_gt(world_at(spec, 0.0), pose, K)
        orc = FrameOracle(spec, 0.0, 0.0, pose, pose, gt_t=gt, gt_next=gt)
        pred = predict_frame_gaussians(gt.rgb, gt.rgb, orc, K, sensor, frame)
        integrate_frame(gmap, pred, pose, frame, K)
        frame += 1
print("integrated", frame, "views in %.2fs" % (time.time() - t0), "splats:", gmap.centers.shape[0])

cfg = PlannerConfig()
bounds = (-2.5125, -2.5125, 2.4875, 2.4875)
t0 = time.time()
fs = extract_free_space(gmap, cfg, bounds=bounds)
print("fs in %.3fs" % (time.time() - t0), "shape", fs.grid.values.shape)

# analytic GT: interior free, 2-cell wall band occupied, elsewhere unknown
g = fs.grid
H, W = g.values.shape
gt = np.full((H, W), UNKNOWN, dtype=np.int8)
lo = int(np.floor((-1.9 - bounds[0]) / cfg.cell))
hi = int(np.floor((1.9 - bounds[0]) / cfg.cell))
gt[lo + 1:hi, lo + 1:hi] = FREE
gt[lo, lo:hi + 1] = OCCUPIED
gt[hi, lo:hi + 1] = OCCUPIED
gt[lo:hi + 1, lo] = OCCUPIED
gt[lo:hi + 1, hi] = OCCUPIED
print("ring cells", lo, hi)

mismatch = fs.grid.values != gt
print("total cells", gt.size, "mismatch", int(mismatch.sum()), "= %.2f%%" % (100 * mismatch.sum() / gt.size))
# breakdown
for name, got, want in [
    ("free where GT wall", FREE, OCCUPIED),
    ("free where GT unknown", FREE, UNKNOWN),
    ("unknown where GT free", UNKNOWN, FREE),
    ("unknown where GT wall", UNKNOWN, OCCUPIED),
    ("occ where GT free", OCCUPIED, FREE),
    ("occ where GT unknown", OCCUPIED, UNKNOWN),
]:
    n = int(((fs.grid.values == got) & (gt == want)).sum())
    print(f"  {name}: {n}")

# ascii dump of a quadrant for eyeballing
chars = {UNKNOWN: ".", FREE: " ", OCCUPIED: "#"}
for iy in range(0, H, 2):
    print("".join(chars[int(v)] for v in fs.grid.values[iy, ::2]))
