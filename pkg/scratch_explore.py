import json
import time

import numpy as np

import sys
sys.path.insert(0, "tests")
from conftest import room_doc

from dreamslab.scene import load_world
from dreamslab.plan import UNKNOWN, FREE, OCCUPIED
from dreamslab.plan.explore import init_exploration, step_exploration, StuckDetection

spec = load_world(json.dumps(room_doc()))
bounds = (-2.5125, -2.5125, 2.4875, 2.4875)
st = init_exploration(spec, (-1.0, -1.0), 0.5, bounds)

t0 = time.time()
last_report = 0
try:
    while not st.done and st.tick < 4000:
        step_exploration(st)
        if st.tick - last_report >= 200:
            last_report = st.tick
            n_dream = int((st.gmap.provenance == 1).sum())
            drift = float(np.hypot(*(st.est_xy() - st.true_xy)))
            print(f"tick {st.tick:5d} t={st.time:7.1f} mode={st.mode:8s} pos=({st.true_xy[0]:+.2f},{st.true_xy[1]:+.2f}) "
                  f"splats={len(st.gmap)} dreamed={n_dream} pending={st.pending_regions} kf={st.integrations} "
                  f"drift={drift:.3f} wall={time.time()-t0:.1f}s")
except StuckDetection as e:
    print("STUCK:", e, e.diagnostics)

print("\ndone:", st.done, "ticks:", st.tick, "sim time:", round(st.time, 1), "wall:", round(time.time() - t0, 1))
print("dreamed splats at end:", int((st.gmap.provenance == 1).sum()))
print("est vs true drift:", np.hypot(*(st.est_xy() - st.true_xy)))
print("\nevents:")
for e in st.events:
    print("  ", e)

# coverage vs GT free interior
if st.fs is not None:
    fs_obs = None
    from dreamslab.plan import extract_free_space
    fs_obs = extract_free_space(st.gmap, st.cfg.planner, bounds=bounds, include_dreamed=False)
    vals = fs_obs.grid.values
    cfg = st.cfg.planner
    lo = int(np.floor((-1.9 - bounds[0]) / cfg.cell))
    hi = int(np.floor((1.9 - bounds[0]) / cfg.cell))
    interior = np.zeros_like(vals, dtype=bool)
    interior[lo + 1:hi, lo + 1:hi] = True
    cr = 100.0 * ((vals == FREE) & interior).sum() / interior.sum()
    print("\ncoverage ratio (observed free / GT interior): %.1f%%" % cr)

# planner introspection at end state
from dreamslab.plan.explore import reachable_unknown, underexplored_scores
from dreamslab.plan import build_topo_graph, cluster_subregions
_refresh = st.fs is not None
if _refresh:
    vals = st.fs.grid.values
    g = st.graph
    est = st.est_xy()
    unk = reachable_unknown(st.fs, est)
    u = underexplored_scores(st.fs, unk, g.positions(), st.cfg.planner.r_under)
    print("\ngraph nodes:", len(g.nodes), " reachable unknown cells:", int(unk.sum()))
    dists = g.distances()
    regions = cluster_subregions(g, st.cfg.planner.r_sub, dists)
    for r in regions:
        us = {m: round(float(u[m]), 3) for m in sorted(r.members)}
        print(f"  region {r.id} rep={r.representative} visited={all(u[m] < 0.02 for m in r.members)} u={us}")
    ge = g.nodes
    print("robot at", est, "nearest node", g.nearest_node(est))
    # ascii: 2x2 downsample
    H, W = vals.shape
    chars = {-1: ".", 0: " ", 1: "#"}
    node_cells = {(n.cell[1] // 2, n.cell[0] // 2): "o" for n in ge}
    rix, riy = st.fs.grid.cell_of(est[0], est[1])
    for yy in range(H // 2 - 1, -1, -1):
        row = ""
        for xx in range(W // 2):
            block = vals[2 * yy : 2 * yy + 2, 2 * xx : 2 * xx + 2]
            c = chars[int(np.max(block))] if (block == 1).any() else (chars[0] if (block == 0).any() else chars[-1])
            if (yy, xx) in node_cells:
                c = "o"
            if yy == riy // 2 and xx == rix // 2:
                c = "R"
            row += c
        print(row)

# graph connectivity
import collections
adj = collections.defaultdict(list)
for a, b, w in g.edges:
    adj[a].append(b)
    adj[b].append(a)
seen_n = set()
comps = []
for n in range(len(g.nodes)):
    if n in seen_n:
        continue
    q = [n]
    comp = []
    while q:
        c = q.pop()
        if c in seen_n:
            continue
        seen_n.add(c)
        comp.append(c)
        q.extend(adj[c])
    comps.append(sorted(comp))
print("\ngraph components:", [len(c) for c in comps])
for c in comps[:6]:
    print("  ", c[:20], "..." if len(c) > 20 else "")
print("node 3 cell:", g.nodes[3].cell, "xy:", g.nodes[3].xy)
for n in comps[1] if len(comps) > 1 else []:
    pass
