"""
A synthetic installation campaign, step by step
===============================================

Generate a small campaign with known answers, then recover the turbine
sites and their installation times with the library's building blocks.
"""

# %%
import numpy as np

from jackup_ais import analytics, clustering, segmentation
from jackup_ais.geo import haversine
from jackup_ais.ingest import BBox
from jackup_ais.synth import CampaignScript, farm_bbox_for, generate_campaign, harbor_hint_for

script = CampaignScript(n_sites=12, batch_size=4, gps_jitter_m=10, gap_probability=0.01, seed=3)
traj, truth = generate_campaign(script)
print(len(traj), "records over", round(truth.window.hours, 1), "hours")
print(len(truth.sites), "sites,", len(truth.port_calls), "port calls")

# %%
# Cluster the fixes inside the farm region in raw degrees. A few spare
# clusters soak up transit fixes; they are dropped by the point threshold.
inside = BBox(*farm_bbox_for(truth)).contains(traj.lat, traj.lon)
farm = traj.take(np.flatnonzero(inside))
P = np.column_stack([farm.lat, farm.lon])
k = clustering.select_k(script.n_sites)
model = clustering.restarts(P, k, seeds=[0, 1, 2], timestamps=farm.t_us)
verdicts = clustering.discard_path_clusters(model, farm, min_points=360)
verdicts = clustering.suppress_overlapping(model, verdicts, 2 * script.radius_m)
kept = [v.cluster for v in verdicts if v.kept]
print(len(kept), "clusters kept out of", k)

# %%
# Each kept center should sit on a scripted site.
for j in kept[:5]:
    c = model.center(j)
    print(j, round(min(haversine(c, s) for s in truth.sites), 1), "m from nearest site")

# %%
# Dwell segments: maximal runs of fixes within 100 m of a center, with a
# bracket from the last fix outside to the first fix back outside.
records = []
for j in kept:
    segs, _ = segmentation.split_by_duration(segmentation.extract_dwell_segments(traj, model.center(j), cluster_id=j), 1.0)
    rec = segmentation.aggregate_installation(j, model.center(j), segs)
    if rec is not None:
        records.append(rec)
print(records[0].segments[0])

# %%
# Farm statistics against the scripted dwell times.
stats = analytics.farm_stats([r.total_h for r in records], script.n_sites)
print(stats)
print("scripted mean", round(np.mean(truth.site_dwell_s) / 3600, 2), "h")

# %%
# The harbor comes from clustering inside a hint region, and transit is
# whatever time is left over.
harbor = segmentation.detect_harbor(traj, segmentation.HarborHint.from_dict(harbor_hint_for(truth)), min_points=360)
port, _ = segmentation.split_by_duration(harbor.segments, 1.0)
share = analytics.time_share_us(
    truth.window, sum(r.total_us for r in records), sum(s.duration_us for s in port)
)
print(share)
print("naive average", round(analytics.naive_average(truth.window, script.n_sites), 1), "h")
