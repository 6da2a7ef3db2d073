# Recover a few near-field paths with OMP, then flatten their wavefronts
# with the diagonal phase transform.

import numpy as np

from wtmp import channel as ch
from wtmp.channel import ArrayGeometry, ScenarioConfig
from wtmp.estimation import build_dictionary, default_grid, omp_estimate
from wtmp.evaluation import transform_nmse
from wtmp.transform import TransformMatrix, build_transform

f_c = 39e9
geom = ArrayGeometry.half_wavelength(1, 128, f_c)
cfg = ScenarioConfig(f_c, 30e3, 12, 0.5e-3, 16)

paths = ch.generate_scenario(3, n_clusters=3, rays_per_cluster=1,
                             distance_range=(5.0, 15.0), speed=1.5,
                             wavelength=cfg.wavelength)
print("true paths (theta, r):")
for p in paths:
    print("  %.3f rad  %.2f m" % (p.theta, p.r))

grid = default_grid(geom, (5.0, 15.0))
dic = build_dictionary(geom, grid)
print("dictionary", dic.atoms.shape)

h = ch.synthesize_channel(geom, cfg, paths, 0.0).H
est = omp_estimate(h[:, 0], dic)
print("OMP found", est.p_hat, "atoms; residual %.3f" % (est.residual_norm / np.linalg.norm(h[:, 0])))
for k, th, ph, r in est.records():
    print("  #%d  %.3f rad  %.2f m" % (k, th, r))

# how close does the transformed channel get to the planar one?
hp = ch.synthesize_channel(geom, cfg, paths, 0.0, model="plane").H
for name, bn in (("identity", TransformMatrix.identity(geom.n_t)),
                 ("estimated", build_transform(est, geom)),
                 ("oracle", build_transform(paths, geom))):
    w, _ = transform_nmse(h[None], hp[None], bn)
    print("%-9s NMSE to planar channel: %.3e" % (name, w))
