# Where does the Fresnel approximation hold, and how far is a near-field
# steering vector from its planar counterpart?

import numpy as np

from wtmp import channel as ch
from wtmp.channel import ArrayGeometry, PathParams

f_c = 39e9
geom = ArrayGeometry.half_wavelength(2, 256, f_c)
print("elements", geom.n_t, "wavelength (mm)", 1e3 * geom.wavelength)

r_lo, r_hi = ch.approximation_region(geom)
print("fresnel region (m): %.2f .. %.1f" % (r_lo, r_hi))

# worst phase error of each approximation along a distance sweep
for r in (2.0, r_lo, 20.0, r_hi, 1000.0):
    worst_near = worst_far = 0.0
    for th in np.linspace(0.1, np.pi - 0.1, 25):
        p = PathParams(th, np.pi / 2, r, 0.0, 0.0)
        worst_near = max(worst_near, ch.near_phase_discrepancy(geom, p).max())
        worst_far = max(worst_far, ch.far_phase_discrepancy(geom, p).max())
    print("r=%8.2f m  fresnel err %.3f rad  planar err %.3f rad  (pi/8 = %.3f)"
          % (r, worst_near, worst_far, np.pi / 8))

# correlation between spherical and planar steering at a few distances
ula = ArrayGeometry.half_wavelength(1, 256, f_c)
for r in (5.0, 30.0, 120.0, 1e4):
    a = ch.spherical_steering(ula, 1.2, 0.0, r)
    b = ch.far_steering(ula, 1.2, 0.0)
    print("r=%8.1f m  |<near, far>|/N = %.3f" % (r, abs(np.vdot(a, b)) / ula.n_t))
