# Predict a moving user's channel 8 slots ahead and compare with simply
# reusing the last measurement.

import numpy as np

from wtmp import channel as ch
from wtmp.channel import ArrayGeometry, ScenarioConfig
from wtmp.estimation import build_dictionary, default_grid
from wtmp.evaluation import prediction_error_db
from wtmp.predictor import PencilConfig, run_pipeline
from wtmp.tfproj import TFDictionary

f_c, n_s, n_d = 39e9, 16, 8
geom = ArrayGeometry.half_wavelength(1, 128, f_c)
cfg = ScenarioConfig(f_c, 30e3, 12, 0.5e-3, n_s)
tf = TFDictionary(cfg)
dic = build_dictionary(geom, default_grid(geom, (5.0, 15.0)))

times = np.arange(1, n_s + n_d + 1) * cfg.T
for seed in range(3):
    paths = ch.generate_scenario(seed, 3, 1, (5.0, 15.0), speed=1.5,
                                 wavelength=cfg.wavelength)
    rec = ch.synthesize_record(geom, cfg, paths, times)
    truth = rec[-1]
    line = ["seed %d" % seed,
            "outdated %6.1f dB" % prediction_error_db(rec[n_s - 1], truth)]
    for use_b in (False, True):
        snap, est = run_pipeline(rec[:n_s], geom, tf, PencilConfig(n_predict=n_d), dic,
                                 use_transform=use_b)
        line.append("%s %6.1f dB" % ("with transform" if use_b else "no transform",
                                     prediction_error_db(snap.H, truth)))
    print(" | ".join(line))
