"""On-disk formats: binary channel dumps, JSON scenarios, CSV tables and
run manifests."""

import csv
import hashlib
import json
import struct
import subprocess
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .channel import ArrayGeometry, PathParams, ScenarioConfig

MAGIC = b"WTCH"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")  # 32 bytes


def write_channel_dump(path, record):
    """Write a (n_samples, n_t, n_f) complex record.

    Layout: 32-byte little-endian header (magic, version, three uint64
    dimensions) followed by interleaved float64 (re, im) pairs ordered
    sample, antenna, subcarrier.
    """
    rec = np.ascontiguousarray(record, dtype="<c16")
    if rec.ndim != 3:
        raise ValueError("record must be 3-D (samples, antennas, subcarriers)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, DUMP_VERSION, *rec.shape))
        fh.write(rec.tobytes())


def read_channel_dump(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, *dims = _HEADER.unpack(head)
        if magic != MAGIC or version != DUMP_VERSION:
            raise ValueError(f"{path}: not a version-{DUMP_VERSION} channel dump")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload has {data.size} entries, header says {dims}")
    return data.reshape(dims).astype(complex)


def read_dump_header(path):
    with open(path, "rb") as fh:
        magic, version, *dims = _HEADER.unpack(fh.read(_HEADER.size))
    return magic, version, tuple(dims)


def path_to_dict(p):
    d = asdict(p)
    d["gains"] = [[g.real, g.imag] for g in p.gains]
    return d


def path_from_dict(d):
    d = dict(d)
    d["gains"] = tuple(complex(re, im) for re, im in d["gains"])
    return PathParams(**d)


def save_scenario(path, geom, cfg, paths):
    doc = {"geometry": asdict(geom),
           "config": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in asdict(cfg).items()},
           "paths": [path_to_dict(p) for p in paths]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_scenario(path):
    doc = json.loads(Path(path).read_text())
    cfg = dict(doc["config"])
    cfg["ue_velocity"] = tuple(cfg["ue_velocity"])
    return (ArrayGeometry(**doc["geometry"]), ScenarioConfig(**cfg),
            [path_from_dict(d) for d in doc["paths"]])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in r])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def git_revision(cwd=None):
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=cwd, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def write_manifest(path, config, seeds, **extra):
    doc = {"config_hash": config_hash(config), "seeds": list(seeds),
           "git_revision": git_revision(Path(__file__).parent), "config": config}
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True, default=str))
    return doc
