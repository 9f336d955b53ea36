"""Rolling-shutter aware differential homographies, warping and stitching.

Correspondences are (N, 4) float arrays of x1, y1, x2, y2. Images are uint8
arrays of shape (H, W) or (H, W, 3).
"""
import json

import numpy as np

from ._rsstitch import (
    Error,
    beta1,
    beta2,
    flow_gs,
    forward_map,
    rectify_points,
    rmse_ncc,
)
from . import _rsstitch

__all__ = [
    "Error",
    "beta1",
    "beta2",
    "flow_gs",
    "forward_map",
    "rectify_points",
    "rmse_ncc",
    "solve",
    "stitch",
    "synth",
    "run_sweep",
    "parse_correspondences",
    "read_correspondences",
]


def solve(corrs, solver="auto", gamma=1.0, height=720.0, threshold=1.0, trials=1000, seed=0,
          refit=True, threads=0):
    """RANSAC (+ optional least-squares refit on the inliers). Returns a dict
    with type, H (3x3 array), k (RS models), gamma, h, solver, inliers and
    per-correspondence residuals."""
    out = json.loads(_rsstitch._solve(np.asarray(corrs, dtype=float), solver, gamma, height,
                                      threshold, trials, seed, refit, threads))
    out["H"] = np.array(out["H"])
    out["residuals"] = np.array(out["residuals"])
    return out


def stitch(img1, img2, corrs, mode="rs-apap", gamma=1.0, threshold=1.0, trials=1000, seed=0,
           blend="linear"):
    """Returns (canvas, coverage mask, diff image, report dict)."""
    image, mask, diff, report = _rsstitch._stitch(img1, img2, np.asarray(corrs, dtype=float), mode,
                                                  gamma, threshold, trials, seed, blend)
    return image, mask, diff, json.loads(report)


def synth(seed=1, omega_deg=3.0, v=0.03, k=0.0, points=100, gamma=1.0, sigma_g=0.0,
          generator="exact", images=False):
    """Synthetic plane scene. Returns a dict with noisy and clean
    correspondences, the scene description (including the ground-truth model)
    and, if requested, the two rendered frames."""
    noisy, clean, scene, f1, f2 = _rsstitch._synth(seed, omega_deg, v, k, points, gamma, sigma_g,
                                                   generator, images)
    return {"corrs": noisy, "clean": clean, "scene": json.loads(scene), "frame1": f1, "frame2": f2}


def run_sweep(toml_text):
    """Runs a bench spec given as TOML text. Returns (csv text, check results)."""
    csv, checks = _rsstitch._run_sweep(toml_text)
    return csv, json.loads(checks)


def parse_correspondences(text, source="<input>"):
    """Parses the text correspondence format. Returns (array, header dict)."""
    return _rsstitch._parse_correspondences(text, source)


def read_correspondences(path):
    with open(path, encoding="utf-8") as f:
        return parse_correspondences(f.read(), str(path))
