"""Function-space reconstructions with pointwise credible bands, as CSV and SVG."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats

from . import _io
from .model import basis_matrix
from .posteriors import DiagonalGaussian


def band_halfwidth(post: DiagonalGaussian, grid: Sequence[float], gamma: float = 0.05) -> np.ndarray:
    """z_{1-gamma/2} * sd of f(x) = sum_i theta_i phi_i(x); depends on the variances only."""
    phi = basis_matrix(grid, len(post))
    return stats.norm.ppf(1 - gamma / 2) * np.sqrt((phi * phi) @ post.var)


def pointwise_band(post: DiagonalGaussian, grid: Sequence[float], gamma: float = 0.05):
    """Posterior mean function and exact Gaussian pointwise band at each grid point."""
    mean = basis_matrix(grid, len(post)) @ post.mean
    half = band_halfwidth(post, grid, gamma)
    return mean, mean - half, mean + half


def band_csv(grid, truth, mean, lo, hi) -> str:
    rows = zip(*(np.asarray(a, dtype=float) for a in (grid, truth, mean, lo, hi)))
    return _io.csv_text(["x", "truth", "mean", "lo", "hi"], rows)


def _path(xs, ys, sx, sy) -> str:
    pts = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)]
    return "M" + " L".join(pts)


def band_svg(grid, truth, mean, lo, hi, title: str = "", width: int = 640, height: int = 400) -> str:
    """Line plot: truth in black, posterior mean solid, band dashed."""
    grid = np.asarray(grid, dtype=float)
    ys = np.concatenate([truth, mean, lo, hi])
    y0, y1 = float(ys.min()), float(ys.max())
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 40
    x0, x1 = float(grid.min()), float(grid.max()) if grid.max() > grid.min() else float(grid.min()) + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="#888"/>',
        f'<text x="{width / 2:.1f}" y="{pad / 2 + 5:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{y1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-family="sans-serif" '
        f'font-size="10">{y0:.3g}</text>',
        f'<path d="{_path(grid, truth, sx, sy)}" fill="none" stroke="black" stroke-width="1.5"/>',
        f'<path d="{_path(grid, mean, sx, sy)}" fill="none" stroke="#c0392b" stroke-width="1.5"/>',
        f'<path d="{_path(grid, lo, sx, sy)}" fill="none" stroke="#c0392b" stroke-dasharray="5,3"/>',
        f'<path d="{_path(grid, hi, sx, sy)}" fill="none" stroke="#c0392b" stroke-dasharray="5,3"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"
