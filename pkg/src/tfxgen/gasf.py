"""Gramian angular summation field codec for traffic matrices.

Signed values are mapped into (0, 1] with a small offset so that the value
grid never collides with the sentinel:

    eps = 1 / (4 * pl_max)
    x_i = eps + (v_i + pl_max) * (1 - eps) / (2 * pl_max)   for data values
    x_i = 0                                                  for sentinels

then phi_i = arccos(x_i) and pixel (i, j) = cos(phi_i + phi_j).  The image
is symmetric with diagonal 2*x_i^2 - 1, which makes a closed-form inverse
possible: x_i = sqrt((P_ii + 1) / 2).  An optional coordinate-descent
refinement fits all angles against the full (possibly noisy) image before
snapping back to the integer value grid.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ClassLabel, DataError, RejectedSample, TrafficMatrix

GASF_MAGIC = b"TFXG"


def norm_eps(pl_max: int) -> float:
    return 1.0 / (4.0 * pl_max)


def normalize_values(values: np.ndarray, pl_max: int) -> np.ndarray:
    """Map signed values (0 = sentinel) into [0, 1]; vectorised."""
    values = np.asarray(values, dtype=np.float64)
    eps = norm_eps(pl_max)
    x = eps + (values + pl_max) * (1.0 - eps) / (2.0 * pl_max)
    return np.where(values == 0.0, 0.0, x)


def snap_norm_values(x: np.ndarray, pl_max: int) -> np.ndarray:
    """Inverse of normalize_values onto the integer grid; vectorised.

    Estimates below half the sentinel gap snap to 0.  Anything else maps
    to the nearest non-zero signed value in [-pl_max, pl_max]; estimates
    that round to the excluded 0 go to -1 or +1, whichever is closer.
    """
    x = np.asarray(x, dtype=np.float64)
    eps = norm_eps(pl_max)
    u = (x - eps) * (2.0 * pl_max) / (1.0 - eps) - pl_max
    v = np.floor(u + 0.5)  # round half up
    v = np.clip(v, -pl_max, pl_max)
    v = np.where((v == 0.0) & (u >= 0.0), 1.0, v)
    v = np.where((v == 0.0) & (u < 0.0), -1.0, v)
    return np.where(x < eps / 2.0, 0, v.astype(np.int64))


def encode_gasf(matrix: TrafficMatrix, pl_max: int) -> np.ndarray:
    """One matrix to an (L, L) float64 image."""
    x = normalize_values(np.array(matrix.values, dtype=np.float64), pl_max)
    phi = np.arccos(x)
    return np.cos(phi[:, None] + phi[None, :])


def encode_gasf_batch(values: np.ndarray, pl_max: int) -> np.ndarray:
    """(n, L) signed values (0-padded) to (n, L, L) images."""
    x = normalize_values(values, pl_max)
    phi = np.arccos(x)
    return np.cos(phi[:, :, None] + phi[:, None, :])


@dataclass
class GasfDecodeStats:
    decoded: int = 0
    repaired: int = 0
    rejected: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _refine_angles(phi: np.ndarray, pixels: np.ndarray,
                   steps: int) -> tuple[np.ndarray, list[float]]:
    """Coordinate descent on sum((cos(phi_i + phi_j) - P_ij)^2).

    Each coordinate is minimised with a golden-section line search over
    [0, pi/2]; a move is kept only if it does not increase the coordinate
    objective, so the full objective is non-increasing across rounds.
    """
    phi = phi.copy()
    n = phi.shape[0]
    inv_golden = (np.sqrt(5.0) - 1.0) / 2.0

    def full_objective() -> float:
        diff = np.cos(phi[:, None] + phi[None, :]) - pixels
        return float(np.sum(diff * diff))

    def coord_objective(i: int, ang: float) -> float:
        others = np.delete(phi, i)
        row = np.delete(pixels[i], i)
        d = np.cos(ang + others) - row
        diag = np.cos(2.0 * ang) - pixels[i, i]
        return 2.0 * float(np.dot(d, d)) + float(diag * diag)

    history = [full_objective()]
    for _ in range(steps):
        for i in range(n):
            lo, hi = 0.0, np.pi / 2.0
            a = hi - inv_golden * (hi - lo)
            b = lo + inv_golden * (hi - lo)
            fa, fb = coord_objective(i, a), coord_objective(i, b)
            for _ in range(48):
                if fa <= fb:
                    hi, b, fb = b, a, fa
                    a = hi - inv_golden * (hi - lo)
                    fa = coord_objective(i, a)
                else:
                    lo, a, fa = a, b, fb
                    b = lo + inv_golden * (hi - lo)
                    fb = coord_objective(i, b)
            cand = (lo + hi) / 2.0
            if coord_objective(i, cand) <= coord_objective(i, float(phi[i])):
                phi[i] = cand
        history.append(full_objective())
    return phi, history


def decode_gasf(pixels: np.ndarray, pl_max: int, label: ClassLabel,
                refine_steps: int = 5,
                stats: GasfDecodeStats | None = None) -> TrafficMatrix:
    """Recover a TrafficMatrix from an (L, L) image.

    Starts from the diagonal inverse, optionally refines the angles
    against the whole image, snaps to the value grid, and truncates at
    the first sentinel.  A sentinel in position 0 rejects the sample;
    data past a sentinel counts as a repair.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
        raise DataError(f"image must be square, got shape {pixels.shape}")
    diag = np.clip((np.diagonal(pixels) + 1.0) / 2.0, 0.0, 1.0)
    x = np.sqrt(diag)
    if refine_steps > 0:
        phi = np.arccos(np.clip(x, 0.0, 1.0))
        phi, _ = _refine_angles(phi, pixels, refine_steps)
        x = np.cos(phi)
    snapped = snap_norm_values(x, pl_max)

    if snapped[0] == 0:
        if stats is not None:
            stats.rejected += 1
        raise RejectedSample("sentinel in position 0, no leading value")
    zeros = np.nonzero(snapped == 0)[0]
    eff = int(zeros[0]) if zeros.size else len(snapped)
    repaired = bool(np.any(snapped[eff:] != 0))
    values = tuple(int(v) for v in snapped[:eff])
    padded = values + (0,) * (len(snapped) - eff)
    if stats is not None:
        stats.decoded += 1
        if repaired:
            stats.repaired += 1
    return TrafficMatrix(padded, eff, label)


def decode_gasf_diag_batch(images: np.ndarray, pl_max: int) -> np.ndarray:
    """Closed-form batch inverse (no refinement): (n, L, L) -> (n, L) values.

    Truncation at the first sentinel is applied per row; rows whose first
    position snaps to the sentinel come back as all zeros and must be
    handled by the caller.
    """
    diag = np.clip((np.diagonal(images, axis1=1, axis2=2) + 1.0) / 2.0, 0.0, 1.0)
    snapped = snap_norm_values(np.sqrt(diag), pl_max)
    keep = np.cumprod(snapped != 0, axis=1).astype(bool)
    return np.where(keep, snapped, 0)


# -- binary image files ------------------------------------------------------


def save_gasf_images(path: str | Path, images: np.ndarray) -> None:
    """Write (n, L, L) images as float32 little-endian, row-major."""
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise DataError(f"expected (n, L, L) images, got shape {images.shape}")
    n, side, _ = images.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(GASF_MAGIC)
        fh.write(struct.pack("<II", side, n))
        fh.write(images.astype("<f4").tobytes(order="C"))


def load_gasf_images(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != GASF_MAGIC:
        raise DataError(f"{path}: not a GASF image file")
    side, n = struct.unpack("<II", data[4:12])
    want = 12 + 4 * n * side * side
    if len(data) != want:
        raise DataError(
            f"{path}: expected {want} bytes for {n} images of side {side}, "
            f"got {len(data)}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=12)
    return flat.reshape(n, side, side).astype(np.float64)
