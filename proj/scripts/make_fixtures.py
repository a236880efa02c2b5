"""Regenerates the bundled sample fixtures under data/.

The fixtures are deterministic; rerunning this script reproduces the
committed files byte for byte.
"""

from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parent.parent / "data"
GOLDEN = np.pi * (3.0 - np.sqrt(5.0))


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    theta = GOLDEN * i
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def sunflower_disk(n, radius):
    i = np.arange(n) + 0.5
    r = radius * np.sqrt(i / n)
    theta = GOLDEN * i
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def lumpy_surface(n, seed=3):
    """Vertices of a lumpy closed surface about 1 m across (3D mesh stand-in)."""
    rng = np.random.default_rng(seed)
    u = fibonacci_sphere(n)
    theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    phi = np.arctan2(u[:, 1], u[:, 0])
    radius = 0.5 * (1.0 + 0.18 * np.sin(3.0 * theta) * np.cos(2.0 * phi) + 0.1 * np.cos(4.0 * theta))
    pts = u * radius[:, None]
    pts[:, 2] *= 0.8
    pts += rng.normal(scale=0.004, size=pts.shape)
    return pts - pts.min(axis=0)


def write_obj(path, pts, header):
    with open(path, "w") as f:
        f.write(f"# {header}\n")
        for p in pts:
            f.write(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")


def write_csv(path, pts, header):
    with open(path, "w") as f:
        f.write(f"# {header}\n")
        for p in pts:
            f.write(",".join(f"{v:.6f}" for v in p) + "\n")


def main():
    DATA.mkdir(exist_ok=True)
    g = np.linspace(0.0, 1.0, 10)
    grid = np.array([[x, y] for y in g for x in g])
    write_csv(DATA / "unit_square_grid.csv", grid, "x,y")

    write_obj(DATA / "lumpy_surface.obj", lumpy_surface(500), "lumpy closed surface, 500 vertices, ~1 m")

    a = sunflower_disk(60, 0.5) + np.array([0.5, 0.5])
    b = sunflower_disk(60, 0.5) + np.array([10.5, 0.5])
    write_csv(DATA / "two_clusters.csv", np.vstack([a, b]), "x,y")

    write_csv(DATA / "tight_cluster.csv", sunflower_disk(80, 0.5) + np.array([0.5, 0.5]), "x,y")


if __name__ == "__main__":
    main()
