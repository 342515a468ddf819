import os

import numpy as np
import pandas as pd


def wendland(r: np.ndarray, support: float) -> np.ndarray:
    # (1 - x)^4 (4x + 1) is positive definite in the plane
    x = np.clip(r / support, 0.0, 1.0)
    return (1.0 - x) ** 4 * (4.0 * x + 1.0)


def generate_kernel_tables(output_dir: str = "data/kernels"):
    os.makedirs(output_dir, exist_ok=True)

    wendland_radii = np.round(np.arange(81) * 0.05, 2)
    bf_radii = np.round(np.arange(161) * 0.05, 2)

    # Format: (file name, radii, values)
    configs = [
        ("wendland_table.csv", wendland_radii, wendland(wendland_radii, 3.0)),
        ("bf_table.csv", bf_radii, np.exp(-0.5 * bf_radii * bf_radii)),
        # radii out of order; the loader must reject it
        ("nonmonotone_table.csv", np.array([0.0, 0.5, 0.4, 1.0]), np.array([1.0, 0.8, 0.6, 0.2])),
    ]

    for name, radii, values in configs:
        print(f"Tabulating {name} on {radii.size} radii up to {radii.max():g}...")
        filepath = os.path.join(output_dir, name)
        pd.DataFrame({"radius": radii, "value": values}).to_csv(filepath, index=False)
        print(f"  -> Saved to {filepath}")


if __name__ == "__main__":
    generate_kernel_tables()
