"""Grid series basics: site order, frames, and the two file formats.

Run from the repository root:  python3 demos/01_grids_and_files.py
"""

import os
import tempfile

import numpy as np

from liargrid import (
    GridSeries,
    linear_to_site,
    read_csv_frames,
    read_gts,
    site_to_linear,
    write_gts,
)

# Sites are stored column-major: linear index runs down the first axis
# fastest.  On a 3x4 grid, site (row, col) lives at row + 3*col.
shape = (3, 4)
print("site order on a 3x4 grid:")
for lin in range(12):
    print(f"  linear {lin:2d} <-> site {linear_to_site(lin, shape)}")
assert site_to_linear((2, 1), shape) == 5

# A series is T frames of flattened grids.
gen = np.random.default_rng(1)
values = gen.normal(size=(50, 12))
series = GridSeries(shape, values)
print(f"\nseries: {series.n_frames} frames on {series.shape}")
print("frame 0 as a 3x4 grid:")
print(series.frame(0))

# frame(t) reshapes the flat row back into grid layout; entry (2, 1) of
# the frame equals flat column 5.
assert series.frame(7)[2, 1] == values[7, 5]

tmp = tempfile.mkdtemp()

# GTS is the binary format: magic, axis count, extents, frame count,
# then float64 payload.  Round-trips are bitwise.
gts_path = os.path.join(tmp, "demo.gts")
write_gts(series, gts_path)
back = read_gts(gts_path)
assert back.shape == series.shape
assert np.array_equal(back.values, series.values)
print(f"\nwrote and re-read {os.path.getsize(gts_path)} byte GTS file, bitwise equal")

# CSV input stacks frames vertically: T blocks of M rows, N columns.
csv_path = os.path.join(tmp, "demo.csv")
stacked = np.vstack([series.frame(t) for t in range(series.n_frames)])
np.savetxt(csv_path, stacked, fmt="%.17g", delimiter=",")
from_csv = read_csv_frames(csv_path, shape)
assert np.array_equal(from_csv.values, series.values)
print(f"CSV import of the stacked-frame layout matches exactly")
