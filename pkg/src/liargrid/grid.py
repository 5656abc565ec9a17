"""Grid time series container, site indexing, and file input-output.

A *site* is a d-tuple of 0-based coordinates on a rectangular grid with
spatial extents ``shape = (N_1, ..., N_d)``.  Sites map to linear indices
column-major (coordinate 0 varies fastest), and every frame of a series
is stored flattened in that order.  All values are 64-bit floats.

The binary ``.gts`` format is little-endian: magic ``GTS1``, one u8 for
d, d u32 extents, one u32 frame count, then the frames as contiguous
f64 values, time-major with column-major sites within each frame.
"""

import csv
import struct

import numpy as np

from .errors import ConfigurationError, GtsFormatError

_GTS_MAGIC = b"GTS1"
_MAX_SITES = 2**31  # per-frame site count guard
_MAX_TOTAL = 2**33  # total value count guard


def _check_shape(shape):
    shape = tuple(int(n) for n in shape)
    if len(shape) < 1:
        raise ConfigurationError("grid shape needs at least one axis")
    if any(n < 1 for n in shape):
        raise ConfigurationError(f"grid extents must be positive, got {shape}")
    n_sites = 1
    for n in shape:
        n_sites *= n
    if n_sites > _MAX_SITES:
        raise ConfigurationError(f"grid with {n_sites} sites exceeds the size cap")
    return shape, n_sites


def site_to_linear(site, shape):
    """Column-major linear index of a site.

    Parameters
    ----------
    site : tuple of int
        0-based coordinates, one per axis.
    shape : tuple of int
        Grid extents.

    Returns
    -------
    int
        ``sum_j site[j] * prod_{l<j} shape[l]``.
    """
    site = tuple(int(c) for c in site)
    shape = tuple(int(n) for n in shape)
    if len(site) != len(shape):
        raise IndexError(f"site {site} has {len(site)} coords for a {len(shape)}-axis grid")
    for c, n in zip(site, shape):
        if not 0 <= c < n:
            raise IndexError(f"site {site} out of bounds for shape {shape}")
    return int(np.ravel_multi_index(site, shape, order="F"))


def linear_to_site(index, shape):
    """Inverse of :func:`site_to_linear`."""
    shape = tuple(int(n) for n in shape)
    n_sites = int(np.prod(shape))
    index = int(index)
    if not 0 <= index < n_sites:
        raise IndexError(f"linear index {index} out of range for shape {shape}")
    return tuple(int(c) for c in np.unravel_index(index, shape, order="F"))


def sites_to_linear(sites, shape):
    """Vectorized site-to-linear map; ``sites`` is an (m, d) array."""
    sites = np.asarray(sites, dtype=np.intp)
    if sites.ndim != 2 or sites.shape[1] != len(shape):
        raise IndexError(f"expected an (m, {len(shape)}) site array, got {sites.shape}")
    for j, n in enumerate(shape):
        bad = (sites[:, j] < 0) | (sites[:, j] >= n)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise IndexError(f"site {tuple(sites[k])} out of bounds for shape {shape}")
    return np.ravel_multi_index(tuple(sites.T), shape, order="F")


class GridSeries:
    """Immutable time series of frames on a fixed grid.

    Parameters
    ----------
    shape : tuple of int
        Spatial extents (N_1, ..., N_d).
    values : ndarray, shape (T, n_sites)
        One row per frame, sites in column-major order.  Copied to a
        read-only float64 array.
    """

    __slots__ = ("shape", "values")

    def __init__(self, shape, values):
        shape, n_sites = _check_shape(shape)
        values = np.array(values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2 or values.shape[1] != n_sites:
            raise ConfigurationError(
                f"values must be (T, {n_sites}) for shape {shape}, got {values.shape}"
            )
        if values.shape[0] < 1:
            raise ConfigurationError("a series needs at least one frame")
        if not np.isfinite(values).all():
            raise ConfigurationError("series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridSeries is immutable")

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def n_sites(self):
        return self.values.shape[1]

    @property
    def ndim_space(self):
        return len(self.shape)

    @classmethod
    def from_frames(cls, frames, shape=None):
        """Build a series from naturally indexed frames.

        ``frames`` has shape (T, N_1, ..., N_d); each frame is flattened
        column-major.
        """
        frames = np.asarray(frames, dtype=np.float64)
        if shape is None:
            shape = frames.shape[1:]
        if frames.shape[1:] != tuple(shape):
            raise ConfigurationError(
                f"frame array {frames.shape} does not match shape {tuple(shape)}"
            )
        d = len(shape)
        t = frames.shape[0]
        flat = frames.transpose((0,) + tuple(range(d, 0, -1))).reshape(t, -1)
        return cls(shape, flat)

    @property
    def frames(self):
        """View of the data as (T, N_1, ..., N_d) with natural indexing."""
        d = len(self.shape)
        stacked = self.values.reshape((self.n_frames,) + self.shape[::-1])
        return stacked.transpose((0,) + tuple(range(d, 0, -1)))

    def frame(self, t):
        """Frame ``t`` as an (N_1, ..., N_d) array."""
        return self.frames[t]

    def slice_time(self, start, stop):
        """Sub-series of frames [start, stop)."""
        if not 0 <= start < stop <= self.n_frames:
            raise ConfigurationError(
                f"frame range [{start}, {stop}) invalid for {self.n_frames} frames"
            )
        return GridSeries(self.shape, self.values[start:stop])

    def __eq__(self, other):
        if not isinstance(other, GridSeries):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"GridSeries(shape={self.shape}, n_frames={self.n_frames})"


def extract_patch(series, t, sites):
    """Values of frame ``t`` at the given sites, in the given order.

    Parameters
    ----------
    series : GridSeries
    t : int
        Frame index, 0 <= t < n_frames.
    sites : sequence of site tuples or (m, d) array

    Returns
    -------
    ndarray of length m
    """
    if not 0 <= t < series.n_frames:
        raise IndexError(f"frame index {t} out of range for {series.n_frames} frames")
    sites = np.asarray(sites, dtype=np.intp)
    if sites.ndim == 1:
        sites = sites[None, :]
    lin = sites_to_linear(sites, series.shape)
    return series.values[t, lin]


def write_gts(series, path):
    """Write a series to ``path`` in the binary GTS format."""
    if not np.all(np.isfinite(series.values)):
        raise ConfigurationError("refusing to write non-finite values")
    d = series.ndim_space
    header = struct.pack(f"<4sB{d}II", _GTS_MAGIC, d, *series.shape, series.n_frames)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(series.values.astype("<f8", copy=False).tobytes())


def read_gts(path):
    """Read a binary GTS file, validating layout and finiteness.

    Raises
    ------
    GtsFormatError
        Naming the byte offset of the first problem found.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != _GTS_MAGIC:
        raise GtsFormatError("bad magic, expected GTS1", 0)
    if len(raw) < 5:
        raise GtsFormatError("file ends before the axis-count byte", 4)
    d = raw[4]
    if d == 0:
        raise GtsFormatError("axis count must be at least 1", 4)
    header_len = 5 + 4 * d + 4
    if len(raw) < header_len:
        raise GtsFormatError(
            f"file ends inside the header ({header_len} bytes needed)", len(raw)
        )
    dims = []
    n_sites = 1
    for j in range(d):
        off = 5 + 4 * j
        (dim,) = struct.unpack_from("<I", raw, off)
        if dim == 0:
            raise GtsFormatError(f"axis {j} has zero extent", off)
        n_sites *= dim
        if n_sites > _MAX_SITES:
            raise GtsFormatError(f"site count overflow at axis {j}", off)
        dims.append(dim)
    t_off = 5 + 4 * d
    (t,) = struct.unpack_from("<I", raw, t_off)
    if t == 0:
        raise GtsFormatError("frame count must be at least 1", t_off)
    count = t * n_sites
    if count > _MAX_TOTAL:
        raise GtsFormatError(f"total value count {count} exceeds the size cap", t_off)
    expected = count * 8
    avail = len(raw) - header_len
    if avail < expected:
        raise GtsFormatError(
            f"payload truncated: expected {expected} bytes, found {avail}", len(raw)
        )
    if avail > expected:
        raise GtsFormatError("trailing data after payload", header_len + expected)
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=header_len)
    bad = ~np.isfinite(flat)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise GtsFormatError(f"non-finite value at position {j}", header_len + 8 * j)
    values = flat.astype(np.float64).reshape(t, n_sites)
    return GridSeries(tuple(dims), values)


def read_csv_frames(path, shape):
    """Read a d=2 series from CSV: T frames of M rows stacked vertically.

    Each CSV row is one grid row (N comma-separated values); an optional
    single header line is skipped.  ``shape`` must be the (M, N) grid
    shape; the number of data rows must be a multiple of M.
    """
    shape, _ = _check_shape(shape)
    if len(shape) != 2:
        raise ConfigurationError("CSV import supports 2-axis grids only")
    m, n = shape
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        for idx, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if idx == 0 and not rows:
                    continue  # header line
                raise ConfigurationError(f"non-numeric CSV data at line {idx + 1}")
    if not rows:
        raise ConfigurationError("CSV file has no data rows")
    widths = {len(r) for r in rows}
    if widths != {n}:
        raise ConfigurationError(
            f"CSV rows have widths {sorted(widths)}, expected {n} columns"
        )
    if len(rows) % m != 0:
        raise ConfigurationError(
            f"{len(rows)} data rows is not a multiple of {m} grid rows"
        )
    t = len(rows) // m
    arr = np.asarray(rows, dtype=np.float64).reshape(t, m, n)
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("CSV contains non-finite values")
    return GridSeries.from_frames(arr, shape)
