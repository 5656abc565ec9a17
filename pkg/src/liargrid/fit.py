"""Per-site least squares for local-interaction AR models.

Each site is fit independently: the response is the site's own series,
the regressors are the lagged values of its neighborhood.  Solves use a
column-pivoted QR factorization, never the normal equations, so the
residual stays orthogonal to the design at machine precision even for
poorly scaled data.  Rank deficiency is non-fatal: the minimum-norm
solution is returned with ``cond_flag`` set.

``fit_all`` distributes sites over a thread pool.  All inputs are
immutable and every worker writes only its own slot, so the result is a
pure function of (series, neighborhoods, order) regardless of thread
count.

References
----------
Golub, Van Loan (2013), "Matrix Computations", 4th ed., ch. 5.
"""

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, LiarError, UnderdeterminedError
from .grid import site_to_linear
from .simulate import KernelField

_RANK_TOL = 1e-10  # diagonal ratio below which a design counts as rank-deficient


def resolve_workers(n_workers=None):
    """Worker count: explicit arg, else LIAR_THREADS, else cpu count."""
    if n_workers is not None:
        n = int(n_workers)
    else:
        env = os.environ.get("LIAR_THREADS", "").strip()
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigurationError(f"worker count must be positive, got {n}")
    return n


class DesignBlock:
    """Least-squares block for one site.

    Attributes
    ----------
    site : tuple of int
        Center site.
    neighborhood : Neighborhood
    order : int
        Lag order P.
    y : ndarray, shape (T-P, P*s)
        Row t-P is the concatenation of the neighborhood patches of
        frames t-1, ..., t-P (lag-major, column-major within each patch).
    z : ndarray, shape (T-P,)
        Response: the center site's values at frames P, ..., T-1.
    """

    __slots__ = ("site", "neighborhood", "order", "y", "z")

    def __init__(self, site, neighborhood, order, y, z):
        self.site = site
        self.neighborhood = neighborhood
        self.order = order
        self.y = y
        self.z = z


class SiteFit:
    """Least-squares result for one site.

    ``coeffs`` is the flat estimate of length P*s, lag-major; use
    :meth:`coeffs_by_lag` for the (P, s) view.  ``sigma2`` is the
    residual variance rss/(rows-cols) (0 when there are no spare rows).
    ``se`` holds plug-in standard errors once computed, None otherwise.
    """

    __slots__ = ("site", "neighborhood", "order", "coeffs", "rss", "sigma2",
                 "cond_flag", "se", "_qr")

    def __init__(self, site, neighborhood, order, coeffs, rss, sigma2,
                 cond_flag, se=None, qr=None):
        self.site = site
        self.neighborhood = neighborhood
        self.order = order
        self.coeffs = coeffs
        self.rss = rss
        self.sigma2 = sigma2
        self.cond_flag = cond_flag
        self.se = se
        self._qr = qr

    def coeffs_by_lag(self):
        return self.coeffs.reshape(self.order, self.neighborhood.size)

    def __repr__(self):
        return (
            f"SiteFit(site={self.site}, k={self.neighborhood.size}, "
            f"rss={self.rss:.6g}, cond_flag={self.cond_flag})"
        )


def assemble_design(series, site, neighborhood, order=1):
    """Build the regression block for one site.

    Requires T - P >= P*s usable rows; fewer raises
    :class:`UnderdeterminedError` naming the counts.
    """
    order = int(order)
    if order < 1:
        raise ConfigurationError("lag order must be at least 1")
    t = series.n_frames
    if t <= order:
        raise ConfigurationError(
            f"series has {t} frames, need more than the lag order {order}"
        )
    s = neighborhood.size
    rows = t - order
    cols = order * s
    if rows < cols:
        raise UnderdeterminedError(
            f"site {tuple(site)}: {rows} usable rows < {cols} unknowns "
            f"(T={t}, P={order}, |J|={s})"
        )
    values = series.values
    lin = neighborhood.linear
    y = np.empty((rows, cols))
    for p in range(1, order + 1):
        y[:, (p - 1) * s : p * s] = values[order - p : t - p, lin]
    z = values[order:, site_to_linear(site, series.shape)]
    return DesignBlock(tuple(site), neighborhood, order, y, np.array(z))


def fit_site(design):
    """Minimize ||z - Y m||^2 for one design block.

    Full-rank designs (pivoted-QR diagonal ratio >= 1e-10) solve by back
    substitution; deficient ones fall back to the minimum-norm solution
    and set ``cond_flag``.
    """
    y, z = design.y, design.z
    rows, cols = y.shape
    q, r, piv = scipy.linalg.qr(y, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    qr_cache = None
    if diag.size and diag[0] > 0.0 and diag[-1] >= _RANK_TOL * diag[0]:
        qtz = q.T @ z
        m_piv = scipy.linalg.solve_triangular(r, qtz)
        coeffs = np.empty(cols)
        coeffs[piv] = m_piv
        cond_flag = False
        qr_cache = (r, piv)
    else:
        coeffs, _, _, _ = np.linalg.lstsq(y, z, rcond=_RANK_TOL)
        cond_flag = True
    resid = z - y @ coeffs
    rss = float(resid @ resid)
    dof = rows - cols
    sigma2 = rss / dof if dof > 0 else 0.0
    return SiteFit(design.site, design.neighborhood, design.order, coeffs,
                   rss, sigma2, cond_flag, qr=qr_cache)


def standard_errors(fit, design):
    """Plug-in standard errors sqrt(sigma2 * diag((Y'Y)^-1)).

    Returns None with a warning when the design was rank-deficient.
    The result is also stored on ``fit.se``.
    """
    if fit.cond_flag:
        warnings.warn(
            f"site {fit.site}: standard errors omitted for a rank-deficient design",
            stacklevel=2,
        )
        return None
    if fit._qr is not None:
        r, piv = fit._qr
    else:
        _, r, piv = scipy.linalg.qr(design.y, mode="economic", pivoting=True)
    rinv = scipy.linalg.solve_triangular(r, np.eye(r.shape[0]))
    gram_diag_piv = np.sum(rinv * rinv, axis=1)
    gram_diag = np.empty_like(gram_diag_piv)
    gram_diag[piv] = gram_diag_piv
    se = np.sqrt(fit.sigma2 * gram_diag)
    fit.se = se
    return se


class FitReport:
    """Per-site fits in canonical order plus an error manifest.

    ``fits`` maps linear site index -> SiteFit for every site that
    succeeded; ``errors`` maps the center tuple -> message for sites
    that failed.
    """

    __slots__ = ("shape", "order", "fits", "errors")

    def __init__(self, shape, order, fits, errors):
        self.shape = tuple(shape)
        self.order = int(order)
        self.fits = fits
        self.errors = dict(errors)

    def __iter__(self):
        return iter(self.fits.values())

    def __len__(self):
        return len(self.fits)

    def fit_for(self, site):
        return self.fits[site_to_linear(site, self.shape)]

    def kernels(self):
        """Package the fit as a KernelField (requires full site coverage)."""
        n_sites = int(np.prod(self.shape))
        if len(self.fits) != n_sites:
            raise ConfigurationError(
                f"fit covers {len(self.fits)} of {n_sites} sites "
                f"({len(self.errors)} failed); cannot form a kernel field"
            )
        fits = [self.fits[i] for i in range(n_sites)]
        return KernelField(
            self.shape,
            self.order,
            [f.neighborhood for f in fits],
            [f.coeffs_by_lag() for f in fits],
        )

    def to_dict(self):
        sites = []
        for fit in self.fits.values():
            nb = fit.neighborhood
            entry = {
                "center": list(fit.site),
                "sites": nb.sites.tolist(),
                "coeffs": fit.coeffs_by_lag().tolist(),
                "rss": fit.rss,
                "sigma2": fit.sigma2,
                "se": None if fit.se is None else fit.se.tolist(),
                "cond_flag": fit.cond_flag,
            }
            if nb.radii is not None:
                rs = set(nb.radii)
                entry["k"] = nb.radii[0] if len(rs) == 1 else list(nb.radii)
            sites.append(entry)
        return {
            "shape": list(self.shape),
            "P": self.order,
            "sites": sites,
            "errors": {",".join(map(str, k)): v for k, v in self.errors.items()},
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def _normalize_neighborhood_map(series, neighborhoods):
    """Accept a list or a site->Neighborhood map; return (linear, nb) pairs
    sorted canonically."""
    if isinstance(neighborhoods, dict):
        items = list(neighborhoods.items())
        pairs = [(site_to_linear(site, series.shape), nb) for site, nb in items]
    else:
        pairs = [(site_to_linear(nb.center, series.shape), nb) for nb in neighborhoods]
    pairs.sort(key=lambda x: x[0])
    seen = set()
    for lin, nb in pairs:
        if lin in seen:
            raise ConfigurationError(
                f"duplicate neighborhood for site {nb.center}"
            )
        seen.add(lin)
        if nb.shape != series.shape:
            raise ConfigurationError(
                f"neighborhood at {nb.center} built for shape {nb.shape}, "
                f"series has {series.shape}"
            )
    return pairs


def fit_all(series, neighborhoods, order=1, n_workers=None, compute_se=True):
    """Fit every requested site independently, in parallel.

    Parameters
    ----------
    series : GridSeries
    neighborhoods : list of Neighborhood or dict site -> Neighborhood
        Sites to fit; a full canonical list fits the whole grid.
    order : int
        Lag order P.
    n_workers : int, optional
        Threads; defaults to LIAR_THREADS or the machine's cpu count.
    compute_se : bool
        Attach plug-in standard errors to each clean fit.

    Returns
    -------
    FitReport
        Successful fits in canonical order; per-site failures collected
        in ``report.errors`` rather than raised.
    """
    pairs = _normalize_neighborhood_map(series, neighborhoods)
    workers = resolve_workers(n_workers)

    def work(pair):
        lin, nb = pair
        center = tuple(nb.center)
        try:
            design = assemble_design(series, center, nb, order)
            fit = fit_site(design)
            if compute_se and not fit.cond_flag:
                standard_errors(fit, design)
            fit._qr = None  # drop the cache; reports can be large
            return lin, fit, None
        except LiarError as exc:
            return lin, None, (center, str(exc))

    if workers == 1 or len(pairs) <= 1:
        results = [work(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, pairs, chunksize=max(1, len(pairs) // (8 * workers))))

    fits, errors = {}, {}
    for lin, fit, err in results:
        if fit is not None:
            fits[lin] = fit
        else:
            errors[err[0]] = err[1]
    return FitReport(series.shape, order, fits, errors)
