"""CSV readers and writers. Floats are written with 17 significant digits."""

import csv

import numpy as np

from .probit import Dataset


def fmt(x):
    return format(float(x), ".17g")


def _rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.reader(lines))


def _columns(path, required):
    rows = _rows(path)
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}")
    idx = [header.index(c) for c in required]
    try:
        data = [[float(r[i]) for i in idx] for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from exc
    return np.array(data, dtype=float).reshape(-1, len(required))


def write_csv(path, header, columns, comments=()):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([v if isinstance(v, str) else
                        (str(int(v)) if isinstance(v, (bool, np.bool_, np.integer))
                         else fmt(v)) for v in row])


def read_im(path):
    """IM values from a CSV with an ``im`` column."""
    return _columns(path, ["im"])[:, 0]


def write_im(path, values):
    write_csv(path, ["im"], [values])


def read_dataset(path):
    """Dataset from a CSV with ``im`` and ``failure`` columns."""
    arr = _columns(path, ["im", "failure"])
    return Dataset(arr[:, 0], arr[:, 1].astype(int))


def write_dataset(path, data, provenance=None):
    comments = [f"provenance: {provenance}"] if provenance else []
    write_csv(path, ["im", "failure"], [data.im, data.failed.astype(int)],
              comments)


def write_chain(path, chain):
    write_csv(path, ["alpha", "beta", "log_post"],
              [chain.alpha, chain.beta, chain.log_target])


def read_chain(path):
    """``(alpha, beta)`` arrays from a chain CSV."""
    arr = _columns(path, ["alpha", "beta"])
    return arr[:, 0], arr[:, 1]


def write_band(path, band):
    write_csv(path, ["a", "lower", "median", "upper"],
              [band.a_grid, band.lower, band.median, band.upper])


def write_bootstrap(path, boot):
    write_csv(path, ["alpha", "beta", "degenerate"],
              [boot.alpha, boot.beta, boot.degenerate.astype(int)])


def write_mc_curve(path, curve):
    write_csv(path, ["centroid", "rate", "ci_low", "ci_high", "n"],
              [curve.centroids, curve.failure_rates, curve.ci_low,
               curve.ci_high, curve.cluster_sizes.astype(int)])


def write_summary(path, summary):
    rows = summary.rows
    write_csv(path, ["k", "method", "metric", "mean", "lo", "hi", "n_excluded"],
              [[r.k for r in rows], [r.method for r in rows],
               [r.metric for r in rows], [r.mean for r in rows],
               [r.lo for r in rows], [r.hi for r in rows],
               [r.n_excluded for r in rows]])
