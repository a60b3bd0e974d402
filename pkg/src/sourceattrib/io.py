"""Long-format CSV ingestion and export.

The count file has one row per (type, time, location) with a ``Human``
column, one column per source, and ``Type``/``Time``/``Location`` columns.
Source counts are not location resolved, so rows for the same (type, time)
must repeat identical source counts across locations.  The prevalence file
has ``Value``/``Source``/``Time`` columns.
"""

import numpy as np
import pandas as pd

from .data import SourcePrevalence, SurveillanceData, ValidationError

FLOAT_FMT = "%.17g"  # full round-trip precision

_RESERVED = ("Human", "Type", "Time", "Location")


def read_counts_csv(path):
    df = pd.read_csv(path, dtype=str)
    for col in _RESERVED:
        if col not in df.columns:
            raise ValidationError(f"{path}: missing required column {col!r}")
    sources = [c for c in df.columns if c not in _RESERVED]
    if not sources:
        raise ValidationError(f"{path}: no source columns found")

    def ordered_unique(col):
        return list(dict.fromkeys(df[col].astype(str)))

    types = ordered_unique("Type")
    times = ordered_unique("Time")
    locations = ordered_unique("Location")
    ti = {v: i for i, v in enumerate(types)}
    tt = {v: i for i, v in enumerate(times)}
    tl = {v: i for i, v in enumerate(locations)}

    n, m, T, L = len(types), len(sources), len(times), len(locations)
    y = np.full((n, T, L), -1, dtype=np.int64)
    x = np.full((n, m, T, L), -1, dtype=np.int64)
    for row_num, row in enumerate(df.itertuples(index=False), start=2):
        rec = dict(zip(df.columns, row))
        i = ti[str(rec["Type"])]
        t = tt[str(rec["Time"])]
        l = tl[str(rec["Location"])]
        if y[i, t, l] >= 0:
            raise ValidationError(
                f"{path}: duplicate (Type,Time,Location)="
                f"({types[i]},{times[t]},{locations[l]}) at row {row_num}")
        y[i, t, l] = _parse_count(rec["Human"], path, row_num, "Human")
        for j, src in enumerate(sources):
            x[i, j, t, l] = _parse_count(rec[src], path, row_num, src)
    missing = np.argwhere(y < 0)
    if len(missing):
        i, t, l = missing[0]
        raise ValidationError(
            f"{path}: missing row for (Type,Time,Location)="
            f"({types[i]},{times[t]},{locations[l]})")
    # source counts must agree across locations within a time
    for l in range(1, L):
        if not np.array_equal(x[:, :, :, l], x[:, :, :, 0]):
            i, j, t = (int(v[0]) for v in
                       np.nonzero(x[:, :, :, l] != x[:, :, :, 0]))
            raise ValidationError(
                f"{path}: source counts differ across locations for "
                f"(Type={types[i]}, Source={sources[j]}, Time={times[t]})")
    return SurveillanceData(types=types, sources=sources, times=times,
                            locations=locations, y=y, x=x[:, :, :, 0])


def _parse_count(value, path, row_num, col):
    try:
        fval = float(value)
    except (TypeError, ValueError):
        raise ValidationError(
            f"{path}: non-numeric count {value!r} in column {col!r} "
            f"at row {row_num}") from None
    if fval != int(fval):
        raise ValidationError(
            f"{path}: non-integer count {value!r} in column {col!r} "
            f"at row {row_num}")
    if fval < 0:
        raise ValidationError(
            f"{path}: negative count {value!r} in column {col!r} "
            f"at row {row_num}")
    return int(fval)


def read_prevalence_csv(path, data):
    df = pd.read_csv(path, dtype=str)
    for col in ("Value", "Source", "Time"):
        if col not in df.columns:
            raise ValidationError(f"{path}: missing required column {col!r}")
    m, T = len(data.sources), len(data.times)
    k = np.full((m, T), np.nan)
    for row_num, row in enumerate(df.itertuples(index=False), start=2):
        rec = dict(zip(df.columns, row))
        src, tim = str(rec["Source"]), str(rec["Time"])
        if src not in data.sources:
            raise ValidationError(
                f"{path}: unknown source {src!r} at row {row_num}; "
                f"data sources: {data.sources}")
        if tim not in data.times:
            raise ValidationError(
                f"{path}: unknown time {tim!r} at row {row_num}")
        j, t = data.sources.index(src), data.times.index(tim)
        if not np.isnan(k[j, t]):
            raise ValidationError(
                f"{path}: duplicate prevalence for ({src}, {tim}) "
                f"at row {row_num}")
        try:
            k[j, t] = float(rec["Value"])
        except (TypeError, ValueError):
            raise ValidationError(
                f"{path}: non-numeric prevalence {rec['Value']!r} "
                f"at row {row_num}") from None
    if np.any(np.isnan(k)):
        j, t = (int(v[0]) for v in np.nonzero(np.isnan(k)))
        raise ValidationError(
            f"{path}: missing prevalence for "
            f"({data.sources[j]}, {data.times[t]})")
    return SourcePrevalence(sources=data.sources, times=data.times, k=k)


def ingest(data_csv, prevalence_csv):
    """Read and cross-validate the count and prevalence files."""
    data = read_counts_csv(data_csv)
    prevalence = read_prevalence_csv(prevalence_csv, data)
    return data, prevalence


def write_counts_csv(data, path):
    n, m, T, L = data.shape
    rows = []
    for i in range(n):
        for t in range(T):
            for l in range(L):
                row = {"Human": data.y[i, t, l]}
                for j, src in enumerate(data.sources):
                    row[src] = data.x[i, j, t]
                row.update(Type=data.types[i], Time=data.times[t],
                           Location=data.locations[l])
                rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False)


def write_prevalence_csv(prevalence, path):
    rows = []
    for j, src in enumerate(prevalence.sources):
        for t, tim in enumerate(prevalence.times):
            rows.append({"Value": FLOAT_FMT % prevalence.k[j, t],
                         "Source": src, "Time": tim})
    pd.DataFrame(rows).to_csv(path, index=False)


def write_chain_csvs(chain, out_dir, params=None, **selectors):
    """One long-format CSV per parameter; returns the written paths.

    ``selectors`` (types=, sources=, times=, locations=) restrict the
    written slices, as in :func:`posterior.extract`.
    """
    import os

    from .posterior import PARAM_DIMS, _selected_labels, extract

    os.makedirs(out_dir, exist_ok=True)
    arrays = extract(chain, params=params, **selectors)
    paths = []
    for p, arr in arrays.items():
        dims = PARAM_DIMS[p]
        labels = [_selected_labels(chain, d, selectors) for d in dims]
        S = arr.shape[0]
        flat = arr.reshape(S, -1)
        cols = {"sample": np.repeat(np.arange(S), flat.shape[1])}
        if dims:
            coords = np.array(np.unravel_index(np.arange(flat.shape[1]),
                                               arr.shape[1:])).T
            for d_idx, d in enumerate(dims):
                col = [labels[d_idx][c] for c in coords[:, d_idx]]
                cols[d] = np.tile(col, S)
        values = flat.ravel()
        if np.issubdtype(values.dtype, np.integer):
            cols["value"] = values
        else:
            cols["value"] = [FLOAT_FMT % v for v in values]
        path = os.path.join(out_dir, f"{p}.csv")
        pd.DataFrame(cols).to_csv(path, index=False)
        paths.append(path)
    return paths
