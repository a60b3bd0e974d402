"""Bundled datasets.

``load_campy`` returns a reconstructed campylobacteriosis surveillance
dataset (one time period, one location, six sources).  The published source
sampling effort and positive counts are used as-is; the per-type counts are
regenerated from the model with a fixed seed, calibrated so that the joint
fit reproduces the headline features of the original analysis (a dominant
poultry supplier, a small set of well-separated type-effect clusters
including a high-virulence group, and strong negative posterior correlations
between overlapping sources).  A fraction of positives is left untyped, as
in the real data: prevalence uses all positives, typed counts sum to less.
"""

import numpy as np

from .data import SourcePrevalence, SurveillanceData, empirical_prevalence

CAMPY_SEED = 8

CAMPY_SOURCES = ["ChickenA", "ChickenB", "ChickenC", "Bovine", "Ovine",
                 "Environment"]
CAMPY_TOTAL_SAMPLES = [239, 196, 127, 595, 552, 524]
CAMPY_POSITIVE_SAMPLES = [181, 113, 109, 97, 165, 86]
_TYPED_FRACTION = 0.85

# MLST sequence-type labels (common Campylobacter jejuni STs).
CAMPY_TYPES = [
    "1", "21", "25", "38", "42", "45", "48", "50", "52", "53",
    "61", "137", "190", "227", "257", "354", "422", "436", "451", "474",
    "520", "583", "677", "696", "829", "1517", "2026", "2343", "2026b",
    "3609", "3711", "3717", "5", "13", "17", "19", "22", "35", "37", "44",
    "58", "66", "81", "104", "177", "205", "262", "354b", "393", "403",
    "429", "440", "460", "508", "526", "658", "791", "883",
]

# True source effects: ChickenA dominates.
_ALPHA = np.array([0.33, 0.13, 0.08, 0.25, 0.15, 0.06])

# Type-effect clusters: background / low / mid / high-virulence.
_THETA = np.array([0.5, 150.0, 1500.0, 8000.0])
_N_HIGH = 9

# Source-association archetypes.  Two distinct poultry profiles make
# ChickenA overlap both ChickenB and Ovine, so posterior attribution trades
# off against both competitors at once.
#   P1: shared ChickenA+ChickenB, P2: shared ChickenA+Ovine,
#   then ruminant, generalist, environmental.
_N_ARCH = [14, 10, 6, 15, 13]
_BASE = {
    # concentration mass per archetype, per source
    #        P1    P2   rumin. gener. envir.
    0: np.array([2.5, 2.5, 0.08, 0.8, 0.25]),   # ChickenA
    1: np.array([3.0, 0.3, 0.08, 0.8, 0.25]),   # ChickenB
    2: np.array([1.5, 0.3, 0.10, 1.2, 0.90]),   # ChickenC: overlaps Environment
    3: np.array([0.01, 0.01, 2.6, 0.9, 0.15]),  # Bovine: ruminant/generalist
    4: np.array([0.3, 2.5, 1.2, 0.8, 0.30]),    # Ovine
    5: np.array([0.05, 0.05, 0.3, 0.8, 2.2]),   # Environment
}
_N_MID, _N_LOW = 14, 16
# mid-tier quota per archetype, so the minor sources carry real case mass
_MID_QUOTA = ((2, 3), (4, 4))


def _campy_truth(rng):
    n = len(CAMPY_TYPES)
    m = len(CAMPY_SOURCES)
    assoc = np.repeat(np.arange(5), _N_ARCH)
    rng.shuffle(assoc)
    r = np.empty((m, 1, n))
    for j in range(m):
        conc = _BASE[j][assoc]
        w = rng.dirichlet(conc)
        while not np.all(w > 0):
            w = rng.dirichlet(conc)
        r[j, 0] = w
    # Cluster labels: high-virulence types drawn from the poultry-overlap
    # and generalist archetypes, the rest split mid/low/background.
    labels = np.zeros(n, dtype=np.int64)
    pool = [i for i in range(n) if assoc[i] in (0, 1, 3)]
    high = rng.choice(pool, size=_N_HIGH, replace=False)
    labels[high] = 3
    rest = [i for i in range(n) if i not in set(high.tolist())]
    rng.shuffle(rest)
    mid = []
    for arch, cnt in _MID_QUOTA:
        mid += [i for i in rest if assoc[i] == arch][:cnt]
    others = [i for i in rest if i not in set(mid)]
    mid += others[:_N_MID - len(mid)]
    low = [i for i in others if i not in set(mid)][:_N_LOW]
    labels[np.array(mid)] = 2
    labels[np.array(low)] = 1
    # remaining stay background (0)
    return assoc, r, labels


def _build_campy():
    rng = np.random.default_rng(CAMPY_SEED)
    n = len(CAMPY_TYPES)
    m = len(CAMPY_SOURCES)
    totals = np.array(CAMPY_TOTAL_SAMPLES, dtype=np.int64)
    positives = np.array(CAMPY_POSITIVE_SAMPLES, dtype=np.int64)
    k = positives / totals
    _, r, labels = _campy_truth(rng)
    q = _THETA[labels]
    lam_i = q * (_ALPHA[None, :] * k[None, :] * r[:, 0].T).sum(axis=1)
    y = rng.poisson(lam_i).astype(np.int64)[:, None, None]
    typed = np.round(_TYPED_FRACTION * positives).astype(np.int64)
    x = np.zeros((n, m, 1), dtype=np.int64)
    for j in range(m):
        x[:, j, 0] = rng.multinomial(typed[j], r[j, 0])
    data = SurveillanceData(types=list(CAMPY_TYPES), sources=list(CAMPY_SOURCES),
                            times=["1"], locations=["A"], y=y, x=x)
    prevalence = empirical_prevalence(totals[:, None], positives[:, None],
                                      sources=list(CAMPY_SOURCES), times=["1"])
    return data, prevalence


_CACHE = {}


def load_campy():
    """The bundled campylobacteriosis dataset (data, prevalence)."""
    if "campy" not in _CACHE:
        _CACHE["campy"] = _build_campy()
    data, prevalence = _CACHE["campy"]
    return data, prevalence


def write_campy(data_path, prevalence_path):
    """Write the bundled dataset as the standard CSV pair."""
    from .io import write_counts_csv, write_prevalence_csv
    data, prevalence = load_campy()
    write_counts_csv(data, data_path)
    write_prevalence_csv(prevalence, prevalence_path)
