"""Diversity and distribution-quality metrics.

Per-layer feature distances use a small frozen embedder in place of a pretrained
network. Fréchet distance is the exact Gaussian form. NDB bins come from K-means
over real samples, with a pooled two-proportion z-test per bin.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm
from sklearn.cluster import KMeans

from .errors import NotPSDError, ShapeError
from .rng import EMBED, rng_stream


class FeatureEmbedder:
    """Frozen stack of dense layers; ``features(x)`` returns one array per layer.

    ``channel_weights[l]`` scales the feature differences of layer ``l``. The
    vector realization has no spatial extent, so each layer's 1/(H W) factor is 1.
    """

    def __init__(self, weights, biases=None, act="tanh", channel_weights=None):
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.zeros(w.shape[1]) if biases is None else np.array(b, dtype=np.float64)
                       for w, b in zip(self.weights, biases or [None] * len(self.weights))]
        self.act = act
        if channel_weights is None:
            channel_weights = [np.ones(w.shape[1]) for w in self.weights]
        self.channel_weights = [np.array(c, dtype=np.float64) for c in channel_weights]
        if any((c < 0).any() for c in self.channel_weights):
            raise ValueError("channel weights must be non-negative")
        for arr in self.weights + self.biases + self.channel_weights:
            arr.setflags(write=False)

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def in_width(self):
        return self.weights[0].shape[0]

    def features(self, x):
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.in_width:
            raise ShapeError("features", h.shape, (self.in_width,))
        out = []
        for w, b in zip(self.weights, self.biases):
            h = h @ w + b
            if self.act == "tanh":
                h = np.tanh(h)
            elif self.act == "relu":
                h = np.maximum(h, 0.0)
            out.append(h)
        return out


def random_embedder(seed, in_dim=2, widths=(16, 16, 16)):
    rng = rng_stream(seed, EMBED)
    dims = [in_dim, *widths]
    weights = [rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b)) for a, b in zip(dims, dims[1:])]
    biases = [rng.normal(0.0, 0.1, size=b) for b in widths]
    return FeatureEmbedder(weights, biases, act="tanh")


def lpips_distance(x1, x2, embedder, layers=None):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ShapeError("lpips_distance", x1.shape, x2.shape)
    f1, f2 = embedder.features(x1), embedder.features(x2)
    layers = range(embedder.n_layers) if layers is None else layers
    total = 0.0
    for l in layers:
        diff = embedder.channel_weights[l] * (f1[l] - f2[l])
        total += float(np.sum(diff * diff))
    return total


def _pairwise_sq_sum(feats, w):
    # sum over ordered pairs j != k of ||w*(f_j - f_k)||^2 = 2 m sum_j ||w*(f_j - mean)||^2
    f = feats * w
    centered = f - f.mean(axis=0)
    return 2.0 * len(f) * float(np.sum(centered * centered))


def _check_batch(batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or len(batch) < 2:
        raise ValueError(f"diversity needs a batch of at least 2 samples, got shape {batch.shape}")
    return batch


def diversity_per_layer(batch, embedder):
    """Ordered-pair diversity of every embedder layer (0-based list)."""
    batch = _check_batch(batch)
    feats = embedder.features(batch)
    return [_pairwise_sq_sum(f, w) for f, w in zip(feats, embedder.channel_weights)]


def layer_diversity(batch, l, embedder):
    """Diversity of embedder layer ``l`` (1-based): sum over ordered pairs j != k."""
    if not 1 <= l <= embedder.n_layers:
        raise IndexError(f"embedder layer {l} outside 1..{embedder.n_layers}")
    return diversity_per_layer(batch, embedder)[l - 1]


def total_diversity(batch, embedder):
    return float(sum(diversity_per_layer(batch, embedder)))


def _psd_sqrt(mat, tol):
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    if vals.min() < -tol:
        raise NotPSDError(vals.min(), tol)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T, vals


def frechet_distance(real, gen, tol=1e-8):
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)) between Gaussian fits."""
    real = np.atleast_2d(np.asarray(real, dtype=np.float64))
    gen = np.atleast_2d(np.asarray(gen, dtype=np.float64))
    if real.ndim != 2 or gen.ndim != 2 or real.shape[1] != gen.shape[1]:
        raise ShapeError("frechet_distance", real.shape, gen.shape)
    if len(real) < 2 or len(gen) < 2:
        raise ValueError("need at least 2 samples per side")
    mu1, mu2 = real.mean(axis=0), gen.mean(axis=0)
    s1 = np.atleast_2d(np.cov(real, rowvar=False, ddof=1))
    s2 = np.atleast_2d(np.cov(gen, rowvar=False, ddof=1))
    root1, _ = _psd_sqrt(s1, tol)
    _, vals = _psd_sqrt(root1 @ s2 @ root1, tol)
    trace_cross = float(np.sum(np.sqrt(vals)))
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * trace_cross)


@dataclass
class BinningModel:
    centroids: np.ndarray
    p_real: np.ndarray
    n_real: int

    @property
    def k(self):
        return len(self.centroids)

    def assign(self, x):
        x = np.asarray(x, dtype=np.float64)
        d2 = ((x[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=-1)
        return np.argmin(d2, axis=1)  # ties go to the lowest index

    def proportions(self, x):
        counts = np.bincount(self.assign(x), minlength=self.k)
        return counts / counts.sum()


def ndb_fit(real, k, rng, n_init=5, max_iter=100):
    real = np.asarray(real, dtype=np.float64)
    if len(real) < k:
        raise ValueError(f"need at least k={k} real samples, got {len(real)}")
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, max_iter=max_iter,
                random_state=int(rng.integers(2**31 - 1)))
    km.fit(real)
    model = BinningModel(km.cluster_centers_.astype(np.float64), None, len(real))
    model.p_real = model.proportions(real)
    return model


def jsd(p, q):
    """Jensen-Shannon divergence in nats, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / m[nz])))

    return max(0.0, 0.5 * kl(p) + 0.5 * kl(q))


def two_proportion_z(p1, n1, p2, n2):
    """Pooled two-proportion z statistics; 0 where both proportions are 0 or 1."""
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    se = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (p1 - p2) / se, 0.0)
    return z


def different_bins(model, gen, alpha=0.05):
    """Boolean flag per bin: real and generated occupancy differ at level ``alpha``."""
    gen = np.asarray(gen, dtype=np.float64)
    if len(gen) < 1:
        raise ValueError("need at least one generated sample")
    p_gen = model.proportions(gen)
    z = two_proportion_z(model.p_real, model.n_real, p_gen, len(gen))
    return np.abs(z) > norm.ppf(1.0 - alpha / 2.0), p_gen


def ndb_score(model, gen, alpha=0.05):
    """(number of statistically different bins, JSD of bin proportions)."""
    flags, p_gen = different_bins(model, gen, alpha)
    return int(flags.sum()), jsd(model.p_real, p_gen)


@dataclass
class MetricsReport:
    fid: float
    ndb: int
    jsd: float
    diversity_total: float
    diversity_per_layer: list
    k: int
    m: int
    seed: int = None
    variant: str = None
    config_hash: str = None
    coverage: int = None
    extra: dict = field(default_factory=dict)

    def check(self):
        if not 0 <= self.ndb <= self.k:
            raise ValueError(f"ndb {self.ndb} outside [0, {self.k}]")
        if not 0.0 <= self.jsd <= np.log(2.0) + 1e-12:
            raise ValueError(f"jsd {self.jsd} outside [0, ln 2]")
        if self.fid < -1e-8:
            raise ValueError(f"fid {self.fid} is negative")
        return self

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_header(self):
        cols = ["seed", "variant", "fid", "ndb", "jsd", "diversity_total"]
        cols += [f"diversity_l{l + 1}" for l in range(len(self.diversity_per_layer))]
        return cols + ["coverage"]

    def csv_row(self):
        return [self.seed, self.variant, self.fid, self.ndb, self.jsd, self.diversity_total,
                *self.diversity_per_layer, self.coverage]

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


def evaluate_points(real, gen, embedder, k=20, alpha=0.05, rng=None, model=None):
    """MetricsReport for two point sets: FID on final embedder features, NDB/JSD on raw points."""
    real = np.asarray(real, dtype=np.float64)
    gen = np.asarray(gen, dtype=np.float64)
    if model is None:
        model = ndb_fit(real, k, rng if rng is not None else np.random.default_rng(0))
    ndb, js = ndb_score(model, gen, alpha)
    fid = frechet_distance(embedder.features(real)[-1], embedder.features(gen)[-1])
    per_layer = diversity_per_layer(gen, embedder)
    return MetricsReport(fid=fid, ndb=ndb, jsd=js, diversity_total=float(sum(per_layer)),
                         diversity_per_layer=per_layer, k=model.k, m=len(gen)).check()
