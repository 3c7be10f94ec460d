"""Synthetic behavioral-trajectory generation.

A trajectory (time-ordered indicator events for one person) is mapped
into a fixed-length [0,1] vector — per category, a presence bit and the
empirical-CDF position of the first event — and an adversarial
autoencoder is trained on those vectors: the autoencoder minimizes
reconstruction error while a discriminator pushes the latent code toward
a standard Gaussian prior. Sampling the prior and decoding yields new
trajectories that follow the dataset's per-category timing statistics
without copying any real record.

All networks are small dense MLPs implemented here with plain SGD so
training is self-contained, single-threaded, and bit-reproducible.
"""

from __future__ import annotations

import bisect
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .store import date_to_days, days_to_date, parse_iso_date
from .taxonomy import IndicatorTaxonomy

logger = logging.getLogger(__name__)

PRESENCE_THRESHOLD = 0.5


class SynthError(Exception):
    pass


class EmptyDatasetError(SynthError):
    pass


class UnknownCategoryError(SynthError):
    pass


class DimensionMismatchError(SynthError):
    pass


class ConfigInvalidError(SynthError):
    pass


class NonFiniteLossError(SynthError):
    """Training produced NaN/inf; message carries the failing step."""


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Event:
    t: dt.date
    c: str


@dataclass(frozen=True)
class Trajectory:
    person: str | None
    events: tuple[Event, ...]  # sorted by (t, c)

    @staticmethod
    def make(person: str | None, events) -> "Trajectory":
        return Trajectory(person, tuple(sorted(events)))

    def categories(self) -> set[str]:
        return {e.c for e in self.events}

    def first_event_day(self, category: str) -> int | None:
        for e in self.events:  # sorted, so first hit is earliest
            if e.c == category:
                return date_to_days(e.t)
        return None


def parse_trajectory_line(line: str) -> Trajectory:
    record = json.loads(line)
    events = [Event(parse_iso_date(e["t"]), str(e["c"]))
              for e in record.get("events", [])]
    person = record.get("person")
    return Trajectory.make(None if person is None else str(person), events)


def trajectory_line(trajectory: Trajectory) -> str:
    return json.dumps({
        "person": trajectory.person,
        "events": [{"t": e.t.isoformat(), "c": e.c} for e in trajectory.events],
    }, ensure_ascii=False)


def load_trajectories(lines) -> list[Trajectory]:
    return [parse_trajectory_line(line) for line in lines if line.strip()]


# ---------------------------------------------------------------------------
# Feature mapping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryCdf:
    """Empirical CDF of one category's event timestamps (in days).

    Stored as distinct support days with their cumulative fractions;
    F(t) = fraction of samples ≤ t. A category with no samples is
    unusable and always encodes (0, 0).
    """

    days: tuple[int, ...]
    fractions: tuple[float, ...]

    @property
    def usable(self) -> bool:
        return bool(self.days)

    @staticmethod
    def fit(samples: list[int]) -> "CategoryCdf":
        if not samples:
            return CategoryCdf((), ())
        ordered = sorted(samples)
        n = len(ordered)
        days = tuple(sorted(set(ordered)))
        fractions = tuple(bisect.bisect_right(ordered, d) / n for d in days)
        return CategoryCdf(days, fractions)

    def value(self, day: int) -> float:
        """F(day): fraction of fitted samples at or before the day."""
        i = bisect.bisect_right(self.days, day)
        return self.fractions[i - 1] if i else 0.0

    def inverse(self, u: float) -> int:
        """Linear interpolation between support points, clamped to [min, max]."""
        if u <= self.fractions[0]:
            return self.days[0]
        if u >= self.fractions[-1]:
            return self.days[-1]
        j = bisect.bisect_left(self.fractions, u)
        if self.fractions[j] == u:
            return self.days[j]
        p0, p1 = self.fractions[j - 1], self.fractions[j]
        x0, x1 = self.days[j - 1], self.days[j]
        x = x0 + (u - p0) / (p1 - p0) * (x1 - x0)
        return min(max(round(x), self.days[0]), self.days[-1])


@dataclass(frozen=True)
class FeatureMapper:
    categories: tuple[str, ...]
    cdfs: dict[str, CategoryCdf]

    @property
    def dim(self) -> int:
        return 2 * len(self.categories)

    def to_dict(self) -> dict:
        return {
            "categories": list(self.categories),
            "cdfs": {
                c: {"days": list(f.days), "fractions": list(f.fractions)}
                for c, f in self.cdfs.items()
            },
        }

    @staticmethod
    def from_dict(record: dict) -> "FeatureMapper":
        return FeatureMapper(
            categories=tuple(record["categories"]),
            cdfs={
                c: CategoryCdf(tuple(v["days"]), tuple(v["fractions"]))
                for c, v in record["cdfs"].items()
            },
        )


def fit_mapper(dataset: list[Trajectory], tax: IndicatorTaxonomy) -> FeatureMapper:
    """Fit one empirical timestamp CDF per taxonomy category.

    Raises:
        EmptyDatasetError: no trajectories.
        UnknownCategoryError: an event category outside the taxonomy.
    """
    if not dataset:
        raise EmptyDatasetError("no trajectories to fit")
    samples: dict[str, list[int]] = {c: [] for c in tax.categories}
    for trajectory in dataset:
        for event in trajectory.events:
            if event.c not in samples:
                raise UnknownCategoryError(f"category {event.c!r} not in taxonomy")
            samples[event.c].append(date_to_days(event.t))
    return FeatureMapper(
        categories=tax.categories,
        cdfs={c: CategoryCdf.fit(samples[c]) for c in tax.categories},
    )


def encode_features(mapper: FeatureMapper, trajectory: Trajectory) -> np.ndarray:
    """Trajectory -> [presence_c, time_c] per category (length 2C).

    presence is 1 when the trajectory holds at least one event of the
    category; time is the CDF position of the earliest such event.
    """
    v = np.zeros(mapper.dim, dtype=np.float64)
    for event in trajectory.events:
        if event.c not in mapper.cdfs:
            raise UnknownCategoryError(f"category {event.c!r} not in mapper")
    for i, c in enumerate(mapper.categories):
        day = trajectory.first_event_day(c)
        if day is None:
            continue
        cdf = mapper.cdfs[c]
        if not cdf.usable:
            continue  # unseen during fitting: forced (0, 0)
        v[2 * i] = 1.0
        v[2 * i + 1] = cdf.value(day)
    return v


def decode_features(mapper: FeatureMapper, v: np.ndarray) -> Trajectory:
    """Inverse of encode_features (presence at 0.5, CDF inversion for time)."""
    if len(v) != mapper.dim:
        raise DimensionMismatchError(f"expected {mapper.dim} values, got {len(v)}")
    events = []
    for i, c in enumerate(mapper.categories):
        cdf = mapper.cdfs[c]
        if v[2 * i] >= PRESENCE_THRESHOLD and cdf.usable:
            day = cdf.inverse(float(v[2 * i + 1]))
            events.append(Event(days_to_date(day), c))
    return Trajectory.make(None, events)


# ---------------------------------------------------------------------------
# Dense networks
# ---------------------------------------------------------------------------

class Mlp:
    """Dense network with tanh hidden layers, trained by plain SGD.

    out_activation is "linear" (identity) or "sigmoid". forward returns
    the output plus an activation cache; backward consumes the cache and
    dL/d(output) and returns per-layer gradients plus dL/d(input).
    """

    def __init__(self, sizes: tuple[int, ...], out_activation: str,
                 rng: np.random.Generator):
        if out_activation not in ("linear", "sigmoid"):
            raise ValueError(f"bad out_activation {out_activation!r}")
        self.sizes = tuple(sizes)
        self.out_activation = out_activation
        self.weights = [
            rng.standard_normal((sizes[i], sizes[i + 1])) / math.sqrt(sizes[i])
            for i in range(len(sizes) - 1)
        ]
        self.biases = [np.zeros(sizes[i + 1], dtype=np.float64)
                       for i in range(len(sizes) - 1)]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        activations = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < last:
                a = np.tanh(z)
            elif self.out_activation == "sigmoid":
                a = _sigmoid(z)
            else:
                a = z
            activations.append(a)
        return a, activations

    def backward(self, activations: list[np.ndarray], grad_out: np.ndarray
                 ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        out = activations[-1]
        if self.out_activation == "sigmoid":
            delta = grad_out * out * (1.0 - out)
        else:
            delta = grad_out
        grads_w = [np.empty(0)] * len(self.weights)
        grads_b = [np.empty(0)] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = activations[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            upstream = delta @ self.weights[i].T
            if i > 0:
                delta = upstream * (1.0 - activations[i] ** 2)
            else:
                delta = upstream
        return grads_w, grads_b, delta

    def sgd_step(self, grads_w, grads_b, lr: float) -> None:
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb

    # Flat-view helpers used by persistence and finite-difference checks.
    def get_flat(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b for b in self.biases])

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for w in self.weights:
            w[...] = flat[pos:pos + w.size].reshape(w.shape)
            pos += w.size
        for b in self.biases:
            b[...] = flat[pos:pos + b.size]
            pos += b.size

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "out_activation": self.out_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @staticmethod
    def from_dict(record: dict) -> "Mlp":
        net = Mlp(tuple(record["sizes"]), record["out_activation"],
                  np.random.default_rng(0))
        net.weights = [np.array(w, dtype=np.float64) for w in record["weights"]]
        net.biases = [np.array(b, dtype=np.float64) for b in record["biases"]]
        return net


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy computed stably from raw logits."""
    per = (np.maximum(logits, 0.0) - logits * targets
           + np.log1p(np.exp(-np.abs(logits))))
    return float(per.mean())


# ---------------------------------------------------------------------------
# Loss phases (shared by training and the finite-difference checks)
# ---------------------------------------------------------------------------

def reconstruction_phase(encoder: Mlp, decoder: Mlp, x: np.ndarray):
    """MSE(x, decoder(encoder(x))) with gradients for both networks."""
    z, enc_cache = encoder.forward(x)
    xhat, dec_cache = decoder.forward(z)
    loss = float(np.mean((xhat - x) ** 2))
    grad = 2.0 * (xhat - x) / xhat.size
    dec_gw, dec_gb, dz = decoder.backward(dec_cache, grad)
    enc_gw, enc_gb, _ = encoder.backward(enc_cache, dz)
    return loss, (enc_gw, enc_gb), (dec_gw, dec_gb)


def discriminator_phase(disc: Mlp, z_fake: np.ndarray, z_prior: np.ndarray):
    """Cross-entropy separating encoder codes (0) from prior draws (1)."""
    batch = np.concatenate([z_fake, z_prior], axis=0)
    targets = np.concatenate([
        np.zeros((len(z_fake), 1)), np.ones((len(z_prior), 1))])
    logits, cache = disc.forward(batch)
    loss = bce_with_logits(logits, targets)
    dlogit = (_sigmoid(logits) - targets) / logits.size
    gw, gb, _ = disc.backward(cache, dlogit)
    return loss, (gw, gb)


def generator_phase(encoder: Mlp, disc: Mlp, x: np.ndarray):
    """Encoder update: make its codes look like prior samples to the critic."""
    z, enc_cache = encoder.forward(x)
    logits, disc_cache = disc.forward(z)
    targets = np.ones((len(z), 1))
    loss = bce_with_logits(logits, targets)
    dlogit = (_sigmoid(logits) - targets) / logits.size
    _, _, dz = disc.backward(disc_cache, dlogit)
    gw, gb, _ = encoder.backward(enc_cache, dz)
    return loss, (gw, gb)


# ---------------------------------------------------------------------------
# Model + training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    kind: str = "StandardGaussian"
    dim: int = 8


@dataclass(frozen=True)
class AAEConfig:
    latent_dim: int = 8
    encoder_hidden: tuple[int, ...] = (32,)
    decoder_hidden: tuple[int, ...] = (32,)
    disc_hidden: tuple[int, ...] = (16,)
    epochs: int = 40
    batch_size: int = 32
    recon_lr: float = 0.05
    adversarial_lr: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        if self.latent_dim < 1:
            raise ConfigInvalidError("latent_dim must be >= 1")
        for name in ("encoder_hidden", "decoder_hidden", "disc_hidden"):
            sizes = getattr(self, name)
            if not sizes or any(int(s) < 1 for s in sizes):
                raise ConfigInvalidError(f"{name} must be nonempty positive sizes")
        if self.epochs < 0:
            raise ConfigInvalidError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigInvalidError("batch_size must be >= 1")
        if not (self.recon_lr > 0 and math.isfinite(self.recon_lr)):
            raise ConfigInvalidError("recon_lr must be positive and finite")
        if not (self.adversarial_lr > 0 and math.isfinite(self.adversarial_lr)):
            raise ConfigInvalidError("adversarial_lr must be positive and finite")

    def to_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "encoder_hidden": list(self.encoder_hidden),
            "decoder_hidden": list(self.decoder_hidden),
            "disc_hidden": list(self.disc_hidden),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "recon_lr": self.recon_lr,
            "adversarial_lr": self.adversarial_lr,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(record: dict) -> "AAEConfig":
        if not isinstance(record, dict):
            raise ConfigInvalidError("config must be an object")
        known = {
            "latent_dim", "encoder_hidden", "decoder_hidden", "disc_hidden",
            "epochs", "batch_size", "recon_lr", "adversarial_lr", "seed",
        }
        unknown = set(record) - known
        if unknown:
            raise ConfigInvalidError(f"unknown config keys: {sorted(unknown)}")
        defaults = AAEConfig()
        try:
            cfg = AAEConfig(
                latent_dim=int(record.get("latent_dim", defaults.latent_dim)),
                encoder_hidden=tuple(
                    int(s) for s in record.get("encoder_hidden",
                                               defaults.encoder_hidden)),
                decoder_hidden=tuple(
                    int(s) for s in record.get("decoder_hidden",
                                               defaults.decoder_hidden)),
                disc_hidden=tuple(
                    int(s) for s in record.get("disc_hidden",
                                               defaults.disc_hidden)),
                epochs=int(record.get("epochs", defaults.epochs)),
                batch_size=int(record.get("batch_size", defaults.batch_size)),
                recon_lr=float(record.get("recon_lr", defaults.recon_lr)),
                adversarial_lr=float(
                    record.get("adversarial_lr", defaults.adversarial_lr)),
                seed=int(record.get("seed", defaults.seed)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigInvalidError(f"bad config value: {exc}") from exc
        cfg.validate()
        return cfg


@dataclass
class AAEModel:
    config: AAEConfig
    prior: PriorSpec
    encoder: Mlp
    decoder: Mlp
    discriminator: Mlp

    def encode(self, x: np.ndarray) -> np.ndarray:
        return self.encoder.forward(x)[0]

    def decode(self, z: np.ndarray) -> np.ndarray:
        return self.decoder.forward(z)[0]


def train_aae(dataset: list[Trajectory], mapper: FeatureMapper,
              config: AAEConfig) -> tuple[AAEModel, list[dict]]:
    """Train the adversarial autoencoder on feature-mapped trajectories.

    Each batch runs three updates: reconstruction (encoder+decoder, MSE),
    discriminator (encoder codes vs prior draws, cross-entropy), and
    generator (encoder pushed to fool the discriminator). Returns the
    model and a per-batch loss curve with exactly
    epochs × ceil(N / batch_size) entries.

    Raises:
        EmptyDatasetError, ConfigInvalidError, NonFiniteLossError.
    """
    if not dataset:
        raise EmptyDatasetError("no trajectories to train on")
    config.validate()
    x_all = np.stack([encode_features(mapper, t) for t in dataset])
    rng = np.random.default_rng(config.seed)
    dim = mapper.dim

    encoder = Mlp((dim, *config.encoder_hidden, config.latent_dim),
                  "linear", rng)
    decoder = Mlp((config.latent_dim, *config.decoder_hidden, dim),
                  "sigmoid", rng)
    disc = Mlp((config.latent_dim, *config.disc_hidden, 1), "linear", rng)
    prior = PriorSpec(dim=config.latent_dim)
    model = AAEModel(config, prior, encoder, decoder, disc)

    n = len(x_all)
    batches = math.ceil(n / config.batch_size)
    curve: list[dict] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for batch in range(batches):
            rows = order[batch * config.batch_size:(batch + 1) * config.batch_size]
            x = x_all[rows]

            recon_loss, enc_grads, dec_grads = reconstruction_phase(
                encoder, decoder, x)
            encoder.sgd_step(*enc_grads, config.recon_lr)
            decoder.sgd_step(*dec_grads, config.recon_lr)

            z_fake = encoder.forward(x)[0]
            z_prior = rng.standard_normal((len(x), config.latent_dim))
            disc_loss, disc_grads = discriminator_phase(disc, z_fake, z_prior)
            disc.sgd_step(*disc_grads, config.adversarial_lr)

            gen_loss, gen_grads = generator_phase(encoder, disc, x)
            encoder.sgd_step(*gen_grads, config.adversarial_lr)

            entry = {"epoch": epoch, "batch": batch, "recon_loss": recon_loss,
                     "disc_loss": disc_loss, "gen_loss": gen_loss}
            for name in ("recon_loss", "disc_loss", "gen_loss"):
                if not math.isfinite(entry[name]):
                    raise NonFiniteLossError(
                        f"{name}={entry[name]} at epoch {epoch} batch {batch}; "
                        f"last good entry: {curve[-1] if curve else None}")
            curve.append(entry)
    return model, curve


def sample(model: AAEModel, mapper: FeatureMapper, n: int,
           seed: int = 0) -> list[Trajectory]:
    """Draw n prior samples and decode them into trajectories."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.config.latent_dim))
    decoded = model.decode(z)
    return [decode_features(mapper, decoded[i]) for i in range(n)]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def model_to_dict(model: AAEModel, mapper: FeatureMapper) -> dict:
    return {
        "config": model.config.to_dict(),
        "prior": {"kind": model.prior.kind, "dim": model.prior.dim},
        "encoder": model.encoder.to_dict(),
        "decoder": model.decoder.to_dict(),
        "discriminator": model.discriminator.to_dict(),
        "mapper": mapper.to_dict(),
    }


def model_from_dict(record: dict) -> tuple[AAEModel, FeatureMapper]:
    config = AAEConfig.from_dict(record["config"])
    prior = PriorSpec(record["prior"]["kind"], record["prior"]["dim"])
    model = AAEModel(
        config=config,
        prior=prior,
        encoder=Mlp.from_dict(record["encoder"]),
        decoder=Mlp.from_dict(record["decoder"]),
        discriminator=Mlp.from_dict(record["discriminator"]),
    )
    return model, FeatureMapper.from_dict(record["mapper"])


def save_model(model: AAEModel, mapper: FeatureMapper, path) -> None:
    with open(path, "w", encoding="utf-8") as sink:
        json.dump(model_to_dict(model, mapper), sink)


def load_model(path) -> tuple[AAEModel, FeatureMapper]:
    with open(path, encoding="utf-8") as source:
        return model_from_dict(json.load(source))


# ---------------------------------------------------------------------------
# Fidelity
# ---------------------------------------------------------------------------

def ks_statistic(a: list[float], b: list[float]) -> float:
    """Two-sample Kolmogorov–Smirnov statistic (sup CDF gap)."""
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    sa, sb = sorted(a), sorted(b)
    gap = 0.0
    for point in set(sa) | set(sb):
        fa = bisect.bisect_right(sa, point) / len(sa)
        fb = bisect.bisect_right(sb, point) / len(sb)
        gap = max(gap, abs(fa - fb))
    return gap


@dataclass(frozen=True)
class FidelityReport:
    per_category: dict[str, dict[str, float]]
    presence_l1_gap: float
    length_histogram_gap: float

    def to_dict(self) -> dict:
        return {
            "per_category": self.per_category,
            "presence_l1_gap": self.presence_l1_gap,
            "length_histogram_gap": self.length_histogram_gap,
        }


def fidelity_report(real: list[Trajectory], synthetic: list[Trajectory],
                    tax: IndicatorTaxonomy) -> FidelityReport:
    """Distribution gaps between a real and a synthetic trajectory set.

    Per category: absolute presence-frequency gap and the two-sample KS
    statistic over event timestamps. presence_l1_gap is the mean of the
    per-category gaps; the length gap is the total-variation distance
    between trajectory-length histograms.
    """
    if not real or not synthetic:
        raise EmptyDatasetError("both datasets must be nonempty")

    def presence_freq(dataset: list[Trajectory], c: str) -> float:
        return sum(1 for t in dataset if c in t.categories()) / len(dataset)

    def stamps(dataset: list[Trajectory], c: str) -> list[float]:
        return [float(date_to_days(e.t))
                for t in dataset for e in t.events if e.c == c]

    per_category = {}
    gaps = []
    for c in tax.categories:
        fr, fs = presence_freq(real, c), presence_freq(synthetic, c)
        per_category[c] = {
            "presence_real": fr,
            "presence_synthetic": fs,
            "presence_gap": abs(fr - fs),
            "ks": ks_statistic(stamps(real, c), stamps(synthetic, c)),
        }
        gaps.append(abs(fr - fs))
    presence_l1 = sum(gaps) / len(gaps)

    def length_hist(dataset: list[Trajectory]) -> dict[int, float]:
        hist: dict[int, float] = {}
        for t in dataset:
            hist[len(t.events)] = hist.get(len(t.events), 0.0) + 1.0
        return {k: v / len(dataset) for k, v in hist.items()}

    hr, hs = length_hist(real), length_hist(synthetic)
    length_gap = 0.5 * sum(
        abs(hr.get(k, 0.0) - hs.get(k, 0.0)) for k in set(hr) | set(hs))
    return FidelityReport(per_category, presence_l1, length_gap)
