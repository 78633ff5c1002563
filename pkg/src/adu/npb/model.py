"""Model containers: hyperparameters, latent assignments, the trained transducer."""

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ..errors import AduError, DataError, MalformedHeaderError, ModelNotFoundError
from .gaussian import COV_FLOOR, NIWPrior, component_loglik
from .sticks import StickWeights

VARIANTS = ("hdphmm", "dhdphmm")
MODEL_MAGIC = b"ADUMODEL"
MODEL_VERSION = 1


@dataclasses.dataclass
class Hyperparameters:
    gamma: float = 2.0
    alpha: float = 2.0
    kappa: float = 10.0
    sigma: float = 1.0
    tau: float = 2.0
    niw: NIWPrior | None = None
    resample: bool = True
    # Gamma(shape, rate) priors and the Beta prior on kappa / (alpha + kappa)
    gamma_prior: tuple = (1.0, 0.1)
    alpha_kappa_prior: tuple = (1.0, 0.01)
    rho_prior: tuple = (10.0, 1.0)
    sigma_prior: tuple = (1.0, 1.0)
    tau_prior: tuple = (1.0, 0.1)

    def __post_init__(self):
        for name in ("gamma", "alpha", "sigma", "tau"):
            if not getattr(self, name) > 0:
                raise AduError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.kappa >= 0:
            raise AduError(f"kappa must be nonnegative, got {self.kappa}")

    @property
    def rho(self):
        return self.kappa / (self.alpha + self.kappa)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("niw")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d, niw=None):
        d = dict(d)
        for k in ("gamma_prior", "alpha_kappa_prior", "rho_prior", "sigma_prior", "tau_prior"):
            if k in d:
                d[k] = tuple(d[k])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(niw=niw, **d)


@dataclasses.dataclass
class LatentAssignment:
    utterance_id: str
    z: np.ndarray
    s: np.ndarray


@dataclasses.dataclass
class TransducerModel:
    """Weak-limit HDPHMM / DHDPHMM with K states.

    HDPHMM: ``psi`` is (K, L) and components are private, ``means`` (K, L, D).
    DHDPHMM: ``psi`` is (K, G) over a shared pool, ``means`` (G, D), ``xi`` (G,).
    ``covs`` holds variances for diagonal models and matrices for full ones.
    """

    variant: str
    beta: StickWeights
    pi0: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    hyper: Hyperparameters
    covariance: str = "diag"
    xi: np.ndarray | None = None
    shared: bool = True
    occupancy: np.ndarray | None = None
    seed_lineage: list = dataclasses.field(default_factory=list)
    sweeps_done: int = 0
    trace: list = dataclasses.field(default_factory=list)

    @property
    def K(self):
        return self.pi.shape[0]

    @property
    def dim(self):
        return self.means.shape[-1]

    @property
    def state_count(self):
        if self.occupancy is None:
            return 0
        return int(np.count_nonzero(self.occupancy))

    def active_states(self, min_occupancy=0):
        if self.occupancy is None:
            return np.arange(self.K)
        return np.flatnonzero(self.occupancy > min_occupancy)

    def _flat_components(self):
        if self.variant == "hdphmm":
            K, L, D = self.means.shape
            covs = self.covs.reshape((K * L,) + self.covs.shape[2:])
            return self.means.reshape(K * L, D), covs
        return self.means, self.covs

    def component_loglik(self, X, states=None):
        """Per-component log densities: (T, K', L) for HDPHMM, (T, G) for DHDPHMM."""
        if self.variant == "hdphmm":
            means, covs = self.means, self.covs
            if states is not None:
                means, covs = means[states], covs[states]
            k, L, D = means.shape
            flat = component_loglik(X, means.reshape(k * L, D),
                                    covs.reshape((k * L,) + covs.shape[2:]), self.covariance)
            return flat.reshape(-1, k, L)
        return component_loglik(X, self.means, self.covs, self.covariance)

    def state_loglik(self, X, states=None, comp=None):
        """Mixture log-likelihood log sum_k psi_jk N(x; theta_jk), shape (T, K')."""
        if comp is None:
            comp = self.component_loglik(X, states)
        psi = self.psi if states is None else self.psi[states]
        with np.errstate(divide="ignore"):
            log_psi = np.log(psi)
        if self.variant == "hdphmm":
            return logsumexp(comp + log_psi[None, :, :], axis=2)
        return logsumexp(comp[:, None, :] + log_psi[None, :, :], axis=2)

    def emission_loglik(self, j, frame):
        frame = np.asarray(frame, dtype=np.float64).reshape(1, -1)
        if frame.shape[1] != self.dim:
            raise DataError(f"frame has {frame.shape[1]} dims, model expects {self.dim}")
        if not 0 <= j < self.K:
            raise AduError(f"state {j} out of range")
        return float(self.state_loglik(frame, states=np.array([j]))[0, 0])

    def validate(self, tol=1e-9):
        if self.variant not in VARIANTS:
            raise AduError(f"unknown variant {self.variant!r}")
        if not np.allclose(self.pi.sum(axis=1), 1.0, atol=tol, rtol=0):
            raise AduError("transition rows do not sum to one")
        if not abs(self.pi0.sum() - 1.0) <= tol:
            raise AduError("initial distribution does not sum to one")
        if not np.allclose(self.psi.sum(axis=1), 1.0, atol=tol, rtol=0):
            raise AduError("mixture weights do not sum to one")
        if self.covariance == "diag":
            if self.covs.min() < COV_FLOOR * (1 - 1e-12):
                raise AduError("variance below floor")
        else:
            flat = self.covs.reshape(-1, self.dim, self.dim)
            if min(np.linalg.eigvalsh(c).min() for c in flat) < COV_FLOOR * (1 - 1e-6):
                raise AduError("covariance eigenvalue below floor")
        if self.variant == "dhdphmm":
            if self.xi is None or self.psi.shape[1] != self.means.shape[0]:
                raise AduError("pool size does not match mixture weights")
        return True

    # -- persistence ----------------------------------------------------

    def _arrays(self):
        arrays = {
            "beta": self.beta.weights, "pi0": self.pi0, "pi": self.pi, "psi": self.psi,
            "means": self.means, "covs": self.covs,
        }
        if self.xi is not None:
            arrays["xi"] = self.xi
        if self.occupancy is not None:
            arrays["occupancy"] = self.occupancy
        if self.trace:
            arrays["trace"] = np.asarray(self.trace, dtype=np.float64)
        if self.hyper.niw is not None:
            arrays["niw_mean"] = self.hyper.niw.mean
            arrays["niw_scatter"] = self.hyper.niw.scatter
        return arrays

    def to_bytes(self):
        arrays = self._arrays()
        descr, blobs, offset = [], [], 0
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            descr.append({"name": name, "shape": list(arr.shape), "offset": offset})
            blobs.append(arr.tobytes())
            offset += arr.nbytes
        header = {
            "variant": self.variant,
            "covariance": self.covariance,
            "shared": self.shared,
            "truncation": self.K,
            "beta_remainder": self.beta.remainder,
            "hyper": self.hyper.to_dict(),
            "niw": None if self.hyper.niw is None else
                   {"k0": self.hyper.niw.k0, "v0": self.hyper.niw.v0},
            "seed_lineage": self.seed_lineage,
            "sweeps_done": self.sweeps_done,
            "arrays": descr,
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return b"".join([MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, len(hbytes)), hbytes]
                        + blobs)

    @classmethod
    def from_bytes(cls, data, source="<bytes>"):
        if len(data) < 16 or data[:8] != MODEL_MAGIC:
            raise MalformedHeaderError(f"{source}: not a model file")
        version, hlen = struct.unpack_from("<II", data, 8)
        if version != MODEL_VERSION:
            raise MalformedHeaderError(f"{source}: unsupported model version {version}")
        try:
            header = json.loads(data[16:16 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedHeaderError(f"{source}: corrupt model header") from exc
        base = 16 + hlen
        arrays = {}
        for d in header["arrays"]:
            count = int(np.prod(d["shape"])) if d["shape"] else 1
            start = base + d["offset"]
            if start + 8 * count > len(data):
                raise MalformedHeaderError(f"{source}: array {d['name']} truncated")
            arrays[d["name"]] = np.frombuffer(
                data, dtype="<f8", count=count, offset=start).reshape(d["shape"]).astype(np.float64)
        niw = None
        if header["niw"] is not None:
            niw = NIWPrior(arrays["niw_mean"], header["niw"]["k0"], header["niw"]["v0"],
                           arrays["niw_scatter"])
        hyper = Hyperparameters.from_dict(header["hyper"], niw=niw)
        return cls(
            variant=header["variant"],
            beta=StickWeights(arrays["beta"], header["beta_remainder"]),
            pi0=arrays["pi0"], pi=arrays["pi"], psi=arrays["psi"],
            means=arrays["means"], covs=arrays["covs"], hyper=hyper,
            covariance=header["covariance"], xi=arrays.get("xi"),
            shared=header.get("shared", True),
            occupancy=arrays.get("occupancy"),
            seed_lineage=header["seed_lineage"], sweeps_done=header["sweeps_done"],
            trace=[float(v) for v in arrays.get("trace", [])],
        )

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ModelNotFoundError(f"model not found: {path}")
        return cls.from_bytes(path.read_bytes(), source=str(path))
