"""Two-photon states, coincidence statistics and interference figures of merit."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.stats

BOSONS = "indistinguishable-bosons"
DISTINGUISHABLE = "distinguishable"


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    """Amplitudes ``coeff[p, q]`` for photon 1 in mode p and photon 2 in mode q."""

    coeff: np.ndarray
    statistics: str = BOSONS
    survival: float = 1.0

    def __post_init__(self):
        c = np.array(self.coeff, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient matrix must be square")
        if self.statistics not in (BOSONS, DISTINGUISHABLE):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)

    @property
    def M(self):
        return self.coeff.shape[0]

    @property
    def norm2(self):
        return float(np.sum(np.abs(self.coeff) ** 2))


def pixel_entangled_state(N, pairing=None, phases=None, M=None, statistics=BOSONS):
    """``sum_p exp(i phi_p) |p>|pairing(p)> / sqrt(N)`` over the paired A modes.

    Default pairing sends A mode ``p`` to B mode ``N + p`` on ``M = 2N`` modes.
    """
    if pairing is None:
        pairing = {p: N + p for p in range(N)}
    pairing = dict(pairing)
    if len(pairing) != N:
        raise ValueError(f"pairing has {len(pairing)} entries for N={N}")
    targets = list(pairing.values())
    if len(set(targets)) != len(targets):
        raise ValueError("pairing must be injective")
    if set(targets) & set(pairing):
        raise ValueError("A and B mode blocks must be disjoint")
    if M is None:
        M = max(max(pairing), max(targets)) + 1
    phases = np.zeros(N) if phases is None else np.asarray(phases, dtype=np.float64)
    if phases.size != N:
        raise ValueError("one phase per paired term")
    c = np.zeros((M, M), dtype=np.complex128)
    for k, (a, b) in enumerate(sorted(pairing.items())):
        c[a, b] = np.exp(1j * phases[k]) / np.sqrt(N)
    if statistics == BOSONS:
        c = (c + c.T) / np.sqrt(2)
    return TwoPhotonState(c, statistics)


def evolve(state, T):
    """``c -> T c T^T``; ``survival`` records the remaining norm for lossy ``T``."""
    T = np.asarray(T, dtype=np.complex128)
    if T.shape != (state.M, state.M):
        raise ValueError(f"transformation {T.shape} does not act on {state.M} modes")
    c = T @ state.coeff @ T.T
    return TwoPhotonState(c, state.statistics, float(np.sum(np.abs(c) ** 2)))


@dataclass
class CoincidenceTable:
    """Post-selected joint detection probabilities.

    ``pairs`` lists ``(i, j)`` mode pairs and ``probs`` their probabilities,
    renormalized to unit sum over the listed pairs. ``raw_total`` keeps the
    pre-normalization mass (the post-selection acceptance).
    """

    pairs: list
    probs: np.ndarray
    domain: str
    raw_total: float = 1.0
    shape: tuple | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if len(self.pairs) != self.probs.size:
            raise ValueError("one probability per pair")

    def as_matrix(self):
        """Cross-block tables as a ``(|A|, |B|)`` array."""
        if self.shape is None:
            raise ValueError("only cross-block tables have a matrix form")
        return self.probs.reshape(self.shape)

    def get(self, i, j):
        return float(self.probs[self.pairs.index((i, j))])

    def to_text(self):
        buf = io.StringIO()
        buf.write(f"# domain={self.domain}\n# normalization=post-selected over domain; raw_total={self.raw_total:.17g}\n")
        if self.shape is not None:
            buf.write(f"# shape={self.shape[0]}x{self.shape[1]}\n")
        buf.write("i,j,probability\n")
        for (i, j), p in zip(self.pairs, self.probs):
            buf.write(f"{i},{j},{p:.17g}\n")
        return buf.getvalue()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text, renormalize=True):
        domain, raw, shape = "external", 1.0, None
        pairs, probs = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].replace(";", " ").split():
                    if part.startswith("domain="):
                        domain = part.split("=", 1)[1]
                    elif part.startswith("raw_total="):
                        raw = float(part.split("=", 1)[1])
                    elif part.startswith("shape="):
                        a, b = part.split("=", 1)[1].split("x")
                        shape = (int(a), int(b))
                continue
            if line.startswith("i,"):
                continue
            i, j, p = line.split(",")
            pairs.append((int(i), int(j)))
            probs.append(float(p))
        probs = np.asarray(probs)
        if np.any(probs < 0):
            raise ValueError("negative coincidence entry")
        if renormalize:
            s = probs.sum()
            if not s > 0:
                raise ValueError("empty coincidence table")
            probs = probs / s
        return cls(pairs, probs, domain, raw, shape)

    @classmethod
    def load(cls, path, renormalize=True):
        with open(path) as fh:
            return cls.from_text(fh.read(), renormalize)


def _pair_prob(c, i, j):
    if i == j:
        return abs(c[i, i]) ** 2
    return abs(c[i, j]) ** 2 + abs(c[j, i]) ** 2


def coincidences(state, domain="distinct", A=None, B=None):
    """Coincidence table of ``state`` over one of three domains.

    ``"distinct"``: unordered pairs i < j; ``"all-pairs"``: i <= j;
    ``"cross-block"``: ordered (a, b) with a in A and b in B.
    """
    c = state.coeff
    M = state.M
    shape = None
    if domain == "distinct":
        pairs = [(i, j) for i in range(M) for j in range(i + 1, M)]
    elif domain == "all-pairs":
        pairs = [(i, j) for i in range(M) for j in range(i, M)]
    elif domain == "cross-block":
        if A is None or B is None:
            half = M // 2
            A, B = range(half), range(half, M)
        A, B = list(A), list(B)
        pairs = [(a, b) for a in A for b in B]
        shape = (len(A), len(B))
    else:
        raise ValueError(f"unknown domain {domain!r}")
    if not pairs:
        raise ValueError("empty coincidence domain")
    p = np.array([_pair_prob(c, i, j) for i, j in pairs])
    total = float(p.sum())
    if not total > 0:
        raise ValueError("no coincidence probability on the measured domain")
    return CoincidenceTable(pairs, p / total, domain, total, shape)


def statistical_fidelity(p_exp, p_th):
    """Bhattacharyya overlap ``sum_i sqrt(P_exp_i P_th_i)``."""
    if list(p_exp.pairs) != list(p_th.pairs):
        raise ValueError("coincidence tables cover different domains")
    return float(min(1.0, np.sum(np.sqrt(p_exp.probs * p_th.probs))))


@dataclass
class FringeFit:
    visibility: float
    amplitude: float
    offset_phase: float
    contrast: float
    residual_rms: float


def fit_fringe(phi, rates):
    """Least-squares fit of ``A (1 + V cos(phi + phi0))``.

    The model is linear in ``(a0, a1, b1)`` for
    ``a0 + a1 cos(phi) + b1 sin(phi)``; ``V = hypot(a1, b1) / a0``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    if phi.size < 8:
        raise ValueError("need at least 8 phase samples")
    if np.ptp(phi) < 2 * np.pi * (1 - 1.0 / phi.size) - 1e-12:
        raise ValueError("phase samples must span a full period")
    Amat = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    (a0, a1, b1), *_ = np.linalg.lstsq(Amat, rates, rcond=None)
    if a0 <= 0:
        raise ValueError("degenerate fringe fit (non-positive mean)")
    amp = np.hypot(a1, b1)
    V = float(np.clip(amp / a0, 0.0, 1.0))
    phi0 = float(np.arctan2(-b1, a1))
    fmax, fmin = a0 + amp, max(a0 - amp, 0.0)
    contrast = float((fmax - fmin) / (fmax + fmin))
    resid = rates - Amat @ np.array([a0, a1, b1])
    return FringeFit(V, float(a0), phi0, contrast, float(np.sqrt(np.mean(resid**2))))


def fringe_visibility(phi, rates):
    return fit_fringe(phi, rates).visibility


def map_visibility(values):
    """(max - min) / (max + min) of a sampled rate map."""
    v = np.asarray(values, dtype=np.float64)
    hi, lo = v.max(), v.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


@dataclass
class PorterThomasResult:
    ks: float
    passed: bool
    threshold: float
    n: int


def porter_thomas_test(samples, threshold=0.1):
    """KS distance of mean-normalized rates from the unit-mean exponential."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError("need at least 100 samples")
    if np.any(x < 0):
        raise ValueError("rates must be non-negative")
    ks = float(scipy.stats.kstest(x, "expon").statistic)
    return PorterThomasResult(ks, ks < threshold, threshold, int(x.size))


def normalized_rates(table):
    """Rates divided by their mean over the table."""
    return table.probs / table.probs.mean()
