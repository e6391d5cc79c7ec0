"""Monte Carlo generation of photon-pair transverse coordinates.

Pairs are drawn frame by frame from the squared biphoton amplitude in
either the crystal-image (near-field, position) or focal-plane
(far-field, momentum) representation.  Squaring the double-Gaussian
amplitude makes the pair sum s = c1 + c2 and difference u = c1 - c2
independent zero-mean Gaussians, so sampling reduces to two normal
draws per axis followed by the inverse rotation c1 = (s + u) / 2,
c2 = (s - u) / 2.

Per-axis standard deviations of the sampling densities:

* near field:  std(s) = sigma_p,        std(u) = sigma_phi      (um)
* far field:   std(s) = 1 / sigma_p,    std(u) = 1 / sigma_phi  (hbar/um)

The far-field widths follow from squaring the momentum amplitude, whose
sum exponent sigma_p^2 |p1+p2|^2 / 4 doubles to sigma_p^2 |p1+p2|^2 / 2,
i.e. a Gaussian of variance 1/sigma_p^2 per axis; the test suite checks
both representations against direct numerical quadrature of |psi|^2.

Reproducibility: every frame draws from its own RNG stream keyed by
(seed, frame_index, role), so frames can be generated in any order or
in parallel and still come out bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .biphoton import BiphotonParams


class PlaneKind(Enum):
    """Which transverse observable the camera plane measures."""

    NEAR_FIELD = "near"
    FAR_FIELD = "far"

    @classmethod
    def from_name(cls, name: str) -> "PlaneKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown plane {name!r}; expected 'near' or 'far'")


# Stream roles under one (seed, frame_index) pair.  Keeping the pair
# sampler and the two cameras on disjoint streams makes each stage
# individually deterministic and order-independent.
ROLE_PAIRS = 0
ROLE_CAM1 = 1
ROLE_CAM2 = 2

_SEED_LIMIT = 2 ** 64


def frame_rng(seed: int, frame_index: int, role: int) -> np.random.Generator:
    """Deterministic per-(frame, role) random generator."""
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    if frame_index < 0:
        raise ValueError(f"frame_index must be >= 0, got {frame_index}")
    return np.random.default_rng(np.random.SeedSequence([seed, frame_index, role]))


@dataclass(frozen=True)
class SourceConfig:
    """Pair-source settings for one simulated acquisition run."""

    params: BiphotonParams
    mean_pairs_per_frame: float = 1400.0
    seed: int = 1
    frames: int = 100

    def __post_init__(self):
        if not (math.isfinite(self.mean_pairs_per_frame) and self.mean_pairs_per_frame >= 0):
            raise ValueError(
                f"mean_pairs_per_frame must be >= 0, got {self.mean_pairs_per_frame!r}")
        if not 0 <= self.seed < _SEED_LIMIT:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")


class PairEvent(NamedTuple):
    coord1: np.ndarray
    coord2: np.ndarray


@dataclass
class PairEvents:
    """All pair coordinates of one frame, as (n, 2) arrays.

    Column order is (x, y); units are um in the near field and hbar/um
    in the far field.  Indexing returns a single :class:`PairEvent`.
    """

    plane: PlaneKind
    coord1: np.ndarray
    coord2: np.ndarray

    def __post_init__(self):
        self.coord1 = np.atleast_2d(np.asarray(self.coord1, dtype=float))
        self.coord2 = np.atleast_2d(np.asarray(self.coord2, dtype=float))
        if self.coord1.shape != self.coord2.shape or self.coord1.shape[-1] != 2:
            raise ValueError("coord1/coord2 must be matching (n, 2) arrays")
        if not (np.all(np.isfinite(self.coord1)) and np.all(np.isfinite(self.coord2))):
            raise ValueError("pair coordinates must be finite")

    def __len__(self) -> int:
        return self.coord1.shape[0]

    def __getitem__(self, i: int) -> PairEvent:
        return PairEvent(self.coord1[i], self.coord2[i])


def pair_widths(params: BiphotonParams, plane: PlaneKind) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis standard deviations (std_sum, std_diff) of the pair density."""
    if plane is PlaneKind.NEAR_FIELD:
        return params.sigma_p.copy(), params.sigma_phi.copy()
    return 1.0 / params.sigma_p, 1.0 / params.sigma_phi


def sample_frame_pairs(cfg: SourceConfig, plane: PlaneKind, frame_index: int) -> PairEvents:
    """Draw one frame's pair coordinates.

    The pair count is Poisson with the configured mean (spontaneous
    emission statistics, all pump shots of one exposure collapsed into a
    single draw); coordinates follow the squared amplitude for the
    requested plane.
    """
    rng = frame_rng(cfg.seed, frame_index, ROLE_PAIRS)
    n = int(rng.poisson(cfg.mean_pairs_per_frame))
    std_s, std_u = pair_widths(cfg.params, plane)
    s = rng.normal(0.0, std_s, size=(n, 2))
    u = rng.normal(0.0, std_u, size=(n, 2))
    return PairEvents(plane=plane, coord1=(s + u) / 2.0, coord2=(s - u) / 2.0)


@dataclass
class MomentReport:
    """Sample moments of a pair batch, each with its standard error.

    All per-axis quantities are (x, y) arrays.  ``var_s`` / ``var_u``
    are the variances of the sum and difference coordinates, ``cov_su``
    their per-axis covariance (zero for a faithful sampler) and
    ``var_c1`` the single-photon marginal variance.
    """

    n: int
    mean_s: np.ndarray = field(repr=False, default=None)
    se_mean_s: np.ndarray = field(repr=False, default=None)
    mean_u: np.ndarray = field(repr=False, default=None)
    se_mean_u: np.ndarray = field(repr=False, default=None)
    var_s: np.ndarray = None
    se_var_s: np.ndarray = None
    var_u: np.ndarray = None
    se_var_u: np.ndarray = None
    cov_su: np.ndarray = None
    se_cov_su: np.ndarray = None
    var_c1: np.ndarray = None
    se_var_c1: np.ndarray = None


def marginal_check(events: PairEvents, params: BiphotonParams, plane: PlaneKind) -> MomentReport:
    """Sample moments of the sum/difference decomposition, with errors.

    Requires at least 1000 events so the reported standard errors are
    meaningful.  Expected values for comparison come from
    :func:`pair_widths` (and (std_s^2 + std_u^2) / 4 for the
    single-photon marginal).
    """
    n = len(events)
    if n < 1000:
        raise ValueError(f"need >= 1000 events for a moment report, got {n}")
    s = events.coord1 + events.coord2
    u = events.coord1 - events.coord2
    var_s = s.var(axis=0, ddof=1)
    var_u = u.var(axis=0, ddof=1)
    cov_su = ((s - s.mean(axis=0)) * (u - u.mean(axis=0))).sum(axis=0) / (n - 1)
    var_c1 = events.coord1.var(axis=0, ddof=1)
    root = math.sqrt(n)
    return MomentReport(
        n=n,
        mean_s=s.mean(axis=0), se_mean_s=np.sqrt(var_s) / root,
        mean_u=u.mean(axis=0), se_mean_u=np.sqrt(var_u) / root,
        var_s=var_s, se_var_s=var_s * math.sqrt(2.0 / (n - 1)),
        var_u=var_u, se_var_u=var_u * math.sqrt(2.0 / (n - 1)),
        cov_su=cov_su, se_cov_su=np.sqrt(var_s * var_u / n),
        var_c1=var_c1, se_var_c1=var_c1 * math.sqrt(2.0 / (n - 1)),
    )
