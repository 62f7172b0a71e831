"""U-statistics with a kernel that does not depend on the intensity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..chaos import ChaosElement, variance
from ..errors import DegenerateVariance, InputError
from ..measure import AtomSpace, SymmetricKernel, integrate_out, kernels_from_dict, kernels_to_dict
from ..sampling import SampleConfig, eval_ustat, iter_batches

MASS_TOL = 1e-12


@dataclass(frozen=True)
class FixedKernelConfig:
    space: AtomSpace
    f: SymmetricKernel
    t: float = 1.0

    def __post_init__(self):
        if abs(self.space.total_mass - 1.0) > MASS_TOL:
            raise InputError(f"the space must carry a probability measure, total mass {self.space.total_mass}")
        if self.f.n_atoms != self.space.size:
            raise InputError("kernel and space disagree on the number of atoms")
        if not self.t >= 1:
            raise InputError(f"t must be at least 1, got {self.t}")

    @property
    def q(self) -> int:
        return self.f.order

    @property
    def intensity(self) -> AtomSpace:
        return self.space.scaled(self.t)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FixedKernelConfig":
        space, kernels = kernels_from_dict(doc)
        name = doc.get("kernel")
        if name is None:
            if len(kernels) != 1:
                raise InputError("several kernels defined; name one with 'kernel'")
            name = next(iter(kernels))
        if name not in kernels:
            raise InputError(f"unknown kernel {name!r}")
        return cls(space, kernels[name], float(doc.get("t", 1.0)))

    def to_dict(self) -> dict:
        out = kernels_to_dict(self.space, {"f": self.f})
        out["kernel"] = "f"
        out["t"] = self.t
        return out


def v_f(config: FixedKernelConfig) -> float:
    """``q^2 int (int f(x, .) d mu^{q-1})^2 mu(dx)``."""
    inner = integrate_out(config.f, config.space, keep=1)
    g = inner.values
    return config.q**2 * float(np.dot(config.space.weights, g * g))


def tau_fixed(config: FixedKernelConfig) -> float:
    v = v_f(config)
    sup = config.f.sup_norm()
    if not v > 1e-14 * max(sup * sup, 1e-300):
        raise DegenerateVariance("v_f vanishes; the kernel has no first-order chaos component")
    r = sup / math.sqrt(v)
    q = config.q
    return math.sqrt(config.t) / (q ** (3 * q) * max(r**3, r))


def exact_variance(config: FixedKernelConfig) -> float:
    return variance(ChaosElement.ustatistic(config.intensity, config.f))


def exact_mean(config: FixedKernelConfig) -> float:
    return ChaosElement.ustatistic(config.intensity, config.f).mean()


def simulate(config: FixedKernelConfig, sample_config: SampleConfig) -> np.ndarray:
    """``S`` per replica for the process with intensity ``t mu``."""
    cfg = SampleConfig(sample_config.master_seed, sample_config.replicas, config.t)
    parts = [np.atleast_1d(eval_ustat(c, config.f)) for c in iter_batches(config.space, cfg)]
    return np.concatenate(parts)
