"""Anisotropic material tensors and the lossless/lossy medium classification."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

C0 = 299792458.0  # m/s


class MaterialError(ValueError):
    pass


class MediumCase(enum.Enum):
    CASE1 = 1  # lossless
    CASE2 = 2  # electric lossy only
    CASE3 = 3  # magnetic lossy only
    CASE4 = 4  # electric and magnetic lossy

    def __str__(self):
        return f"Case{self.value}"


def _tensor(t) -> np.ndarray:
    a = np.array(t, dtype=complex)
    if a.shape != (3, 3):
        raise MaterialError(f"material tensor must be 3x3, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MaterialError("material tensor has non-finite entries")
    a.flags.writeable = False
    return a


def is_hermitian_pd(t, tol: float = 1e-12) -> bool:
    t = np.asarray(t, dtype=complex)
    scale = np.abs(t).max()
    if scale == 0:
        return False
    if np.abs(t - t.conj().T).max() > tol * scale:
        return False
    return bool(np.linalg.eigvalsh((t + t.conj().T) / 2).min() > 0)


def invert_tensor(t) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    if np.linalg.cond(t) > 1e14:
        raise MaterialError("singular material tensor")
    return np.linalg.inv(t)


@dataclass(frozen=True)
class MaterialTensors:
    """Relative permittivity and permeability, both complex 3x3."""

    eps_r: np.ndarray
    mu_r: np.ndarray

    def __post_init__(self):
        eps, mu = _tensor(self.eps_r), _tensor(self.mu_r)
        for name, t in (("eps_r", eps), ("mu_r", mu)):
            if np.linalg.cond(t) > 1e14:
                raise MaterialError(f"{name} is singular")
        object.__setattr__(self, "eps_r", eps)
        object.__setattr__(self, "mu_r", mu)

    @property
    def eps_inv(self) -> np.ndarray:
        return invert_tensor(self.eps_r)

    def scaled(self, eps_factor=1.0, mu_factor=1.0) -> "MaterialTensors":
        return MaterialTensors(self.eps_r * eps_factor, self.mu_r * mu_factor)


def classify_medium(mat: MaterialTensors, tol: float = 1e-12) -> MediumCase:
    eps_ok = is_hermitian_pd(mat.eps_r, tol)
    mu_ok = is_hermitian_pd(mat.mu_r, tol)
    if eps_ok and mu_ok:
        return MediumCase.CASE1
    if mu_ok:
        return MediumCase.CASE2
    if eps_ok:
        return MediumCase.CASE3
    return MediumCase.CASE4


def resonant_frequency(lam) -> complex:
    """Frequency in Hz from the squared vacuum wavenumber (1/m^2)."""
    f = C0 * np.sqrt(complex(lam)) / (2 * np.pi)
    return f.real if f.imag == 0 else f


def eigenvalue_from_frequency(f) -> complex:
    lam = (2 * np.pi * complex(f) / C0) ** 2
    return lam.real if lam.imag == 0 else lam


VACUUM = MaterialTensors(np.eye(3), np.eye(3))

# electric-lossy cylinder fill
PAPER_CASE2 = MaterialTensors(
    [[2 - 1j, 0, 0], [0, 2 - 1j, 0], [0, 0, 2]],
    [[2, -0.375j, 0], [0.375j, 2, 0], [0, 0, 2]],
)

# electric- and magnetic-lossy cylinder fill
PAPER_CASE4 = MaterialTensors(
    [[2 + 1j, 0, 0], [0, 2 + 1j, 0], [0, 0, 2]],
    [[2 - 1j, 0.375j, 0], [0.375j, 2 - 1j, 0], [0, 0, 2]],
)

PRESETS = {
    "vacuum": VACUUM,
    "paper-case2": PAPER_CASE2,
    "paper-case4": PAPER_CASE4,
}


def preset(name: str) -> MaterialTensors:
    try:
        return PRESETS[name]
    except KeyError:
        raise MaterialError(f"unknown material preset {name!r}; "
                            f"choose from {sorted(PRESETS)}") from None
