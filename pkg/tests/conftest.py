from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from abeltorsion.torus_model import TorusBundle, load_bundle, validate

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORPUS_FILES = sorted(p for p in CORPUS.iterdir() if p.suffix in (".json", ".toml"))

SQUARE = np.array([[1.0], [1j]])
SURFACE = np.array([[1, 0], [1j, 0], [0, 1], [0, 1j]], dtype=complex)


def square_bundle(H: float = 0.0, alpha=(0.0, 0.0)) -> TorusBundle:
    return validate(n=1, lattice=SQUARE, metric_g=np.eye(1), form_H=np.array([[H]]),
                    alpha_phases=np.asarray(alpha, float))


def surface_bundle(H, alpha=(0.0,) * 4, g=None) -> TorusBundle:
    return validate(n=2, lattice=SURFACE, metric_g=np.eye(2) if g is None else np.asarray(g),
                    form_H=np.asarray(H, dtype=complex), alpha_phases=np.asarray(alpha, float))


@pytest.fixture(scope="session")
def corpus() -> dict[str, TorusBundle]:
    return {p.stem: load_bundle(p) for p in CORPUS_FILES}


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


def random_unimodular(rng: np.random.Generator, size: int, steps: int = 6) -> np.ndarray:
    M = np.eye(size, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(size, 2, replace=False)
        M[i] += int(rng.integers(-2, 3)) * M[j]
    return M[rng.permutation(size)]


def random_bundle(seed: int, n: int, kernel: int = 0, ample: bool = False) -> TorusBundle:
    """Random valid bundle: Gaussian-integer ``H`` on ``(Z + iZ)^n``, moved by a
    random complex change of coordinates and a unimodular change of lattice basis.

    ``kernel > 0`` forces ``H`` to vanish on the first ``kernel`` coordinates;
    ``ample`` makes it positive definite.
    """
    rng = np.random.default_rng(seed)
    while True:
        X = rng.integers(-3, 4, (n, n)) + 1j * rng.integers(-3, 4, (n, n))
        H = np.triu(X) + np.triu(X, 1).conj().T
        H = H - 1j * np.diag(H.imag.diagonal())
        if ample:
            H = X @ X.conj().T + np.eye(n)
        H[:kernel, :] = 0
        H[:, :kernel] = 0
        mu = np.linalg.eigvalsh(H)
        if np.sum(np.abs(mu) < 1e-6) == kernel:
            break
    A = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    Ainv = np.linalg.inv(A)
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g0 = B @ B.conj().T + n * np.eye(n)
    lattice = np.zeros((2 * n, n), dtype=complex)
    for a in range(n):
        lattice[2 * a, a], lattice[2 * a + 1, a] = 1.0, 1j
    lattice = random_unimodular(rng, 2 * n) @ lattice @ A.T
    return validate(n=n, lattice=lattice, metric_g=Ainv.conj().T @ g0 @ Ainv,
                    form_H=Ainv.conj().T @ H @ Ainv, alpha_phases=rng.random(2 * n))
