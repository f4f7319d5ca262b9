"""Seeded generators for the joints and channels used in sweeps and demos."""

from __future__ import annotations

import numpy as np

from .dist import Alphabet, Channel, JointPmf, Pmf, push_forward


# symbols are "0", "1", ... so files written by separate runs compose
def x_alphabet(n: int, name: str = "X") -> Alphabet:
    return Alphabet.range(name, n)


def y_alphabet(n: int, name: str = "Y") -> Alphabet:
    return Alphabet.range(name, n)


def z_alphabet(n: int, name: str = "Z") -> Alphabet:
    return Alphabet.range(name, n)


def random_pmf(alphabet: Alphabet, rng: np.random.Generator) -> Pmf:
    return Pmf(alphabet, rng.dirichlet(np.ones(alphabet.size)))


def random_channel(inp: Alphabet, z_size: int, rng: np.random.Generator, out_name: str = "Z") -> Channel:
    rows = rng.dirichlet(np.ones(z_size), size=inp.size)
    return Channel((inp,), z_alphabet(z_size, out_name), rows)


def random_positive_joint(x_size: int, y_size: int, rng: np.random.Generator,
                          floor: float = 1e-3) -> JointPmf:
    """Random P_XY with full-support X and a strictly positive posterior.

    Posterior rows are flat-Dirichlet draws mixed with a small uniform
    ``floor`` so no entry can underflow to zero.
    """
    px = random_pmf(x_alphabet(x_size), rng)
    post = rng.dirichlet(np.ones(y_size), size=x_size)
    post = (1 - floor) * post + floor / y_size
    return push_forward(px, Channel((px.alphabet,), y_alphabet(y_size), post))


def deterministic_label_joint(x_size: int, labels, px=None) -> JointPmf:
    """P_XY with Y = g(X); ``labels[i]`` is the label index of x_i."""
    labels = np.asarray(labels, dtype=int)
    y_size = int(labels.max()) + 1
    x = x_alphabet(x_size)
    prior = Pmf(x, np.full(x_size, 1.0 / x_size) if px is None else px)
    return push_forward(prior, Channel.from_function(x, y_alphabet(y_size), labels))


def parity_joint(x_size: int = 4) -> JointPmf:
    """X uniform on x_size symbols, Y = index mod 2."""
    return deterministic_label_joint(x_size, np.arange(x_size) % 2)


def label_copy_channel(jxy: JointPmf, labels, out_name: str = "Z") -> Channel:
    """Channel X -> Z that outputs the (deterministic) label of x."""
    x = jxy.axes[0]
    labels = np.asarray(labels, dtype=int)
    return Channel.from_function(x, z_alphabet(int(labels.max()) + 1, out_name), labels)


def noisy_posterior_joint(px, posterior) -> JointPmf:
    """Joint from an explicit prior vector and row-stochastic posterior."""
    px = np.asarray(px, dtype=float)
    post = np.asarray(posterior, dtype=float)
    prior = Pmf(x_alphabet(px.size), px)
    return push_forward(prior, Channel((prior.alphabet,), y_alphabet(post.shape[1]), post))
