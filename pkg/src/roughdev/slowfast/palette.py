"""
Built-in coefficient palette.

Every scenario coefficient is picked by name from ``_PALETTE`` and built
into a ``SmoothFunction4`` with analytic derivatives.  Builders take the
parameter mapping of the scenario entry, the input dimension and the
output shape.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Mapping
from typing import Any

import numpy as np

from roughdev.core.errors import InvalidInputError
from roughdev.core.scenario import CoefficientSpec
from roughdev.rough.algebra import Array
from roughdev.rough.controlled import Derivative, SmoothFunction4, constant, linear

logger = logging.getLogger(__name__)

Builder = Callable[[Mapping[str, Any], int, tuple[int, ...]], SmoothFunction4]


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _constant(params: Mapping[str, Any], in_dim: int, out_shape: tuple[int, ...]) -> SmoothFunction4:
    value = np.broadcast_to(np.asarray(params.get("value", 0.0), dtype=float), out_shape)
    return constant(value, in_dim)


def _linear(params: Mapping[str, Any], in_dim: int, out_shape: tuple[int, ...]) -> SmoothFunction4:
    if "matrix" not in params:
        raise InvalidInputError("linear coefficient needs a 'matrix' parameter")
    matrix = np.asarray(params["matrix"], dtype=float)
    expected = out_shape + (in_dim,)
    if matrix.size != math.prod(expected):
        raise InvalidInputError(f"linear matrix has shape {matrix.shape}, expected {expected}")
    return linear(matrix.reshape(expected), params.get("offset"))


def _ou(params: Mapping[str, Any], in_dim: int, out_shape: tuple[int, ...]) -> SmoothFunction4:
    """
    −rate (y − mean − coupling·x): acts on the trailing ``k = out_shape[0]``
    inputs; ``coupling`` reads the leading k inputs.
    """
    if len(out_shape) != 1:
        raise InvalidInputError(f"ou coefficient is vector valued, got shape {out_shape}")
    k = out_shape[0]
    if k > in_dim:
        raise InvalidInputError(f"ou on {k} coordinates needs at least {k} inputs")
    rate = float(params.get("rate", 1.0))
    mean = np.broadcast_to(np.asarray(params.get("mean", 0.0), dtype=float), (k,))
    coupling = float(params.get("coupling", 0.0))
    matrix = np.zeros((k, in_dim))
    matrix[:, in_dim - k :] = -rate * np.eye(k)
    if coupling != 0.0:
        if in_dim < 2 * k:
            raise InvalidInputError("ou coupling needs as many slow as fast coordinates")
        matrix[:, :k] += rate * coupling * np.eye(k)
    return linear(matrix, rate * mean, name="ou")


def _monomial_derivative(z: Array, powers: tuple[int, ...], axes: tuple[int, ...]) -> Array:
    """∂_{axes} ∏_j z_j^{p_j}, batched over the leading axes of ``z``."""
    counts = [axes.count(j) for j in range(len(powers))]
    coef = 1.0
    for p, c in zip(powers, counts):
        if c > p:
            return np.zeros(z.shape[:-1])
        coef *= math.perm(p, c)
    out = np.full(z.shape[:-1], coef)
    for j, (p, c) in enumerate(zip(powers, counts)):
        if p - c:
            out = out * z[..., j] ** (p - c)
    return out


def _polynomial(
    params: Mapping[str, Any], in_dim: int, out_shape: tuple[int, ...]
) -> SmoothFunction4:
    """
    Sum of monomials.  Either ``terms: [{coef, powers, out}]`` with ``out``
    the flat output index, or the univariate shorthand
    ``coefficients: [c0, c1, ...]`` in input ``variable`` applied to every
    output element.
    """
    size = math.prod(out_shape)
    terms: list[tuple[float, tuple[int, ...], int]] = []
    if "terms" in params:
        for term in params["terms"]:
            powers = tuple(int(p) for p in term["powers"])
            if len(powers) != in_dim or min(powers) < 0:
                raise InvalidInputError(f"monomial powers {powers} do not fit {in_dim} inputs")
            out = int(term.get("out", 0))
            if not 0 <= out < size:
                raise InvalidInputError(f"monomial output index {out} outside {size} outputs")
            terms.append((float(term["coef"]), powers, out))
    elif "coefficients" in params:
        var = int(params.get("variable", 0))
        if not 0 <= var < in_dim:
            raise InvalidInputError(f"variable {var} outside {in_dim} inputs")
        for p, c in enumerate(params["coefficients"]):
            powers = tuple(p if j == var else 0 for j in range(in_dim))
            terms.extend((float(c), powers, out) for out in range(size))
    else:
        raise InvalidInputError("polynomial coefficient needs 'terms' or 'coefficients'")

    def make(order: int) -> Derivative:
        def fn(z: Array) -> Array:
            z = np.asarray(z, dtype=float)
            lead = z.shape[:-1]
            out = np.zeros(lead + (size,) + (in_dim,) * order)
            for axes in itertools.product(range(in_dim), repeat=order):
                for coef, powers, idx in terms:
                    out[(Ellipsis, idx) + axes] += coef * _monomial_derivative(z, powers, axes)
            return out.reshape(lead + out_shape + (in_dim,) * order)

        return fn

    return SmoothFunction4(
        in_dim, out_shape, make(0), make(1), make(2), make(3), make(4), name="polynomial"
    )


def _sine(params: Mapping[str, Any], in_dim: int, out_shape: tuple[int, ...]) -> SmoothFunction4:
    """offset + amplitude·sin(frequency·z[variable] + phase), on every output element."""
    amp = float(params.get("amplitude", 1.0))
    freq = float(params.get("frequency", 1.0))
    phase = float(params.get("phase", 0.0))
    offset = float(params.get("offset", 0.0))
    var = int(params.get("variable", 0))
    if not 0 <= var < in_dim:
        raise InvalidInputError(f"variable {var} outside {in_dim} inputs")

    def make(order: int) -> Derivative:
        def fn(z: Array) -> Array:
            z = np.asarray(z, dtype=float)
            lead = z.shape[:-1]
            wave = amp * freq**order * np.sin(freq * z[..., var] + phase + order * np.pi / 2.0)
            if order == 0:
                wave = wave + offset
                return np.broadcast_to(wave[(...,) + (None,) * len(out_shape)], lead + out_shape).copy()
            out = np.zeros(lead + out_shape + (in_dim,) * order)
            out[(Ellipsis,) + (var,) * order] = wave[(...,) + (None,) * len(out_shape)]
            return out

        return fn

    root = math.sqrt(math.prod(out_shape))
    bound = root * (abs(offset) + abs(amp) * sum(abs(freq) ** k for k in range(5)))
    return SmoothFunction4(
        in_dim,
        out_shape,
        make(0),
        make(1),
        make(2),
        make(3),
        make(4),
        name="sine",
        bound=bound,
        lipschitz=root * abs(amp * freq),
    )


_PALETTE: dict[str, Builder] = {
    "constant": _constant,
    "linear": _linear,
    "ou": _ou,
    "polynomial": _polynomial,
    "sine": _sine,
}


def available_kinds() -> list[str]:
    return sorted(_PALETTE)


def build_coefficient(
    spec: CoefficientSpec, in_dim: int, out_shape: tuple[int, ...]
) -> SmoothFunction4:
    """Build a palette coefficient ℝ^in_dim → ℝ^out_shape."""
    builder = _PALETTE.get(spec.kind)
    if builder is None:
        raise InvalidInputError(
            f"Unknown coefficient kind {spec.kind!r}; available: {', '.join(available_kinds())}"
        )
    try:
        fn = builder(spec.params, in_dim, tuple(out_shape))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"Bad parameters for {spec.kind!r}: {exc}") from exc
    logger.debug("built %s coefficient %d -> %s", spec.kind, in_dim, out_shape)
    return fn


__all__ = ["Builder", "available_kinds", "build_coefficient"]
