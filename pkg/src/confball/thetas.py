"""Mean-vector generators for experiments.

A theta spec is a small JSON-friendly dict such as ``{"kind": "zero"}`` or
``{"kind": "saturated", "tau": 0.5, "M": 1}``. :func:`build_thetas` turns it
into one or more labelled mean vectors for a given ``(J, n)``; only
``worst_case`` yields several (a candidate family whose worst member is used).
"""

from __future__ import annotations

import math

import numpy as np

from .blocks import block_size_for
from .numerics import LAMBDA_STAR
from .sequence import (
    BesovBody,
    CoefficientVector,
    hypercube_theta,
    level_slice,
    make_rng,
    random_boundary_member,
    vertex_set_theta,
)

THETA_KEYS = {
    "zero": set(),
    "hypercube": {"j", "a", "body", "signs"},
    "vertex": {"k", "a", "signs"},
    "boundary_random": {"body", "seed"},
    "saturated": {"tau", "M"},
    "least_favorable": {"tau", "M"},
    "packed": {"tau", "M", "c"},
    "worst_case": {"tau", "M", "packing"},
}
REQUIRED_KEYS = {
    "hypercube": {"j"},
    "vertex": {"k", "a"},
    "boundary_random": {"body"},
    "saturated": {"tau"},
    "least_favorable": {"tau"},
    "packed": {"tau", "c"},
    "worst_case": {"tau"},
}
DEFAULT_PACKING = (1.0, 2.0, 4.0)


def validate_theta_spec(spec: dict) -> dict:
    """Check keys and return a normalised copy; raises ``ValueError``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("theta must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind not in THETA_KEYS:
        raise ValueError(f"theta.kind must be one of {sorted(THETA_KEYS)}, got {kind!r}")
    keys = set(spec) - {"kind"}
    unknown = keys - THETA_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown keys for theta kind {kind!r}: {sorted(unknown)}")
    missing = REQUIRED_KEYS.get(kind, set()) - keys
    if missing:
        raise ValueError(f"theta kind {kind!r} needs {sorted(missing)}")
    if kind == "hypercube" and ("a" in spec) == ("body" in spec):
        raise ValueError("hypercube theta needs exactly one of 'a' or 'body'")
    out = dict(spec)
    if "body" in out:
        BesovBody.from_dict(out["body"])
    if "tau" in out and not out["tau"] > 0:
        raise ValueError(f"theta.tau must be positive, got {out['tau']!r}")
    return out


def _signs(spec, length: int):
    s = spec.get("signs", "positive")
    if s == "positive":
        return None
    if s == "alternating":
        return np.where(np.arange(length) % 2 == 0, 1.0, -1.0)
    return s


def saturated_theta(J: int, tau: float, M: float = 1.0) -> CoefficientVector:
    """Every level at its largest energy in ``B^tau_{2,inf}(M)``, spread evenly."""
    return CoefficientVector(
        J, np.concatenate([np.full(2**j, M * 2.0 ** (-j * (tau + 0.5))) for j in range(J)])
    )


def least_favorable_level(J: int, n: int, tau: float, M: float = 1.0) -> int:
    """Level whose width best matches ``M^{2/(1+2tau)} n^{1/(1+2tau)}``."""
    target = (2 * math.log2(M) + math.log2(n)) / (1 + 2 * tau)
    return min(J - 1, max(0, round(target)))


def least_favorable_theta(J: int, n: int, tau: float, M: float = 1.0) -> CoefficientVector:
    """Single-level hypercube at the critical level, at that level's largest energy."""
    j = least_favorable_level(J, n, tau, M)
    return hypercube_theta(J, j, M * 2.0 ** (-j * (tau + 0.5)))


def packed_theta(J: int, n: int, tau: float, c: float, M: float = 1.0) -> CoefficientVector:
    """Each level's energy budget packed into blocks of energy ``c * LAMBDA_STAR * L / n``.

    Blocks near the keep threshold inflate the radius most per unit of signal
    energy. A level whose budget cannot fill one such block is spread evenly;
    a level with budget to spare fills every block equally. The result lies in
    ``B^tau_{2,inf}(M)``.
    """
    L = block_size_for(n)
    e = c * LAMBDA_STAR * L / n
    values = np.zeros(2**J - 1)
    for j in range(J):
        budget = M**2 * 2.0 ** (-2 * tau * j)
        m = 2**j
        nb = -(-m // L)
        K = min(nb, int(budget // e))
        level = np.zeros(m)
        if K == 0:
            level[:] = math.sqrt(budget / m)
        else:
            per_block = budget / K if K == nb else e
            for i in range(K):
                start, stop = i * L, min((i + 1) * L, m)
                level[start:stop] = math.sqrt(per_block / (stop - start))
        values[level_slice(j)] = level
    return CoefficientVector(J, values)


def build_thetas(spec: dict, J: int, n: int) -> dict[str, CoefficientVector]:
    """Labelled mean vectors described by ``spec`` for dimension ``2**J - 1``."""
    spec = validate_theta_spec(spec)
    kind = spec["kind"]
    M = float(spec.get("M", 1.0))
    if kind == "zero":
        return {"zero": CoefficientVector.zeros(J)}
    if kind == "hypercube":
        j = spec["j"]
        if "a" in spec:
            a = float(spec["a"])
        else:
            body = BesovBody.from_dict(spec["body"])
            a = body.M * 2.0 ** (-j * (body.beta + 0.5))
        return {"hypercube": hypercube_theta(J, j, a, _signs(spec, 2**j))}
    if kind == "vertex":
        return {"vertex": vertex_set_theta(J, spec["k"], float(spec["a"]), _signs(spec, spec["k"]))}
    if kind == "boundary_random":
        body = BesovBody.from_dict(spec["body"])
        rng = make_rng(int(spec.get("seed", 0)), J)
        return {"boundary_random": random_boundary_member(J, body, rng)}
    tau = float(spec["tau"])
    if kind == "saturated":
        return {"saturated": saturated_theta(J, tau, M)}
    if kind == "least_favorable":
        return {"least_favorable": least_favorable_theta(J, n, tau, M)}
    if kind == "packed":
        return {f"packed_{spec['c']:g}": packed_theta(J, n, tau, float(spec["c"]), M)}
    # worst_case: a deterministic family; callers take the worst member.
    out = {
        "saturated": saturated_theta(J, tau, M),
        "least_favorable": least_favorable_theta(J, n, tau, M),
    }
    for c in spec.get("packing", DEFAULT_PACKING):
        out[f"packed_{c:g}"] = packed_theta(J, n, tau, float(c), M)
    return out
