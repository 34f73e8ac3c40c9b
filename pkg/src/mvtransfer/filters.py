"""Filter files: JSON parsing, serialization, bundled examples, random QMF filters.

File layout::

    {"name": "haar", "torus_dim": 1, "d": 1, "N": 2,
     "coeffs": [{"k": 0, "matrix": [[[0.707.., 0.0]]]}, ...],
     "harmonics": {"unit": [{"k": 0, "matrix": [[[1.0, 0.0]]]}]}}

Matrix entries are ``[re, im]`` pairs.  ``harmonics`` is optional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .trigmat import Filter, MatTrigPoly, make_filter

BUNDLED = ("haar", "stretched_haar", "diag_haar_one", "random_qmf_d2")


class FilterFileError(ValueError):
    """Malformed filter file; the message names the offending field."""


@dataclass(frozen=True)
class FilterFile:
    name: str
    torus_dim: int
    d: int
    N: int
    coeffs: MatTrigPoly
    harmonics: dict[str, MatTrigPoly] = field(default_factory=dict)

    def filter(self) -> Filter:
        return make_filter(self.coeffs, self.N, name=self.name)

    def harmonic(self, name: str | None) -> MatTrigPoly:
        """Named candidate; ``None`` means ``"unit"`` if present, else the identity."""
        if name is None:
            return self.harmonics.get("unit", MatTrigPoly.identity(self.d))
        if name not in self.harmonics:
            raise KeyError(f"no harmonic candidate {name!r}; have {sorted(self.harmonics)}")
        return self.harmonics[name]


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FilterFileError(f"{where}: expected an integer, got {v!r}")
    return v


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise FilterFileError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _parse_coeffs(items, d: int, where: str) -> MatTrigPoly:
    if not isinstance(items, list):
        raise FilterFileError(f"{where}: expected a list of {{k, matrix}} records")
    blocks = {}
    for i, rec in enumerate(items):
        at = f"{where}[{i}]"
        if not isinstance(rec, dict):
            raise FilterFileError(f"{at}: expected an object with fields k and matrix")
        for key in ("k", "matrix"):
            if key not in rec:
                raise FilterFileError(f"{at}: missing field {key!r}")
        k = _int(rec["k"], f"{at}.k")
        if k in blocks:
            raise FilterFileError(f"{at}.k: duplicate index {k}")
        rows = rec["matrix"]
        if not isinstance(rows, list) or len(rows) != d:
            raise FilterFileError(f"{at}.matrix: expected {d} rows")
        a = np.zeros((d, d), dtype=complex)
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise FilterFileError(f"{at}.matrix[{r}]: expected {d} entries")
            for c, e in enumerate(row):
                if not isinstance(e, list) or len(e) != 2:
                    raise FilterFileError(f"{at}.matrix[{r}][{c}]: expected a [re, im] pair")
                a[r, c] = complex(_number(e[0], f"{at}.matrix[{r}][{c}][0]"), _number(e[1], f"{at}.matrix[{r}][{c}][1]"))
        blocks[k] = a
    return MatTrigPoly.from_dict(blocks, shape=(d, d))


def parse_filter(data) -> FilterFile:
    """Validate a decoded JSON object."""
    if not isinstance(data, dict):
        raise FilterFileError("top level: expected an object")
    for key in ("name", "torus_dim", "d", "N", "coeffs"):
        if key not in data:
            raise FilterFileError(f"missing field {key!r}")
    name = data["name"]
    if not isinstance(name, str):
        raise FilterFileError(f"name: expected a string, got {name!r}")
    tdim = _int(data["torus_dim"], "torus_dim")
    if tdim != 1:
        raise FilterFileError(f"torus_dim: only 1 is supported, got {tdim}")
    d = _int(data["d"], "d")
    if d < 1:
        raise FilterFileError(f"d: must be >= 1, got {d}")
    N = _int(data["N"], "N")
    if N < 2:
        raise FilterFileError(f"N: must be >= 2, got {N}")
    coeffs = _parse_coeffs(data["coeffs"], d, "coeffs")
    harm = data.get("harmonics", {})
    if not isinstance(harm, dict):
        raise FilterFileError("harmonics: expected an object mapping names to coefficient lists")
    harmonics = {str(k): _parse_coeffs(v, d, f"harmonics.{k}") for k, v in harm.items()}
    return FilterFile(name, tdim, d, N, coeffs, harmonics)


def loads(text: str) -> FilterFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise FilterFileError(f"line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_filter(data)


def _dump_coeffs(p: MatTrigPoly) -> list:
    return [
        {"k": int(k), "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in c]}
        for k, c in p.items()
        if np.any(c != 0)
    ]


def to_dict(ff: FilterFile) -> dict:
    out = {"name": ff.name, "torus_dim": ff.torus_dim, "d": ff.d, "N": ff.N, "coeffs": _dump_coeffs(ff.coeffs)}
    if ff.harmonics:
        out["harmonics"] = {k: _dump_coeffs(v) for k, v in ff.harmonics.items()}
    return out


def dumps(ff: FilterFile) -> str:
    """Pretty JSON with one coefficient record per line."""
    data = to_dict(ff)

    def block(items, pad):
        lines = ",\n".join(pad + "  " + json.dumps(rec) for rec in items)
        return "[\n" + lines + "\n" + pad + "]"

    parts = [f'  "{key}": {json.dumps(data[key])}' for key in ("name", "torus_dim", "d", "N")]
    parts.append('  "coeffs": ' + block(data["coeffs"], "  "))
    if "harmonics" in data:
        inner = ",\n".join(f"    {json.dumps(k)}: " + block(v, "    ") for k, v in data["harmonics"].items())
        parts.append('  "harmonics": {\n' + inner + "\n  }")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def load_filter(ref: str | Path) -> FilterFile:
    """Read a filter file; a bare bundled name such as ``"haar"`` also works."""
    p = Path(ref)
    if p.exists():
        return loads(p.read_text(encoding="utf-8"))
    name = str(ref)
    if name.endswith(".json"):
        name = name[:-5]
    if name in BUNDLED:
        return loads(resources.files(__package__).joinpath("data").joinpath(f"{name}.json").read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no filter file {ref!r} (bundled: {', '.join(BUNDLED)})")


def filter_file(name: str, N: int, poly: MatTrigPoly, harmonics: dict | None = None) -> FilterFile:
    return FilterFile(name, 1, poly.dim, N, poly, dict(harmonics or {}))


def random_qmf(d: int = 2, N: int = 2, seed: int = 0) -> MatTrigPoly:
    """Random real QMF filter of degree ``2N - 1`` satisfying E(1).

    The polyphase matrix ``V(w) = U0 (I - P + w P)[:, :d]`` (``N d x d``,
    blocks ``A_i``) is an isometry on the circle for any orthogonal ``U0``
    and orthogonal projection ``P``, which is exactly the QMF condition for
    ``m(z) = sum_i z^i A_i(z^N)``.  The first column of ``U0`` is
    ``(e_1 + e_{d+1} + ...) / sqrt(N)`` so that ``m(0)/sqrt(N)`` fixes ``e_1``.
    """
    rng = np.random.default_rng(seed)
    n = N * d
    first = np.zeros(n)
    first[::d] = 1 / math.sqrt(N)
    X = rng.standard_normal((n, n))
    X[:, 0] = first
    U0, R = np.linalg.qr(X)
    U0 = U0 * np.sign(np.diag(R))  # first column is +first
    u = rng.standard_normal(n)
    P = np.outer(u, u) / (u @ u)
    B = (U0 @ (np.eye(n) - P))[:, :d]  # w^0 part
    C = (U0 @ P)[:, :d]  # w^1 part
    blocks = {}
    for i in range(N):
        blocks[i] = B[i * d : (i + 1) * d]
        blocks[N + i] = C[i * d : (i + 1) * d]
    return MatTrigPoly.from_dict(blocks, shape=(d, d))


def bundled_files() -> dict[str, FilterFile]:
    """Construct the bundled filters from their definitions."""
    s = 1 / math.sqrt(2)
    one = MatTrigPoly.identity(1)
    H = MatTrigPoly.scalar({0: 1.0, 1: 2 / 3, -1: 2 / 3, 2: 1 / 3, -2: 1 / 3})
    diag = MatTrigPoly.from_dict({0: np.diag([s, 1.0]), 1: np.diag([s, 0.0])})
    return {
        "haar": filter_file("haar", 2, MatTrigPoly.scalar({0: s, 1: s}), {"unit": one}),
        "stretched_haar": filter_file(
            "stretched_haar", 2, MatTrigPoly.scalar({0: s, 3: s}), {"unit": one, "correlation": H}
        ),
        "diag_haar_one": filter_file("diag_haar_one", 2, diag, {"unit": MatTrigPoly.identity(2)}),
        "random_qmf_d2": filter_file(
            "random_qmf_d2", 2, random_qmf(2, 2, seed=20240), {"unit": MatTrigPoly.identity(2)}
        ),
    }
