"""Generation of the fused residual point kernel for one storage assignment.

Given the term list and a per-derivative storage class (FETCH from a work
array, LOCAL per-point scalar, or INLINE re-expansion of the stencil
formula), this module renders a numba-jitted triple loop over the interior
that evaluates all five residuals point by point.

All storage classes produce bitwise-identical values: a fetched work array
is filled (vectorized) with exactly the expression shape that LOCAL and
INLINE emit at a point, and numba is compiled without fastmath so no
contraction or reassociation is introduced.

Generated sources are written to a cache directory and imported as real
modules so numba's on-disk cache can persist the compiled machine code
across processes.
"""

from __future__ import annotations

import hashlib
import importlib.util
import os
import re
import sys
from pathlib import Path

from .terms import (KERNEL_CONSTANTS, POINT_FIELDS, RESIDUAL_FIELDS,
                    ResidualSpec)

FETCH = "FETCH"
LOCAL = "LOCAL"
INLINE = "INLINE"

_IDENT = re.compile(r"\b[A-Za-z_][A-Za-z_0-9]*\b")

# axis -> index variable
_IDX = ("i", "j", "k")


def _indices(offsets: tuple[int, int, int]) -> str:
    parts = []
    for base, off in zip(_IDX, offsets):
        if off == 0:
            parts.append(base)
        elif off > 0:
            parts.append(f"{base} + {off}")
        else:
            parts.append(f"{base} - {-off}")
    return ", ".join(parts)


def _with_offset(offsets, axis, off):
    out = list(offsets)
    out[axis] += off
    return tuple(out)


def render_point_expr(expr: str, offsets=(0, 0, 0)) -> str:
    """Render a field expression as array reads at a stencil offset."""
    idx = _indices(offsets)

    def repl(m):
        name = m.group(0)
        if name in POINT_FIELDS:
            return f"{name}[{idx}]"
        return name

    return _IDENT.sub(repl, expr)


class KernelRenderer:
    """Renders derivative references according to a storage assignment."""

    def __init__(self, spec: ResidualSpec, storage: dict[str, str]):
        self.spec = spec
        self.storage = storage
        missing = set(spec.derivatives) - set(storage)
        if missing:
            raise ValueError(f"no storage class for {sorted(missing)}")

    def stencil_text(self, did: str, offsets=(0, 0, 0)) -> str:
        """The full finite-difference formula for a derivative at a point."""
        d = self.spec.derivatives[did]
        if d.kind == "d1":
            a = d.axes[0]
            e = lambda off: render_point_expr(
                d.expr, _with_offset(offsets, a, off))
            return (f"(fw1_{a}*(({e(1)}) - ({e(-1)}))"
                    f" + fw2_{a}*(({e(2)}) - ({e(-2)})))")
        if d.kind == "d2":
            a = d.axes[0]
            e = lambda off: render_point_expr(
                d.expr, _with_offset(offsets, a, off))
            return (f"(s0_{a}*({e(0)})"
                    f" + s1_{a}*(({e(1)}) + ({e(-1)}))"
                    f" + s2_{a}*(({e(2)}) + ({e(-2)})))")
        # cross: outer first derivative of the inner first derivative
        outer, _ = d.axes
        inner = self.stencil_or_fetch_inner(d.inner_id)
        e = lambda off: inner(_with_offset(offsets, outer, off))
        return (f"(fw1_{outer}*(({e(1)}) - ({e(-1)}))"
                f" + fw2_{outer}*(({e(2)}) - ({e(-2)})))")

    def stencil_or_fetch_inner(self, inner_id: str):
        """Inner-derivative reader for cross terms.

        When the inner derivative is kept in a work array its neighbour
        values are read back from that (halo-exchanged) array; otherwise
        the inner stencil is re-expanded at each shifted point.
        """
        if self.storage[inner_id] == FETCH:
            name = "wa_" + self.spec.derivatives[inner_id].name
            return lambda offs: f"{name}[{_indices(offs)}]"
        return lambda offs: self.stencil_text(inner_id, offs)

    def reference_text(self, did: str) -> str:
        """How an occurrence of a derivative reads in the residual body."""
        cls = self.storage[did]
        d = self.spec.derivatives[did]
        if cls == FETCH:
            return f"wa_{d.name}[i, j, k]"
        if cls == LOCAL:
            return f"loc_{d.name}"
        return self.stencil_text(did)

    def local_lines(self) -> list[str]:
        lines = []
        for did, d in self.spec.derivatives.items():
            if self.storage[did] == LOCAL:
                lines.append(f"loc_{d.name} = {self.stencil_text(did)}")
        return lines

    def fetch_array_names(self) -> list[str]:
        return [f"wa_{self.spec.derivatives[did].name}"
                for did in self.spec.derivatives
                if self.storage[did] == FETCH]

    def residual_lines(self) -> list[str]:
        lines = []
        for res in RESIDUAL_FIELDS:
            # render the literal segments and the derivative references
            # separately; the reference text is already fully rendered
            parts = re.split(r"(\{[^{}]+\})", self.spec.residuals[res])
            body = "".join(
                f"({self.reference_text(part[1:-1])})"
                if part.startswith("{") else render_point_expr(part)
                for part in parts)
            lines.append(f"{res}[i, j, k] = {body}")
        return lines


_WEIGHT_ARGS = [f"{w}_{a}" for a in range(3)
                for w in ("fw1", "fw2", "s0", "s1", "s2")]


def kernel_source(spec: ResidualSpec, storage: dict[str, str],
                  func_name: str = "residual_kernel") -> str:
    """Full module source for the generated residual kernel."""
    r = KernelRenderer(spec, storage)
    args = (list(POINT_FIELDS) + r.fetch_array_names()
            + list(RESIDUAL_FIELDS)
            + ["h", "n0", "n1", "n2"] + _WEIGHT_ARGS
            + list(KERNEL_CONSTANTS))
    body = ["import numba", "", "",
            "@numba.njit(parallel=True, fastmath=False, cache=True)",
            f"def {func_name}({', '.join(args)}):",
            "    for i0 in numba.prange(n0):",
            "        i = i0 + h",
            "        for j0 in range(n1):",
            "            j = j0 + h",
            "            for k0 in range(n2):",
            "                k = k0 + h"]
    pad = " " * 16
    for line in r.local_lines():
        body.append(pad + line)
    for line in r.residual_lines():
        body.append(pad + line)
    body.append("")
    return "\n".join(body)


def _cache_dir() -> Path:
    root = os.environ.get("FDNS_CACHE_DIR",
                          os.path.join(os.path.expanduser("~"),
                                       ".cache", "fdns"))
    path = Path(root) / "gen"
    path.mkdir(parents=True, exist_ok=True)
    return path


_kernel_cache: dict[str, object] = {}


def compile_kernel(spec: ResidualSpec, storage: dict[str, str],
                   tag: str):
    """Compile (or fetch from cache) the residual kernel for one plan."""
    source = kernel_source(spec, storage)
    digest = hashlib.sha256(source.encode()).hexdigest()[:12]
    if digest in _kernel_cache:
        return _kernel_cache[digest]
    modname = f"fdns_kernel_{tag.lower()}_{digest}"
    path = _cache_dir() / f"{modname}.py"
    if not path.exists():
        tmp = path.with_suffix(".tmp")
        tmp.write_text(source)
        tmp.replace(path)
    spec_obj = importlib.util.spec_from_file_location(modname, path)
    module = importlib.util.module_from_spec(spec_obj)
    sys.modules[modname] = module
    spec_obj.loader.exec_module(module)
    fn = module.residual_kernel
    _kernel_cache[digest] = fn
    return fn
