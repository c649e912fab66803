"""Minimal dense-tensor math with reverse-mode gradients.

Values are float64 numpy arrays (1-D or 2-D). Every primitive runs its
forward computation through a Tape, which appends a backward closure;
replaying the tape in reverse accumulates d(loss)/d(x) into every tensor
flagged as requiring gradients. There is no broadcasting beyond
scalar-times-tensor; all shape changes are explicit primitives.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "NonFiniteError",
    "Tensor",
    "Tape",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]

_CKPT_MAGIC = b"RNCKPT01"


class NonFiniteError(FloatingPointError):
    """A primitive produced NaN or Inf."""


class Tensor:
    """A float64 array plus an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim not in (1, 2):
            raise ValueError(f"tensors are 1-D or 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def _finite(name: str, value: np.ndarray) -> np.ndarray:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{name} produced a non-finite value")
    return value


def _need_2d(name: str, *tensors: Tensor) -> None:
    for t in tensors:
        if t.data.ndim != 2:
            raise ValueError(f"{name} requires 2-D tensors, got shape {t.shape}")


class Tape:
    """Append-only record of executed primitives.

    Ops are methods so the execution context is explicit: one tape per
    training step, cleared (or discarded) before the next. A tape built
    with record=False computes forward values only.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._entries: list[tuple[Tensor, object]] = []

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(x) into every requires-grad input."""
        if loss.data.size != 1:
            raise ValueError("backward starts from a scalar loss")
        if not self.record:
            raise ValueError("cannot backpropagate through a non-recording tape")
        loss.grad = np.ones_like(loss.data)
        for out, fn in reversed(self._entries):
            if out.grad is not None:
                fn(out.grad)

    # -- plumbing -----------------------------------------------------------

    def _make(self, name: str, value: np.ndarray, inputs: tuple[Tensor, ...], backward):
        out = Tensor(_finite(name, value))
        if self.record and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            self._entries.append((out, backward))
        return out

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        _need_2d("matmul", a, b)
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul mismatch {a.shape} @ {b.shape}")
        value = a.data @ b.data

        def backward(g):
            if a.requires_grad:
                a.accumulate(g @ b.data.T)
            if b.requires_grad:
                b.accumulate(a.data.T @ g)

        return self._make("matmul", value, (a, b), backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ValueError(f"add mismatch {a.shape} vs {b.shape}")

        def backward(g):
            if a.requires_grad:
                a.accumulate(g)
            if b.requires_grad:
                b.accumulate(g)

        return self._make("add", a.data + b.data, (a, b), backward)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ValueError(f"sub mismatch {a.shape} vs {b.shape}")

        def backward(g):
            if a.requires_grad:
                a.accumulate(g)
            if b.requires_grad:
                b.accumulate(-g)

        return self._make("sub", a.data - b.data, (a, b), backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise product of same-shape tensors."""
        if a.shape != b.shape:
            raise ValueError(f"mul mismatch {a.shape} vs {b.shape}")

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * b.data)
            if b.requires_grad:
                b.accumulate(g * a.data)

        return self._make("mul", a.data * b.data, (a, b), backward)

    def scale(self, a: Tensor, c: float) -> Tensor:
        c = float(c)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * c)

        return self._make("scale", a.data * c, (a,), backward)

    def add_scalar(self, a: Tensor, c: float) -> Tensor:
        def backward(g):
            if a.requires_grad:
                a.accumulate(g)

        return self._make("add_scalar", a.data + float(c), (a,), backward)

    def concat_cols(self, a: Tensor, b: Tensor) -> Tensor:
        _need_2d("concat_cols", a, b)
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"concat_cols row mismatch {a.shape} vs {b.shape}")
        split = a.shape[1]

        def backward(g):
            if a.requires_grad:
                a.accumulate(g[:, :split])
            if b.requires_grad:
                b.accumulate(g[:, split:])

        return self._make(
            "concat_cols", np.concatenate([a.data, b.data], axis=1), (a, b), backward
        )

    def stack_rows(self, tensors: list[Tensor]) -> Tensor:
        if not tensors:
            raise ValueError("stack_rows needs at least one tensor")
        rows = [t.data.reshape(1, -1) for t in tensors]
        width = rows[0].shape[1]
        if any(r.shape[1] != width for r in rows):
            raise ValueError("stack_rows needs equal-width rows")

        def backward(g):
            for i, t in enumerate(tensors):
                if t.requires_grad:
                    t.accumulate(g[i].reshape(t.shape))

        return self._make(
            "stack_rows", np.concatenate(rows, axis=0), tuple(tensors), backward
        )

    def slice_rows(self, a: Tensor, start: int, stop: int) -> Tensor:
        _need_2d("slice_rows", a)

        def backward(g):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                full[start:stop] = g
                a.accumulate(full)

        return self._make("slice_rows", a.data[start:stop].copy(), (a,), backward)

    def select_row(self, a: Tensor, i: int) -> Tensor:
        return self.slice_rows(a, i, i + 1)

    def gather_rows(self, a: Tensor, indices) -> Tensor:
        """Rows of a at the given indices; duplicates sum in the backward."""
        _need_2d("gather_rows", a)
        idx = np.asarray(indices, dtype=np.int64)

        def backward(g):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                np.add.at(full, idx, g)
                a.accumulate(full)

        return self._make("gather_rows", a.data[idx].copy(), (a,), backward)

    def transpose(self, a: Tensor) -> Tensor:
        _need_2d("transpose", a)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g.T)

        return self._make("transpose", a.data.T.copy(), (a,), backward)

    def sum_rows(self, a: Tensor) -> Tensor:
        """Collapse rows: (r, c) -> (1, c)."""
        _need_2d("sum_rows", a)

        def backward(g):
            if a.requires_grad:
                a.accumulate(np.repeat(g, a.shape[0], axis=0))

        return self._make("sum_rows", a.data.sum(axis=0, keepdims=True), (a,), backward)

    def mean_rows(self, a: Tensor) -> Tensor:
        """Mean over rows: (r, c) -> (1, c)."""
        return self.scale(self.sum_rows(a), 1.0 / a.shape[0])

    def sum_cols(self, a: Tensor) -> Tensor:
        """Collapse columns: (r, c) -> (r, 1)."""
        _need_2d("sum_cols", a)

        def backward(g):
            if a.requires_grad:
                a.accumulate(np.repeat(g, a.shape[1], axis=1))

        return self._make("sum_cols", a.data.sum(axis=1, keepdims=True), (a,), backward)

    def total_sum(self, a: Tensor) -> Tensor:
        """Sum of all entries as a (1, 1) tensor."""

        def backward(g):
            if a.requires_grad:
                a.accumulate(np.full_like(a.data, float(g.reshape(-1)[0])))

        return self._make(
            "total_sum", np.array([[a.data.sum()]]), (a,), backward
        )

    def total_mean(self, a: Tensor) -> Tensor:
        return self.scale(self.total_sum(a), 1.0 / a.data.size)

    def softmax(self, a: Tensor) -> Tensor:
        """Softmax over a vector, applied per row for 2-D input."""
        x = np.atleast_2d(a.data)
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=1, keepdims=True)
        value = s.reshape(a.shape)

        def backward(g):
            if a.requires_grad:
                g2 = np.atleast_2d(g)
                inner = (g2 * s).sum(axis=1, keepdims=True)
                a.accumulate((s * (g2 - inner)).reshape(a.shape))

        return self._make("softmax", value, (a,), backward)

    def log_softmax(self, a: Tensor) -> Tensor:
        x = np.atleast_2d(a.data)
        shifted = x - x.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        value = (shifted - lse).reshape(a.shape)
        soft = np.exp(shifted - lse)

        def backward(g):
            if a.requires_grad:
                g2 = np.atleast_2d(g)
                a.accumulate((g2 - soft * g2.sum(axis=1, keepdims=True)).reshape(a.shape))

        return self._make("log_softmax", value, (a,), backward)

    def leaky_relu(self, a: Tensor, slope: float = 0.2) -> Tensor:
        mask = np.where(a.data > 0, 1.0, float(slope))

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * mask)

        return self._make("leaky_relu", a.data * mask, (a,), backward)

    def sigmoid(self, a: Tensor) -> Tensor:
        x = a.data
        value = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                         np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * value * (1.0 - value))

        return self._make("sigmoid", value, (a,), backward)

    def log(self, a: Tensor) -> Tensor:
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.log(a.data)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g / a.data)

        return self._make("log", value, (a,), backward)

    def clamp(self, a: Tensor, lo: float, hi: float) -> Tensor:
        inside = (a.data >= lo) & (a.data <= hi)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * inside)

        return self._make("clamp", np.clip(a.data, lo, hi), (a,), backward)

    def dropout(self, a: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
        """Inverted dropout: scaled by 1/(1-p) at train time, identity otherwise."""
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if not train or p == 0.0:
            return a
        if rng is None:
            raise ValueError("training-mode dropout needs a generator")
        mask = (rng.random(a.shape) >= p) / (1.0 - p)

        def backward(g):
            if a.requires_grad:
                a.accumulate(g * mask)

        return self._make("dropout", a.data * mask, (a,), backward)


def grad_check(build, params, step: float = 1e-5) -> float:
    """Max relative error of tape gradients against central differences.

    build(tape) must construct and return the same scalar-valued
    computation each time it is called, reading the current values of
    ``params``. Relative error per entry is
    |analytic - numeric| / max(1, |numeric|).
    """
    for p in params:
        p.zero_grad()
    tape = Tape()
    out = build(tape)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued build")
    tape.backward(out)
    analytic = [
        np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params
    ]

    def value() -> float:
        return float(build(Tape(record=False)).data.reshape(-1)[0])

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = value()
            flat[i] = orig - step
            f_minus = value()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            worst = max(worst, abs(gflat[i] - numeric) / max(1.0, abs(numeric)))
    return worst


# ---------------------------------------------------------------------------
# Parameter checkpoints: named float64 tensors plus a JSON manifest
# ---------------------------------------------------------------------------


def save_checkpoint(path, tensors: dict, manifest: dict | None = None) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(len(tensors).to_bytes(4, "little"))
        for name, t in tensors.items():
            arr = np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(len(encoded).to_bytes(2, "little"))
            fh.write(encoded)
            fh.write(arr.ndim.to_bytes(1, "little"))
            for dim in arr.shape:
                fh.write(int(dim).to_bytes(8, "little"))
            fh.write(np.ascontiguousarray(arr).tobytes())
    if manifest is not None:
        with open(path.with_name(path.name + ".json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_checkpoint(path) -> tuple[dict, dict | None]:
    path = Path(path)
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint (bad magic {magic!r})")
        count = int.from_bytes(fh.read(4), "little")
        for _ in range(count):
            name_len = int.from_bytes(fh.read(2), "little")
            name = fh.read(name_len).decode("utf-8")
            ndim = int.from_bytes(fh.read(1), "little")
            shape = tuple(
                int.from_bytes(fh.read(8), "little") for _ in range(ndim)
            )
            size = int(np.prod(shape)) if shape else 1
            buf = fh.read(size * 8)
            tensors[name] = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
    manifest = None
    manifest_path = path.with_name(path.name + ".json")
    if manifest_path.exists():
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    return tensors, manifest
