"""Independent reference implementations used to check the library.

Everything here is written the slow, obvious way (or via a different
algorithm entirely) so agreement with the production code is meaningful.
The fast finite-difference oracle has its own forward pass and never calls
into the production network code.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from cogload.nncore import ModelParams, SampleBatch
from cogload.nncore.network import loss_and_gradients


# ---------------------------------------------------------------------------
# finite differences


def central_diff_gradients(batch: SampleBatch, params: ModelParams,
                           step: float = 1e-3) -> ModelParams:
    """Classic one-scalar-at-a-time central differences. Slow; tiny models only."""
    grads = params.copy()
    for name, arr in grads.named_arrays():
        arr[...] = 0.0
    for (name, target), (_, source) in zip(grads.named_arrays(), params.named_arrays()):
        flat_src = source.ravel()
        flat_dst = target.ravel()
        for i in range(flat_src.size):
            keep = flat_src[i]
            flat_src[i] = keep + step
            hi, _ = loss_and_gradients(batch, params)
            flat_src[i] = keep - step
            lo, _ = loss_and_gradients(batch, params)
            flat_src[i] = keep
            flat_dst[i] = (hi - lo) / (2.0 * step)
    return grads


def _param_layout(params: ModelParams) -> List[Tuple[str, Tuple[int, ...], int]]:
    layout = []
    offset = 0
    for name, arr in params.named_arrays():
        layout.append((name, arr.shape, offset))
        offset += arr.size
    return layout


def flatten_params(params: ModelParams) -> np.ndarray:
    return np.concatenate([arr.ravel() for _, arr in params.named_arrays()])


def stacked_losses(x: np.ndarray, labels: np.ndarray, theta: np.ndarray,
                   params: ModelParams) -> np.ndarray:
    """Mean cross-entropy for a stack of whole parameter vectors.

    An independent forward pass where every parameter tensor carries a
    leading copies axis. Used to anchor the structured oracle below against
    the production loss at the unperturbed point.
    """
    layout = _param_layout(params)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 1:
        theta = theta[None, :]
    tensors = {}
    for name, shape, offset in layout:
        size = int(np.prod(shape))
        tensors[name] = theta[:, offset:offset + size].reshape((theta.shape[0],) + shape)

    x = np.asarray(x, dtype=np.float64)
    win1 = np.lib.stride_tricks.sliding_window_view(x, 3, axis=2)  # (b, i, t1, k)
    a1 = np.einsum("bitk,coik->cbot", win1, tensors["conv1.weights"])
    a1 += tensors["conv1.bias"][:, None, :, None]
    a1 = np.maximum(a1, 0.0)
    win2 = np.lib.stride_tricks.sliding_window_view(a1, 3, axis=3)  # (c, b, i, t2, k)
    a2 = np.einsum("cbitk,coik->cbot", win2, tensors["conv2.weights"])
    a2 += tensors["conv2.bias"][:, None, :, None]
    a2 = np.maximum(a2, 0.0)

    seq = a2.transpose(0, 1, 3, 2)  # (c, b, t, channels)

    def rnn_layer(seq_in, w_in, w_rec, bias):
        inp = np.einsum("cbti,chi->cbth", seq_in, w_in) + bias[:, None, None, :]
        h = np.zeros((seq_in.shape[0], seq_in.shape[1], w_in.shape[1]))
        outs = []
        for t in range(seq_in.shape[2]):
            h = np.tanh(inp[:, :, t, :] + np.einsum("cbk,chk->cbh", h, w_rec))
            outs.append(h)
        return np.stack(outs, axis=2)

    h1 = rnn_layer(seq, tensors["rnn.layer1.w_in"], tensors["rnn.layer1.w_rec"],
                   tensors["rnn.layer1.bias"])
    h2 = rnn_layer(h1, tensors["rnn.layer2.w_in"], tensors["rnn.layer2.w_rec"],
                   tensors["rnn.layer2.bias"])
    last = h2[:, :, -1, :]
    logits = np.einsum("cbh,coh->cbo", last, tensors["dense.weights"])
    logits = logits + tensors["dense.bias"][:, None, :]

    m = logits.max(axis=2, keepdims=True)
    lse = m[:, :, 0] + np.log(np.exp(logits - m).sum(axis=2))
    picked = logits[:, np.arange(x.shape[0]), labels]
    return (lse - picked).mean(axis=1)


class _FastDiff:
    """Central differences over every parameter, organized stage by stage.

    Each perturbed copy touches exactly one tensor, so activations upstream
    of it are shared, the perturbed stage is the base computation plus an
    exact correction at the touched entry, and every stage downstream runs
    with unperturbed weights. That turns the sweep into large 2D matrix
    products over stacked copies instead of per-copy arithmetic.

    Activations live channels-last: conv stages as (b, t, channels), stacked
    stages with a leading copies axis.
    """

    def __init__(self, batch: SampleBatch, params: ModelParams, step: float,
                 chunk: int):
        self.step = step
        self.chunk = chunk
        self.labels = np.asarray(batch.labels)
        self.p = {name: np.asarray(a, dtype=np.float64)
                  for name, a in params.named_arrays()}
        p = self.p
        x = np.asarray(batch.data, dtype=np.float64)
        self.b = x.shape[0]

        self.win1 = np.lib.stride_tricks.sliding_window_view(x, 3, axis=2)
        self.win1 = self.win1.transpose(0, 2, 1, 3)  # (b, t1, in, k)
        self.z1 = self._conv_base(self.win1, p["conv1.weights"], p["conv1.bias"])
        a1 = np.maximum(self.z1, 0.0)  # (b, t1, 16)
        self.win2 = np.lib.stride_tricks.sliding_window_view(a1, 3, axis=1)  # (b, t2, 16, k)
        self.z2 = self._conv_base(self.win2, p["conv2.weights"], p["conv2.bias"])
        self.seq = np.maximum(self.z2, 0.0)  # (b, t2, 32)
        self.inp1 = self.seq @ p["rnn.layer1.w_in"].T + p["rnn.layer1.bias"]
        self.h1 = self._rnn_base(self.inp1, p["rnn.layer1.w_rec"])
        self.inp2 = self.h1 @ p["rnn.layer2.w_in"].T + p["rnn.layer2.bias"]
        h2 = self._rnn_base(self.inp2, p["rnn.layer2.w_rec"])
        self.last = h2[:, -1, :]
        self.base_logits = self.last @ p["dense.weights"].T + p["dense.bias"]

    @staticmethod
    def _conv_base(win: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
        b, t, c_in, k = win.shape
        flat = win.reshape(b * t, c_in * k) @ w.reshape(w.shape[0], c_in * k).T
        return flat.reshape(b, t, w.shape[0]) + bias

    @staticmethod
    def _rnn_base(inp: np.ndarray, w_rec: np.ndarray) -> np.ndarray:
        b, t, hidden = inp.shape
        h = np.zeros((b, hidden))
        outs = np.empty((b, t, hidden))
        for step_t in range(t):
            h = np.tanh(inp[:, step_t] + h @ w_rec.T)
            outs[:, step_t] = h
        return outs

    # -- stacked stages (leading axis = copies) ------------------------------

    def _run_layer_sequence(self, inp, w_rec, rec_rows=None, rec_cols=None,
                            rec_amount=None):
        """Recurrence over stacked inputs; optional single-entry w_rec tweak."""
        k_copies, b, t, hidden = inp.shape
        h = np.zeros((k_copies, b, hidden))
        seq = np.empty((k_copies, b, t, hidden))
        cids = np.arange(k_copies)
        for step_t in range(t):
            z = (h.reshape(-1, hidden) @ w_rec.T).reshape(k_copies, b, hidden)
            if rec_rows is not None:
                z[cids, :, rec_rows] += rec_amount[:, None] * h[cids, :, rec_cols]
            h = np.tanh(z + inp[:, :, step_t])
            seq[:, :, step_t] = h
        return seq

    def _stack_project(self, acts: np.ndarray, w: np.ndarray, bias) -> np.ndarray:
        """(K, b, t, i) @ w.T as one 2D product."""
        k_copies, b, t, _ = acts.shape
        flat = acts.reshape(-1, acts.shape[-1]) @ w.T
        out = flat.reshape(k_copies, b, t, w.shape[0])
        return out + bias if bias is not None else out

    def _losses_from_seq(self, seq_st: np.ndarray) -> np.ndarray:
        p = self.p
        inp1 = self._stack_project(seq_st, p["rnn.layer1.w_in"], p["rnn.layer1.bias"])
        h1 = self._run_layer_sequence(inp1, p["rnn.layer1.w_rec"])
        return self._losses_from_h1(h1)

    def _losses_from_h1(self, h1_st: np.ndarray) -> np.ndarray:
        p = self.p
        inp2 = self._stack_project(h1_st, p["rnn.layer2.w_in"], p["rnn.layer2.bias"])
        last = self._run_layer_sequence(inp2, p["rnn.layer2.w_rec"])[:, :, -1]
        logits = last @ p["dense.weights"].T + p["dense.bias"]
        return self._ce(logits)

    def _ce(self, logits: np.ndarray) -> np.ndarray:
        m = logits.max(axis=-1, keepdims=True)
        lse = m[..., 0] + np.log(np.exp(logits - m).sum(axis=-1))
        picked = logits[:, np.arange(self.b), self.labels]
        return (lse - picked).mean(axis=-1)

    # -- per-tensor sweeps ----------------------------------------------------

    def _entry_chunks(self, total: int):
        """Yield (entry indices, per-copy entry positions, per-copy signs)."""
        for start in range(0, total, self.chunk):
            idx = np.arange(start, min(start + self.chunk, total))
            signs = np.tile([1.0, -1.0], idx.size)
            yield idx, np.repeat(idx, 2), signs

    def _fd(self, losses: np.ndarray) -> np.ndarray:
        return (losses[0::2] - losses[1::2]) / (2.0 * self.step)

    def _sweep_conv(self, which: str) -> np.ndarray:
        """Gradients for one conv stage, weights then bias."""
        p = self.p
        win = self.win1 if which == "conv1" else self.win2
        z_base = self.z1 if which == "conv1" else self.z2
        grads = []
        for kind in ("weights", "bias"):
            tensor = p[f"{which}.{kind}"]
            grad = np.empty(tensor.size)
            for idx, copy_entries, signs in self._entry_chunks(tensor.size):
                k_copies = signs.size
                amount = signs * self.step
                cids = np.arange(k_copies)
                z = np.repeat(z_base[None], k_copies, axis=0)
                if kind == "bias":
                    z[cids, :, :, copy_entries] += amount[:, None, None]
                else:
                    o, ci, kk = np.unravel_index(copy_entries, tensor.shape)
                    gathered = win[:, :, ci, kk].transpose(2, 0, 1)  # (K, b, t)
                    z[cids, :, :, o] += amount[:, None, None] * gathered
                a = np.maximum(z, 0.0)
                if which == "conv1":
                    w2 = np.lib.stride_tricks.sliding_window_view(a, 3, axis=2)
                    flat = w2.reshape(-1, w2.shape[-2] * 3)
                    z2 = flat @ p["conv2.weights"].reshape(32, -1).T
                    z2 = z2.reshape(k_copies, self.b, -1, 32) + p["conv2.bias"]
                    seq = np.maximum(z2, 0.0)
                else:
                    seq = a
                grad[idx] = self._fd(self._losses_from_seq(seq))
            grads.append(grad)
        return np.concatenate(grads)

    def _sweep_rnn_layer(self, layer: str) -> np.ndarray:
        """Gradients for one recurrent layer: w_in, w_rec, bias."""
        p = self.p
        inp_base = self.inp1 if layer == "rnn.layer1" else self.inp2
        seq_in = self.seq if layer == "rnn.layer1" else self.h1
        w_rec = p[f"{layer}.w_rec"]
        first_layer = layer == "rnn.layer1"
        grads = []
        for kind in ("w_in", "w_rec", "bias"):
            tensor = p[f"{layer}.{kind}"]
            grad = np.empty(tensor.size)
            for idx, copy_entries, signs in self._entry_chunks(tensor.size):
                k_copies = signs.size
                amount = signs * self.step
                cids = np.arange(k_copies)
                rec_rows = rec_cols = rec_amount = None
                if kind == "w_rec":
                    inp = np.broadcast_to(inp_base, (k_copies,) + inp_base.shape)
                    rec_rows, rec_cols = np.unravel_index(copy_entries, tensor.shape)
                    rec_amount = amount
                else:
                    inp = np.repeat(inp_base[None], k_copies, axis=0)
                    if kind == "bias":
                        inp[cids, :, :, copy_entries] += amount[:, None, None]
                    else:
                        o, ci = np.unravel_index(copy_entries, tensor.shape)
                        gathered = seq_in[:, :, ci].transpose(2, 0, 1)  # (K, b, t)
                        inp[cids, :, :, o] += amount[:, None, None] * gathered
                run = self._run_layer_sequence(inp, w_rec, rec_rows, rec_cols, rec_amount)
                if first_layer:
                    losses = self._losses_from_h1(run)
                else:
                    logits = run[:, :, -1] @ p["dense.weights"].T + p["dense.bias"]
                    losses = self._ce(logits)
                grad[idx] = self._fd(losses)
            grads.append(grad)
        return np.concatenate(grads)

    def _sweep_dense(self) -> np.ndarray:
        p = self.p
        grads = []
        for kind in ("weights", "bias"):
            tensor = p[f"dense.{kind}"]
            grad = np.empty(tensor.size)
            for idx, copy_entries, signs in self._entry_chunks(tensor.size):
                k_copies = signs.size
                amount = signs * self.step
                cids = np.arange(k_copies)
                logits = np.repeat(self.base_logits[None], k_copies, axis=0)
                if kind == "bias":
                    logits[cids, :, copy_entries] += amount[:, None]
                else:
                    o, hi = np.unravel_index(copy_entries, tensor.shape)
                    logits[cids, :, o] += amount[:, None] * self.last[:, hi].T
                grad[idx] = self._fd(self._ce(logits))
            grads.append(grad)
        return np.concatenate(grads)

    def run(self) -> np.ndarray:
        return np.concatenate([
            self._sweep_conv("conv1"),
            self._sweep_conv("conv2"),
            self._sweep_rnn_layer("rnn.layer1"),
            self._sweep_rnn_layer("rnn.layer2"),
            self._sweep_dense(),
        ])


def central_diff_gradients_fast(batch: SampleBatch, params: ModelParams,
                                step: float = 1e-3, chunk: int = 256) -> np.ndarray:
    """Central differences over all parameters, vectorized over copies.

    Returns the flat gradient in named_arrays order. `chunk` bounds how many
    parameter entries are perturbed per pass (two copies each).
    """
    return _FastDiff(batch, params, step, chunk).run()


def max_relative_error(reference: np.ndarray, candidate: np.ndarray,
                       floor: float = 1e-2) -> float:
    """Worst elementwise |a-b| / max(|a|, |b|, floor).

    The floor compares near-zero entries absolutely; the loss is O(1), so
    holding sub-floor gradients to the same tolerance in absolute terms keeps
    the check meaningful without letting finite-difference roundoff dominate.
    """
    a = np.asarray(reference, dtype=np.float64).ravel()
    b = np.asarray(candidate, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def relu_kink_clearance(batch: SampleBatch, params: ModelParams,
                        step: float = 1e-3) -> float:
    """How far conv pre-activations sit from the ReLU kink, in step units.

    Central differences are only a valid gradient oracle where the loss is
    smooth on the probed interval. A +-step parameter perturbation shifts a
    conv pre-activation by at most step times the relevant input magnitude;
    if a pre-activation is closer to zero than that, the probe crosses the
    kink and the FD value is meaningless AT THAT ENTRY no matter how correct
    the analytic gradient is. A draw is safe for the oracle when this
    clearance is comfortably above 1.

    The bound is computed from the oracle's own forward quantities, never
    from the gradient comparison, so screening draws with it does not bias
    the check.
    """
    fd = _FastDiff(batch, params, step, chunk=1)  # only the base pass is used
    # one perturbed entry shifts a pre-activation by at most step times the
    # largest input inside that unit's own receptive window (or step itself,
    # for a bias)
    m1 = np.maximum(np.abs(fd.win1).max(axis=(2, 3)), 1.0)  # (b, t1)
    clear1 = float((np.abs(fd.z1) / (step * m1[:, :, None])).min())
    m2 = np.maximum(np.abs(fd.win2).max(axis=(2, 3)), 1.0)  # (b, t2)
    # a conv1 perturbation reaches z2 through one channel of the kernel
    w2 = fd.p["conv2.weights"]
    s2 = float(np.abs(w2).sum(axis=2).max())
    m1_sample = m1.max(axis=1)  # (b,)
    bound2 = step * np.maximum(m2, s2 * m1_sample[:, None])
    clear2 = float((np.abs(fd.z2) / bound2[:, :, None]).min())
    return min(clear1, clear2)


# ---------------------------------------------------------------------------
# eigensolver (cyclic Jacobi) for PCA cross-checks


def jacobi_eigh(sym: np.ndarray, sweeps: int = 100,
                tol: float = 1e-14) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as rows to match them).
    """
    a = np.array(sym, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(scale, 1.0):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(-np.diag(a), kind="stable")
    return np.diag(a)[order], v[:, order].T


# ---------------------------------------------------------------------------
# statistics, the long way


def anova_f_brute(column: Sequence[float], labels: Sequence[int]) -> float:
    """One-way ANOVA F for a single feature, straight from the definition."""
    x = [float(v) for v in column]
    y = [int(v) for v in labels]
    classes = sorted(set(y))
    n = len(x)
    grand = sum(x) / n
    ssb = 0.0
    ssw = 0.0
    for c in classes:
        group = [v for v, lab in zip(x, y) if lab == c]
        mean_c = sum(group) / len(group)
        ssb += len(group) * (mean_c - grand) ** 2
        ssw += sum((v - mean_c) ** 2 for v in group)
    df_between = len(classes) - 1
    df_within = n - len(classes)
    if ssw == 0.0:
        return float("inf")
    return (ssb / df_between) / (ssw / df_within)


def auc_binary_brute(scores: Sequence[float], is_positive: Sequence[bool]) -> float:
    """All-pairs counting AUC: wins plus half ties over pos x neg pairs."""
    pos = [float(s) for s, p in zip(scores, is_positive) if p]
    neg = [float(s) for s, p in zip(scores, is_positive) if not p]
    if not pos or not neg:
        raise ValueError("need at least one positive and one negative")
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auc_weighted_brute(scores: np.ndarray, labels: np.ndarray) -> float:
    """One-vs-rest AUC averaged over classes, weighted by class support."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    total = 0.0
    weight = 0.0
    for c in range(scores.shape[1]):
        mask = labels == c
        if mask.all() or not mask.any():
            continue
        total += auc_binary_brute(scores[:, c], mask) * mask.sum()
        weight += mask.sum()
    if weight == 0.0:
        raise ValueError("no class had both positives and negatives")
    return total / weight


def pearson_brute(values: np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlation from the definition, python loops."""
    values = np.asarray(values, dtype=np.float64)
    n, f = values.shape
    means = [sum(values[:, j]) / n for j in range(f)]
    out = np.empty((f, f))
    for i in range(f):
        for j in range(f):
            num = sum((values[r, i] - means[i]) * (values[r, j] - means[j]) for r in range(n))
            di = sum((values[r, i] - means[i]) ** 2 for r in range(n))
            dj = sum((values[r, j] - means[j]) ** 2 for r in range(n))
            if di == 0.0 or dj == 0.0:
                out[i, j] = 1.0 if i == j else 0.0
            else:
                out[i, j] = num / np.sqrt(di * dj)
    return out


def bucket_means_brute(source_ts: np.ndarray, source_values: np.ndarray,
                       target_ts: np.ndarray) -> np.ndarray:
    """Bucket-mean downsampling re-derived from the declared semantics.

    Bucket for target t is [t - P/2, t + P/2) with P the median target
    spacing; an empty bucket copies the nearest source row (earlier on ties).
    """
    source_ts = np.asarray(source_ts, dtype=np.float64)
    source_values = np.asarray(source_values, dtype=np.float64)
    target_ts = np.asarray(target_ts, dtype=np.float64)
    if target_ts.size > 1:
        period = float(np.median(np.diff(target_ts)))
    else:
        period = 0.0
    out = np.empty((target_ts.size, source_values.shape[1]))
    for i, t in enumerate(target_ts):
        rows = [
            k for k, ts in enumerate(source_ts)
            if (t - period / 2.0) <= ts < (t + period / 2.0)
        ] if period > 0.0 else []
        if rows:
            block = source_values[rows[0]: rows[-1] + 1]
            out[i] = block.mean(axis=0)
        else:
            gaps = np.abs(source_ts - t)
            out[i] = source_values[int(np.argmin(gaps))]
    return out
