"""Patch-local learning of coarse-to-fine corrections and hybrid assembly.

One global network maps per-patch inputs (the coarse solution restricted
to the patch corners, followed by the source values on the patch's fine
nodes) to the fine-scale fluctuation on that patch.  The hybrid solution
adds the prolongated per-patch predictions to the interpolated coarse
solution; training minimizes the mean squared nodal-l2 patch residual
over all samples and patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset, ModelStamp, sample_source, source_fn
from .fem import FeFunction, fe_solve, norm_l2, seminorm_h1, error_vs_reference
from .mesh import MeshHierarchy, Patch, build_hierarchy
from .parallel import parallel_map
from .rng import SplitMix64
from .transfer import interpolate_up, patch_weights, restrict_patch, prolongate_patch

__all__ = [
    "TrainConfig",
    "EvalRow",
    "TrainingDivergedError",
    "BudgetViolation",
    "input_dim",
    "output_dim",
    "patch_input",
    "patch_target",
    "build_patch_arrays",
    "loss",
    "train",
    "hybrid_solution",
    "evaluate",
    "error_budget",
    "stability_check",
]

COARSE_INPUT_MODES = ("patch", "global")

BUDGET_SLACK = 1e-10
LIPSCHITZ_TOLERANCE = 1e-9


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite; message names the epoch."""


class BudgetViolation(RuntimeError):
    """Measured error exceeded the four-term budget plus slack."""


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults mirror the reference experiment
    (4x512 tanh net, Adam 1e-3, decay 0.5 every 100 of 400 epochs)."""

    epochs: int = 400
    lr: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 100
    batch_size: int | None = 16  # samples per batch; None = full batch
    hidden: tuple[int, ...] = (512, 512, 512, 512)
    seed: int = 0
    coarse_input: str = "patch"
    standardize: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.lr <= 0 or self.lr_decay_every < 1:
            raise ValueError("epochs, lr and lr_decay_every must be positive")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must lie in (0, 1]")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.hidden or any(w < 1 for w in self.hidden):
            raise ValueError("hidden must list positive layer widths")
        if self.coarse_input not in COARSE_INPUT_MODES:
            raise ValueError(f"coarse_input must be one of {COARSE_INPUT_MODES}")


@dataclass
class EvalRow:
    """Mean split errors against the one-level-finer reference."""

    h: float
    split: str
    n_train: int
    err_coarse: float
    err_fine: float
    err_hybrid: float


def output_dim(level: int) -> int:
    return (2**level + 1) ** 2


def input_dim(n0: int, level: int, coarse_input: str = "patch") -> int:
    coarse = 4 if coarse_input == "patch" else (n0 + 1) ** 2
    return coarse + output_dim(level)


def patch_input(
    uH: FeFunction, f, p: Patch, level: int, coarse_input: str = "patch"
) -> np.ndarray:
    """Network input for one patch: coarse values of uH, then f on the
    patch's level nodes, patch-local row-major."""
    if uH.level != 0:
        raise ValueError("uH must live on level 0")
    m = uH.m
    coarse = uH.coeffs if coarse_input == "global" else restrict_patch(uH, p)
    nodes = m.patch_fine_nodes(p, level)
    xs, ys = m.node_grid(level)
    return np.concatenate([coarse, f(xs[nodes], ys[nodes])])


def patch_target(uh: FeFunction, uH: FeFunction, p: Patch) -> np.ndarray:
    """Fine-scale fluctuation (uh - uH) gathered on the patch nodes."""
    diff = uh.coeffs - interpolate_up(uH, uh.level, m=uh.m).coeffs
    return diff[uh.m.patch_fine_nodes(p, uh.level)]


def _patch_index_tables(m: MeshHierarchy, level: int) -> tuple[np.ndarray, np.ndarray]:
    patches = m.patches()
    fine = np.stack([m.patch_fine_nodes(p, level) for p in patches])
    corners = np.stack([m.patch_fine_nodes(p, 0) for p in patches])
    return corners, fine


def build_patch_arrays(
    ds: Dataset, m: MeshHierarchy | None = None, coarse_input: str = "patch"
) -> tuple[np.ndarray, np.ndarray]:
    """Stack inputs X and targets T for all (sample, patch) pairs.

    Rows are sample-major, patches in canonical row-major order inside
    each sample; this order is the contract shared with hybrid assembly.
    """
    if m is None:
        m = build_hierarchy(ds.n0, ds.levels)
    level = ds.levels
    corners, fine = _patch_index_tables(m, level)
    xs, ys = m.node_grid(level)
    xs_f, ys_f = xs[fine], ys[fine]
    xs_rows, ts_rows = [], []
    for s in ds.samples:
        f_vals = np.asarray(
            source_fn(s.params, ds.family)(xs_f, ys_f), dtype=float
        )
        coarse = (
            np.broadcast_to(s.uH, (fine.shape[0], s.uH.shape[0]))
            if coarse_input == "global"
            else s.uH[corners]
        )
        xs_rows.append(np.concatenate([coarse, f_vals], axis=1))
        uHh = interpolate_up(FeFunction(m, 0, s.uH), level, m=m).coeffs
        ts_rows.append((s.uh - uHh)[fine])
    return np.concatenate(xs_rows), np.concatenate(ts_rows)


def loss(net, dataset: Dataset, coarse_input: str = "patch") -> float:
    """Mean over samples and patches of the squared nodal-l2 residual."""
    X, T = build_patch_arrays(dataset, coarse_input=coarse_input)
    if isinstance(net, nn.Mlp) and (
        X.shape[1] != net.dims[0] or T.shape[1] != net.dims[-1]
    ):
        raise ValueError(
            f"net dims {net.dims[0]}->{net.dims[-1]} do not match mesh layout "
            f"{X.shape[1]}->{T.shape[1]}"
        )
    w = _predict(net, X)
    return float(np.sum((w - T) ** 2) / X.shape[0])


def _fold_standardization(net, mu_x, sd_x, mu_t, sd_t):
    # absorb affine input/output transforms into the first/last layers;
    # exact because both transforms and the layers are affine
    net.biases[0] -= net.weights[0] @ (mu_x / sd_x)
    net.weights[0] /= sd_x[None, :]
    net.weights[-1] *= sd_t[:, None]
    net.biases[-1] = net.biases[-1] * sd_t + mu_t


def train(
    dataset: Dataset, cfg: TrainConfig, test_dataset: Dataset | None = None
) -> tuple[nn.Mlp, list[tuple[int, float, float | None]]]:
    """Train one global net over all patches of all samples.

    Returns the net and the loss history [(epoch, train, test), ...] with
    epoch 0 holding the pre-training losses.  Deterministic given seeds.
    """
    if not dataset.samples:
        raise ValueError("dataset is empty")
    m = build_hierarchy(dataset.n0, dataset.levels)
    X, T = build_patch_arrays(dataset, m, cfg.coarse_input)
    Xt = Tt = None
    if test_dataset is not None:
        if (test_dataset.n0, test_dataset.levels) != (dataset.n0, dataset.levels):
            raise ValueError("test dataset mesh parameters differ from training set")
        Xt, Tt = build_patch_arrays(test_dataset, m, cfg.coarse_input)

    T_orig, Tt_orig = T, Tt
    mu_t = sd_t = None
    if cfg.standardize:
        mu_x, sd_x = X.mean(axis=0), X.std(axis=0)
        mu_t, sd_t = T.mean(axis=0), T.std(axis=0)
        sd_x[sd_x < 1e-12] = 1.0
        sd_t[sd_t < 1e-12] = 1.0
        X = (X - mu_x) / sd_x
        T = (T - mu_t) / sd_t
        if Xt is not None:
            Xt = (Xt - mu_x) / sd_x
            Tt = (Tt - mu_t) / sd_t

    dims = [X.shape[1], *cfg.hidden, T.shape[1]]
    net = nn.mlp_init(dims, seed=cfg.seed)
    state = nn.AdamState.init(net, lr=cfg.lr)
    shuffle_rng = SplitMix64(cfg.seed + 1)

    n_samples = len(dataset.samples)
    rows_per_sample = X.shape[0] // n_samples

    def true_loss(Xs, T_raw):
        # history always reports the unstandardized training objective
        w = nn.forward(net, Xs)
        if sd_t is not None:
            w = w * sd_t + mu_t
        return float(np.sum((w - T_raw) ** 2) / Xs.shape[0])

    def record(epoch: int) -> tuple[int, float, float | None]:
        tr = true_loss(X, T_orig)
        te = None if Xt is None else true_loss(Xt, Tt_orig)
        if not np.isfinite(tr) or (te is not None and not np.isfinite(te)):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}")
        return (epoch, tr, te)

    history = [record(0)]
    for epoch in range(1, cfg.epochs + 1):
        if epoch > 1 and (epoch - 1) % cfg.lr_decay_every == 0:
            state.lr *= cfg.lr_decay_factor
        if cfg.batch_size is None or cfg.batch_size >= n_samples:
            batches = [slice(None)]
        else:
            perm = shuffle_rng.permutation(n_samples)
            row_order = (
                perm[:, None] * rows_per_sample + np.arange(rows_per_sample)
            ).ravel()
            step = cfg.batch_size * rows_per_sample
            batches = [row_order[i : i + step] for i in range(0, len(row_order), step)]
        for rows in batches:
            xb, tb = X[rows], T[rows]
            residual = (2.0 / xb.shape[0]) * (nn.forward(net, xb) - tb)
            nn.adam_step(state, net, nn.gradients(net, xb, residual))
        history.append(record(epoch))

    if cfg.standardize:
        _fold_standardization(net, mu_x, sd_x, mu_t, sd_t)
    return net, history


def _predict(net, X: np.ndarray) -> np.ndarray:
    if isinstance(net, nn.Mlp):
        return nn.forward(net, X)
    if callable(net):  # test oracles substitute for a trained net
        return np.asarray(net(X), dtype=float)
    raise TypeError(f"cannot predict with {type(net)!r}")


def hybrid_solution(
    uH: FeFunction, f, net, level: int, coarse_input: str = "patch"
) -> FeFunction:
    """Interpolated coarse solution plus prolongated per-patch updates."""
    if uH.level != 0:
        raise ValueError("uH must live on level 0")
    m = uH.m
    corners, fine = _patch_index_tables(m, level)
    xs, ys = m.node_grid(level)
    f_vals = np.asarray(f(xs[fine], ys[fine]), dtype=float)
    coarse = (
        np.broadcast_to(uH.coeffs, (fine.shape[0], uH.coeffs.shape[0]))
        if coarse_input == "global"
        else uH.coeffs[corners]
    )
    X = np.concatenate([coarse, f_vals], axis=1)
    if isinstance(net, nn.Mlp) and (
        X.shape[1] != net.dims[0] or fine.shape[1] != net.dims[-1]
    ):
        raise ValueError(
            f"net dims {net.dims[0]}->{net.dims[-1]} do not match mesh layout "
            f"{X.shape[1]}->{fine.shape[1]}"
        )
    w = _predict(net, X)
    if w.shape != fine.shape:
        raise ValueError(f"prediction shape {w.shape} != {fine.shape}")
    correction = np.zeros(m.node_count(level))
    np.add.at(correction, fine.ravel(), w.ravel())
    correction *= patch_weights(m, level)
    base = interpolate_up(uH, level, m=m).coeffs
    return FeFunction(m=m, level=level, coeffs=base + correction)


def evaluate(
    net,
    train_set: Dataset,
    test_set: Dataset,
    ref_level: int | None = None,
    coarse_input: str = "patch",
) -> list[EvalRow]:
    """Mean coarse/fine/hybrid errors per split against the reference level."""
    if (train_set.n0, train_set.levels) != (test_set.n0, test_set.levels):
        raise ValueError("train and test sets use different meshes")
    level = train_set.levels
    if ref_level is None:
        ref_level = level + 1
    if ref_level <= level:
        raise ValueError("reference level must be finer than the target level")
    m = build_hierarchy(train_set.n0, level)
    m_ref = build_hierarchy(train_set.n0, ref_level)
    h = m.spacing(level)
    n_train = len(train_set.samples)

    rows = []
    for split, ds in (("train", train_set), ("test", test_set)):

        def sample_errors(s):
            f = source_fn(s.params, ds.family)
            u_ref = fe_solve(m_ref, ref_level, f)
            uH = FeFunction(m, 0, s.uH)
            uh = FeFunction(m, level, s.uh)
            uN = hybrid_solution(uH, f, net, level, coarse_input)
            return (
                error_vs_reference(uH, u_ref),
                error_vs_reference(uh, u_ref),
                error_vs_reference(uN, u_ref),
            )

        errs = np.array(parallel_map(sample_errors, ds.samples))
        rows.append(
            EvalRow(
                h=h,
                split=split,
                n_train=n_train,
                err_coarse=float(errs[:, 0].mean()),
                err_fine=float(errs[:, 1].mean()),
                err_hybrid=float(errs[:, 2].mean()),
            )
        )
    return rows


def error_budget(
    f,
    dataset: Dataset,
    net,
    ref_level: int | None = None,
    coarse_input: str = "patch",
) -> dict:
    """Four-term error split against the best training sample.

    Terms (all L2 at the reference level, the reference solve standing in
    for the exact solution): fine FE error, data distance to f_i, network
    approximation on f_i, and generalization distance of the hybrid
    solutions; the minimizing sample wins (lowest index on ties).  Raises
    BudgetViolation if the measured error exceeds the bracket sum plus
    slack -- it never should, the bracket is a triangle inequality.
    """
    if not dataset.samples:
        raise ValueError("dataset is empty")
    level = dataset.levels
    if ref_level is None:
        ref_level = level + 1
    m = build_hierarchy(dataset.n0, level)
    m_ref = build_hierarchy(dataset.n0, ref_level)

    def to_ref(fn: FeFunction) -> np.ndarray:
        return interpolate_up(fn, ref_level, m=m_ref).coeffs

    def norm_ref(vec: np.ndarray) -> float:
        return norm_l2(FeFunction(m_ref, ref_level, vec))

    u_ref = fe_solve(m_ref, ref_level, f).coeffs
    u_H = fe_solve(m, 0, f)
    u_h = to_ref(fe_solve(m, level, f))
    u_N_fn = hybrid_solution(u_H, f, net, level, coarse_input)
    u_N = to_ref(u_N_fn)

    fe_err = norm_ref(u_ref - u_h)

    def per_sample(s):
        f_i = source_fn(s.params, dataset.family)
        uh_i = to_ref(FeFunction(m, level, s.uh))
        uN_i_fn = hybrid_solution(FeFunction(m, 0, s.uH), f_i, net, level, coarse_input)
        uN_i = to_ref(uN_i_fn)
        return (
            norm_ref(u_h - uh_i),
            norm_ref(uh_i - uN_i),
            norm_ref(uN_i - u_N),
            uN_i_fn.coeffs - interpolate_up(FeFunction(m, 0, s.uH), level, m=m).coeffs,
        )

    terms = parallel_map(per_sample, dataset.samples)
    sums = np.array([fe_err + t2 + t3 + t4 for t2, t3, t4, _ in terms])
    best = int(np.argmin(sums))
    data_err, net_err, gen_err, w_best = terms[best]
    actual = norm_ref(u_ref - u_N)

    w_f = u_N_fn.coeffs - interpolate_up(u_H, level, m=m).coeffs
    grad_diag = seminorm_h1(FeFunction(m, level, w_f - w_best))

    record = {
        "ref_level": ref_level,
        "selected_index": best,
        "fe_error": fe_err,
        "data_error": float(data_err),
        "network_error": float(net_err),
        "generalization_error": float(gen_err),
        "sum": float(sums[best]),
        "actual": float(actual),
        "grad_network_diff": float(grad_diag),
        "slack": BUDGET_SLACK,
    }
    if actual > sums[best] + BUDGET_SLACK:
        raise BudgetViolation(
            f"measured error {actual:.6e} exceeds budget {sums[best]:.6e} + {BUDGET_SLACK}"
        )
    return record


def stability_check(
    net: nn.Mlp,
    stamp: ModelStamp,
    n_pairs: int = 1000,
    seed: int = 0,
    family: str = "verbatim",
) -> dict:
    """Empirical Lipschitz audit against the weight-norm product bound.

    Samples pairs of family inputs on random patches and compares the
    output/input distance ratio with the product of layer spectral norms;
    tanh is 1-Lipschitz so the product alone must dominate.  The H1 ratio
    of the prolongated output difference is reported as a diagnostic only.
    """
    m = build_hierarchy(stamp.n0, max(stamp.level, 1))
    level = stamp.level
    expected_in = input_dim(stamp.n0, level, stamp.coarse_input)
    if net.dims[0] != expected_in or net.dims[-1] != output_dim(level):
        raise ValueError(
            f"net dims {net.dims[0]}->{net.dims[-1]} do not match stamp "
            f"{expected_in}->{output_dim(level)}"
        )
    rng = SplitMix64(seed)
    c_w = nn.lipschitz_constant(net)
    max_ratio = 0.0
    ratio_sum = 0.0
    h1_max = 0.0
    h1_sum = 0.0
    used = 0
    for _ in range(n_pairs):
        pa, pb = sample_source(rng), sample_source(rng)
        patch = Patch(rng.randint_below(stamp.n0), rng.randint_below(stamp.n0))
        fa, fb = source_fn(pa, family), source_fn(pb, family)
        ya = patch_input(fe_solve(m, 0, fa), fa, patch, level, stamp.coarse_input)
        yb = patch_input(fe_solve(m, 0, fb), fb, patch, level, stamp.coarse_input)
        dy = float(np.linalg.norm(ya - yb))
        if dy == 0.0:
            continue
        dw = nn.forward(net, ya) - nn.forward(net, yb)
        ratio = float(np.linalg.norm(dw)) / dy
        max_ratio = max(max_ratio, ratio)
        ratio_sum += ratio
        h1 = seminorm_h1(
            FeFunction(m, level, prolongate_patch(dw, m, patch, level))
        )
        h1_max = max(h1_max, h1 / dy)
        h1_sum += h1 / dy
        used += 1
    return {
        "n_pairs": n_pairs,
        "used_pairs": used,
        "seed": seed,
        "c_w": float(c_w),
        "max_ratio": max_ratio,
        "mean_ratio": ratio_sum / used if used else 0.0,
        "h1_ratio_max": h1_max,
        "h1_ratio_mean": h1_sum / used if used else 0.0,
        "tolerance": LIPSCHITZ_TOLERANCE,
        "pass": max_ratio <= c_w * (1.0 + LIPSCHITZ_TOLERANCE),
    }
