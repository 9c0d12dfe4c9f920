"""Content-aware latent-factor trainers and ranking.

Three trainers share one training-instance set (positives with confidence
weights, sampled negatives with weight 1):

- almm_train: per iteration, (a) closed-form ALS row updates for user / last /
  next factors, (b) ridge-regression content mappings, (c) refresh of the
  article factors with the mapped features.
- forbes_train: article factors are defined through the mappings for the whole
  run; user factors and mappings learned jointly by SGD.
- oord_train: stage 1 is the pure ALS loop without content, stage 2 fits the
  mappings once by ridge; prediction always uses mapped features.

Prediction scores a candidate next article as the symmetric sum of the three
pairwise inner products among the user vector, the last article's
last-position vector, and the candidate's next-position vector. Content-mapped
vectors stand in for any article that was not trained on (the cold path), and
unseen users score with a zero user vector.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .errors import DivergenceError, EmptyInputError
from .numerics import load_matrix, ridge_solve, save_matrix
from .transitions import TripletSet

MODEL_KINDS = ("almm", "forbes", "oord")
MANIFEST_NAME = "manifest.json"
_MATRIX_FILES = {
    "user_factors": "U.mat",
    "last_factors": "X.mat",
    "next_factors": "Y.mat",
    "last_mapping": "PsiX.mat",
    "next_mapping": "PsiY.mat",
}


@dataclass
class Hyperparams:
    latent_dim: int = 32
    reg_user: float = 0.1
    reg_last: float = 0.1
    reg_next: float = 0.1
    reg_mapping: float = 1.0
    refresh_blend: float = 1.0  # 1.0 replaces article factors with mapped features
    negatives_per_positive: int = 4
    iterations: int = 15
    sgd_lr: float = 0.01
    sgd_decay: float = 0.9
    sgd_epochs: int = 30
    seed: int = 42

    def validate(self) -> None:
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        for name in ("reg_user", "reg_last", "reg_next", "reg_mapping"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be >= 0" % name)
        if not 0.0 <= self.refresh_blend <= 1.0:
            raise ValueError("refresh_blend must be in [0, 1]")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.iterations < 1 or self.sgd_epochs < 1:
            raise ValueError("iterations and sgd_epochs must be >= 1")


@dataclass(frozen=True)
class TrainingInstance:
    u: int  # dense user index
    i: int  # dense index of the last-clicked article
    j: int  # dense index of the candidate next article
    target: float  # 1 for observed transitions, 0 for sampled negatives
    weight: float  # confidence for positives, 1 for negatives


@dataclass
class FactorModel:
    kind: str
    hyper: Hyperparams
    user_factors: np.ndarray  # n_users x d
    last_factors: np.ndarray  # n_articles x d
    next_factors: np.ndarray  # n_articles x d
    last_mapping: np.ndarray  # m x d, content -> last-position vectors
    next_mapping: np.ndarray  # m x d, content -> next-position vectors
    users: dict[str, int]
    articles: dict[str, int]
    loss_trace: list = field(default_factory=list)  # (stage label, objective value)


def sample_negatives(triplet_set: TripletSet, negatives_per_positive: int, seed: int):
    """Build the training-instance sequence: each positive followed by its negatives.

    For each positive (u, i, j), up to `negatives_per_positive` articles j' are
    drawn uniformly from the train article universe with j' != j, j' != i and
    (u, i, j') not a positive, rejection-resampling at most 100 times per slot.
    """
    if negatives_per_positive < 1:
        raise ValueError("negatives_per_positive must be >= 1")
    n_articles = len(triplet_set.articles)
    if n_articles < 3:
        raise ValueError(
            "article universe of size %d is too small to sample negatives" % n_articles
        )
    positives = set()
    encoded = []
    for t in triplet_set:
        u = triplet_set.users[t.user]
        i = triplet_set.articles[t.last_article]
        j = triplet_set.articles[t.next_article]
        positives.add((u, i, j))
        encoded.append((u, i, j, t.confidence))

    rng = np.random.default_rng(seed)
    instances = []
    for u, i, j, confidence in encoded:
        instances.append(TrainingInstance(u=u, i=i, j=j, target=1.0, weight=confidence))
        for _ in range(negatives_per_positive):
            for _attempt in range(100):
                j_neg = int(rng.integers(n_articles))
                if j_neg != j and j_neg != i and (u, i, j_neg) not in positives:
                    instances.append(
                        TrainingInstance(u=u, i=i, j=j_neg, target=0.0, weight=1.0)
                    )
                    break
    return instances


def _instance_arrays(instances):
    uu = np.fromiter((inst.u for inst in instances), dtype=np.int64, count=len(instances))
    ii = np.fromiter((inst.i for inst in instances), dtype=np.int64, count=len(instances))
    jj = np.fromiter((inst.j for inst in instances), dtype=np.int64, count=len(instances))
    tt = np.fromiter((inst.target for inst in instances), dtype=np.float64, count=len(instances))
    cc = np.fromiter((inst.weight for inst in instances), dtype=np.float64, count=len(instances))
    return uu, ii, jj, tt, cc


def _row_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("nd,nd->n", a, b)


def _data_loss(U, X, Y, uu, ii, jj, tt, cc) -> float:
    pred = _row_dots(U[uu], X[ii]) + _row_dots(U[uu], Y[jj]) + _row_dots(X[ii], Y[jj])
    resid = tt - pred
    return float(np.dot(cc * resid, resid))


def _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper: Hyperparams) -> float:
    loss = _data_loss(U, X, Y, uu, ii, jj, tt, cc)
    loss += hyper.reg_user * float(np.sum(U * U))
    loss += hyper.reg_last * float(np.sum(X * X))
    loss += hyper.reg_next * float(np.sum(Y * Y))
    return loss


def objective(model: FactorModel, instances) -> float:
    """Confidence-weighted squared loss over instances plus factor regularizers."""
    uu, ii, jj, tt, cc = _instance_arrays(instances)
    return _full_loss(
        model.user_factors,
        model.last_factors,
        model.next_factors,
        uu,
        ii,
        jj,
        tt,
        cc,
        model.hyper,
    )


def _group_rows(indices: np.ndarray, n_rows: int):
    groups: list[list[int]] = [[] for _ in range(n_rows)]
    for pos, row in enumerate(indices):
        groups[row].append(pos)
    return [np.array(g, dtype=np.int64) for g in groups]


def _als_update(target, groups, left, left_idx, right, right_idx, tt, cc, reg):
    """Closed-form row update for one factor matrix.

    Row r minimizes sum_n c_n (t_n - w.(left_n + right_n) - left_n.right_n)^2
    + reg ||w||^2 over its instances; rows with no instances keep their value.
    """
    for row, members in enumerate(groups):
        if members.size == 0:
            continue
        lf = left[left_idx[members]]
        rf = right[right_idx[members]]
        design = lf + rf
        resid = tt[members] - _row_dots(lf, rf)
        w = np.sqrt(cc[members])
        target[row] = ridge_solve(design * w[:, None], resid * w, reg)


def _init_factors(rng: np.random.Generator, n_users: int, n_articles: int, dim: int):
    # Draw order (U, X, Y) is part of the determinism contract shared with oord.
    scale = 0.1 / np.sqrt(dim)
    U = rng.normal(0.0, scale, size=(n_users, dim))
    X = rng.normal(0.0, scale, size=(n_articles, dim))
    Y = rng.normal(0.0, scale, size=(n_articles, dim))
    return U, X, Y


def _default_ids(prefix: str, n: int):
    return ["%s%d" % (prefix, k) for k in range(n)]


def _index_map(ids) -> dict[str, int]:
    return {a: k for k, a in enumerate(ids)}


def _check_training_inputs(instances, content):
    if not instances:
        raise EmptyInputError("no training instances")
    if content.shape[0] < 1:
        raise EmptyInputError("empty content matrix")


def _sizes(instances, content, user_ids):
    n_articles = content.shape[0]
    n_users = len(user_ids) if user_ids is not None else int(max(inst.u for inst in instances)) + 1
    return n_users, n_articles


def _materialize(content, mapping) -> np.ndarray:
    return np.asarray(content @ mapping)


def _als_sweeps(U, X, Y, arrays, groups, hyper, trace, label):
    uu, ii, jj, tt, cc = arrays
    groups_u, groups_i, groups_j = groups
    _als_update(U, groups_u, X, ii, Y, jj, tt, cc, hyper.reg_user)
    trace.append(("%s:users" % label, _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper)))
    _als_update(X, groups_i, U, uu, Y, jj, tt, cc, hyper.reg_last)
    trace.append(("%s:last" % label, _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper)))
    _als_update(Y, groups_j, U, uu, X, ii, tt, cc, hyper.reg_next)
    trace.append(("%s:next" % label, _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper)))


def almm_train(instances, content, hyper: Hyperparams, *, user_ids=None, article_ids=None) -> FactorModel:
    """Joint ALS + ridge mapping + refresh loop.

    Per iteration: (a) ALS half-sweeps over user, last-article and next-article
    factors (each row a weighted ridge solve with the other factors fixed),
    (b) content mappings fit by ridge regression onto the current factors,
    (c) article factors blended toward the mapped features by refresh_blend.
    Factors are initialized from seeded Gaussian(0, 0.1/sqrt(d)) draws in the
    order U, X, Y; negatives arrive pre-sampled inside `instances` and stay
    fixed across iterations.
    """
    hyper.validate()
    _check_training_inputs(instances, content)
    arrays = _instance_arrays(instances)
    uu, ii, jj, tt, cc = arrays
    n_users, n_articles = _sizes(instances, content, user_ids)
    groups = (
        _group_rows(uu, n_users),
        _group_rows(ii, n_articles),
        _group_rows(jj, n_articles),
    )
    rng = np.random.default_rng(hyper.seed)
    U, X, Y = _init_factors(rng, n_users, n_articles, hyper.latent_dim)
    trace = [("init", _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper))]
    last_mapping = next_mapping = None
    for it in range(1, hyper.iterations + 1):
        label = "iter%d" % it
        _als_sweeps(U, X, Y, arrays, groups, hyper, trace, label)
        last_mapping = ridge_solve(content, X, hyper.reg_mapping)
        next_mapping = ridge_solve(content, Y, hyper.reg_mapping)
        if hyper.refresh_blend > 0.0:
            blend = hyper.refresh_blend
            X = (1.0 - blend) * X + blend * _materialize(content, last_mapping)
            Y = (1.0 - blend) * Y + blend * _materialize(content, next_mapping)
        loss = _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper)
        trace.append(("%s:refresh" % label, loss))
        if not np.isfinite(loss):
            raise DivergenceError("non-finite objective at iteration %d" % it)
    if user_ids is None:
        user_ids = _default_ids("u", n_users)
    if article_ids is None:
        article_ids = _default_ids("n", n_articles)
    return FactorModel(
        kind="almm",
        hyper=hyper,
        user_factors=U,
        last_factors=X,
        next_factors=Y,
        last_mapping=last_mapping,
        next_mapping=next_mapping,
        users=_index_map(user_ids),
        articles=_index_map(article_ids),
        loss_trace=trace,
    )


def _content_rows(content):
    """Per-article (column indices, values) pairs; indices is None for dense rows."""
    if sparse.issparse(content):
        csr = content.tocsr()
        rows = []
        for r in range(csr.shape[0]):
            lo, hi = csr.indptr[r], csr.indptr[r + 1]
            rows.append((csr.indices[lo:hi], np.asarray(csr.data[lo:hi], dtype=np.float64)))
        return rows
    dense = np.asarray(content, dtype=np.float64)
    return [(None, dense[r]) for r in range(dense.shape[0])]


def _mapped(row, mapping: np.ndarray) -> np.ndarray:
    idx, vals = row
    if idx is None:
        return vals @ mapping
    return vals @ mapping[idx]


def forbes_instance_loss(user_vec, last_mapping, next_mapping, a_i, a_j, target, weight) -> float:
    """weight * (target - score)^2 for one instance with mapped article vectors."""
    x = np.asarray(a_i, dtype=np.float64) @ last_mapping
    y = np.asarray(a_j, dtype=np.float64) @ next_mapping
    pred = float(np.dot(user_vec, x) + np.dot(user_vec, y) + np.dot(x, y))
    return weight * (target - pred) ** 2


def forbes_instance_gradients(user_vec, last_mapping, next_mapping, a_i, a_j, target, weight):
    """Analytic gradients of forbes_instance_loss wrt (user_vec, last_mapping, next_mapping)."""
    a_i = np.asarray(a_i, dtype=np.float64)
    a_j = np.asarray(a_j, dtype=np.float64)
    x = a_i @ last_mapping
    y = a_j @ next_mapping
    pred = float(np.dot(user_vec, x) + np.dot(user_vec, y) + np.dot(x, y))
    err = weight * (target - pred)
    grad_user = -2.0 * err * (x + y)
    grad_last = -2.0 * err * np.outer(a_i, user_vec + y)
    grad_next = -2.0 * err * np.outer(a_j, user_vec + x)
    return grad_user, grad_last, grad_next


def forbes_train(instances, content, hyper: Hyperparams, *, user_ids=None, article_ids=None) -> FactorModel:
    """Single-stage SGD with article vectors defined through the content mappings.

    Per instance, with x, y and the user vector evaluated before the updates
    and e = weight * (target - score):
        U_u     += lr * (e * (x + y) - reg_user * U_u)
        Psi_X   += lr * (e * a_i (x) (U_u + y) - reg_last * Psi_X)
        Psi_Y   += lr * (e * a_j (x) (U_u + x) - reg_next * Psi_Y)
    Instances are reshuffled each epoch and the learning rate decays by
    sgd_decay per epoch; update order is part of the determinism contract.
    """
    hyper.validate()
    _check_training_inputs(instances, content)
    n_users, n_articles = _sizes(instances, content, user_ids)
    dim = hyper.latent_dim
    m = content.shape[1]
    rng = np.random.default_rng(hyper.seed)
    scale = 0.1 / np.sqrt(dim)
    U = rng.normal(0.0, scale, size=(n_users, dim))
    last_mapping = rng.normal(0.0, scale, size=(m, dim))
    next_mapping = rng.normal(0.0, scale, size=(m, dim))
    rows = _content_rows(content)

    lr = hyper.sgd_lr
    n_inst = len(instances)
    for epoch in range(1, hyper.sgd_epochs + 1):
        order = rng.permutation(n_inst)
        for pos in order:
            inst = instances[pos]
            row_i = rows[inst.i]
            row_j = rows[inst.j]
            x = _mapped(row_i, last_mapping)
            y = _mapped(row_j, next_mapping)
            u_old = U[inst.u].copy()
            pred = float(np.dot(u_old, x) + np.dot(u_old, y) + np.dot(x, y))
            err = inst.weight * (inst.target - pred)
            U[inst.u] += lr * (err * (x + y) - hyper.reg_user * u_old)
            if hyper.reg_last > 0.0:
                last_mapping *= 1.0 - lr * hyper.reg_last
            idx_i, vals_i = row_i
            if idx_i is None:
                last_mapping += (lr * err) * np.outer(vals_i, u_old + y)
            else:
                last_mapping[idx_i] += (lr * err) * np.outer(vals_i, u_old + y)
            if hyper.reg_next > 0.0:
                next_mapping *= 1.0 - lr * hyper.reg_next
            idx_j, vals_j = row_j
            if idx_j is None:
                next_mapping += (lr * err) * np.outer(vals_j, u_old + x)
            else:
                next_mapping[idx_j] += (lr * err) * np.outer(vals_j, u_old + x)
        if not (
            np.all(np.isfinite(U))
            and np.all(np.isfinite(last_mapping))
            and np.all(np.isfinite(next_mapping))
        ):
            raise DivergenceError("non-finite parameters after epoch %d" % epoch)
        lr *= hyper.sgd_decay

    X = _materialize(content, last_mapping)
    Y = _materialize(content, next_mapping)
    if user_ids is None:
        user_ids = _default_ids("u", n_users)
    if article_ids is None:
        article_ids = _default_ids("n", n_articles)
    return FactorModel(
        kind="forbes",
        hyper=hyper,
        user_factors=U,
        last_factors=X,
        next_factors=Y,
        last_mapping=last_mapping,
        next_mapping=next_mapping,
        users=_index_map(user_ids),
        articles=_index_map(article_ids),
        loss_trace=[],
    )


def oord_train(instances, content, hyper: Hyperparams, *, user_ids=None, article_ids=None) -> FactorModel:
    """Two-stage trainer: pure ALS without content, then post-hoc ridge mappings.

    Stage 1 shares the ALS code path (and the seeded init draw order) with
    almm_train, so its factors are bit-identical to an almm run with
    refresh_blend = 0. Prediction for this kind always uses mapped features.
    """
    hyper.validate()
    _check_training_inputs(instances, content)
    arrays = _instance_arrays(instances)
    uu, ii, jj, tt, cc = arrays
    n_users, n_articles = _sizes(instances, content, user_ids)
    groups = (
        _group_rows(uu, n_users),
        _group_rows(ii, n_articles),
        _group_rows(jj, n_articles),
    )
    rng = np.random.default_rng(hyper.seed)
    U, X, Y = _init_factors(rng, n_users, n_articles, hyper.latent_dim)
    trace = [("init", _full_loss(U, X, Y, uu, ii, jj, tt, cc, hyper))]
    for it in range(1, hyper.iterations + 1):
        label = "iter%d" % it
        _als_sweeps(U, X, Y, arrays, groups, hyper, trace, label)
        loss = trace[-1][1]
        if not np.isfinite(loss):
            raise DivergenceError("non-finite objective at iteration %d" % it)
    last_mapping = ridge_solve(content, X, hyper.reg_mapping)
    next_mapping = ridge_solve(content, Y, hyper.reg_mapping)
    if user_ids is None:
        user_ids = _default_ids("u", n_users)
    if article_ids is None:
        article_ids = _default_ids("n", n_articles)
    return FactorModel(
        kind="oord",
        hyper=hyper,
        user_factors=U,
        last_factors=X,
        next_factors=Y,
        last_mapping=last_mapping,
        next_mapping=next_mapping,
        users=_index_map(user_ids),
        articles=_index_map(article_ids),
        loss_trace=trace,
    )


def effective_vectors(model: FactorModel, article_id: str, features):
    """Last- and next-position vectors used to score an article.

    Stored factors for trained articles (almm/forbes); content-mapped vectors
    for cold articles and for every article under the oord kind.
    """
    idx = model.articles.get(article_id)
    if idx is None or model.kind == "oord":
        row = features.rows([article_id])
        x = np.asarray(row @ model.last_mapping).ravel()
        y = np.asarray(row @ model.next_mapping).ravel()
        return x, y
    return np.array(model.last_factors[idx]), np.array(model.next_factors[idx])


def predict(model: FactorModel, user: str, last_article: str, candidates, features):
    """Rank candidates by score descending; returns (article id, score) pairs.

    Ties break by ascending trained article index, with cold candidates (no
    trained index) ordered after trained ones by article id, which makes the
    ranking invariant to candidate input order. Unseen users score with a zero
    user vector, reducing the score to X_i.Y_j.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    missing = [a for a in [last_article, *candidates] if a not in features.row_index]
    if missing:
        raise ValueError(
            "articles missing from the feature matrix: %s" % ", ".join(sorted(set(missing)))
        )
    dim = model.hyper.latent_dim
    user_idx = model.users.get(user)
    u = model.user_factors[user_idx] if user_idx is not None else np.zeros(dim)
    x_i, _ = effective_vectors(model, last_article, features)

    n = len(candidates)
    Y = np.empty((n, dim), dtype=np.float64)
    keys = []
    stored_pos, stored_rows = [], []
    mapped_pos, mapped_ids = [], []
    for pos, article in enumerate(candidates):
        idx = model.articles.get(article)
        keys.append((0, idx) if idx is not None else (1, article))
        if idx is not None and model.kind != "oord":
            stored_pos.append(pos)
            stored_rows.append(idx)
        else:
            mapped_pos.append(pos)
            mapped_ids.append(article)
    if stored_pos:
        Y[stored_pos] = model.next_factors[stored_rows]
    if mapped_pos:
        Y[mapped_pos] = np.asarray(features.rows(mapped_ids) @ model.next_mapping)

    scores = Y @ u + Y @ x_i + float(np.dot(u, x_i))
    order = sorted(range(n), key=lambda p: (-scores[p], keys[p]))
    return [(candidates[p], float(scores[p])) for p in order]


def save_model(model: FactorModel, dirpath) -> None:
    """Persist manifest.json plus the five factor/mapping matrices."""
    os.makedirs(dirpath, exist_ok=True)
    manifest = {
        "kind": model.kind,
        "hyperparams": asdict(model.hyper),
        "users": model.users,
        "articles": model.articles,
        "loss_trace": model.loss_trace,
    }
    with open(os.path.join(dirpath, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for attr, filename in _MATRIX_FILES.items():
        save_matrix(getattr(model, attr), os.path.join(dirpath, filename))


def load_model(dirpath) -> FactorModel:
    with open(os.path.join(dirpath, MANIFEST_NAME), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    matrices = {
        attr: load_matrix(os.path.join(dirpath, filename))
        for attr, filename in _MATRIX_FILES.items()
    }
    return FactorModel(
        kind=manifest["kind"],
        hyper=Hyperparams(**manifest["hyperparams"]),
        users={str(k): int(v) for k, v in manifest["users"].items()},
        articles={str(k): int(v) for k, v in manifest["articles"].items()},
        loss_trace=[(str(a), float(b)) for a, b in manifest.get("loss_trace", [])],
        **matrices,
    )
