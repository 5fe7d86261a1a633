"""Two-stage bilinear relation attention with hand-written gradients.

Both stages share one block. Given column sets X (dx, a) and Y (dy, b):

    X~ = tanh(Wx^T X + bx)            Y~ = tanh(Wy^T Y + by)        (K rows)
    logits_g[i, j] = sum_k p_g[k] (U^T X~_i)[k] (Z^T Y~_j)[k]
    alpha_g = softmax over all a*b entries of logits_g
    pooled_g[r] = sum_ij alpha_g[i, j] (U'_r^T X~_i) (Z'_r^T Y~_j)
    out = Wo^T concat_g(pooled_g) + bo

The first stage relates instances to background; its output vector is the
single column X of the second stage, which relates it to the question
words. A linear classifier maps the second stage output to answer logits.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .masks import ShapeError

ORDERS = ("I-B-Q", "I-Q-B", "B-Q-I", "I-B", "I-Q", "B-Q", "none")
DEFAULT_ORDER = "I-B-Q"

# order -> (first-stage views, second-stage view, attend in stage 1, attend in stage 2)
_WIRING = {
    "I-B-Q": (("I", "B"), "Q", True, True),
    "I-Q-B": (("I", "Q"), "B", True, True),
    "B-Q-I": (("B", "Q"), "I", True, True),
    "I-B": (("I", "B"), "Q", True, False),
    "I-Q": (("I", "Q"), "B", True, False),
    "B-Q": (("B", "Q"), "I", True, False),
    "none": (("I", "B"), "Q", False, False),
}

BLOCK_PARAMS = ("Wx", "bx", "Wy", "by", "U", "Z", "P", "Up", "Zp", "Wo", "bo")


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int = 2048  # L
    question_dim: int = 768  # n
    question_len: int = 14  # h
    fused_dim: int = 1024  # m
    rank: int = 32  # gamma, pooling rank
    logit_rank: int = 32  # gamma', attention-logit rank
    glimpses: int = 8
    answers: int = 3000  # T
    order: str = DEFAULT_ORDER
    dropout: float = 0.5
    mask_padding: bool = False

    def __post_init__(self):
        for name in ("feature_dim", "question_dim", "question_len", "fused_dim",
                     "rank", "logit_rank", "glimpses", "answers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.order not in ORDERS:
            raise ValueError(f"unknown order {self.order!r}; expected one of {ORDERS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    def view_dim(self, view):
        return self.question_dim if view == "Q" else self.feature_dim

    def stage_shapes(self):
        """Input dims, hidden dim and output dim of both stages."""
        (x, y), z, _, _ = _WIRING[self.order]
        dx, dy, dz = self.view_dim(x), self.view_dim(y), self.view_dim(z)
        first = (dx, dy, min(dx, dy), self.fused_dim)
        second = (self.fused_dim, dz, min(self.fused_dim, dz), self.rank)
        return first, second

    def replace(self, **kw):
        return ModelConfig(**{**asdict(self), **kw})


def project_tanh(X, W, b):
    """tanh(X^T W + b), returned transposed so projected columns line up with X's."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ShapeError(f"projection shapes X{X.shape} W{W.shape} b{b.shape} disagree")
    return np.tanh(W.T @ X + b[:, None])


def attention_logits(Xt, Yt, U, Z, p):
    """Low-rank bilinear logits, shape (a, b)."""
    if U.shape[1] != p.shape[0] or Z.shape[1] != p.shape[0]:
        raise ShapeError("logit factors and glimpse vector ranks disagree")
    if U.shape[0] != Xt.shape[0] or Z.shape[0] != Yt.shape[0]:
        raise ShapeError("logit factors do not match the projected dims")
    return (U.T @ Xt).T @ (p[:, None] * (Z.T @ Yt))


def attention_softmax(logits, col_mask=None):
    """Softmax jointly over every entry of ``logits``.

    ``col_mask`` (bool per column) excludes columns from the support.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if col_mask is not None:
        logits = np.where(col_mask[None, :], logits, -np.inf)
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def uniform_map(a, b, col_mask=None):
    alpha = np.ones((a, b))
    if col_mask is not None:
        alpha = alpha * col_mask[None, :]
    return alpha / alpha.sum()


def bilinear_pool(Xt, Yt, alpha, Up, Zp):
    """pooled[r] = sum_ij alpha[i, j] (Up_r . Xt_i)(Zp_r . Yt_j), shape (rank,)."""
    if alpha.shape != (Xt.shape[1], Yt.shape[1]):
        raise ShapeError(f"attention map {alpha.shape} does not match ({Xt.shape[1]}, {Yt.shape[1]})")
    Du = Up.T @ Xt
    Bz = Zp.T @ Yt
    return np.sum(Du * (Bz @ alpha.T), axis=1)


def _dropout_mask(rng, shape, rate):
    if rng is None or rate == 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def block_forward(X, Y, prm, attend=True, rng=None, rate=0.0, col_mask=None):
    """One bilinear attention stage. ``prm`` maps BLOCK_PARAMS names to arrays."""
    Xt = project_tanh(X, prm["Wx"], prm["bx"])
    Yt = project_tanh(Y, prm["Wy"], prm["by"])
    Mx = _dropout_mask(rng, Xt.shape, rate)
    My = _dropout_mask(rng, Yt.shape, rate)
    Xh = Xt if Mx is None else Xt * Mx
    Yh = Yt if My is None else Yt * My
    A = prm["U"].T @ Xh
    Bm = prm["Z"].T @ Yh
    Du = prm["Up"].T @ Xh
    Bz = prm["Zp"].T @ Yh
    if col_mask is not None and not col_mask.any():
        col_mask = None
    maps, pooled = [], []
    for p in prm["P"]:
        if attend:
            alpha = attention_softmax(A.T @ (p[:, None] * Bm), col_mask)
        else:
            alpha = uniform_map(Xh.shape[1], Yh.shape[1], col_mask)
        maps.append(alpha)
        pooled.append(np.sum(Du * (Bz @ alpha.T), axis=1))
    c = np.concatenate(pooled)
    out = prm["Wo"].T @ c + prm["bo"]
    Mo = _dropout_mask(rng, out.shape, rate)
    cache = dict(X=X, Y=Y, Xt=Xt, Yt=Yt, Mx=Mx, My=My, Xh=Xh, Yh=Yh, A=A, Bm=Bm,
                 Du=Du, Bz=Bz, maps=maps, c=c, Mo=Mo, attend=attend)
    return (out if Mo is None else out * Mo), cache


def block_backward(prm, cache, dout):
    """Gradients of a block w.r.t. its parameters and both inputs."""
    if cache["Mo"] is not None:
        dout = dout * cache["Mo"]
    Xh, Yh, A, Bm, Du, Bz = (cache[k] for k in ("Xh", "Yh", "A", "Bm", "Du", "Bz"))
    g = {"Wo": np.outer(cache["c"], dout), "bo": dout.copy()}
    dc = prm["Wo"] @ dout
    rank = Du.shape[0]
    dDu = np.zeros_like(Du)
    dBz = np.zeros_like(Bz)
    dA = np.zeros_like(A)
    dBm = np.zeros_like(Bm)
    dP = np.zeros_like(prm["P"])
    for gi, (p, alpha) in enumerate(zip(prm["P"], cache["maps"])):
        dpool = dc[gi * rank:(gi + 1) * rank]
        dDu += dpool[:, None] * (Bz @ alpha.T)
        dBz += dpool[:, None] * (Du @ alpha)
        if not cache["attend"]:
            continue
        dalpha = (Du * dpool[:, None]).T @ Bz
        dlog = alpha * (dalpha - np.sum(alpha * dalpha))
        AdL = A @ dlog
        dP[gi] = np.sum(AdL * Bm, axis=1)
        dA += p[:, None] * (Bm @ dlog.T)
        dBm += p[:, None] * AdL
    g["P"] = dP
    g["U"] = Xh @ dA.T
    g["Z"] = Yh @ dBm.T
    g["Up"] = Xh @ dDu.T
    g["Zp"] = Yh @ dBz.T
    dXh = prm["U"] @ dA + prm["Up"] @ dDu
    dYh = prm["Z"] @ dBm + prm["Zp"] @ dBz
    out = {}
    for side, dh, M, T_ in (("x", dXh, cache["Mx"], cache["Xt"]), ("y", dYh, cache["My"], cache["Yt"])):
        if M is not None:
            dh = dh * M
        dpre = dh * (1.0 - T_ * T_)
        src = cache["X"] if side == "x" else cache["Y"]
        g["W" + side] = src @ dpre.T
        g["b" + side] = dpre.sum(axis=1)
        out[side] = prm["W" + side] @ dpre
    return g, out["x"], out["y"]


def answer_head(O, W, b):
    return W.T @ O + b


def predict(logits):
    """Predicted answer; ties go to the lowest index."""
    return int(np.argmax(logits))


def _prm(params, stage):
    return {k: params[f"{stage}.{k}"] for k in BLOCK_PARAMS}


def param_shapes(config):
    first, second = config.stage_shapes()
    shapes = {}
    for stage, (dx, dy, k, out) in (("intra", first), ("inter", second)):
        shapes.update({
            f"{stage}.Wx": (dx, k), f"{stage}.bx": (k,),
            f"{stage}.Wy": (dy, k), f"{stage}.by": (k,),
            f"{stage}.U": (k, config.logit_rank), f"{stage}.Z": (k, config.logit_rank),
            f"{stage}.P": (config.glimpses, config.logit_rank),
            f"{stage}.Up": (k, config.rank), f"{stage}.Zp": (k, config.rank),
            f"{stage}.Wo": (config.glimpses * config.rank, out), f"{stage}.bo": (out,),
        })
    shapes["cls.W"] = (config.rank, config.answers)
    shapes["cls.b"] = (config.answers,)
    return shapes


def _fan_in(name, shape):
    leaf = name.split(".")[1]
    return shape[1] if leaf == "P" else shape[0]


def init_params(config, seed=0):
    """He-uniform weights, bound sqrt(6 / fan_in); zero biases.

    Two multiplicative stages compound any per-layer gain below one, so a
    smaller bound starves the classifier of input-dependent signal.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.split(".")[1] in ("bx", "by", "bo", "b"):
            params[name] = np.zeros(shape)
            continue
        bound = np.sqrt(6.0 / _fan_in(name, shape))
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _views(D, B, q):
    return {"I": np.asarray(D, dtype=np.float64), "B": np.asarray(B, dtype=np.float64),
            "Q": np.asarray(q, dtype=np.float64)}


def _q_mask(config, q, view):
    if view != "Q" or not config.mask_padding:
        return None
    return np.any(q != 0.0, axis=0)


def forward(D, B, q, params, config, train=False, rng=None):
    """Answer logits and a cache for :func:`backward`.

    In train mode, dropout masks are drawn from ``rng`` in a fixed order.
    """
    (vx, vy), vz, att1, att2 = _WIRING[config.order]
    views = _views(D, B, q)
    for name, want in (("I", config.feature_dim), ("B", config.feature_dim), ("Q", config.question_dim)):
        if views[name].ndim != 2 or views[name].shape[0] != want:
            raise ShapeError(f"view {name} must have {want} rows, got {views[name].shape}")
    rate = config.dropout if train else 0.0
    rng = rng if train else None
    if train and rate > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")
    O1, c1 = block_forward(views[vx], views[vy], _prm(params, "intra"), att1, rng, rate,
                           _q_mask(config, views[vy], vy))
    O2, c2 = block_forward(O1[:, None], views[vz], _prm(params, "inter"), att2, rng, rate,
                           _q_mask(config, views[vz], vz))
    logits = answer_head(O2, params["cls.W"], params["cls.b"])
    return logits, {"intra": c1, "inter": c2, "O_intra": O1, "O_inter": O2,
                    "views": (vx, vy, vz)}


def backward(cache, dlogits, params):
    """Analytic gradients for every parameter plus the three inputs."""
    if cache is None:
        raise ValueError("backward needs the cache returned by forward")
    grads = {"cls.W": np.outer(cache["O_inter"], dlogits), "cls.b": np.asarray(dlogits, dtype=np.float64).copy()}
    dO2 = params["cls.W"] @ dlogits
    g2, dO1col, dz = block_backward(_prm(params, "inter"), cache["inter"], dO2)
    g1, dx, dy = block_backward(_prm(params, "intra"), cache["intra"], dO1col[:, 0])
    for stage, g in (("intra", g1), ("inter", g2)):
        for k, v in g.items():
            grads[f"{stage}.{k}"] = v
    vx, vy, vz = cache["views"]
    inputs = {vx: dx, vy: dy, vz: dz}
    grads["input.D"], grads["input.B"], grads["input.q"] = inputs["I"], inputs["B"], inputs["Q"]
    return grads


def att_intra(D, B, params, config):
    """First-stage output vector and its glimpse maps, for the default wiring."""
    out, cache = block_forward(np.asarray(D, dtype=np.float64), np.asarray(B, dtype=np.float64),
                               _prm(params, "intra"))
    return out, cache["maps"]


def att_inter(v, q, params, config):
    q = np.asarray(q, dtype=np.float64)
    out, cache = block_forward(np.asarray(v, dtype=np.float64)[:, None], q, _prm(params, "inter"),
                               col_mask=_q_mask(config, q, "Q"))
    return out, cache["maps"]


def compose_order(order, D, B, q, params, config):
    """Answer logits with the stages wired as ``order``.

    ``params`` must have been shaped for that order (see :func:`param_shapes`).
    """
    if order not in ORDERS:
        raise ValueError(f"unknown order {order!r}")
    logits, _ = forward(D, B, q, params, config.replace(order=order))
    return logits


def softmax_cross_entropy(logits, label):
    """Loss and its gradient w.r.t. the logits."""
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    loss = -z[label] + np.log(np.exp(z).sum())
    grad = p.copy()
    grad[label] -= 1.0
    return float(loss), grad
