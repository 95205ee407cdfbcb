"""End-to-end finite-difference checks through encoder, cosine and hinge loss."""
from __future__ import annotations

import numpy as np

from . import encoders
from .embed import TermSequence
from .encoders import EncoderConfig, KINDS
from .nn import ParamTensor, grad_check, make_rng
from .ranker import cosine_grad, hinge_loss

TOLERANCE = 1e-4
# margin large enough that the hinge is active for every cos pair in [-1, 1]
_DELTA = 2.5
_MIN_POOL_GAP = 1e-3


def _toy_config(kind: str, rng) -> EncoderConfig:
    D = int(rng.integers(2, 5))
    if kind == "CNN":
        widths = [(1,), (2,), (3,), (1, 2), (2, 3), (1, 3), (1, 2, 3)][int(rng.integers(7))]
        choices = [h for h in range(3, 7) if h % len(widths) == 0]
        H = choices[int(rng.integers(len(choices)))]
        return EncoderConfig(kind, D, H, cnn_filter_widths=widths)
    H = int(rng.integers(3, 7))
    return EncoderConfig(kind, D, H, rcnn_order=int(rng.integers(1, 4)))


def _seq(X: np.ndarray) -> TermSequence:
    return TermSequence(tuple(f"t{i}" for i in range(len(X))), X, np.zeros(len(X), dtype=bool))


def _pool_gap(cache) -> float:
    """Smallest gap between the best and second-best activation of any CNN channel."""
    gap = np.inf
    for _, act in cache.saved:
        if act.shape[0] < 2:
            continue
        top2 = np.sort(act, axis=0)[-2:]
        gap = min(gap, float(np.min(top2[1] - top2[0])))
    return gap


class HingeProblem:
    """One (query, positive, negative) triple with trainable encoder and inputs."""

    def __init__(self, kind: str, seed: int):
        for attempt in range(100):
            rng = make_rng((seed, attempt, 31))
            self.config = _toy_config(kind, rng)
            self.params = encoders.random_params(self.config, int(rng.integers(2**31)), scale=0.5)
            D = self.config.input_dim
            self.inputs = [
                ParamTensor.from_values(name, rng.normal(size=(int(rng.integers(1, 5)), D)))
                for name in ("x_query", "x_pos", "x_neg")
            ]
            if kind != "CNN" or self._min_gap() > _MIN_POOL_GAP:
                return
        raise RuntimeError("could not draw a tie-free CNN problem")

    def _min_gap(self):
        return min(_pool_gap(encoders.forward(self.config, self.params, _seq(x.values))[1])
                   for x in self.inputs)

    def tensors(self) -> list[ParamTensor]:
        return self.params.tensors() + self.inputs

    def loss(self) -> float:
        u, p, a = (encoders.encode(self.config, self.params, _seq(x.values)) for x in self.inputs)
        s_pos = cosine_grad(u, p)[0]
        s_neg = cosine_grad(u, a)[0]
        return hinge_loss(s_pos, s_neg, _DELTA)

    def backward(self) -> float:
        for t in self.tensors():
            t.zero_grad()
        outs = [encoders.forward(self.config, self.params, _seq(x.values)) for x in self.inputs]
        (u, cu), (p, cp), (a, ca) = outs
        s_pos, du_p, dp = cosine_grad(u, p)
        s_neg, du_a, da = cosine_grad(u, a)
        loss = hinge_loss(s_pos, s_neg, _DELTA)
        if loss > 0:
            for x, cache, up in zip(self.inputs, (cu, cp, ca), (du_a - du_p, -dp, da)):
                x.grad += encoders.encoder_backward(self.config, self.params, cache, up)
        return loss


def hinge_gradcheck(kind: str, seed: int, h: float = 1e-4, corrupt: bool = False) -> float:
    """Max relative error of the analytic hinge gradient (params and inputs) at one random point."""
    prob = HingeProblem(kind, seed)
    prob.backward()
    if corrupt:
        prob.tensors()[0].grad.reshape(-1)[0] += 0.1
    return grad_check(prob.loss, prob.tensors(), h)


def gradcheck_suite(seeds: int = 20, kinds=KINDS, corrupt: bool = False) -> dict[str, float]:
    return {k: max(hinge_gradcheck(k, s, corrupt=corrupt) for s in range(seeds)) for k in kinds}
