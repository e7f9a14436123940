#!/usr/bin/env python3
"""The tape in isolation: record a computation, backpropagate, verify
against finite differences, then run Adam on a small least-squares fit.
"""

import numpy as np

from cfisac import Tape, grad_check
from cfisac import autodiff as ad
from cfisac.optim import AdamState, adam_step

rng = np.random.default_rng(0)

# --- a scalar function through several ops, checked against central FD ----
def objective(params):
    y = ad.matmul(params["w"], params["x"])
    return (ad.relu(y) + ad.softmax(y, axis=0) * 0.5).square().sum()

params = {"w": rng.normal(size=(4, 3)), "x": rng.normal(size=(3, 2))}
report = grad_check(objective, params, step=1e-5, tolerance=1e-5)
for name, err in report.errors.items():
    print(f"grad_check {name}: max normalized error {err:.2e}")
print(f"passed: {report.passed}")

# --- Adam on min ||A p - b||^2 -------------------------------------------
a_mat = rng.normal(size=(20, 5))
b_vec = rng.normal(size=(20, 1))
p_star, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)

params = {"p": np.zeros((5, 1))}
state = AdamState.for_params(params, lr=0.05)
for step in range(400):
    tape = Tape()
    p = tape.parameter(params["p"])
    residual = ad.matmul(ad.Tensor(a_mat), p) - b_vec
    loss = residual.square().sum()
    grads = tape.backward(loss)
    adam_step(params, {"p": grads.wrt(p)}, state)
    if step % 100 == 0:
        print(f"step {step:3d}: loss {loss.item():.6f}")
print(f"distance to least-squares solution: {np.linalg.norm(params['p'] - p_star):.2e}")
