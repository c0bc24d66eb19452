"""Central finite-difference gradient checking."""

import numpy as np

# Relative errors are taken against max(|analytic|, |numeric|, REL_FLOOR) so
# that gradients which are zero (or within rounding of zero) do not divide
# by nothing.
REL_FLOOR = 1e-6
# |left slope - right slope| beyond this (relative) marks a kink.
KINK_TOL = 1e-2


class NonDifferentiableError(ArithmeticError):
    """A finite-difference probe straddled a kink."""


def grad_check(fn, inputs, eps=1e-5, max_elements=None, rng=None):
    """Compare tape gradients of scalar ``fn()`` with central differences.

    ``fn`` takes no arguments and must rebuild its graph from the current
    values of ``inputs`` (Tensors with ``requires_grad``), reusing the same
    random streams on every call.  Returns the worst relative error over all
    checked elements.  ``max_elements`` subsamples elements per input.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    inputs = list(inputs)
    for t in inputs:
        if not np.all(np.isfinite(t.data)):
            raise ValueError("grad_check inputs must be finite")
        t.grad = None
    out = fn()
    f0 = float(out.data)
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    worst = 0.0
    for t, ga in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        idxs = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            idxs = (rng or np.random.default_rng(0)).choice(flat.size, max_elements, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(fn().data)
            flat[i] = orig - eps
            fm = float(fn().data)
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            a = ga.reshape(-1)[i]
            right, left = (fp - f0) / eps, (f0 - fm) / eps
            gap = abs(right - left)
            if gap > KINK_TOL * max(1.0, abs(num)):
                # curvature makes the gap shrink with eps; a kink does not
                small = eps / 10
                flat[i] = orig + small
                sp = float(fn().data)
                flat[i] = orig - small
                sm = float(fn().data)
                flat[i] = orig
                if abs((sp - f0) / small - (f0 - sm) / small) > 0.5 * gap:
                    raise NonDifferentiableError(
                        f"non-differentiable point at {t.name or 'input'}[{i}]: "
                        f"one-sided slopes {left:.6g} vs {right:.6g}")
            err = abs(a - num) / max(abs(a), abs(num), REL_FLOOR)
            worst = max(worst, err)
    for t in inputs:
        t.grad = None
    return worst


def check_module(fn, module, **kw):
    """grad_check over every parameter of ``module``."""
    params = module.parameters()
    for name, p in params.items():
        p.name = name
    return grad_check(fn, params.values(), **kw)

