"""Central finite-difference gradient oracle for the test suite.

The oracle only ever evaluates the forward pass at perturbed inputs; it never
touches autograd, so it stays independent of the gradients it checks.
"""

import torch


def fd_gradient(build_loss, param: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    fd = torch.zeros_like(param)
    flat_p = param.data.reshape(-1)
    flat_fd = fd.reshape(-1)
    for i in range(flat_p.numel()):
        orig = flat_p[i].item()
        flat_p[i] = orig + eps
        with torch.no_grad():
            hi = float(build_loss())
        flat_p[i] = orig - eps
        with torch.no_grad():
            lo = float(build_loss())
        flat_p[i] = orig
        flat_fd[i] = (hi - lo) / (2 * eps)
    return fd


def assert_grad_matches_fd(build_loss, params, eps: float = 1e-6, tol: float = 1e-4):
    """Compare autograd gradients of the scalar build_loss() against central
    finite differences, parameter tensor by parameter tensor."""
    params = list(params)
    loss = build_loss()
    analytic = torch.autograd.grad(loss, params)
    worst = 0.0
    for p, g in zip(params, analytic):
        fd = fd_gradient(build_loss, p, eps=eps)
        diff = (g - fd).abs().max().item()
        scale = max(g.abs().max().item(), fd.abs().max().item(), 1e-8)
        worst = max(worst, diff / scale)
    assert worst < tol, f"max relative gradient error {worst:.3e} >= {tol:.1e}"
    return worst
