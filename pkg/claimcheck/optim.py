from typing import Dict, Iterable, Optional, Tuple

import torch
from torch import Tensor, nn

from claimcheck.constants import ADAGRAD_EPS
from claimcheck.exceptions import NonFiniteException


def adagrad_step(
    params: Dict[str, Tensor],
    grads: Dict[str, Optional[Tensor]],
    state: Dict[str, Tensor],
    lr: float,
    eps: float = ADAGRAD_EPS,
) -> Tuple[Dict[str, Tensor], Dict[str, Tensor]]:
    """
    Applies one AdaGrad update in place: G += g * g, then theta -= lr * g / (sqrt(G) +
    eps). Parameters without a gradient are left untouched. Every gradient is checked
    before anything is written, so a non-finite gradient leaves all parameters and
    accumulators unchanged.

    Parameters
    ----------
    params : Dict[str, Tensor]
        Parameters by name.

    grads : Dict[str, Optional[Tensor]]
        Gradients by parameter name.

    state : Dict[str, Tensor]
        Squared-gradient accumulators by parameter name, created at zero on first use.

    lr : float
        The learning rate.

    eps : float (default=1e-8)
        Added to the root of the accumulator.

    Returns
    -------
    result : Tuple[Dict[str, Tensor], Dict[str, Tensor]]
        The updated parameters and accumulators (the same objects that were passed).
    """
    for name, grad in grads.items():
        if grad is not None and not torch.isfinite(grad).all():
            raise NonFiniteException(name)

    with torch.no_grad():
        for name, param in params.items():
            grad = grads.get(name)

            if grad is None:
                continue

            if name not in state:
                state[name] = torch.zeros_like(param)

            accumulator = state[name]
            accumulator.addcmul_(grad, grad)
            param.addcdiv_(grad, accumulator.sqrt().add_(eps), value=-lr)

    return params, state


class AdaGrad:
    def __init__(self, modules: Iterable[nn.Module], lr: float) -> None:
        """
        AdaGrad over the trainable parameters of one or more modules, addressed by
        qualified name so errors can name the offending parameter.
        """
        self._lr = lr
        self._params: Dict[str, Tensor] = {}
        self._state: Dict[str, Tensor] = {}

        for index, module in enumerate(modules):
            for name, param in module.named_parameters():
                if param.requires_grad:
                    self._params[f"{index}.{name}" if index else name] = param

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad = None

    def step(self) -> None:
        adagrad_step(
            self._params,
            {name: param.grad for name, param in self._params.items()},
            self._state,
            self._lr,
        )

    @property
    def state(self) -> Dict[str, Tensor]:
        return self._state
