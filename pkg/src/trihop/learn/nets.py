"""Actor-critic MLPs with running observation normalization.

Actor and critic are separate MLPs with the same hidden sizes (default
[512, 256, 128], ELU). The action mean is squashed to [-1, 1] with tanh; the
action distribution is a Gaussian with a state-independent log-std.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

ACTIVATIONS = {"elu": nn.ELU, "relu": nn.ReLU, "tanh": nn.Tanh}


class RunningNorm(nn.Module):
    """Running mean/std observation normalizer; freeze before export."""

    def __init__(self, dim: int, eps: float = 1e-8):
        super().__init__()
        self.register_buffer("mean", torch.zeros(dim, dtype=torch.float64))
        self.register_buffer("var", torch.ones(dim, dtype=torch.float64))
        self.register_buffer("count", torch.tensor(eps, dtype=torch.float64))
        self.frozen = False

    @torch.no_grad()
    def update(self, x: torch.Tensor):
        if self.frozen:
            return
        x = x.to(torch.float64).reshape(-1, self.mean.shape[0])
        batch_mean = x.mean(dim=0)
        batch_var = x.var(dim=0, unbiased=False)
        batch_count = x.shape[0]
        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean += delta * batch_count / total
        m_a = self.var * self.count
        m_b = batch_var * batch_count
        self.var = (m_a + m_b + delta**2 * self.count * batch_count / total) / total
        self.count = total

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = self.mean.to(x.dtype)
        std = torch.sqrt(self.var.to(x.dtype) + 1e-8)
        return (x - mean) / std


def _mlp(in_dim: int, hidden: list[int], out_dim: int, activation: str) -> nn.Sequential:
    act = ACTIVATIONS[activation]
    layers: list[nn.Module] = []
    prev = in_dim
    for h in hidden:
        layers += [nn.Linear(prev, h), act()]
        prev = h
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class ActorCritic(nn.Module):
    def __init__(self, obs_dim: int, act_dim: int = 9, hidden=(512, 256, 128),
                 activation: str = "elu", init_log_std: float = 0.0,
                 normalize_obs: bool = True, dtype=torch.float32):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden = list(hidden)
        self.activation = activation
        self.normalize_obs = normalize_obs
        self.obs_norm = RunningNorm(obs_dim)
        self.actor = _mlp(obs_dim, self.hidden, act_dim, activation)
        self.critic = _mlp(obs_dim, self.hidden, 1, activation)
        self.log_std = nn.Parameter(torch.full((act_dim,), float(init_log_std)))
        self.to(dtype)

    def _prep(self, obs: torch.Tensor) -> torch.Tensor:
        if self.normalize_obs:
            return self.obs_norm(obs)
        return obs

    def policy_forward(self, obs: torch.Tensor):
        """(action mean in [-1, 1], action std)."""
        x = self._prep(obs)
        mean = torch.tanh(self.actor(x))
        std = torch.exp(self.log_std).expand_as(mean)
        return mean, std

    def value_forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(self._prep(obs)).squeeze(-1)

    def distribution(self, obs: torch.Tensor) -> torch.distributions.Normal:
        mean, std = self.policy_forward(obs)
        return torch.distributions.Normal(mean, std)

    @torch.no_grad()
    def act(self, obs_np: np.ndarray, deterministic: bool = False,
            generator: torch.Generator | None = None):
        """Numpy convenience used by rollout collection and evaluation."""
        obs = torch.as_tensor(obs_np, dtype=self.log_std.dtype)
        mean, std = self.policy_forward(obs)
        if deterministic:
            action = mean
            logp = torch.zeros(mean.shape[0], dtype=mean.dtype)
        else:
            eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
            action = mean + std * eps
            dist = torch.distributions.Normal(mean, std)
            logp = dist.log_prob(action).sum(-1)
        value = self.value_forward(obs)
        return action.numpy(), logp.numpy(), value.numpy()

    @torch.no_grad()
    def values_np(self, obs_np: np.ndarray) -> np.ndarray:
        obs = torch.as_tensor(obs_np, dtype=self.log_std.dtype)
        return self.value_forward(obs).numpy()
