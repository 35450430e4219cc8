"""PPO with clipped surrogate objective, GAE, and an adaptive learning rate
targeting a fixed KL (the "modified" element of the trainer this follows).

Rollouts come from the vectorized task envs; timeout terminations are
bootstrapped with the value of the terminal observation so the finite
episode horizon does not bias the advantage estimates.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..envs.tasks import VecTaskEnv, make_env
from .checkpoint import save_checkpoint
from .gae import gae
from .nets import ActorCritic


@dataclass
class PpoConfig:
    clip_ratio: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 5
    minibatches: int = 4
    entropy_coef: float = 0.005
    value_coef: float = 1.0
    max_grad_norm: float = 1.0
    learning_rate: float = 3e-4
    adaptive_lr: bool = True
    kl_target: float = 0.01
    num_envs: int = 256
    steps_per_env: int = 50
    log_std_min: float = -2.5

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0 or not 0.0 < self.gae_lambda <= 1.0:
            raise ValueError("gamma and lambda must lie in (0, 1]")
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip ratio must lie in (0, 1)")

    @classmethod
    def from_config(cls, cfg: dict, **overrides) -> "PpoConfig":
        pc = dict(cfg["learn"]["ppo"])
        pc.update(overrides)
        return cls(**pc)


@dataclass
class RolloutBatch:
    observations: np.ndarray   # (T, N, obs_dim)
    actions: np.ndarray        # (T, N, act_dim)
    log_probs: np.ndarray      # (T, N)
    rewards: np.ndarray        # (T, N) - already timeout-bootstrapped
    values: np.ndarray         # (T+1, N)
    dones: np.ndarray          # (T, N)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def compute_advantages(self, gamma: float, lam: float):
        self.advantages, self.returns = gae(
            self.rewards, self.values, self.dones, gamma, lam)


class PpoTrainer:
    def __init__(self, env: VecTaskEnv, policy: ActorCritic, config: PpoConfig,
                 seed: int = 0):
        self.env = env
        self.policy = policy
        self.cfg = config
        self.lr = config.learning_rate
        self.optimizer = torch.optim.Adam(policy.parameters(), lr=self.lr)
        self.seed = seed
        self.torch_gen = torch.Generator().manual_seed(seed)
        self.iteration = 0
        self._obs = None
        self._ep_returns: list[float] = []
        self._ep_lengths: list[float] = []

    # ------------------------------------------------------------- rollouts

    def collect_rollout(self) -> RolloutBatch:
        T, N = self.cfg.steps_per_env, self.env.n
        if self._obs is None:
            self._obs = self.env.reset(seed=self.seed)
        obs_buf = np.zeros((T, N, self.env.obs_dim), dtype=np.float32)
        act_buf = np.zeros((T, N, 9), dtype=np.float32)
        logp_buf = np.zeros((T, N), dtype=np.float32)
        rew_buf = np.zeros((T, N), dtype=np.float64)
        val_buf = np.zeros((T + 1, N), dtype=np.float64)
        done_buf = np.zeros((T, N), dtype=bool)

        obs = self._obs
        for t in range(T):
            self.policy.obs_norm.update(torch.as_tensor(obs, dtype=torch.float32))
            action, logp, value = self.policy.act(obs, generator=self.torch_gen)
            next_obs, reward, done, info = self.env.step(action)
            time_out = info["time_out"]
            if time_out.any():
                v_term = self.policy.values_np(info["terminal_observation"])
                reward = reward + self.cfg.gamma * v_term * time_out
            obs_buf[t] = obs
            act_buf[t] = action
            logp_buf[t] = logp
            rew_buf[t] = reward
            val_buf[t] = value
            done_buf[t] = done
            if done.any():
                self._ep_returns.extend(info["episode_return"][done].tolist())
                self._ep_lengths.extend(info["episode_length"][done].tolist())
            obs = next_obs
        val_buf[T] = self.policy.values_np(obs)
        self._obs = obs
        return RolloutBatch(obs_buf, act_buf, logp_buf, rew_buf, val_buf, done_buf)

    # --------------------------------------------------------------- update

    def update(self, batch: RolloutBatch) -> dict:
        cfg = self.cfg
        if batch.advantages is None:
            batch.compute_advantages(cfg.gamma, cfg.gae_lambda)
        T, N = batch.rewards.shape
        flat = lambda x: torch.as_tensor(
            x.reshape(T * N, *x.shape[2:]), dtype=torch.float32)
        obs = flat(batch.observations)
        actions = flat(batch.actions)
        old_logp = flat(batch.log_probs)
        adv = batch.advantages.reshape(-1)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        adv = torch.as_tensor(adv, dtype=torch.float32)
        returns = torch.as_tensor(batch.returns.reshape(-1), dtype=torch.float32)

        total = T * N
        mb_size = total // cfg.minibatches
        stats = {k: 0.0 for k in
                 ("policy_loss", "value_loss", "entropy", "kl", "clip_fraction")}
        count = 0
        for _ in range(cfg.epochs):
            perm = torch.randperm(total, generator=self.torch_gen)
            for m in range(cfg.minibatches):
                idx = perm[m * mb_size:(m + 1) * mb_size]
                dist = self.policy.distribution(obs[idx])
                logp = dist.log_prob(actions[idx]).sum(-1)
                ratio = torch.exp(logp - old_logp[idx])
                surr1 = ratio * adv[idx]
                surr2 = torch.clamp(
                    ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv[idx]
                policy_loss = -torch.min(surr1, surr2).mean()
                value = self.policy.value_forward(obs[idx])
                value_loss = torch.mean((value - returns[idx]) ** 2)
                entropy = dist.entropy().sum(-1).mean()
                loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
                if not torch.isfinite(loss):
                    for name, term in [("policy", policy_loss), ("value", value_loss),
                                       ("entropy", entropy)]:
                        if not torch.isfinite(term):
                            raise RuntimeError(f"non-finite {name} loss; aborting update")
                    raise RuntimeError("non-finite total loss; aborting update")
                self.optimizer.zero_grad()
                loss.backward()
                # clip actor and critic separately so early critic error does
                # not scale down the policy gradient through a shared norm
                torch.nn.utils.clip_grad_norm_(
                    list(self.policy.actor.parameters()) + [self.policy.log_std],
                    cfg.max_grad_norm)
                torch.nn.utils.clip_grad_norm_(
                    self.policy.critic.parameters(), cfg.max_grad_norm)
                self.optimizer.step()
                with torch.no_grad():
                    log_ratio = logp - old_logp[idx]
                    kl = torch.mean(torch.exp(log_ratio) - 1.0 - log_ratio)
                    clip_frac = torch.mean(
                        (torch.abs(ratio - 1.0) > cfg.clip_ratio).float())
                stats["policy_loss"] += policy_loss.item()
                stats["value_loss"] += value_loss.item()
                stats["entropy"] += entropy.item()
                stats["kl"] += kl.item()
                stats["clip_fraction"] += clip_frac.item()
                count += 1
        for k in stats:
            stats[k] /= count
        with torch.no_grad():
            self.policy.log_std.clamp_(min=cfg.log_std_min)
        if cfg.adaptive_lr and self.lr > 0:
            if stats["kl"] > 2.0 * cfg.kl_target:
                self.lr = max(1e-6, self.lr / 1.5)
            elif stats["kl"] < 0.5 * cfg.kl_target:
                self.lr = min(1e-2, self.lr * 1.5)
            for group in self.optimizer.param_groups:
                group["lr"] = self.lr
        stats["lr"] = self.lr
        return stats

    # ----------------------------------------------------------------- train

    def train_iteration(self) -> dict:
        batch = self.collect_rollout()
        stats = self.update(batch)
        self.iteration += 1
        window = 50
        stats["mean_return"] = float(np.mean(self._ep_returns[-window:])) if self._ep_returns else np.nan
        stats["mean_episode_length"] = float(np.mean(self._ep_lengths[-window:])) if self._ep_lengths else np.nan
        return stats


def train(task, cfg: dict, seed: int, out_dir: str | Path, iterations: int,
          desk: bool = False, num_envs: int | None = None,
          checkpoint_every: int = 0, log_every: int = 10,
          torch_threads: int = 1, env_kwargs: dict | None = None,
          progress: bool = True) -> dict:
    """Train a policy for a task; writes checkpoint(s) and a training curve
    CSV under out_dir and returns a summary dict."""
    torch.set_num_threads(torch_threads)
    torch.manual_seed(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ppo_cfg = PpoConfig.from_config(cfg)
    if num_envs is not None:
        ppo_cfg.num_envs = num_envs
    env = make_env(task, cfg, num_envs=ppo_cfg.num_envs, **(env_kwargs or {}))
    net_cfg = cfg["learn"]["desk_network"] if desk else cfg["learn"]["network"]
    policy = ActorCritic(
        obs_dim=env.obs_dim,
        act_dim=9,
        hidden=net_cfg["hidden"],
        activation=cfg["learn"]["network"]["activation"],
        init_log_std=cfg["learn"]["network"]["init_log_std"],
        normalize_obs=cfg["learn"]["obs_normalization"],
    )
    trainer = PpoTrainer(env, policy, ppo_cfg, seed=seed)

    curve_path = out_dir / "training_curve.csv"
    meta = {
        "task": env.task.value,
        "config_hash": env.config_hash,
        "seed": seed,
        "iterations": iterations,
    }
    t0 = time.time()
    with open(curve_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([
            "iteration", "mean_return", "mean_episode_length", "policy_loss",
            "value_loss", "entropy", "kl", "clip_fraction", "lr", "wall_time_s",
        ])
        for it in range(iterations):
            stats = trainer.train_iteration()
            writer.writerow([
                trainer.iteration, stats["mean_return"], stats["mean_episode_length"],
                stats["policy_loss"], stats["value_loss"], stats["entropy"],
                stats["kl"], stats["clip_fraction"], stats["lr"],
                round(time.time() - t0, 3),
            ])
            f.flush()
            if progress and (it + 1) % log_every == 0:
                print(f"iter {it+1:5d}  return {stats['mean_return']:10.3f}  "
                      f"kl {stats['kl']:.4f}  lr {stats['lr']:.2e}", flush=True)
            if checkpoint_every and (it + 1) % checkpoint_every == 0:
                policy.obs_norm.frozen = True
                save_checkpoint(out_dir / f"checkpoint_{it+1:06d}.shpk", policy, meta)
                policy.obs_norm.frozen = False
    policy.obs_norm.frozen = True
    final = save_checkpoint(out_dir / "policy.shpk", policy, meta)
    recent = trainer._ep_returns[-50:]
    return {
        "checkpoint": str(final),
        "curve": str(curve_path),
        "iterations": iterations,
        "mean_return": float(np.mean(recent)) if recent else None,
        "wall_time_s": time.time() - t0,
    }
