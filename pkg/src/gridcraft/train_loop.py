"""PPO + self-imitation interleaved training.

Rollouts run synchronously across a bank of env slots (one task env, one
feature cache each) with batched policy and frame-encoder forwards, so runs
are deterministic for a fixed seed regardless of slot count. PPO phases
alternate with a self-imitation phase every ``si_frequency`` environment
steps; multi-stage schedules carry SI buffers across stages and reinitialize
the policy head at each transition. The reward model's encoders stay frozen
throughout.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch

from gridcraft.actions import decode_action
from gridcraft.episode import TaskEnv
from gridcraft.gae import compute_gae
from gridcraft.policy import (
    PREV_ACTION_NONE, PolicyConfig, PolicyNet, init_policy, reset_policy_head,
)
from gridcraft.ppo import PPOConfig, ppo_loss, smoothing_loss_from_logits
from gridcraft.reward_adapter import RewardAdapter, RewardVariant, precompute_prompts
from gridcraft.rng import substream
from gridcraft.si import SIBuffer, StoredTrajectory, si_admit, si_loss, si_sample
from gridcraft.world import ConfigError, WorldConfig

ARMS = ("learned", "manual", "sparse")
_BLOCK = 64  # contiguous-step block size for minibatching (smoothing windows)


@dataclass
class EpisodeBuffer:
    frame_feats: list = field(default_factory=list)
    compass: list = field(default_factory=list)
    gps: list = field(default_factory=list)
    voxel: list = field(default_factory=list)
    prev_action: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    ret: float = 0.0
    success: bool = False


class EnvSlot:
    def __init__(self, index: int):
        self.index = index
        self.task = None
        self.env = None
        self.adapter = None
        self.cur_feat = None
        self.prev_action = PREV_ACTION_NONE
        self.episode = EpisodeBuffer()
        self.episode_id = -1


def negative_prompts(task, tasks) -> list:
    """Goal phrases of the other tasks in the same group (the prompt set's
    negatives); falls back to all other tasks for singleton groups."""
    negs = [t.goal for t in tasks if t.id != task.id and t.group == task.group]
    if not negs:
        negs = [t.goal for t in tasks if t.id != task.id]
    return negs


class Trainer:
    def __init__(self, tasks, reward_model, vocab, ppo_cfg: PPOConfig,
                 arm: str, stages, stage_env_steps, base_world: WorldConfig,
                 seed: int, variant: RewardVariant = RewardVariant.DIRECT,
                 policy_cfg: PolicyConfig | None = None,
                 init_policy_state: dict | None = None,
                 metrics_writer=None):
        if arm not in ARMS:
            raise ConfigError(f"unknown training arm {arm!r}")
        self.tasks = {t.id: t for t in tasks}
        for stage in stages:
            for tid in stage:
                if tid not in self.tasks:
                    raise ConfigError(f"stage references unknown task {tid!r}")
                t = self.tasks[tid]
                if t.is_creative and arm != "learned":
                    raise ConfigError(
                        f"creative task {tid} has no {arm} reward")
                if arm == "manual" and not t.is_creative and t.dense_reward is None:
                    raise ConfigError(f"task {tid} has no manual dense reward")
        self.reward_model = reward_model
        self.vocab = vocab
        self.cfg = ppo_cfg
        self.arm = arm
        self.variant = variant
        self.stages = [list(s) for s in stages]
        self.stage_env_steps = list(stage_env_steps)
        self.base_world = base_world
        self.seed = seed
        self.metrics_writer = metrics_writer

        d = reward_model.cfg.embed_dim
        self.policy_cfg = policy_cfg or PolicyConfig(frame_feat_dim=d,
                                                     prompt_dim=d)
        if self.policy_cfg.frame_feat_dim != d:
            raise ConfigError(
                f"policy frame-feature dim {self.policy_cfg.frame_feat_dim} "
                f"does not match reward model dim {d}")
        self.policy = PolicyNet(self.policy_cfg)
        init_policy(self.policy, substream(seed, "policy_init"))
        if init_policy_state is not None:
            self.policy.load_state_dict(init_policy_state)
        self.optimizer = torch.optim.Adam(self.policy.parameters(),
                                          lr=ppo_cfg.lr)
        self.si_optimizer = torch.optim.Adam(self.policy.parameters(),
                                             lr=ppo_cfg.si_lr)

        all_tasks = list(self.tasks.values())
        self.prompt_sets = {}
        self.prompt_embs = {}
        with torch.no_grad():
            for t in all_tasks:
                ps = precompute_prompts(reward_model, vocab,
                                        [t.goal] + negative_prompts(t, all_tasks))
                self.prompt_sets[t.id] = ps
                self.prompt_embs[t.id] = ps.embeddings[0]

        self.si_buffers = {tid: SIBuffer(ppo_cfg.si_buffer_capacity)
                           for s in self.stages for tid in s}
        self.action_rng = substream(seed, "train_actions")
        self.episode_rng = substream(seed, "train_episodes")
        self.head_rng = substream(seed, "policy_head_reset")
        self.si_rng = substream(seed, "si_sample")

        self.global_steps = 0
        self.si_phases_done = 0
        self.si_step = 0
        self.update_index = 0
        self.total_updates = max(1, sum(
            math.ceil(n / ppo_cfg.buffer_size_scaled) for n in stage_env_steps))
        self.task_steps = {tid: 0 for s in self.stages for tid in s}
        self.recent_episodes = {tid: deque(maxlen=20)
                                for s in self.stages for tid in s}
        # si_loss stays blank in the metrics stream until the first SI phase
        self.last_losses = {"ppo_loss": 0.0, "si_loss": "",
                            "smoothing_loss": 0.0}

    # -- rollout helpers -----------------------------------------------------

    def _encode_frames(self, frames: np.ndarray) -> torch.Tensor:
        with torch.no_grad():
            return self.reward_model.encode_frames(
                torch.from_numpy(frames).unsqueeze(1))[:, 0]

    def _assign_task(self, stage_tasks) -> str:
        return min(stage_tasks, key=lambda tid: (self.task_steps[tid], tid))

    def _reset_slot(self, slot: EnvSlot, stage_tasks, episode_counter) -> None:
        tid = self._assign_task(stage_tasks)
        task = self.tasks[tid]
        slot.task = task
        episode_seed = int(self.episode_rng.integers(2**63))
        slot.env = TaskEnv(task, self.base_world, episode_seed,
                           success_bonus=self.cfg.success_bonus,
                           compute_manual=(self.arm == "manual"))
        if self.arm == "learned":
            slot.adapter = RewardAdapter(self.reward_model,
                                         self.prompt_sets[tid], self.variant)
        slot.prev_action = PREV_ACTION_NONE
        slot.episode = EpisodeBuffer()
        slot.episode_id = episode_counter
        feat = self._encode_frames(slot.env.obs.frame[None])[0]
        slot.cur_feat = feat
        if slot.adapter is not None:
            slot.adapter.push_feature(feat, slot.env.state.tick)

    def _policy_forward(self, slots):
        obs = [s.env.obs for s in slots]
        feats = torch.stack([s.cur_feat for s in slots])
        prompts = torch.stack([self.prompt_embs[s.task.id] for s in slots])
        compass = torch.from_numpy(np.stack([o.compass for o in obs])).long()
        gps = torch.from_numpy(np.stack([o.gps for o in obs]))
        voxel = torch.from_numpy(
            np.stack([o.voxel for o in obs]).reshape(len(obs), 9)).long()
        prev = torch.tensor([s.prev_action for s in slots], dtype=torch.long)
        with torch.no_grad():
            logits, values = self.policy(feats, prompts, compass, gps, voxel, prev)
        return (feats, prompts, compass, gps, voxel, prev), logits, values

    def _step_reward(self, slot: EnvSlot, res) -> float:
        if self.arm == "manual":
            return res.manual_r
        if self.arm == "sparse":
            return res.sparse_r
        r, _ = slot.adapter.step_reward()
        return r + res.sparse_r

    # -- main loop ------------------------------------------------------------

    def run(self):
        episode_counter = 0
        next_si_at = self.cfg.si_frequency_scaled
        for stage_idx, stage_tasks in enumerate(self.stages):
            if stage_idx > 0:
                reset_policy_head(self.policy, self.head_rng)
            entropy_weight = (self.cfg.entropy_weight_stage1 if stage_idx == 0
                              else self.cfg.entropy_weight_stage2)
            slots = [EnvSlot(i) for i in range(self.cfg.num_envs)]
            for s in slots:
                self._reset_slot(s, stage_tasks, episode_counter)
                episode_counter += 1

            stage_steps = 0
            budget = self.stage_env_steps[stage_idx]
            while stage_steps < budget:
                rollout, episode_counter = self._collect(
                    slots, stage_tasks, episode_counter)
                n = len(rollout["actions"])
                stage_steps += n
                self.global_steps += n
                self._ppo_update(rollout, entropy_weight)
                self.update_index += 1
                if self.global_steps >= next_si_at:
                    self._si_phase()
                    while next_si_at <= self.global_steps:
                        next_si_at += self.cfg.si_frequency_scaled
                self._write_metrics(stage_tasks)
        return self.policy

    def _collect(self, slots, stage_tasks, episode_counter):
        cfg = self.cfg
        buf = {k: [] for k in ("feats", "prompts", "compass", "gps", "voxel",
                               "prev", "actions", "logp", "value", "reward",
                               "done", "episode", "slot")}
        steps = 0
        while steps < cfg.buffer_size_scaled:
            inputs, logits, values = self._policy_forward(slots)
            log_probs = torch.log_softmax(logits.double(), dim=-1)
            probs = log_probs.exp().numpy()
            new_frames = []
            pending = []
            for i, slot in enumerate(slots):
                p = probs[i] / probs[i].sum()
                a = int(self.action_rng.choice(len(p), p=p))
                res = slot.env.step(decode_action(a))
                new_frames.append(res.obs.frame)
                pending.append(res)

                buf["feats"].append(slot.cur_feat)
                buf["prompts"].append(self.prompt_embs[slot.task.id])
                buf["compass"].append(inputs[2][i])
                buf["gps"].append(inputs[3][i])
                buf["voxel"].append(inputs[4][i])
                buf["prev"].append(slot.prev_action)
                buf["actions"].append(a)
                buf["logp"].append(float(log_probs[i, a]))
                buf["value"].append(float(values[i]))
                buf["done"].append(res.done)
                buf["episode"].append(slot.episode_id)
                buf["slot"].append(slot.index)

                ep = slot.episode
                ep.frame_feats.append(slot.cur_feat.numpy())
                ep.compass.append(inputs[2][i].numpy())
                ep.gps.append(inputs[3][i].numpy())
                ep.voxel.append(inputs[4][i].numpy())
                ep.prev_action.append(slot.prev_action)
                ep.actions.append(a)
                slot.prev_action = a
            feats = self._encode_frames(np.stack(new_frames))
            for i, slot in enumerate(slots):
                res = pending[i]
                slot.cur_feat = feats[i]
                if slot.adapter is not None:
                    slot.adapter.push_feature(feats[i], slot.env.state.tick)
                r = self._step_reward(slot, res)
                buf["reward"].append(r)
                slot.episode.ret += r
                if res.success:
                    slot.episode.success = True
                self.task_steps[slot.task.id] += 1
                if res.done:
                    self._finish_episode(slot)
                    self._reset_slot(slot, stage_tasks, episode_counter)
                    episode_counter += 1
            steps += len(slots)
        rollout = self._finalize_rollout(buf, slots)
        return rollout, episode_counter

    def _finish_episode(self, slot: EnvSlot) -> None:
        ep = slot.episode
        task_id = slot.task.id
        self.recent_episodes[task_id].append((ep.success, ep.ret))
        traj = StoredTrajectory(
            task_id=task_id,
            frame_feats=np.stack(ep.frame_feats),
            compass=np.stack(ep.compass).astype(np.int64),
            gps=np.stack(ep.gps).astype(np.float32),
            voxel=np.stack(ep.voxel).astype(np.int64),
            prev_action=np.array(ep.prev_action, dtype=np.int64),
            actions=np.array(ep.actions, dtype=np.int64),
            episodic_return=ep.ret, success=ep.success)
        if si_admit(self.si_buffers[task_id], traj, self.cfg.si_threshold_sigma):
            self.si_buffers[task_id].add(traj)

    def _finalize_rollout(self, buf, slots) -> dict:
        n = len(buf["actions"])
        rollout = {
            "feats": torch.stack(buf["feats"]),
            "prompts": torch.stack(buf["prompts"]),
            "compass": torch.stack(buf["compass"]),
            "gps": torch.stack(buf["gps"]),
            "voxel": torch.stack(buf["voxel"]),
            "prev": torch.tensor(buf["prev"], dtype=torch.long),
            "actions": torch.tensor(buf["actions"], dtype=torch.long),
            "logp": torch.tensor(buf["logp"], dtype=torch.float32),
        }
        # bootstrap values for unfinished episodes
        _, _, boot_values = self._policy_forward(slots)
        value = np.array(buf["value"], dtype=np.float64)
        reward = np.array(buf["reward"], dtype=np.float64)
        done = np.array(buf["done"], dtype=bool)
        slot_ids = np.array(buf["slot"])
        adv = np.zeros(n, dtype=np.float64)
        ret = np.zeros(n, dtype=np.float64)
        for slot in slots:
            idx = np.nonzero(slot_ids == slot.index)[0]
            if idx.size == 0:
                continue
            seg_start = 0
            dones = done[idx]
            boundaries = list(np.nonzero(dones)[0] + 1) + (
                [] if dones[-1] else [idx.size])
            for end in boundaries:
                seg = idx[seg_start:end]
                terminal = bool(done[seg[-1]])
                bootstrap = 0.0 if terminal else float(boot_values[slot.index])
                a, r = compute_gae(reward[seg], value[seg], bootstrap,
                                   self.cfg.gamma, self.cfg.gae_lambda)
                adv[seg] = a
                ret[seg] = r
                seg_start = end
        if self.cfg.advantage_norm and n > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        rollout["advantages"] = torch.tensor(adv, dtype=torch.float32)
        rollout["returns"] = torch.tensor(ret, dtype=torch.float32)
        rollout["episode"] = np.array(buf["episode"])
        rollout["slot"] = slot_ids
        return rollout

    def _lr_now(self) -> float:
        t = min(self.update_index / self.total_updates, 1.0)
        return self.cfg.lr_final + 0.5 * (self.cfg.lr - self.cfg.lr_final) * (
            1 + math.cos(math.pi * t))

    def _ppo_update(self, rollout, entropy_weight: float) -> None:
        cfg = self.cfg
        n = len(rollout["actions"])
        lr = self._lr_now()
        for g in self.optimizer.param_groups:
            g["lr"] = lr
        # contiguous blocks per slot so smoothing windows stay intact
        blocks = []
        for slot_idx in np.unique(rollout["slot"]):
            idx = np.nonzero(rollout["slot"] == slot_idx)[0]
            for s in range(0, idx.size, _BLOCK):
                blocks.append(idx[s:s + _BLOCK])
        totals, smooths = [], []
        for _ in range(cfg.ppo_epochs):
            order = self.action_rng.permutation(len(blocks))
            mb, mb_size = [], 0
            for bi in order:
                mb.append(blocks[bi])
                mb_size += len(blocks[bi])
                if mb_size >= cfg.minibatch_size:
                    self._ppo_minibatch(rollout, mb, entropy_weight,
                                        totals, smooths)
                    mb, mb_size = [], 0
            if mb:
                self._ppo_minibatch(rollout, mb, entropy_weight, totals, smooths)
        self.last_losses["ppo_loss"] = float(np.mean(totals))
        self.last_losses["smoothing_loss"] = float(np.mean(smooths))

    def _ppo_minibatch(self, rollout, block_list, entropy_weight,
                       totals, smooths) -> None:
        cfg = self.cfg
        idx = np.concatenate(block_list)
        t_idx = torch.from_numpy(idx)
        logits, values = self.policy(
            rollout["feats"][t_idx], rollout["prompts"][t_idx],
            rollout["compass"][t_idx], rollout["gps"][t_idx],
            rollout["voxel"][t_idx], rollout["prev"][t_idx])
        # separate episode namespaces per block: windows never span blocks
        ep_ids = np.concatenate([
            rollout["episode"][b].astype(np.int64) + (k << 32)
            for k, b in enumerate(block_list)])
        smooth = smoothing_loss_from_logits(logits, ep_ids, cfg.smooth_window)
        loss, diag = ppo_loss(
            logits, values, rollout["actions"][t_idx], rollout["logp"][t_idx],
            rollout["advantages"][t_idx], rollout["returns"][t_idx],
            cfg, entropy_weight, smooth_term=smooth)
        self.optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.policy.parameters(), cfg.grad_clip)
        self.optimizer.step()
        totals.append(diag.total)
        smooths.append(diag.smoothing)

    def _si_lr_now(self) -> float:
        total = max(self.total_updates, 1) * self.cfg.si_epochs
        t = min(self.si_step / total, 1.0)
        return self.cfg.si_lr_final + 0.5 * (self.cfg.si_lr - self.cfg.si_lr_final) * (
            1 + math.cos(math.pi * t))

    def _si_phase(self) -> None:
        batch = si_sample(self.si_buffers, self.si_rng)
        if not batch:
            return
        feats = torch.from_numpy(np.concatenate([t.frame_feats for t in batch]))
        prompts = torch.cat([
            self.prompt_embs[t.task_id].unsqueeze(0).expand(len(t), -1)
            for t in batch])
        compass = torch.from_numpy(np.concatenate([t.compass for t in batch]))
        gps = torch.from_numpy(np.concatenate([t.gps for t in batch]))
        voxel = torch.from_numpy(np.concatenate([t.voxel for t in batch]))
        prev = torch.from_numpy(np.concatenate([t.prev_action for t in batch]))
        actions = torch.from_numpy(np.concatenate([t.actions for t in batch]))
        losses = []
        for _ in range(self.cfg.si_epochs):
            lr = self._si_lr_now()
            for g in self.si_optimizer.param_groups:
                g["lr"] = lr
            logits, _ = self.policy(feats, prompts, compass, gps, voxel, prev)
            loss = si_loss(logits, actions)
            self.si_optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(self.policy.parameters(),
                                           self.cfg.grad_clip)
            self.si_optimizer.step()
            self.si_step += 1
            losses.append(float(loss))
        self.si_phases_done += 1
        self.last_losses["si_loss"] = float(np.mean(losses))

    def _write_metrics(self, stage_tasks) -> None:
        if self.metrics_writer is None:
            return
        for tid in stage_tasks:
            recent = self.recent_episodes[tid]
            success_rate = (sum(1 for s, _ in recent if s) / len(recent)
                            if recent else 0.0)
            mean_ret = (sum(r for _, r in recent) / len(recent)
                        if recent else 0.0)
            si = self.last_losses["si_loss"]
            self.metrics_writer.write_row({
                "step": self.global_steps, "task": tid,
                "success_rate": round(success_rate, 6),
                "return": round(mean_ret, 6),
                "ppo_loss": round(self.last_losses["ppo_loss"], 6),
                "si_loss": si if si == "" else round(si, 6),
                "smoothing_loss": round(self.last_losses["smoothing_loss"], 8),
            })
