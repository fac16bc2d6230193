"""Diffusion policy: conditioning head + trajectory denoiser, the training
loop over demonstration pairs, receding-horizon action generation, and
checkpoint persistence."""

from __future__ import annotations

import numpy as np

from ..container import CHECKPOINT_MAGIC, read_container, write_container
from ..geom import Pose, compose, from_vec6, rel_pose_inv
from ..nncore import Adam, DenoiserMLP, FourierSpec, Tensor, fourier_encode
from ..simworld import Wrench, sample_params, randomize_stack
from ..simworld.randomize import randomize_each as _randomize_each
from .diffusion import NoiseSchedule, reverse_sample
from .fusion import make_fusion, prepare_batch
from .window import ChunkNormalizer, ObservationWindow, PolicyConfig, clamp_rotvec

__all__ = ["Policy", "save_checkpoint", "load_checkpoint"]


class Policy:
    def __init__(self, config: PolicyConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A1]))
        self.fusion = make_fusion(config, rng)
        self.t_spec = FourierSpec(L=config.fourier_l, input_scale=np.ones(1))
        self.denoiser = DenoiserMLP(
            chunk_dim=config.chunk_dim,
            t_enc_dim=2 * config.fourier_l,
            context_dim=config.feat_dim,
            rng=rng,
            hidden=config.hidden,
        )
        self.schedule = NoiseSchedule.create(config.schedule, config.t_diff)
        self.normalizer: ChunkNormalizer | None = None
        self.loss_history: list = []
        self._feat_cache: dict = {}

    # ------------------------------------------------------------------
    def params(self) -> dict:
        out = {f"fusion.{k}": v for k, v in self.fusion.params().items()}
        out.update({f"denoiser.{k}": v for k, v in self.denoiser.params().items()})
        return out

    def _t_encoding(self, t: np.ndarray) -> Tensor:
        frac = (np.asarray(t, dtype=np.float32) / self.config.t_diff).reshape(-1, 1)
        return fourier_encode(Tensor(frac), self.t_spec)

    def predict_tau0(self, noised: Tensor, t: np.ndarray, context: Tensor) -> Tensor:
        return self.denoiser(noised, self._t_encoding(t), context)

    # ------------------------------------------------------------------
    def train_step(self, batch: dict, tau0_normed: np.ndarray, opt: Adam, rng) -> float:
        """One optimizer update on a prepared window batch.

        Per item: t ~ U[1, T_diff], closed-form forward corruption, MSE of
        the predicted against the true normalized chunk.
        """
        b = tau0_normed.shape[0]
        if b == 0:
            raise ValueError("empty batch")
        t = rng.integers(1, self.config.t_diff + 1, size=b)
        eps = rng.standard_normal(tau0_normed.shape).astype(np.float32)
        c_sig = self.schedule.sqrt_alpha_bar[t].astype(np.float32)[:, None]
        c_noise = np.sqrt(1.0 - self.schedule.alpha_bar[t]).astype(np.float32)[:, None]
        noised = c_sig * tau0_normed + c_noise * eps

        opt.zero_grad()
        context = self.fusion.fuse(batch)
        pred = self.predict_tau0(Tensor(noised), t, context)
        diff = pred - Tensor(tau0_normed)
        loss = (diff * diff).mean()
        loss.backward()
        opt.step()
        return float(loss.data)

    def fit(self, pairs, dataset, seed: int, progress=None):
        """Train on demonstration pairs for ``config.epochs`` epochs.

        Images are fetched from the dataset and randomized fresh each epoch.
        In the default "image" mode every stored frame gets an independent
        parameter draw per epoch; batches then walk demos in temporal order
        so overlapping windows share one encoding of each frame. The
        "window" mode draws one parameter set per window instead and pays
        the full per-window encoding cost.
        """
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF17]))
        chunks = np.stack([p.chunk for p in pairs])
        self.normalizer = ChunkNormalizer.fit(chunks)
        normed = self.normalizer.normalize(chunks).reshape(len(pairs), -1).astype(np.float32)
        opt = Adam(self.params(), lr=cfg.lr)

        by_demo: dict = {}
        for i, p in enumerate(pairs):
            by_demo.setdefault(p.demo, []).append(i)
        demo_ids = sorted(by_demo)

        for epoch in range(cfg.epochs):
            image_cache = None
            if cfg.randomize_per == "image":
                image_cache = [_randomize_each(d.images, rng) for d in dataset.demos]
                demo_order = rng.permutation(len(demo_ids))
                order = np.concatenate([by_demo[demo_ids[d]] for d in demo_order])
            else:
                order = rng.permutation(len(pairs))
            total, batches = 0.0, 0
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                batch = self._assemble([pairs[i] for i in idx], dataset, rng, image_cache)
                total += self.train_step(batch, normed[idx], opt, rng)
                batches += 1
            self.loss_history.append(total / batches)
            if progress is not None:
                progress(epoch, self.loss_history[-1])
        return self.loss_history

    def _assemble(self, batch_pairs, dataset, rng, image_cache=None):
        if image_cache is not None:
            # Frames are randomized once per epoch: deduplicate across the
            # whole batch so each (demo, step) is encoded a single time.
            key_index: dict = {}
            blocks, slot_rows = [], []
            for p in batch_pairs:
                row = np.empty(len(p.window.step_ids), dtype=np.int64)
                for j, s in enumerate(p.window.step_ids):
                    key = (p.demo, int(s))
                    pos = key_index.get(key)
                    if pos is None:
                        pos = len(key_index)
                        key_index[key] = pos
                        blocks.append(image_cache[p.demo][int(s)])
                    row[j] = pos
                slot_rows.append(row)
            pixels = np.stack(blocks)
        else:
            blocks, slot_rows = [], []
            offset = 0
            for p in batch_pairs:
                uniq, inverse = np.unique(p.window.step_ids, return_inverse=True)
                blocks.append(
                    randomize_stack(
                        dataset.demos[p.demo].images[uniq], sample_params(rng), rng
                    )
                )
                slot_rows.append(offset + inverse)
                offset += len(uniq)
            pixels = np.concatenate(blocks)
        return prepare_batch(
            [p.window for p in batch_pairs],
            image_pixels=pixels,
            slots=np.stack(slot_rows),
        )

    # ------------------------------------------------------------------
    def reset(self):
        """Clear the per-episode image-feature cache."""
        self._feat_cache = {}

    def sample_chunk(self, context: Tensor, rng) -> np.ndarray:
        """One denormalized (m, 12) action chunk from the reverse sampler."""

        def denoise(tau, t):
            noised = Tensor(tau.astype(np.float32))
            return self.predict_tau0(noised, np.array([t]), context).data.astype(np.float64)

        flat = reverse_sample(denoise, (1, self.config.chunk_dim), self.schedule, rng)
        chunk = self.normalizer.denormalize(flat.reshape(self.config.horizon, 12))
        return clamp_rotvec(chunk)

    def act(self, history, tcp_pose: Pose, rng):
        """Pose/wrench targets for the next ``horizon`` steps in the robot
        frame; the caller executes the first ``replan_stride`` of them."""
        if self.normalizer is None:
            raise RuntimeError("policy has not been trained (no normalizer)")
        cfg = self.config
        window = ObservationWindow.from_history(history, cfg.window)
        uniq, inverse = np.unique(window.step_ids, return_inverse=True)
        missing = [int(s) for s in uniq if s not in self._feat_cache]
        if missing:
            pixels = np.stack([history[s].image for s in missing]).astype(np.float32)
            feats = self.fusion.image_features(pixels).data
            for s, f in zip(missing, feats):
                self._feat_cache[s] = f
        feat_store = np.stack([self._feat_cache[int(s)] for s in uniq])
        batch = prepare_batch(
            [window], image_feats=feat_store, slots=inverse[None, :]
        )
        context = self.fusion.fuse(batch)
        chunk = self.sample_chunk(context, rng)

        targets = []
        for row in chunk:
            t_rel = from_vec6(row[:6])
            action = rel_pose_inv(t_rel, tcp_pose)
            targets.append((compose(action, tcp_pose), Wrench.from_array(row[6:])))
        return targets


# ---------------------------------------------------------------------------
# checkpoint persistence
# ---------------------------------------------------------------------------


def save_checkpoint(path, policy: Policy, extra_meta: dict | None = None):
    params = policy.params()
    names = sorted(params)
    header = {
        "format": "checkpoint",
        "config": policy.config.as_dict(),
        "seed": policy.seed,
        "normalizer": None
        if policy.normalizer is None
        else {
            "mean": policy.normalizer.mean.tolist(),
            "std": policy.normalizer.std.tolist(),
        },
        "loss_history": [float(x) for x in policy.loss_history],
        "param_names": names,
        "param_shapes": {n: list(params[n].shape) for n in names},
        "meta": extra_meta or {},
    }
    records = [params[n].data.astype("<f4").tobytes() for n in names]
    write_container(path, CHECKPOINT_MAGIC, header, records)


def load_checkpoint(path) -> Policy:
    header, records = read_container(path, CHECKPOINT_MAGIC)
    config = PolicyConfig.from_dict(header["config"])
    policy = Policy(config, seed=header["seed"])
    params = policy.params()
    for name, payload in zip(header["param_names"], records):
        shape = tuple(header["param_shapes"][name])
        params[name].data = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if header["normalizer"] is not None:
        policy.normalizer = ChunkNormalizer(
            mean=np.array(header["normalizer"]["mean"]),
            std=np.array(header["normalizer"]["std"]),
        )
    policy.loss_history = list(header.get("loss_history", []))
    return policy
