"""gridcraft: a deterministic crafting grid world with agent learning.

Seeded 2D survival/crafting simulator, a contrastive caption-reward model
with DIRECT/DELTA reward adaptation, PPO + self-imitation training, and a
classifier-based evaluation protocol, all CPU-scale and reproducible from a
single seed.
"""

__version__ = "0.1.0"
