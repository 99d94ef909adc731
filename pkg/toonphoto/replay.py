"""History of generated images shown to the discriminators"""

from typing import Any, Dict, List

import numpy as np
import torch

SWAP_PROBABILITY = 0.5


class ReplayBuffer:
    """
    Image pool: until full, every generated image is stored and passed through.
    Once full, each image is swapped for a stored one with probability 0.5.
    A disabled buffer (or capacity 0) always returns the freshest batch.
    """

    def __init__(self, capacity: int = 50, enabled: bool = True, seed: int = 0):
        self.capacity = capacity
        self.enabled = enabled and capacity > 0
        self.images: List[torch.Tensor] = []
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.images)

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        if not self.enabled:
            return batch
        out = []
        for image in batch.detach():
            image = image.unsqueeze(0)
            if len(self.images) < self.capacity:
                self.images.append(image.clone())
                out.append(image)
            elif self.rng.random() < SWAP_PROBABILITY:
                idx = int(self.rng.integers(self.capacity))
                out.append(self.images[idx].clone())
                self.images[idx] = image.clone()
            else:
                out.append(image)
        return torch.cat(out, dim=0)

    def state_dict(self) -> Dict[str, Any]:
        return {
            'capacity': self.capacity,
            'enabled': self.enabled,
            'images': [img.clone() for img in self.images],
            'rng': self.rng.bit_generator.state,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.capacity = state['capacity']
        self.enabled = state['enabled']
        self.images = [img.clone() for img in state['images']]
        self.rng.bit_generator.state = state['rng']
