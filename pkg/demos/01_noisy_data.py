"""
Noisy synthetic data
====================

Four Gaussian classes in 16 dimensions, half the training labels resampled
at random, plus 100 out-of-distribution points that were handed a random
class label. This is the setting every other demo works on.
"""

import numpy as np

from ngc import OOD, SyntheticConfig, generate_synthetic
from ngc.dataset import cyclic_mapping, inject_asymmetric_noise, inject_symmetric_noise

cfg = SyntheticConfig(sym_noise_level=0.5)
train = generate_synthetic(cfg, "train")
test = generate_synthetic(cfg, "test")
print(f"train: {train.num_samples} samples, test: {test.num_samples} samples, dim {train.dim}")

# Three kinds of training sample: clean, IND-mislabelled and OOD.
ood = train.is_ood()
noisy = train.is_noisy()
print("clean          ", np.sum(~noisy))
print("IND mislabelled", np.sum(noisy & ~ood))
print("OOD            ", np.sum(ood))
print(f"overall noise rate {noisy.mean():.3f}")

# Symmetric noise resamples over *all* classes, so a quarter of the resampled
# labels land back on the true class: 50% injection corrupts about 37.5%.
labels = np.arange(10_000) % 4
frac = np.mean(inject_symmetric_noise(labels, 0.5, 4, np.random.default_rng(1)) != labels)
print(f"symmetric 0.5 over K=4 -> corrupted {frac:.3f} (expected {0.5 * 3 / 4:.3f})")

# Asymmetric noise flips a fixed fraction through a class map instead.
flipped = inject_asymmetric_noise(labels, 0.4, cyclic_mapping(4), np.random.default_rng(1))
print(f"asymmetric 0.4, cyclic map -> {np.sum(flipped != labels)} of {len(labels)} flipped")

# The test split carries clean IND labels and its own OOD draw.
print("test OOD share", np.mean(test.true_labels == OOD))
