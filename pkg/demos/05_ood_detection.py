"""
Prototype-based OOD rejection
=============================

After training, each class is summarised by the normalised mean embedding of
its selected samples. A test point scores its best cosine similarity to any
prototype and is rejected when that falls below zeta.
"""

import numpy as np

from ngc import OOD, SyntheticConfig, auroc, classify_or_reject, f_measure, fit, generate_synthetic, Hyper
from ngc.metrics import accuracy, zeta_sweep

cfg = SyntheticConfig(sym_noise_level=0.5)
train, test = generate_synthetic(cfg, "train"), generate_synthetic(cfg, "test")
result = fit(train, Hyper(), seed=0)
print("prototype support per class:", result.prototypes.support.tolist())

decision = classify_or_reject(test.embeddings, result.model, result.prototypes, zeta=0.5)
ood = test.true_labels == OOD
print(f"mean score IND {decision.scores[~ood].mean():.3f}, OOD {decision.scores[ood].mean():.3f}")
print(f"AUROC            {auroc(decision.scores[~ood], decision.scores[ood]):.3f}")
print(f"IND accuracy     {accuracy(decision.predicted_class, test.true_labels):.3f}")
print(f"F at zeta = 0.5  {f_measure(decision.predicted_class, decision.is_ood, test.true_labels, 4):.3f}")

curve = zeta_sweep(decision.scores, decision.predicted_class, test.true_labels, 4)
best_zeta, best_f = max(curve, key=lambda item: item[1])
print(f"best F {best_f:.3f} at zeta {best_zeta:.2f}")
for zeta, f in curve[::25]:
    print(f"  zeta {zeta:+.2f}  F {f:.3f}  {'#' * int(40 * f)}")
