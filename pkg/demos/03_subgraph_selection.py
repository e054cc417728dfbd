"""
Confidence pruning and per-class components
===========================================

From propagated soft labels, keep a node if its given label still scores
above chance (the label is trusted) or if some class scores above eta (the
label is corrected). Then keep only the largest connected component of each
class in the pruned graph. OOD points, which sit in their own clusters, are
mostly cut off at this stage.
"""

import numpy as np

from ngc import GraphParams, SyntheticConfig, build_knn_graph, generate_synthetic, propagate, selection_report
from ngc.dataset import normalize_rows
from ngc.propagation import normalize_soft_labels, one_hot
from ngc.selection import confidence_select, subgraph_select

ds = generate_synthetic(SyntheticConfig(sym_noise_level=0.5))
z, _ = normalize_rows(ds.embeddings)
graph = build_knn_graph(z, GraphParams(k=10))
soft = normalize_soft_labels(propagate(graph, one_hot(ds.given_labels, ds.num_classes)))

# With one-hot inputs and alpha = 0.5 a node's own label keeps at least half
# the mass, so nearly every node is "trusted" here; the component step below
# is what drops the mislabelled ones. During training the input rows come
# from model predictions and the corrected branch starts to matter.
keep, trusted = confidence_select(soft, ds.given_labels, 0.8, ds.num_classes)
print(f"confident: {keep.sum()} ({trusted.sum()} trusted, {(keep & ~trusted).sum()} corrected)")

state = subgraph_select(graph, soft, ds.given_labels, 0.8, ds.num_classes)
for k, nodes in state.per_class_lcc.items():
    print(f"class {k}: component of {len(nodes)} nodes")

stats = selection_report(state.selected, ds.given_labels, ds.true_labels, state.pseudo_labels)
print(f"selected {stats['selected_count']} of {ds.num_samples}")
print(f"OOD selected: {stats['ood_noise_selected']} of {ds.is_ood().sum()}")
print(f"noise among selected, given labels:    {stats['selected_noise_rate']:.3f}")
print(f"noise among selected, training labels: {stats['selected_label_noise_rate']:.3f}")
print(f"noise before selection:                {ds.is_noisy().mean():.3f}")
