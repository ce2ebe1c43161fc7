# %% [markdown]
# # From fired paths to IF-THEN rules
#
# C4.5 grows a tree on the path table, prunes it with the pessimistic error
# bound, and reads one rule per leaf. Small hand-made tables show each step.

# %%
import numpy as np
from seqdistill import c45
from seqdistill.path_extraction import PathDataset

print("entropy of a 9/5 split:", round(c45.entropy([9, 5]), 4))

paths = np.array([[0, 3], [0, 4], [1, 3], [1, 4], [2, 3], [2, 4]] * 10)
labels = (paths[:, 0] == 1).astype(int)
for a in range(2):
    print(f"layer{a + 1}", c45.gain_ratio(paths, labels, a))

# %%
tree, rules = c45.induce(PathDataset(paths, labels, target_dimension=0))
for rule in rules.rules:
    print(c45.format_rule(rule))
print("default class:", rules.default_class)
print("classify (1, 4):", c45.classify(rules, (1, 4)))

# %% [markdown]
# With flipped labels scattered through the table, pruning trades a few
# training errors for a smaller tree.

# %%
rng = np.random.default_rng(0)
noisy = labels ^ (rng.random(len(labels)) < 0.15)
full = c45.build_tree((paths, noisy), min_cases=1)
pruned = c45.prune_tree(full, (paths, noisy))
print("nodes before/after pruning:", c45.count_nodes(full), c45.count_nodes(pruned))
