# %% [markdown]
# # Network vs rules at inference time
#
# The network engine answers each step by running the whole stack over the
# prefix and reading out the top-down prediction. The rule engine only
# steps the layers its rules test and looks the frame up. Both are timed
# single-threaded on the same test sequences. This takes around ten seconds.

# %%
from seqdistill import c45
from seqdistill.adaptive_structure import StructureConfig
from seqdistill.inference_bench import StatefulNetworkPredictor, compare, evaluate, format_table
from seqdistill.path_extraction import build_path_dataset, path_table
from seqdistill.rnn_dbn import stack_train
from seqdistill.rnn_rbm import TrainHyper
from seqdistill.sequence_data import synth_markov

ds = synth_markov(0, 88, 4, 32, 40, 20)
model = stack_train(ds, TrainHyper(learning_rate=0.1, batch_size=5, epochs=30, seed=0),
                    StructureConfig(initial_hidden=80, max_hidden=100, max_layers=5,
                                    layer_threshold=1e-9))
table = path_table(model, ds.train)
rulesets = [c45.induce(build_path_dataset(model, ds, d, table))[1] for d in range(88)]
print(sum(len(rs) for rs in rulesets), "rules; deepest layer tested:",
      max(rs.deepest_layer for rs in rulesets))

# %%
net, rules = compare(model, rulesets, ds.test)
print(format_table(net, rules))

# %% [markdown]
# Most of that gap comes from not replaying the prefix. A network engine
# that carries its recurrent state between calls closes much of it.

# %%
stateful = evaluate(StatefulNetworkPredictor(model), ds.test)
print(f"stateful network {stateful.cpu_time_seconds:.4f}s, "
      f"rules {stateful.cpu_time_seconds / rules.cpu_time_seconds:.1f}x faster")
