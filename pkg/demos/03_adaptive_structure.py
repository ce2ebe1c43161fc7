# %% [markdown]
# # Growing and pruning hidden neurons
#
# Every few epochs the layer looks back over a window of minibatches. A
# neuron whose bias and weight gradients keep swinging is split in two; a
# neuron that is almost always on or always off is removed. A layer whose
# final error is still above a threshold gets another layer stacked on top.

# %%
import numpy as np
from seqdistill.adaptive_structure import (StructureConfig, StructureLog, insert_neuron,
                                           probe_outputs, remove_neuron, train_layer)
from seqdistill.rnn_rbm import TrainHyper, init_params
from seqdistill.sequence_data import synth_markov

ds = synth_markov(0, 12, 3, 12, 10, 4)
cfg = StructureConfig(gen_threshold=1e-30, initial_hidden=4, max_hidden=8,
                      check_interval=1, window_len=2)
log = StructureLog()
params, trace = train_layer(init_params(12, 4, seed=0), ds.train,
                            TrainHyper(learning_rate=0.05, batch_size=5, epochs=10), cfg, log=log)
for rec in log.records:
    print(rec)
print("hidden units now:", params.n_hidden)

# %% [markdown]
# Neither edit should disturb what the layer computes. A split copies the
# parent with a little jitter, and a removed neuron contributed almost
# nothing, so the outputs on a probe batch barely move.

# %%
probe = np.stack(ds.test)
base = probe_outputs(params, probe)
split = insert_neuron(params, 0, np.random.default_rng(0))
print("after split  :", np.abs(probe_outputs(split, probe) - base).max())
params.c[1] = -40.0
base = probe_outputs(params, probe)
print("after removal:", np.abs(probe_outputs(remove_neuron(params, 1), probe) - base).max())
