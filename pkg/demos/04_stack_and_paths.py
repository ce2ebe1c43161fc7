# %% [markdown]
# # Stacking layers and reading fired paths
#
# `stack_train` trains one layer, feeds its hidden probabilities to the
# next, and keeps going while the error stays high. At each time step the
# most active neuron in every layer forms the fired path; paired with one
# bit of the next frame it becomes a row of a C4.5 table.

# %%
from pathlib import Path
from tempfile import mkdtemp

from seqdistill.adaptive_structure import StructureConfig
from seqdistill.path_extraction import build_path_dataset, fired_paths, write_c45_files
from seqdistill.rnn_dbn import stack_train
from seqdistill.rnn_rbm import TrainHyper
from seqdistill.sequence_data import synth_markov

ds = synth_markov(3, 8, 2, 16, 20, 4)
model = stack_train(ds, TrainHyper(learning_rate=0.1, batch_size=5, epochs=150, seed=3),
                    StructureConfig(gen_threshold=1e12, ann_threshold=1e-12, layer_threshold=1e-12,
                                    initial_hidden=8, max_hidden=8, max_layers=2))
print(model.n_layers, "layers")
print(fired_paths(model, ds.test[0])[:6])

# %%
out = Path(mkdtemp())
pd = build_path_dataset(model, ds, target_dimension=0)
names, data = write_c45_files(pd, out / "dim000")
print(names.read_text())
print(data.read_text()[:60])
