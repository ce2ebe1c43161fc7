# %% [markdown]
# # One RNN-RBM layer
#
# A recurrent state `u` shifts the visible and hidden biases of an RBM at
# every step. The cost is the cross-entropy between each frame and its
# mean-field reconstruction from the previous frame, so a low cost means the
# layer predicts the next frame.

# %%
import numpy as np
from seqdistill.rnn_rbm import TrainHyper, init_params, predict_next, sequence_cost, train
from seqdistill.sequence_data import synth_markov

ds = synth_markov(seed=1, D=8, n_states=2, T=16, n_train=20, n_test=4)
params = init_params(8, 8, seed=1)
print("cost before training:", round(sequence_cost(params, ds.test[0]), 3))

# %% [markdown]
# The default gradient mixes CD-1 for the RBM weights with exact
# backpropagation through the recurrent chain. `gradient="exact"`
# backpropagates the cost into every parameter instead.

# %%
hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=200, seed=1)
params, trace = train(params, ds, hyper)
print("epoch error: first", round(trace[0], 3), "last", round(trace[-1], 3))

seq = ds.test[0]
pred = predict_next(params, seq[:3])
print("frame 3 :", seq[2])
print("frame 4 :", seq[3])
print("predict :", (pred > 0.5).astype(int))
