"""C-RAN power management workbench.

Pieces: an exact minimal-power beamforming solver with SINR targets
(`beamform`), the physical cell model (`netmodel`), a from-scratch
gradient-boosted-tree regressor that learns the solver's output (`gbdt`),
a numpy deep Q-network (`dqn`), the RRH on/off control environment (`env`),
and the orchestration pipeline plus CLI (`pipeline`, `cli`).
"""

__version__ = "0.1.0"
