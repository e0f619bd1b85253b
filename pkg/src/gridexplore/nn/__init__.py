from .checkpoint import (BadMagic, CheckpointError, Corrupt, VariantMismatch, VersionMismatch,
                         load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint)
from .network import (NetConfig, NetOutput, NetworkParams, OutputGrads, ShapeMismatch, backward,
                      combine_dueling, forward, init_params, q_values)
from .optim import AdamState, adam_step
