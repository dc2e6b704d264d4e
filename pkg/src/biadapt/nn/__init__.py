"""Minimal numpy network stack with hand-written backward rules."""

from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .encoders import PointEncoder, VectorEncoder
from .gradcheck import check_gradients
from .layers import ELU, MLP, Linear, Module, Param, sigmoid
from .losses import bce, bce_loss, bce_with_logits, geodesic, geodesic_loss, kl_loss, kl_std_normal
from .networks import CondBatch, ConditionEncoder, Proposal, Scorer
from .optim import Adam
