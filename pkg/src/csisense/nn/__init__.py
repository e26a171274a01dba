"""Minimal reverse-mode autodiff, encoder layers, SSL losses and the optimizer."""
from .autograd import Value, no_grad
from .layers import Encoder, EncoderConfig, Projector, SslNetwork, SupervisedNetwork
from .losses import SslLossConfig, barlow_twins_loss, nt_xent, simsiam_loss, vicreg_loss
from .optim import Adam
