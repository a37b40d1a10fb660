"""Lightweight and dynamic convolutions as a drop-in for self-attention."""
from .attention import (AttentionParams, count_ops_attention, multi_head_self_attention,
                        scaled_dot_attention, source_target_attention)
from .conv import (ConvConfig, count_params, depthwise_conv, dropconnect, expand_shared_weights,
                   lightconv, lightconv_band_matrix, normalize_kernel)
from .dynamic import count_ops_dynamic, dynamic_conv, dynamic_conv_band_matrix, predict_kernels
from .gradcheck import grad_check
from .model import ModelConfig, Seq2Seq, beam_decode, greedy_decode
from .rng import Rng
from .tensor import Tensor, backward, no_grad

__version__ = "0.1.0"
