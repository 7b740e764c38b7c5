"""Bi-temporal change detection with matrix-memory LSTM feature enhancement,
built on a self-contained reverse-mode autodiff core."""

from .tensor import Tensor, no_grad, concat, concat_channels, maximum, stack
from .functional import (axial_avgpool, bilinear_upsample, conv2d, grad_check,
                         softmax)
from .module import Conv2d, DSConv, LayerNorm, Linear, Module, Parameter
from .xlstm import (BiMLSTM, MLSTMBlock, MLSTMState, causal_conv1d,
                    initial_state, mlstm_step, raster_flatten, raster_unflatten)
from .backbone import SiameseEncoder
from .enhancer import (AxialChangeEnhancer, AxialWeight, GlobalChangeEnhancer,
                       TemporalWeight, build_enhancers, coarse_diff)
from .fusion import CrossScaleFusion, DecodeHead, MLPResidual
from .model import ChangeDetector
from .losses import LossWeights, bce_loss, dice_loss, total_loss
from .optim import Adam
from .metrics import (ConfusionCounts, binarize_logits, metrics,
                      update_confusion)
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .data import (BiTemporalSample, SynthConfig, load_pair_dir,
                   save_comparison_image, save_mask_image, save_pair_dir,
                   synth_generate)
from .config import RunConfig, load_config

__version__ = "0.1.0"
