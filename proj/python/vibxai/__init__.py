"""Rpm-resolved vibration maps, a small 1-d CNN and saliency methods."""

from ._core import (
    Checkpoint,
    Config,
    SignalConfig,
    amplitude_spectrum,
    build_dataset,
    cmd_explain,
    cmd_generate,
    cmd_render,
    cmd_train,
    cmd_transform,
    default_order_max,
    explain,
    freq_rpm_map,
    load_checkpoint,
    order_rpm_map,
    render,
)

__all__ = [
    "Checkpoint",
    "Config",
    "SignalConfig",
    "amplitude_spectrum",
    "build_dataset",
    "cmd_explain",
    "cmd_generate",
    "cmd_render",
    "cmd_train",
    "cmd_transform",
    "default_order_max",
    "explain",
    "freq_rpm_map",
    "load_checkpoint",
    "order_rpm_map",
    "render",
]
