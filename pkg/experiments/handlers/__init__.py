# Import all handlers
from .main import (
    depth_report_handler,
    entanglement_handler,
    estimate_f_handler,
    ff_sweep_handler,
    history_handler,
    loschmidt_handler,
    vhd_train_handler,
)

HANDLERS = {
    "history": history_handler,
    "estimate-f": estimate_f_handler,
    "loschmidt": loschmidt_handler,
    "entanglement": entanglement_handler,
    "ff-sweep": ff_sweep_handler,
    "vhd-train": vhd_train_handler,
    "depth-report": depth_report_handler,
}
