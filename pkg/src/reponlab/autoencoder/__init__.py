from reponlab.autoencoder.model import (
    Mode,
    ModelConfig,
    ModelParams,
    forward,
    init_model,
    load_checkpoint,
    loss_and_gradients,
    predict_proba,
    save_checkpoint,
)
from reponlab.autoencoder.sweeps import (
    DepthSweep,
    FractionCurve,
    PhaseGrid,
    goldilocks_sweep,
    ordering_violations,
    phase_diagram_lr,
    phase_diagram_wd,
    sweep_training_fraction,
)
from reponlab.autoencoder.train import (
    Optimizer,
    PhaseLabel,
    TrainConfig,
    TrainResult,
    classify_phase,
    train,
)
