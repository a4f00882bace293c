//! Write mappings, phase scheduling, layered networks and training loops.

mod mapping;
mod network;
mod schedule;
mod trainer;

pub use mapping::{map_error_to_pulse_width, map_input_to_current, write_voltage, MappingCoefficients};
pub use network::{
    backward, binarize_scale, check_chain, forward, predict, with_bias, Activations, CrossbarLayer, CrossbarNetwork,
    DenseLayer, DenseNetwork, Layer, Shape, V_READ,
};
pub use schedule::{schedule_phases, update_direction, PhaseMode};
pub use trainer::{
    evaluate, insitu_step, train_insitu, train_reference, EpochRecord, ErrorNorm, ReferenceMode, ReferenceRun,
    TrainConfig, TrainingTrace,
};
