//! Model configuration, presets, forward/backward passes, loss, metrics and
//! training.

pub mod baseline;
pub mod config;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod params;
pub mod presets;
pub mod train;

pub use baseline::{Baseline, BaselineConfig};
pub use config::{ModelConfig, PqLayerConfig, QReduction, RadialChoice};
pub use loss::{weighted_bce, weighted_bce_grad, weighted_bce_logits_grad};
pub use metrics::{average_precision, dice, metrics, roc_auc, Metrics};
pub use net::{Model, Sample, Trace};
pub use params::{read_params, write_params, ParamGroup, ParamsHeader};
pub use presets::{preset, PresetScale, PRESET_IDS};
pub use train::{pos_weight, train_toy, Objective, TrainResult};
