mod cam;
mod config;
mod eval;
mod file;
mod input;
mod network;
mod train;

pub use cam::{cam_from_features, cam_to_subbands, compute_cam, upsample_bilinear, CamGrid, CamSlice};
pub use config::{ClassifierConfig, ConvBlock, InputMode};
pub use eval::{auc_trapezoid, confusion_at, evaluate, evaluate_scores, roc_curve, Confusion, EvalReport, EvalSummary, RocPoint};
pub use file::{read_model, write_model, MAGIC};
pub use input::{assemble_input, InputTensor, ModelFrame};
pub use network::{softmax, ConvLayer, DenseLayer, Gradients, ModelShape, Network, Trace, N_CLASSES};
pub use train::{is_primed, predict_many, predict_posterior, predict_proba, score_pt, train, EpochStats, TrainedModel};
