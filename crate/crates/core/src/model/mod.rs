//! Stored models: quantized tensors, the NNSB file format, datasets, the
//! inference engine and the toy trainer.

mod bundle;
mod dataset;
mod engine;
pub mod format;
mod tensor;
pub mod train;

pub use bundle::{
    infer_shapes, quantize_model, ActivationKind, FloatModel, GridPolicy, Layer, ModelBundle,
    CONSTANT_GRID_EPSILON, INPUT_SHAPE_KEY,
};
pub use dataset::LabeledDataset;
pub use engine::{count_correct, evaluate_accuracy, forward, in_top_k, softmax, Network};
pub use format::{load_bundle, save_bundle};
pub use tensor::{decode_word, encode_value, DecodeOptions, Decoded, FloatTensor, QuantizedTensor};
pub use train::{train_toy, Mlp, ToyConfig, ToyOutcome};
