use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for {width}-bit words")]
    IndexOutOfRange { index: u64, width: u32 },

    #[error("word width {actual} does not match expected width {expected}")]
    WidthMismatch { expected: u32, actual: u32 },

    #[error("invalid quantization grid: {0}")]
    InvalidGrid(String),

    #[error("invalid codec spec: {0}")]
    InvalidSpec(String),

    #[error("value {0} exceeds the binary16 range (|w| <= 65504)")]
    HalfOverflow(f64),

    #[error("exhaustive evaluation needs {required} steps, budget is {budget}; use sampled evaluation")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),

    #[error("invalid bundle: {0}")]
    Format(String),

    #[error("unexpected end of data while reading {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("evaluation failed at rber {rber}, trial {trial}: {source}")]
    Trial {
        rber: f64,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
