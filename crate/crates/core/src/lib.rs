pub mod attention;
pub mod backbone;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod head;
pub mod image;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod preprocess;
pub mod radiomics;
pub mod synth;
pub mod tensor;
pub mod training;
pub mod view;

pub use error::{Error, Result};
