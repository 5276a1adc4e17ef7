pub mod baseline;
pub mod dataset;
pub mod decode;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod preprocess;
