//! On-disk formats: the binary feature file and 16-bit PCM WAV.

pub mod feature_file;
pub mod wav;

pub use feature_file::{read_features, write_features, FeatureHeader};
pub use wav::{read_wav, write_wav};
