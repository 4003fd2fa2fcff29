//! Number semantics from word embeddings and acoustic form vectors: corpus
//! loading, plural conceptualizers, C-FBSF features, linear mappings,
//! cross-validated evaluation and form/meaning distance studies.

pub mod cfbsf;
pub mod conceptualizer;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod isomorphy;
pub mod linmap;
pub mod matrix_io;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod xval;

pub use cfbsf::{CfbsfConfig, CfbsfVector, FeatureMatrix};
pub use conceptualizer::{Conceptualizer, Method};
pub use corpus::{Corpus, EmbeddingTable, Number};
pub use error::{Error, Result};
pub use eval::{EvalReport, GoldIndex};
pub use linmap::{LinearMap, SolveOptions, Solver};
pub use synth::{SynthCorpus, SynthSpec};
pub use xval::{CvConfig, CvRun, Dataset, GoldSpace, GoldSpaceName};
