//! Corpora, vocabulary, the synthetic 2-D task, and uncertainty grids.

mod corpus;
mod grid;
mod synthetic;
mod vocab;

pub use corpus::{encode_corpus, load_jsonl_corpus, Corpus, LabelSchema, TextCorpus};
pub use grid::{
    grid_csv, read_grid_csv, uncertainty_grid, write_grid_csv, GridPoint, GridRow, GridSpec,
    GRID_HEADER,
};
pub use synthetic::{generate_synthetic_2d, SyntheticData, SyntheticSpec};
pub use vocab::{tokenize, Vocab, PAD_TOKEN, UNK_TOKEN};

/// Token id reserved for padding.
pub const PAD_ID: usize = 0;
/// Token id for out-of-vocabulary and rare tokens.
pub const UNK_ID: usize = 1;
