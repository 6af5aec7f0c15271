//! Mail data model, ingestion, thread reconstruction, synthetic corpora and dataset splits.

mod dataset;
mod io;
mod model;
mod synthetic;
mod threads;

pub use dataset::{
    balance, build_dataset, BuildOptions, Dataset, Example, Label, Source, Split, SplitAudit, SplitSizes,
};
pub use io::{
    gold_from_records, gold_to_records, load_corpus, load_corpus_with, read_corpus_dir, read_records, write_corpus,
    write_records,
};
pub use model::{
    Attachment, AttachmentKind, CalendarEntry, Corpus, EmailMessage, GoldLabels, GoldRecord, Intent, Thread,
};
pub use synthetic::{audit_targets, generate_synthetic, pseudo_word, IntentProfile, SyntheticSpec};
