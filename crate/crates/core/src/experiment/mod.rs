//! Experiment specs, sweeps, domain transfer, reports and manifests.

mod manifest;
mod report;
mod spec;
mod sweep;
mod transfer;

pub use manifest::{config_hash, git_blob_hash, InputDigest, Manifest, MANIFEST_FORMAT};
pub use report::{emit_report, render_report, RenderedReport, ReportFiles, ReportRow, ReportTable};
pub use spec::{parse_seeds, weak_counts, CorpusSource, ExperimentSpec, CONFIG_KEYS};
pub use sweep::{cell_dataset, dataset_vocabulary, load_inputs, run_sweep, Inputs, RunRecord, STANDARD};
pub use transfer::{
    run_transfer, run_transfer_spec, TransferMetrics, TransferSpec, CLEAN_ONLY, COMBINED, TINY_CLEAN, ZERO_SHOT,
};
