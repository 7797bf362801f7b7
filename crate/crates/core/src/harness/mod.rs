//! Dataset ingestion, domain statistics and resumable batch runs.

pub mod config;
pub mod dataset;
pub mod domains;
pub mod runner;
pub mod store;

pub use config::{sanitize_model, CheckerKind, ConfigError, ConfigLayer, RunConfig};
pub use dataset::{load_dataset, DatasetError, DatasetFormat, DatasetSpec};
pub use domains::{classify_domains, dataset_stats, DatasetStats, DomainCount};
pub use runner::{
    build_analyzer, build_checker, evaluate_records, evaluate_run_dir, run_benchmark,
    run_generation, run_tasks, Clock, FixedClock, HarnessError, RunSummary, SystemClock, Toolchain,
};
pub use store::{
    read_jsonl, read_records, read_run_dir, GenerationFailure, GenerationRecord, JsonlWriter,
    StoreError,
};
