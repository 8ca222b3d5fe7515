//! Class-incremental task streams, the single-pass online protocol and its
//! evaluation metric.

mod cifar;
mod metrics;
mod runner;
mod stream;
mod synthetic;

pub use cifar::{decode_cifar100, load_cifar100, CIFAR100_RECORD_BYTES};
pub use metrics::{average_end_accuracy, AccuracyMatrix};
pub use runner::{run_online, InferenceHead, RunConfig, RunOutcome};
pub use stream::{split_tasks, Dataset, Task, TaskStream};
pub use synthetic::{generate_synthetic, mean_pattern, SyntheticSpec};
