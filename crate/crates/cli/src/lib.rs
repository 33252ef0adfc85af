//! The `platewise` pipeline as a library: configuration, stage runners and
//! artifact bookkeeping. The binary is a thin clap front end over this.

pub mod artifacts;
pub mod config;
pub mod stages;

pub use artifacts::{Manifest, MissingArtifact};
pub use config::PipelineConfig;
pub use stages::{run_all, run_stage, write_synthetic, Stage};

/// Process exit status for a failed run: 1 validation, 2 infeasible, 3 I/O.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<MissingArtifact>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<platewise::Error>() {
            return match e {
                platewise::Error::Infeasible { .. } | platewise::Error::InfeasibleCluster { .. } => 2,
                platewise::Error::Io { .. } => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
