use std::process::ExitCode;

/// Exit status of a case run whose summary did not validate.
pub const EXIT_RUN_FAILED: u8 = 1;
/// Exit status for bad arguments or inputs.
pub const EXIT_INPUT: u8 = 2;

/// A run that completed its bookkeeping but produced no valid summary.
#[derive(Debug, thiserror::Error)]
#[error("run {run_id} failed at stage {stage}: {message}")]
pub struct RunFailed {
    pub run_id: String,
    pub stage: String,
    pub message: String,
}

pub fn exit_code(err: &anyhow::Error) -> ExitCode {
    if err.downcast_ref::<RunFailed>().is_some() {
        ExitCode::from(EXIT_RUN_FAILED)
    } else {
        ExitCode::from(EXIT_INPUT)
    }
}
