//! Command-line pipelines around `stt-core`: scenario documents, tube files,
//! synthesis, dense verification, closed-loop simulation and plotting.
//!
//! Exit statuses are stable: 0 on success, 1 when the method fails (no
//! certificate, violated tube condition, failed verdict), 2 for unreadable or
//! invalid input.

pub mod commands;
pub mod error;
pub mod files;
pub mod plot;
pub mod scenario;

pub use error::{CliError, CliResult, ExitStatus};
pub use files::TubeFile;
pub use scenario::Scenario;

/// Worker-count variable for the parallel stages.
pub const WORKERS_ENV: &str = "STT_WORKERS";

/// Parses a seed list such as `1,2,5` or a half-open range `0..20`.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::usage(format!("invalid seed `{part}`"));
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b <= a {
                return Err(bad());
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(CliError::usage("empty seed list"));
    }
    Ok(seeds)
}

/// Sizes the global worker pool from [`WORKERS_ENV`] when it is set.
pub fn configure_workers() -> CliResult<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{WORKERS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot size worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1, 4,2").unwrap(), vec![1, 4, 2]);
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
