//! Grid scans and single-point runs behind the `clequil` command.

pub mod config;
pub mod run;

pub use config::{ConfigError, Quantity, ScanConfig, ScanGrid, Settings};
pub use run::{
    evaluate, load_config, oracle_report, oracle_value, run_point, run_scan, Inputs, Manifest,
    OracleReport, PointRecord, ScanError,
};
