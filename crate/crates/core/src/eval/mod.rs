//! Verification protocol and equal error rate.

pub mod eer;
pub mod protocol;
pub mod report;

pub use eer::{compute_eer, far_frr_curve, CurvePoint, EerResult, ScoreSet};
pub use protocol::{
    eligible_users, evaluate_run, group_features, mean_std, run_protocol, score_users, split_genuine, strategy_key,
    train_verifiers, CellReport, EvalReport, ProtocolConfig, RunResult, SignatureDataset, SignatureSample,
    SignatureUser, UserFeatures, UserResult, VerifierSettings,
};
pub use report::{
    csv_rows, parse_csv, render_csv, render_summary_table, render_table, summarize, summarize_rows, CellSummary, CsvRow, COLUMNS,
    CSV_HEADER,
};
