//! Response parsing, accuracy, mean cumulative accuracy and Kendall's W.

mod kendall;
mod response;
mod score;

pub use kendall::{kendall_w, Judge, RankTable};
pub use response::{parse_for_prompt, parse_response, Verdict};
pub use score::{
    accuracy, mean_cumulative_accuracy, write_mca_csv, Axis, McaPoint, RecordStatus, RunRecord,
};
