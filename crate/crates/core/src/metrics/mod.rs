//! Training losses, evaluation metrics and their aggregation into metric
//! tables.

mod loss;
mod measure;
mod report;

pub use loss::{loss_report, mag_loss, ri_loss, total_loss, LossConfig, LossReport, LossVars};
pub use measure::{erle, lsd, sdr, sisnr, ERLE_CAP_DB, RATIO_CAP_DB};
pub use report::{
    evaluate_set, evaluate_source, ClipMetrics, Enhancer, Identity, MetricReport, MetricRow,
    CSV_HEADER,
};
