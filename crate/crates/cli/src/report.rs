use std::path::Path;

use jointam_core::eval::{results_table, Metric, ResultRow};
use jointam_core::Result;

use crate::data::{read_results, ResultRecord};
use crate::MetricArg;

/// Table rows; panels are keyed by training set and test condition so that
/// only comparable numbers compete for the mark.
pub fn rows(records: &[ResultRecord], metric: MetricArg) -> Vec<ResultRow> {
    records
        .iter()
        .map(|r| {
            let value = match metric {
                MetricArg::Wer => r.wer,
                MetricArg::Accuracy => 100.0 * r.frame_accuracy,
            };
            let panel = format!("{} ({})", r.train_set, r.test_set);
            ResultRow::new(&r.arch, &r.features, &panel, value)
        })
        .collect()
}

pub fn report(path: &Path, metric: MetricArg) -> Result<()> {
    let records = read_results(path)?;
    if records.is_empty() {
        println!("no results in {}", path.display());
        return Ok(());
    }
    let m = match metric {
        MetricArg::Wer => Metric::wer(),
        MetricArg::Accuracy => Metric::accuracy(),
    };
    print!("{}", results_table(&rows(&records, metric), &m));
    Ok(())
}
