//! CSV renderings of training histories and comparison reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! runs give byte-equal files.

use ttc_core::train::EpochRecord;
use ttc_core::EvaluationReport;

use crate::compare::{CompareReport, MetricDelta};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to a Vec cannot fail");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// `epoch,loss,acc_l1,…,acc_ln,exact_match,seconds`, one row per epoch.
pub fn history_csv(history: &[EpochRecord], levels: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epoch".to_string(), "loss".to_string()];
    header.extend(numbered("acc_l", levels));
    header.extend(["exact_match".to_string(), "seconds".to_string()]);
    w.write_record(&header).expect("in-memory write");
    for rec in history {
        let mut row = vec![rec.epoch.to_string(), rec.loss.to_string()];
        row.extend(rec.level_accuracy.iter().map(f64::to_string));
        row.extend([rec.exact_match.to_string(), rec.seconds.to_string()]);
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

fn metric_row(seed: &str, mode: &str, r: &EvaluationReport) -> Vec<String> {
    let mut row = vec![
        seed.to_string(),
        mode.to_string(),
        r.hf1.to_string(),
        r.h_precision.to_string(),
        r.h_recall.to_string(),
        r.consistency.to_string(),
        r.exact_match.to_string(),
    ];
    row.extend(r.level_accuracy.iter().map(f64::to_string));
    row.extend(r.rescue.iter().map(f64::to_string));
    row
}

fn delta_row(d: &MetricDelta) -> Vec<String> {
    let mut row = vec![
        "mean".to_string(),
        "delta".to_string(),
        d.hf1.to_string(),
        d.h_precision.to_string(),
        d.h_recall.to_string(),
        d.consistency.to_string(),
        d.exact_match.to_string(),
    ];
    row.extend(d.level_accuracy.iter().map(f64::to_string));
    row.extend(d.rescue.iter().map(f64::to_string));
    row
}

/// One row per seed and head, then the two means and their difference.
pub fn compare_csv(report: &CompareReport) -> String {
    let levels = report.flat.level_accuracy.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "seed",
        "mode",
        "hf1",
        "h_precision",
        "h_recall",
        "consistency",
        "exact_match",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(numbered("acc_l", levels));
    header.extend(numbered("rescue_l", levels));
    w.write_record(&header).expect("in-memory write");
    for run in &report.runs {
        let seed = run.seed.to_string();
        w.write_record(metric_row(&seed, "flat", &run.flat))
            .expect("in-memory write");
        w.write_record(metric_row(&seed, "ttc", &run.ttc))
            .expect("in-memory write");
    }
    w.write_record(metric_row("mean", "flat", &report.flat))
        .expect("in-memory write");
    w.write_record(metric_row("mean", "ttc", &report.ttc))
        .expect("in-memory write");
    w.write_record(delta_row(&report.delta))
        .expect("in-memory write");
    finish(w)
}
