//! Plain-text tables and their structured counterparts.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use mtss_core::metrics::MetricReport;

/// The (alpha1, alpha2) grid of the distillation ablation.
pub const SWEEP_GRID: [(f64, f64); 9] = [
    (0.01, 0.005),
    (0.005, 0.01),
    (0.005, 0.005),
    (0.0025, 0.005),
    (0.01, 0.0),
    (0.005, 0.0),
    (0.0, 0.01),
    (0.0, 0.005),
    (0.0, 0.0),
];

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.2}", 100.0 * x))
}

fn num(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.2}"))
}

/// Overall row followed by one row per domain.
pub fn metric_table(r: &MetricReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>8} {:>7} {:>7} {:>7} {:>7}",
        "domain", "turns", "episodes", "BLEU", "ER", "Inform", "Success"
    );
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>8} {:>7.2} {:>7} {:>7} {:>7}",
        "all",
        r.turns,
        r.episodes,
        r.bleu4,
        pct(Some(r.entity_recall)),
        pct(Some(r.inform)),
        pct(Some(r.success))
    );
    for (d, v) in &r.domains {
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>8} {:>7} {:>7} {:>7} {:>7}",
            d,
            v.turns,
            v.episodes,
            num(v.bleu4),
            pct(v.entity_recall),
            pct(v.inform),
            pct(v.success)
        );
    }
    s
}

/// Universal against fine-tuned teacher on one bucket's evaluation turns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherRow {
    pub domain: String,
    pub turns: usize,
    pub universal_bleu4: f64,
    pub universal_er: Option<f64>,
    pub individual_bleu4: f64,
    pub individual_er: Option<f64>,
    /// Fine-tuning epoch kept (0 = the universal teacher itself).
    pub selected_epoch: usize,
}

pub fn teacher_table(rows: &[TeacherRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>23} {:>23}",
        "", "", "universal", "individual"
    );
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>11} {:>11} {:>11} {:>11} {:>6}",
        "domain", "turns", "BLEU", "ER", "BLEU", "ER", "epoch"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>11.2} {:>11} {:>11.2} {:>11} {:>6}",
            r.domain,
            r.turns,
            r.universal_bleu4,
            pct(r.universal_er),
            r.individual_bleu4,
            pct(r.individual_er),
            r.selected_epoch
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha1: f64,
    pub alpha2: f64,
    pub bleu4: f64,
    pub inform: f64,
    pub success: f64,
    pub entity_recall: Option<f64>,
    pub selected_epoch: usize,
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
        "alpha1", "alpha2", "BLEU", "Inform", "Success", "ER", "epoch"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>7} {:>7} {:>7.2} {:>7} {:>7} {:>7} {:>6}",
            r.alpha1,
            r.alpha2,
            r.bleu4,
            pct(Some(r.inform)),
            pct(Some(r.success)),
            pct(r.entity_recall),
            r.selected_epoch
        );
    }
    s
}

/// Turns per bucket and split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub domain: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

pub fn split_table(rows: &[SplitRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>8} {:>8} {:>8}",
        "domain", "train", "valid", "test"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>8} {:>8}",
            r.domain, r.train, r.valid, r.test
        );
    }
    s
}
