//! Per-repetition aggregates across seeds: success rate, and mean and
//! standard error among successful rows only.

use serde::{Deserialize, Serialize};

/// One CSV row: a single repetition of a single seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub repetition: usize,
    pub steps: usize,
    pub cost: f64,
    pub success: bool,
    pub cumulative_steps: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub repetition: usize,
    pub instances: usize,
    pub successes: usize,
    pub success_pct: f64,
    pub mean_steps: Option<f64>,
    pub se_steps: Option<f64>,
    pub mean_cost: Option<f64>,
    pub se_cost: Option<f64>,
}

/// Mean and `sample_std / sqrt(n)`. The error is `None` below two values.
pub fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Seeds that aborted before a repetition count as failures there.
pub fn summarize(
    rows: &[ResultRow],
    instances: usize,
    repetitions: usize,
) -> Vec<RepetitionSummary> {
    (1..=repetitions)
        .map(|i| {
            let ok: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.repetition == i && r.success)
                .collect();
            let steps: Vec<f64> = ok.iter().map(|r| r.steps as f64).collect();
            let costs: Vec<f64> = ok.iter().map(|r| r.cost).collect();
            let (mean_steps, se_steps) = mean_se(&steps);
            let (mean_cost, se_cost) = mean_se(&costs);
            RepetitionSummary {
                repetition: i,
                instances,
                successes: ok.len(),
                success_pct: if instances == 0 {
                    0.0
                } else {
                    100.0 * ok.len() as f64 / instances as f64
                },
                mean_steps,
                se_steps,
                mean_cost,
                se_cost,
            }
        })
        .collect()
}
