//! Metrics persistence: one header line, then one comma-separated row per
//! (seed, episode). Floating values carry 17 significant digits so files
//! replay byte-identically; losses are NaN on episodes without training.

use std::path::Path;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: u32,
    /// Mean per-slot reward over one evaluation episode.
    pub eval_avg_reward: f64,
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: f64,
    /// Per-set minimum residual energy, averaged over the evaluation episode.
    pub mre: Vec<f64>,
}

pub fn metrics_header(k: usize) -> String {
    let mut h = String::from("seed,episode,eval_avg_reward,critic1_loss,critic2_loss,actor_loss");
    for i in 1..=k {
        h.push_str(&format!(",mre_set{i}"));
    }
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut line = format!(
            "{},{},{},{},{},{}",
            self.seed,
            self.episode,
            fmt(self.eval_avg_reward),
            fmt(self.critic1_loss),
            fmt(self.critic2_loss),
            fmt(self.actor_loss)
        );
        for m in &self.mre {
            line.push(',');
            line.push_str(&fmt(*m));
        }
        line
    }
}

/// Reads a metrics file back. Used by evaluation summaries and tests.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            return Err(HarnessError::Invalid(format!("metrics line {i} has {} fields", fields.len())));
        }
        let parse = |s: &str| -> Result<f64, HarnessError> {
            s.parse().map_err(|_| HarnessError::Invalid(format!("bad float {s:?} on line {i}")))
        };
        rows.push(MetricsRow {
            seed: fields[0]
                .parse()
                .map_err(|_| HarnessError::Invalid(format!("bad seed on line {i}")))?,
            episode: fields[1]
                .parse()
                .map_err(|_| HarnessError::Invalid(format!("bad episode on line {i}")))?,
            eval_avg_reward: parse(fields[2])?,
            critic1_loss: parse(fields[3])?,
            critic2_loss: parse(fields[4])?,
            actor_loss: parse(fields[5])?,
            mre: fields[6..].iter().map(|s| parse(s)).collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}
