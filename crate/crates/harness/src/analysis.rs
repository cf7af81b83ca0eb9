//! Post-processing of traces.

use dualguard_core::detectors::DecisionLabel;

use crate::trace::SimulationTrace;

pub const MOVING_AVERAGE_WINDOW: usize = 20;

/// Trailing moving average; the first `window − 1` entries average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            sum += v;
            if i >= window {
                sum -= values[i - window];
            }
            sum / (i + 1).min(window) as f64
        })
        .collect()
}

/// Most frequent label over steps `k ≥ from`; ties go to the earlier entry of [`DecisionLabel::ALL`].
pub fn modal_label(trace: &SimulationTrace, from: u64) -> Option<DecisionLabel> {
    let mut counts = [0usize; 4];
    for rec in trace.records.iter().filter(|r| r.k >= from) {
        let idx = DecisionLabel::ALL
            .iter()
            .position(|&l| l == rec.label)
            .expect("label in table");
        counts[idx] += 1;
    }
    let best = counts.iter().copied().max()?;
    if best == 0 {
        return None;
    }
    counts.iter().position(|&c| c == best).map(|i| DecisionLabel::ALL[i])
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Scalar summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    /// Start of the post-onset window (onset plus persistence).
    pub window_start: u64,
    pub label: Option<DecisionLabel>,
    pub mean_j: f64,
    pub mean_ju: f64,
    /// Raw exceedance rates before the onset, after burn-in.
    pub pre_rate_j: f64,
    pub pre_rate_ju: f64,
}

pub fn summarize(trace: &SimulationTrace, burn_in: u64, onset: u64, persistence: usize) -> RunSummary {
    let window_start = onset + persistence as u64;
    let post = || trace.records.iter().filter(move |r| r.k >= window_start);
    let pre = || trace.records.iter().filter(move |r| r.k >= burn_in && r.k < onset);
    let rate = |f: fn(&crate::trace::StepRecord) -> bool| {
        let n = pre().count();
        if n == 0 {
            f64::NAN
        } else {
            pre().filter(|r| f(r)).count() as f64 / n as f64
        }
    };
    RunSummary {
        steps: trace.len(),
        window_start,
        label: modal_label(trace, window_start),
        mean_j: mean(post().map(|r| r.j)),
        mean_ju: mean(post().map(|r| r.j_u)),
        pre_rate_j: rate(|r| r.raw_j),
        pre_rate_ju: rate(|r| r.raw_ju),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_ramps_up_then_slides() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&v, 2), vec![1.0, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(moving_average(&v, 1), v.to_vec());
        assert_eq!(moving_average(&v, 10), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }
}
