use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending cut points discretizing durations. A duration is assigned to
/// the smallest cut point that covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationGrid {
    pub cuts: Vec<f64>,
}

impl DurationGrid {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// Index of the smallest cut point `>= duration`. Durations beyond the
    /// last cut are clamped to the last index.
    pub fn assign(&self, duration: f64) -> usize {
        self.cuts
            .partition_point(|&c| c < duration)
            .min(self.cuts.len().saturating_sub(1))
    }

    /// Extends the last cut point so that `max_duration` is covered.
    pub fn covering(mut self, max_duration: f64) -> Self {
        if let Some(last) = self.cuts.last_mut() {
            if *last < max_duration {
                *last = max_duration;
            }
        }
        self
    }
}

/// Cut points at the `k`-quantiles of the event durations. With fewer than
/// `k` distinct event durations the grid is the sorted distinct durations.
pub fn make_grid(event_durations: &[f64], k: usize) -> Result<DurationGrid> {
    if event_durations.is_empty() {
        return Err(Error::InvalidInput("grid needs at least one event".into()));
    }
    if k == 0 || event_durations.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidInput("grid needs k > 0 and finite durations".into()));
    }
    let mut sorted = event_durations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < k {
        return Ok(DurationGrid { cuts: distinct });
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..=k)
        .map(|i| {
            let pos = (i as f64 * n as f64 / k as f64).ceil() as usize;
            sorted[pos.clamp(1, n) - 1]
        })
        .collect();
    cuts.dedup();
    Ok(DurationGrid { cuts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_distinct_values() {
        let g = make_grid(&[5.0, 3.0, 9.0, 3.0], 100).unwrap();
        assert_eq!(g.cuts, vec![3.0, 5.0, 9.0]);
        assert_eq!(g.assign(6.0), 2);
        assert_eq!(g.assign(3.0), 0);
        assert_eq!(g.assign(1.0), 0);
        assert_eq!(g.assign(20.0), 2);
    }

    #[test]
    fn uniform_durations_give_even_cuts() {
        let d: Vec<f64> = (1..=1000).map(f64::from).collect();
        let g = make_grid(&d, 100).unwrap();
        assert_eq!(g.len(), 100);
        for (i, c) in g.cuts.iter().enumerate() {
            assert_eq!(*c, 10.0 * (i + 1) as f64);
        }
    }

    #[test]
    fn cuts_strictly_ascending_with_heavy_ties() {
        let mut d = vec![4.0; 500];
        d.extend((1..=300).map(f64::from));
        let g = make_grid(&d, 100).unwrap();
        assert!(g.cuts.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() <= 100);
        assert_eq!(*g.cuts.last().unwrap(), 300.0);
    }

    #[test]
    fn covering_extends_last_cut() {
        let g = make_grid(&[3.0, 4.0], 10).unwrap().covering(12.0);
        assert_eq!(g.cuts, vec![3.0, 12.0]);
        assert_eq!(g.assign(12.0), 1);
    }

    #[test]
    fn empty_events_rejected() {
        assert!(make_grid(&[], 100).is_err());
    }
}
