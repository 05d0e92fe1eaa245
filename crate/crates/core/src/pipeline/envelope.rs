//! Two-dimensional density of visited (tilt, speed) pairs.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::SimState;
use crate::{Error, Result};

use super::reconstruct::ReconstructedStates;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SpeedMeasure {
    /// `||(u, v)||`.
    #[default]
    Horizontal,
    /// `||V_b||`.
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConfig {
    /// Tilt bin edges in degrees, strictly increasing.
    pub tilt_edges_deg: Vec<f64>,
    /// Speed bin edges in m/s, strictly increasing.
    pub speed_edges: Vec<f64>,
    pub speed: SpeedMeasure,
}

impl Default for EnvelopeConfig {
    /// 0-45 deg in 5 deg steps and 0-0.6 m/s in 0.05 m/s steps.
    fn default() -> Self {
        Self {
            tilt_edges_deg: (0..=9).map(|i| 5.0 * i as f64).collect(),
            speed_edges: (0..=12).map(|i| 0.05 * i as f64).collect(),
            speed: SpeedMeasure::Horizontal,
        }
    }
}

impl EnvelopeConfig {
    pub fn validate(&self) -> Result<()> {
        for e in [&self.tilt_edges_deg, &self.speed_edges] {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter("bin edges must be at least two increasing values".into()));
            }
        }
        Ok(())
    }
}

/// Counts indexed `[tilt bin][speed bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub tilt_edges_deg: Vec<f64>,
    pub speed_edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl Histogram {
    pub fn density(&self, i: usize, j: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[i][j] as f64 / self.total as f64
        }
    }

    pub fn nonzero_bins(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if *c > 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Adds another histogram over the same edges.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.tilt_edges_deg != other.tilt_edges_deg || self.speed_edges != other.speed_edges {
            return Err(Error::InvalidParameter("histograms have different bin edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.total += other.total;
        Ok(())
    }
}

/// Half-open bin `[e_i, e_{i+1})` with values outside the range clamped into
/// the first or last bin. Lower edges get a relative slack of 1e-9 so values
/// that land on an edge up to rounding fall into the upper bin.
fn bin_of(edges: &[f64], x: f64) -> usize {
    let span = edges[edges.len() - 1] - edges[0];
    let slack = 1e-9 * span;
    let nbins = edges.len() - 1;
    let i = edges.partition_point(|&e| e <= x + slack);
    i.saturating_sub(1).min(nbins - 1)
}

pub fn envelope_of_states<'a>(
    states: impl IntoIterator<Item = &'a SimState>,
    cfg: &EnvelopeConfig,
) -> Result<Histogram> {
    cfg.validate()?;
    let mut h = Histogram {
        tilt_edges_deg: cfg.tilt_edges_deg.clone(),
        speed_edges: cfg.speed_edges.clone(),
        counts: alloc::vec![alloc::vec![0; cfg.speed_edges.len() - 1]; cfg.tilt_edges_deg.len() - 1],
        total: 0,
    };
    for s in states {
        let tilt = s.euler.tilt().to_degrees();
        let v = s.vel_body;
        let speed = match cfg.speed {
            SpeedMeasure::Horizontal => (v.x * v.x + v.y * v.y).sqrt(),
            SpeedMeasure::Total => v.norm(),
        };
        h.counts[bin_of(&cfg.tilt_edges_deg, tilt)][bin_of(&cfg.speed_edges, speed)] += 1;
        h.total += 1;
    }
    Ok(h)
}

pub fn flight_envelope(rs: &ReconstructedStates, cfg: &EnvelopeConfig) -> Result<Histogram> {
    if rs.is_empty() {
        return Err(Error::EmptyWindow);
    }
    envelope_of_states(&rs.states, cfg)
}
