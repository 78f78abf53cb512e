use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::state::DensityMatrix;
use crate::spectral::ScaledBasis;

/// Diagnostics recorded at a segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub zeta: f64,
    /// Fidelity to the instantaneous ground state.
    pub fidelity: f64,
    pub purity: f64,
    pub trace: f64,
    /// ⟨Π⟩; the odd-parity population is (1 − ⟨Π⟩)/2.
    pub parity: f64,
}

impl Sample {
    pub fn odd_population(&self) -> f64 {
        0.5 * (1.0 - self.parity)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// (time, state) pairs, each in the basis of its time.
    pub snapshots: Vec<(f64, DensityMatrix)>,
    pub final_state: DensityMatrix,
    /// Basis of `final_state`.
    pub final_basis: ScaledBasis,
    /// RK4 steps taken.
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.fidelity).collect()
    }

    /// Fidelity of the final state to the final instantaneous ground state.
    pub fn final_fidelity(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.fidelity)
    }

    /// Appends a later trajectory; its first sample duplicates our last.
    pub fn extend(&mut self, later: Trajectory) {
        let skip = usize::from(
            matches!((self.samples.last(), later.samples.first()), (Some(a), Some(b)) if a.time == b.time),
        );
        self.samples.extend(later.samples.into_iter().skip(skip));
        self.snapshots.extend(later.snapshots);
        self.final_state = later.final_state;
        self.final_basis = later.final_basis;
        self.steps += later.steps;
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,zeta,fidelity,purity,trace,parity,odd_population\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.time,
                s.zeta,
                s.fidelity,
                s.purity,
                s.trace,
                s.parity,
                s.odd_population()
            );
        }
        out
    }

    pub fn samples_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.samples)
    }
}

/// Parses the CSV written by [`Trajectory::to_csv`] back into samples.
pub fn samples_from_csv(text: &str) -> Option<Vec<Sample>> {
    let mut lines = text.lines();
    lines.next()?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|f| f.trim().parse().ok()).collect::<Option<_>>()?;
            if v.len() != 7 {
                return None;
            }
            Some(Sample {
                time: v[0],
                zeta: v[1],
                fidelity: v[2],
                purity: v[3],
                trace: v[4],
                parity: v[5],
            })
        })
        .collect()
}
