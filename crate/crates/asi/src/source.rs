//! Tower-function source model.
//!
//! A source is a sum of box ("tower") functions: each tower contributes a
//! constant intensity on a closed axis-aligned rectangle. A tower is five
//! parameters, packed as (intensity, lower1, lower2, upper1, upper2); a
//! multi-tower source concatenates the packs.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Rect;

/// One box source: constant `intensity` on the closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub intensity: f64,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Tower {
    /// Indicator of the closed support box.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..2).all(|d| self.lower[d] <= x[d] && x[d] <= self.upper[d])
    }

    pub fn support(&self) -> Rect {
        Rect::new(self.lower, self.upper)
    }

    pub fn area(&self) -> f64 {
        (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.lower[0] + self.upper[0]),
            0.5 * (self.lower[1] + self.upper[1]),
        ]
    }
}

/// Parameters of a multi-tower source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub towers: Vec<Tower>,
}

/// Number of packed parameters per tower.
pub const TOWER_DOF: usize = 5;

impl SourceParams {
    pub fn new(towers: Vec<Tower>) -> Self {
        Self { towers }
    }

    pub fn single(intensity: f64, lower: [f64; 2], upper: [f64; 2]) -> Self {
        Self { towers: vec![Tower { intensity, lower, upper }] }
    }

    /// Source value at a point: sum of covering tower intensities.
    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.towers
            .iter()
            .filter(|t| t.contains(x))
            .map(|t| t.intensity)
            .sum()
    }

    /// Packs into (intensity, lower1, lower2, upper1, upper2) per tower.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.towers.len() * TOWER_DOF);
        for t in &self.towers {
            v.extend([t.intensity, t.lower[0], t.lower[1], t.upper[0], t.upper[1]]);
        }
        v
    }

    pub fn from_vec(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.len() % TOWER_DOF != 0 {
            return Err(Error::Source(format!(
                "parameter vector length {} is not a positive multiple of {TOWER_DOF}",
                v.len()
            )));
        }
        let towers = v
            .chunks_exact(TOWER_DOF)
            .map(|c| Tower {
                intensity: c[0],
                lower: [c[1], c[2]],
                upper: [c[3], c[4]],
            })
            .collect();
        Ok(Self { towers })
    }

    pub fn n_params(&self) -> usize {
        self.towers.len() * TOWER_DOF
    }

    /// Total source mass `sum_j intensity_j * area_j`.
    pub fn total_strength(&self) -> f64 {
        self.towers.iter().map(|t| t.intensity * t.area()).sum()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Per-tower feasible boxes: nonnegative intensity, support corners inside the
/// tower's assigned convex subdomain with lower <= upper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub boxes: Vec<Rect>,
    /// Upper bound on every tower intensity; infinity leaves it unbounded.
    /// A finite cap pins down the intensity-versus-area trade that the data
    /// term cannot resolve below the basis resolution.
    pub beta_max: f64,
}

impl FeasibleRegion {
    pub fn uniform(region: Rect, n_towers: usize) -> Self {
        Self { boxes: vec![region; n_towers], beta_max: f64::INFINITY }
    }

    pub fn with_beta_max(mut self, beta_max: f64) -> Self {
        self.beta_max = beta_max;
        self
    }

    pub fn is_feasible(&self, p: &SourceParams, tol: f64) -> bool {
        if p.towers.len() != self.boxes.len() {
            return false;
        }
        p.towers.iter().zip(&self.boxes).all(|(t, b)| {
            t.intensity >= -tol
                && t.intensity <= self.beta_max + tol
                && (0..2).all(|d| {
                    t.lower[d] >= b.lower[d] - tol
                        && t.upper[d] <= b.upper[d] + tol
                        && t.lower[d] <= t.upper[d] + tol
                })
        })
    }

    /// Clamps every coordinate into its box, then repairs any crossed pair by
    /// moving both corners to their midpoint. Idempotent.
    pub fn project(&self, p: &SourceParams) -> Result<SourceParams> {
        if p.towers.len() != self.boxes.len() {
            return Err(Error::Source(format!(
                "{} towers but {} feasible boxes",
                p.towers.len(),
                self.boxes.len()
            )));
        }
        let towers = p
            .towers
            .iter()
            .zip(&self.boxes)
            .map(|(t, b)| {
                let mut lower = [0.0; 2];
                let mut upper = [0.0; 2];
                for d in 0..2 {
                    lower[d] = t.lower[d].clamp(b.lower[d], b.upper[d]);
                    upper[d] = t.upper[d].clamp(b.lower[d], b.upper[d]);
                    if lower[d] > upper[d] {
                        let mid = 0.5 * (lower[d] + upper[d]);
                        lower[d] = mid;
                        upper[d] = mid;
                    }
                }
                Tower { intensity: t.intensity.max(0.0).min(self.beta_max), lower, upper }
            })
            .collect();
        Ok(SourceParams { towers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tower_indicator_is_closed() {
        let t = Tower { intensity: 2.0, lower: [0.2, 0.3], upper: [0.5, 0.6] };
        assert!(t.contains([0.2, 0.3]));
        assert!(t.contains([0.5, 0.6]));
        assert!(t.contains([0.35, 0.45]));
        assert!(!t.contains([0.19, 0.45]));
        assert!(!t.contains([0.35, 0.61]));
    }

    #[test]
    fn overlapping_towers_sum() {
        let p = SourceParams::new(vec![
            Tower { intensity: 1.0, lower: [0.0, 0.0], upper: [0.5, 0.5] },
            Tower { intensity: 2.0, lower: [0.25, 0.25], upper: [0.75, 0.75] },
        ]);
        assert_eq!(p.value([0.3, 0.3]), 3.0);
        assert_eq!(p.value([0.1, 0.1]), 1.0);
        assert_eq!(p.value([0.6, 0.6]), 2.0);
        assert_eq!(p.value([0.9, 0.9]), 0.0);
    }

    #[test]
    fn pack_round_trip() {
        let p = SourceParams::new(vec![
            Tower { intensity: 1.5, lower: [0.1, 0.2], upper: [0.3, 0.4] },
            Tower { intensity: 0.5, lower: [0.6, 0.5], upper: [0.9, 0.8] },
        ]);
        let v = p.to_vec();
        assert_eq!(v.len(), 10);
        assert_eq!(v[..5], [1.5, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(SourceParams::from_vec(&v).unwrap(), p);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(SourceParams::from_vec(&[]).is_err());
        assert!(SourceParams::from_vec(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn projection_clamps_and_repairs() {
        let region = FeasibleRegion::uniform(Rect::new([0.0, 0.0], [1.0, 1.0]), 1);
        // Negative intensity and corners crossed after clamping.
        let p = SourceParams::single(-2.0, [1.4, 0.2], [0.8, 0.4]);
        let q = region.project(&p).unwrap();
        assert_eq!(q.towers[0].intensity, 0.0);
        // lower1 clamps to 1.0, upper1 stays 0.8: crossed, both to midpoint 0.9.
        assert!((q.towers[0].lower[0] - 0.9).abs() < 1e-15);
        assert!((q.towers[0].upper[0] - 0.9).abs() < 1e-15);
        assert_eq!(q.towers[0].lower[1], 0.2);
        assert_eq!(q.towers[0].upper[1], 0.4);
        assert!(region.is_feasible(&q, 1e-12));
    }

    #[test]
    fn feasible_point_is_fixed_by_projection() {
        let region = FeasibleRegion::uniform(Rect::new([0.0, 0.0], [1.0, 1.0]), 1);
        let p = SourceParams::single(1.0, [0.2, 0.3], [0.4, 0.5]);
        assert_eq!(region.project(&p).unwrap(), p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_is_idempotent(
            b in -1.0f64..2.0,
            l1 in -0.5f64..1.5, l2 in -0.5f64..1.5,
            u1 in -0.5f64..1.5, u2 in -0.5f64..1.5,
        ) {
            let region = FeasibleRegion::uniform(Rect::new([0.0, 0.0], [1.0, 1.0]), 1);
            let p = SourceParams::single(b, [l1, l2], [u1, u2]);
            let once = region.project(&p).unwrap();
            let twice = region.project(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(region.is_feasible(&once, 0.0));
        }
    }
}
