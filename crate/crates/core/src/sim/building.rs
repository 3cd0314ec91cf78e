use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Story height used by both default buildings (14 ft).
pub const DEFAULT_STORY_HEIGHT: f64 = 4.2672;

/// Lumped-mass shear building, identical along both horizontal axes.
///
/// Index `i` in every per-story vector refers to story `i + 1`, whose floor
/// mass sits on top of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSpec {
    pub id: String,
    pub masses: Vec<f64>,
    pub heights: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub yield_disp: Vec<f64>,
    pub post_yield_ratio: f64,
    pub damping_ratio: f64,
    pub damping_anchor_hz: (f64, f64),
}

impl BuildingSpec {
    /// Uniform-mass building whose stiffness profile gives uniform drift under
    /// a triangular lateral load, scaled to the requested fundamental
    /// period. Rayleigh anchors are the first and third modes (the highest
    /// mode when fewer than three exist; `3 f1` for a single story).
    pub fn uniform(
        id: impl Into<String>,
        n_stories: usize,
        floor_mass: f64,
        fundamental_period: f64,
        yield_drift_ratio: f64,
    ) -> Result<Self> {
        if n_stories == 0 {
            return Err(Error::invalid("building needs at least one story"));
        }
        let masses = vec![floor_mass; n_stories];
        let heights = vec![DEFAULT_STORY_HEIGHT; n_stories];
        // story shear under a triangular (first-mode) load: sum of floor indices above
        let profile: Vec<f64> = (1..=n_stories).map(|i| (i..=n_stories).sum::<usize>() as f64).collect();
        let mut spec = Self {
            id: id.into(),
            masses,
            yield_disp: heights.iter().map(|h| h * yield_drift_ratio).collect(),
            heights,
            stiffness: profile,
            post_yield_ratio: 0.05,
            damping_ratio: 0.05,
            damping_anchor_hz: (1.0, 2.0),
        };
        let f1 = spec.modal_frequencies_hz()?[0];
        let target = 1.0 / fundamental_period;
        let gain = (target / f1).powi(2);
        spec.stiffness.iter_mut().for_each(|k| *k *= gain);
        spec.damping_anchor_hz = spec.default_anchors()?;
        spec.validate()?;
        Ok(spec)
    }

    /// Three-story source building, T1 ≈ 0.45 s.
    pub fn three_story() -> Self {
        Self::uniform("bldg-3story", 3, 3.5e5, 0.45, 0.006).expect("valid default building")
    }

    /// Five-story target building, T1 ≈ 0.7 s.
    pub fn five_story() -> Self {
        Self::uniform("bldg-5story", 5, 3.5e5, 0.70, 0.006).expect("valid default building")
    }

    pub fn n_stories(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.masses.len();
        if n == 0 {
            return Err(Error::invalid("building needs at least one story"));
        }
        for (name, v) in [
            ("heights", &self.heights),
            ("stiffness", &self.stiffness),
            ("yield_disp", &self.yield_disp),
        ] {
            if v.len() != n {
                return Err(Error::invalid(format!("{name} must have {n} entries")));
            }
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.masses)
            || !positive(&self.heights)
            || !positive(&self.stiffness)
            || !positive(&self.yield_disp)
        {
            return Err(Error::invalid(
                "masses, heights, stiffnesses and yield displacements must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.post_yield_ratio) {
            return Err(Error::invalid("post-yield ratio must lie in [0, 1)"));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio <= 0.2) {
            return Err(Error::invalid("damping ratio must lie in (0, 0.2]"));
        }
        let (f_lo, f_hi) = self.damping_anchor_hz;
        if !(f_lo > 0.0 && f_hi > f_lo) {
            return Err(Error::invalid(
                "damping anchor frequencies must be positive and strictly increasing",
            ));
        }
        Ok(())
    }

    /// Elastic modal frequencies in Hz, ascending.
    pub fn modal_frequencies_hz(&self) -> Result<Vec<f64>> {
        let n = self.n_stories();
        let k = stiffness_matrix(&self.stiffness);
        // symmetric form M^-1/2 K M^-1/2
        let scaled = DMatrix::from_fn(n, n, |i, j| {
            k[(i, j)] / (self.masses[i] * self.masses[j]).sqrt()
        });
        let eig = SymmetricEigen::new(scaled);
        let mut freqs: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|w2| w2.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect();
        freqs.sort_by(f64::total_cmp);
        if freqs.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::invalid("stiffness matrix is not positive definite"));
        }
        Ok(freqs)
    }

    fn default_anchors(&self) -> Result<(f64, f64)> {
        let freqs = self.modal_frequencies_hz()?;
        Ok(match freqs.len() {
            1 => (freqs[0], 3.0 * freqs[0]),
            n => (freqs[0], freqs[n.min(3) - 1]),
        })
    }

    /// Rayleigh coefficients `(a0, a1)` with `C = a0 M + a1 K`.
    pub fn rayleigh_coefficients(&self) -> (f64, f64) {
        let two_pi = 2.0 * std::f64::consts::PI;
        let (wi, wj) = (
            two_pi * self.damping_anchor_hz.0,
            two_pi * self.damping_anchor_hz.1,
        );
        let zeta = self.damping_ratio;
        (2.0 * zeta * wi * wj / (wi + wj), 2.0 * zeta / (wi + wj))
    }

    pub fn shear_model(&self) -> Result<ShearModel> {
        self.validate()?;
        let (a0, a1) = self.rayleigh_coefficients();
        Ok(ShearModel {
            masses: self.masses.clone(),
            stiffness: self.stiffness.clone(),
            yield_disp: self.yield_disp.clone(),
            post_yield_ratio: self.post_yield_ratio,
            rayleigh_mass: a0,
            rayleigh_stiffness: a1,
        })
    }
}

/// Tridiagonal story-stiffness matrix of a shear building.
pub(crate) fn stiffness_matrix(k: &[f64]) -> DMatrix<f64> {
    let n = k.len();
    DMatrix::from_fn(n, n, |i, j| {
        let upper = if i + 1 < n { k[i + 1] } else { 0.0 };
        if i == j {
            k[i] + upper
        } else if j == i + 1 {
            -k[i + 1]
        } else if i == j + 1 {
            -k[i]
        } else {
            0.0
        }
    })
}

/// Planar integration model for one axis. Fields are public so that tests and
/// studies can build configurations a [`BuildingSpec`] would reject (for
/// example zero damping).
#[derive(Debug, Clone, PartialEq)]
pub struct ShearModel {
    pub masses: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub yield_disp: Vec<f64>,
    pub post_yield_ratio: f64,
    pub rayleigh_mass: f64,
    pub rayleigh_stiffness: f64,
}

impl ShearModel {
    pub fn n_dof(&self) -> usize {
        self.masses.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_periods_match_targets() {
        let t3 = 1.0 / BuildingSpec::three_story().modal_frequencies_hz().unwrap()[0];
        let t5 = 1.0 / BuildingSpec::five_story().modal_frequencies_hz().unwrap()[0];
        assert!((t3 - 0.45).abs() < 1e-9, "{t3}");
        assert!((t5 - 0.70).abs() < 1e-9, "{t5}");
    }

    #[test]
    fn rayleigh_hits_target_ratio_at_anchors() {
        let b = BuildingSpec::five_story();
        let (a0, a1) = b.rayleigh_coefficients();
        for f in [b.damping_anchor_hz.0, b.damping_anchor_hz.1] {
            let w = 2.0 * std::f64::consts::PI * f;
            let zeta = a0 / (2.0 * w) + a1 * w / 2.0;
            assert!((zeta - 0.05).abs() < 1e-12);
        }
        let freqs = b.modal_frequencies_hz().unwrap();
        assert_eq!(b.damping_anchor_hz, (freqs[0], freqs[2]));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let good = BuildingSpec::three_story();
        let mut b = good.clone();
        b.masses[1] = 0.0;
        assert!(b.validate().is_err());
        let mut b = good.clone();
        b.damping_ratio = 0.25;
        assert!(b.validate().is_err());
        let mut b = good.clone();
        b.damping_anchor_hz = (2.0, 2.0);
        assert!(b.validate().is_err());
        let mut b = good;
        b.post_yield_ratio = 1.0;
        assert!(b.validate().is_err());
    }
}
