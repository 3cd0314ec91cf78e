//! Synthetic biaxial strong-motion records.
//!
//! Each component is Gaussian white noise passed through a second-order
//! Kanai-Tajimi ground filter and shaped by a trapezoidal envelope
//! (10% rise, 60% hold, 30% linear decay). Components are normalized to the
//! requested peak ground acceleration before the envelope-free scale factor
//! is applied, so `scale_factor` is the only intensity knob downstream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RISE_FRACTION: f64 = 0.1;
const HOLD_FRACTION: f64 = 0.6;

/// Ground filter descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    /// Dominant ground frequency, Hz.
    pub dominant_freq_hz: f64,
    /// Ground damping ratio; controls the spectral bandwidth.
    pub damping: f64,
    /// Peak ground acceleration of each component at scale factor 1, m/s².
    pub pga: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            dominant_freq_hz: 2.5,
            damping: 0.6,
            pga: 1.0,
        }
    }
}

impl SpectralParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        let nyquist = 0.5 / dt;
        if !(self.dominant_freq_hz > 0.0 && self.dominant_freq_hz < nyquist) {
            return Err(Error::invalid(format!(
                "dominant frequency {} Hz must lie in (0, {nyquist})",
                self.dominant_freq_hz
            )));
        }
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return Err(Error::invalid("ground filter damping must be positive"));
        }
        if !(self.pga > 0.0 && self.pga.is_finite()) {
            return Err(Error::invalid("pga must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundMotion {
    pub id: String,
    pub dt: f64,
    pub n_steps: usize,
    pub accel_x: Vec<f64>,
    pub accel_y: Vec<f64>,
    pub scale_factor: f64,
    pub seed: u64,
}

impl GroundMotion {
    /// Builds a motion from explicit samples, checking the record invariants.
    pub fn from_samples(
        id: impl Into<String>,
        dt: f64,
        accel_x: Vec<f64>,
        accel_y: Vec<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        if accel_x.len() != accel_y.len() || accel_x.len() < 2 {
            return Err(Error::invalid(
                "components must have equal length of at least 2 samples",
            ));
        }
        Ok(Self {
            id: id.into(),
            dt,
            n_steps: accel_x.len(),
            accel_x,
            accel_y,
            scale_factor: 1.0,
            seed: 0,
        })
    }

    pub fn zeros(id: impl Into<String>, dt: f64, n_steps: usize) -> Result<Self> {
        Self::from_samples(id, dt, vec![0.0; n_steps], vec![0.0; n_steps])
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.n_steps - 1) as f64
    }

    /// Peak absolute acceleration over both components.
    pub fn pga(&self) -> f64 {
        self.accel_x
            .iter()
            .chain(&self.accel_y)
            .fold(0.0_f64, |m, a| m.max(a.abs()))
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        match axis {
            0 => &self.accel_x,
            _ => &self.accel_y,
        }
    }
}

fn envelope(t: f64, total: f64) -> f64 {
    let rise_end = RISE_FRACTION * total;
    let hold_end = (RISE_FRACTION + HOLD_FRACTION) * total;
    if t <= 0.0 {
        0.0
    } else if t < rise_end {
        t / rise_end
    } else if t <= hold_end {
        1.0
    } else {
        ((total - t) / (total - hold_end)).max(0.0)
    }
}

/// Filters one white-noise stream through the ground filter.
///
/// The filter state obeys `x'' + 2ζω x' + ω² x = -w(t)` with zero-order-hold
/// input and is advanced with classical RK4; the output is the absolute
/// acceleration of the filter mass, `-(2ζω x' + ω² x)`.
fn kanai_tajimi(noise: &[f64], dt: f64, omega: f64, zeta: f64) -> Vec<f64> {
    let deriv = |x: f64, v: f64, w: f64| (v, -w - 2.0 * zeta * omega * v - omega * omega * x);
    let (mut x, mut v) = (0.0, 0.0);
    let mut out = Vec::with_capacity(noise.len());
    for &w in noise {
        out.push(-(2.0 * zeta * omega * v + omega * omega * x));
        let (k1x, k1v) = deriv(x, v, w);
        let (k2x, k2v) = deriv(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, w);
        let (k3x, k3v) = deriv(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, w);
        let (k4x, k4v) = deriv(x + dt * k3x, v + dt * k3v, w);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    out
}

pub fn synthesize_motion(
    seed: u64,
    duration: f64,
    dt: f64,
    spectral: &SpectralParams,
) -> Result<GroundMotion> {
    if !(dt > 0.0 && dt.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration and dt must be positive"));
    }
    if duration / dt < 2.0 {
        return Err(Error::invalid("duration must span at least two steps"));
    }
    spectral.validate(dt)?;

    let n_steps = (duration / dt).round() as usize + 1;
    let total = dt * (n_steps - 1) as f64;
    let omega = 2.0 * std::f64::consts::PI * spectral.dominant_freq_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut component = || {
        let noise: Vec<f64> = (0..n_steps)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut acc = kanai_tajimi(&noise, dt, omega, spectral.damping);
        for (i, a) in acc.iter_mut().enumerate() {
            *a *= envelope(i as f64 * dt, total);
        }
        let peak = acc.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        if peak > 0.0 {
            let gain = spectral.pga / peak;
            acc.iter_mut().for_each(|a| *a *= gain);
        }
        acc[0] = 0.0;
        acc
    };
    let accel_x = component();
    let accel_y = component();

    Ok(GroundMotion {
        id: format!("gm-{seed}"),
        dt,
        n_steps,
        accel_x,
        accel_y,
        scale_factor: 1.0,
        seed,
    })
}

pub fn scale_motion(motion: &GroundMotion, factor: f64) -> Result<GroundMotion> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(format!("scale factor {factor} must be positive")));
    }
    Ok(GroundMotion {
        accel_x: motion.accel_x.iter().map(|a| a * factor).collect(),
        accel_y: motion.accel_y.iter().map(|a| a * factor).collect(),
        scale_factor: motion.scale_factor * factor,
        ..motion.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motion(seed: u64) -> GroundMotion {
        synthesize_motion(seed, 20.0, 0.02, &SpectralParams::default()).unwrap()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        assert_eq!(motion(7), motion(7));
    }

    #[test]
    fn different_seeds_differ() {
        let (a, b) = (motion(7), motion(8));
        assert!(a.accel_x.iter().zip(&b.accel_x).any(|(p, q)| p != q));
    }

    #[test]
    fn envelope_starts_at_zero() {
        for seed in 0..20 {
            let m = motion(seed);
            assert_eq!(m.accel_x[0], 0.0);
            assert_eq!(m.accel_y[0], 0.0);
            assert_eq!(m.n_steps, 1001);
            assert_eq!(m.accel_x.len(), m.n_steps);
        }
    }

    #[test]
    fn components_hit_requested_pga() {
        let params = SpectralParams {
            pga: 2.5,
            ..Default::default()
        };
        let m = synthesize_motion(3, 30.0, 0.01, &params).unwrap();
        let px = m.accel_x.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let py = m.accel_y.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        assert!((px - 2.5).abs() < 1e-12 && (py - 2.5).abs() < 1e-12);
        // independent streams
        assert!(m.accel_x.iter().zip(&m.accel_y).any(|(x, y)| x != y));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = SpectralParams::default();
        assert!(synthesize_motion(1, 20.0, 0.0, &p).is_err());
        assert!(synthesize_motion(1, -1.0, 0.01, &p).is_err());
        assert!(synthesize_motion(1, 0.01, 0.01, &p).is_err());
        let degenerate = SpectralParams {
            damping: 0.0,
            ..p
        };
        assert!(synthesize_motion(1, 20.0, 0.01, &degenerate).is_err());
        let above_nyquist = SpectralParams {
            dominant_freq_hz: 80.0,
            ..p
        };
        assert!(synthesize_motion(1, 20.0, 0.01, &above_nyquist).is_err());
    }

    #[test]
    fn scaling_contracts() {
        let m = motion(11);
        assert_eq!(scale_motion(&m, 1.0).unwrap().accel_x, m.accel_x);
        let doubled = scale_motion(&m, 2.0).unwrap();
        assert_eq!(doubled.pga(), 2.0 * m.pga());
        assert_eq!(doubled.scale_factor, 2.0);
        let back = scale_motion(&scale_motion(&m, 0.5).unwrap(), 2.0).unwrap();
        for (a, b) in back.accel_x.iter().chain(&back.accel_y).zip(m.accel_x.iter().chain(&m.accel_y)) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE));
        }
        assert!(scale_motion(&m, 0.0).is_err());
        assert!(scale_motion(&m, -1.0).is_err());
    }
}
