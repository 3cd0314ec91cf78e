use crate::error::{Error, Result};
use crate::sim::ResponseRecord;

/// Number of feature channels: lower slab x/y, upper slab x/y.
pub const N_CHANNELS: usize = 4;

/// Taps per unit decimation factor on each side of the anti-alias kernel.
const HALF_TAPS_PER_FACTOR: usize = 8;
/// Pass-band edge as a fraction of the output Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.8;

fn decimation_factor(dt: f64, target_rate: f64) -> Result<usize> {
    if !(target_rate > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("sampling rates must be positive"));
    }
    let ratio = 1.0 / (dt * target_rate);
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-6 * ratio {
        return Err(Error::invalid(format!(
            "record rate {} Hz is not an integer multiple of {target_rate} Hz",
            1.0 / dt
        )));
    }
    Ok(factor as usize)
}

/// Hamming-windowed sinc low-pass with unit DC gain.
fn lowpass_kernel(factor: usize) -> Vec<f64> {
    let half = HALF_TAPS_PER_FACTOR * factor;
    let fc = CUTOFF_FRACTION * 0.5 / factor as f64;
    let len = 2 * half + 1;
    let mut h: Vec<f64> = (0..len)
        .map(|k| {
            let n = k as f64 - half as f64;
            let sinc = if n == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * n).sin() / (std::f64::consts::PI * n)
            };
            let window =
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (len - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Zero-phase filtering evaluated only at the kept samples; edges are
/// extended by replicating the end samples.
fn decimate(signal: &[f64], factor: usize, kernel: &[f64]) -> Vec<f64> {
    if factor == 1 {
        return signal.to_vec();
    }
    let half = kernel.len() / 2;
    let last = signal.len() as isize - 1;
    (0..signal.len())
        .step_by(factor)
        .map(|centre| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let idx = (centre as isize + k as isize - half as isize).clamp(0, last);
                    w * signal[idx as usize]
                })
                .sum()
        })
        .collect()
}

/// Four-channel acceleration feature of one story: the absolute
/// accelerations of its lower slab (level `story - 1`, the ground for story
/// 1) and upper slab (level `story`), low-pass filtered, decimated to
/// `target_rate` and truncated or zero-padded to exactly `len` samples.
pub fn extract_features(
    record: &ResponseRecord,
    story: usize,
    len: usize,
    target_rate: f64,
) -> Result<Vec<[f64; N_CHANNELS]>> {
    let n = record.n_stories();
    if story == 0 || story > n {
        return Err(Error::invalid(format!("story {story} outside 1..={n}")));
    }
    if len == 0 {
        return Err(Error::invalid("feature length must be positive"));
    }
    let factor = decimation_factor(record.dt, target_rate)?;
    let kernel = lowpass_kernel(factor);
    let lower = &record.abs_accel[story - 1];
    let upper = &record.abs_accel[story];
    let channels = [&lower.x, &lower.y, &upper.x, &upper.y].map(|s| decimate(s, factor, &kernel));
    let available = channels[0].len();
    if 2 * available < len {
        return Err(Error::InsufficientData(format!(
            "record {} yields {available} samples after resampling; need at least {}",
            record.motion_id,
            len.div_ceil(2)
        )));
    }
    Ok((0..len)
        .map(|t| {
            if t < available {
                [channels[0][t], channels[1][t], channels[2][t], channels[3][t]]
            } else {
                [0.0; N_CHANNELS]
            }
        })
        .collect())
}
