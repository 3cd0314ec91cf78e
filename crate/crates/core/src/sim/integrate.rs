//! Newmark constant-average-acceleration integration of a bilinear shear
//! building, with Newton iteration on the dynamic residual at every step.

use serde::{Deserialize, Serialize};

use super::building::{BuildingSpec, ShearModel};
use super::motion::GroundMotion;
use crate::error::{Error, Result};

const GAMMA: f64 = 0.5;
const BETA: f64 = 0.25;
/// Largest time step accepted by [`simulate_response`].
pub const MAX_DT: f64 = 0.02;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 50;

/// Bilinear story spring with kinematic hardening, written as a linear
/// spring of stiffness `αk` in parallel with an elastic-perfectly-plastic
/// spring of stiffness `(1-α)k` and yield force `(1-α)k·u_y`.
#[derive(Debug, Clone, Copy)]
struct BilinearSpring {
    k: f64,
    alpha: f64,
    u_y: f64,
    plastic: f64,
}

impl BilinearSpring {
    /// Force and tangent at drift `d`, with the trial plastic offset.
    fn trial(&self, d: f64) -> (f64, f64, f64) {
        let k_ep = (1.0 - self.alpha) * self.k;
        let f_y = k_ep * self.u_y;
        let f_ep = k_ep * (d - self.plastic);
        if f_ep.abs() <= f_y {
            (self.alpha * self.k * d + f_ep, self.k, self.plastic)
        } else {
            let s = f_ep.signum();
            (
                self.alpha * self.k * d + s * f_y,
                self.alpha * self.k,
                d - s * self.u_y,
            )
        }
    }
}

/// Full state history of one planar axis. Rows are degrees of freedom
/// (floors 1..n) or stories; columns are time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisHistory {
    /// Floor displacement relative to the ground.
    pub disp: Vec<Vec<f64>>,
    pub vel: Vec<Vec<f64>>,
    /// Floor acceleration relative to the ground.
    pub acc: Vec<Vec<f64>>,
    /// Story drift `u_i - u_{i-1}`.
    pub drift: Vec<Vec<f64>>,
    /// Story shear carried by the hysteretic spring.
    pub story_force: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InitialState<'a> {
    pub disp: Option<&'a [f64]>,
    pub vel: Option<&'a [f64]>,
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = if n > 1 { upper[0] / d } else { 0.0 };
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / d;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Adds the tridiagonal assembly of story stiffnesses `k` into (lower, diag, upper).
fn assemble(k: &[f64], scale: f64, lower: &mut [f64], diag: &mut [f64], upper: &mut [f64]) {
    let n = k.len();
    for i in 0..n {
        diag[i] += scale * k[i];
        if i + 1 < n {
            diag[i] += scale * k[i + 1];
            upper[i] -= scale * k[i + 1];
            lower[i + 1] -= scale * k[i + 1];
        }
    }
}

/// Story drifts from floor displacements.
fn drifts(u: &[f64], out: &mut [f64]) {
    for i in 0..u.len() {
        out[i] = u[i] - if i == 0 { 0.0 } else { u[i - 1] };
    }
}

/// Floor forces `K·u` style product for story forces `f`: floor i carries
/// `f_i - f_{i+1}`.
fn floor_forces(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    for i in 0..n {
        out[i] = f[i] - if i + 1 < n { f[i + 1] } else { 0.0 };
    }
}

impl ShearModel {
    /// Integrates the model under ground acceleration `ground` (m/s²).
    pub fn integrate(&self, ground: &[f64], dt: f64, init: InitialState<'_>) -> Result<AxisHistory> {
        let n = self.n_dof();
        let steps = ground.len();
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let m = &self.masses;
        let (a0, a1) = (self.rayleigh_mass, self.rayleigh_stiffness);

        let mut springs: Vec<BilinearSpring> = (0..n)
            .map(|i| BilinearSpring {
                k: self.stiffness[i],
                alpha: self.post_yield_ratio,
                u_y: self.yield_disp[i],
                plastic: 0.0,
            })
            .collect();

        // Damping matrix C = a0 M + a1 K0, kept as tridiagonal bands.
        let (mut c_lo, mut c_di, mut c_up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assemble(&self.stiffness, a1, &mut c_lo, &mut c_di, &mut c_up);
        for i in 0..n {
            c_di[i] += a0 * m[i];
        }
        let damping = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut s = c_di[i] * v[i];
                if i > 0 {
                    s += c_lo[i] * v[i - 1];
                }
                if i + 1 < n {
                    s += c_up[i] * v[i + 1];
                }
                out[i] = s;
            }
        };

        let mut u = init.disp.map_or(vec![0.0; n], <[f64]>::to_vec);
        let mut v = init.vel.map_or(vec![0.0; n], <[f64]>::to_vec);
        if u.len() != n || v.len() != n {
            return Err(Error::invalid("initial state has wrong dimension"));
        }

        let mut d = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut fs = vec![0.0; n];
        let mut cv = vec![0.0; n];
        drifts(&u, &mut d);
        for i in 0..n {
            let (force, _, plastic) = springs[i].trial(d[i]);
            f[i] = force;
            springs[i].plastic = plastic;
        }
        floor_forces(&f, &mut fs);
        damping(&v, &mut cv);
        let ag0 = ground.first().copied().unwrap_or(0.0);
        let mut a: Vec<f64> = (0..n).map(|i| (-m[i] * ag0 - cv[i] - fs[i]) / m[i]).collect();

        let mut hist = AxisHistory {
            disp: vec![Vec::with_capacity(steps); n],
            vel: vec![Vec::with_capacity(steps); n],
            acc: vec![Vec::with_capacity(steps); n],
            drift: vec![Vec::with_capacity(steps); n],
            story_force: vec![Vec::with_capacity(steps); n],
        };
        let record = |h: &mut AxisHistory, u: &[f64], v: &[f64], a: &[f64], d: &[f64], f: &[f64]| {
            for i in 0..n {
                h.disp[i].push(u[i]);
                h.vel[i].push(v[i]);
                h.acc[i].push(a[i]);
                h.drift[i].push(d[i]);
                h.story_force[i].push(f[i]);
            }
        };
        if steps == 0 {
            return Ok(hist);
        }
        record(&mut hist, &u, &v, &a, &d, &f);

        let c_acc = 1.0 / (BETA * dt * dt);
        let c_vel = GAMMA / (BETA * dt);
        let mut u_new = u.clone();
        let mut v_new = vec![0.0; n];
        let mut a_new = vec![0.0; n];
        let mut tangent = vec![0.0; n];
        let mut plastic_trial = vec![0.0; n];
        let mut resid = vec![0.0; n];
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);

        for step in 1..steps {
            let ag = ground[step];
            u_new.copy_from_slice(&u);
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                for i in 0..n {
                    a_new[i] = c_acc * (u_new[i] - u[i])
                        - v[i] / (BETA * dt)
                        - (0.5 / BETA - 1.0) * a[i];
                    v_new[i] = v[i] + dt * ((1.0 - GAMMA) * a[i] + GAMMA * a_new[i]);
                }
                drifts(&u_new, &mut d);
                for i in 0..n {
                    let (force, kt, plastic) = springs[i].trial(d[i]);
                    f[i] = force;
                    tangent[i] = kt;
                    plastic_trial[i] = plastic;
                }
                floor_forces(&f, &mut fs);
                damping(&v_new, &mut cv);
                let mut r_norm = 0.0_f64;
                let mut scale = 1.0_f64;
                for i in 0..n {
                    let inertia = m[i] * a_new[i];
                    let external = m[i] * ag;
                    resid[i] = -(inertia + cv[i] + fs[i] + external);
                    r_norm = r_norm.max(resid[i].abs());
                    scale = scale
                        .max(inertia.abs())
                        .max(external.abs())
                        .max(fs[i].abs())
                        .max(cv[i].abs());
                }
                if !r_norm.is_finite() {
                    return Err(Error::SimulationDiverged {
                        step,
                        reason: "non-finite residual".into(),
                    });
                }
                if r_norm <= NEWTON_TOL * scale {
                    converged = true;
                    break;
                }
                lo.fill(0.0);
                di.fill(0.0);
                up.fill(0.0);
                assemble(&tangent, 1.0, &mut lo, &mut di, &mut up);
                for i in 0..n {
                    di[i] += c_acc * m[i] + c_vel * c_di[i];
                    lo[i] += c_vel * c_lo[i];
                    up[i] += c_vel * c_up[i];
                }
                solve_tridiagonal(&lo, &di, &up, &mut resid);
                for i in 0..n {
                    u_new[i] += resid[i];
                }
            }
            if !converged {
                return Err(Error::SimulationDiverged {
                    step,
                    reason: format!("Newton iteration did not converge in {NEWTON_MAX_ITER} iterations"),
                });
            }
            for i in 0..n {
                springs[i].plastic = plastic_trial[i];
            }
            u.copy_from_slice(&u_new);
            v.copy_from_slice(&v_new);
            a.copy_from_slice(&a_new);
            if u.iter().chain(&v).chain(&a).any(|x| !x.is_finite()) {
                return Err(Error::SimulationDiverged {
                    step,
                    reason: "non-finite state".into(),
                });
            }
            record(&mut hist, &u, &v, &a, &d, &f);
        }
        Ok(hist)
    }
}

/// One biaxial channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Biaxial {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Biaxial {
    pub fn axis(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.x
        } else {
            &self.y
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRecord {
    pub building_id: String,
    pub motion_id: String,
    pub scale_factor: f64,
    pub dt: f64,
    /// Absolute acceleration per level, level 0 being the ground.
    pub abs_accel: Vec<Biaxial>,
    /// Relative displacement between adjacent floors, stories 1..n.
    pub drift: Vec<Biaxial>,
}

impl ResponseRecord {
    pub fn n_stories(&self) -> usize {
        self.drift.len()
    }

    pub fn n_steps(&self) -> usize {
        self.abs_accel.first().map_or(0, |a| a.x.len())
    }
}

pub fn simulate_response(building: &BuildingSpec, motion: &GroundMotion) -> Result<ResponseRecord> {
    if motion.dt > MAX_DT {
        return Err(Error::invalid(format!(
            "motion dt {} exceeds the {MAX_DT} s limit",
            motion.dt
        )));
    }
    let model = building.shear_model()?;
    let n = model.n_dof();
    let mut abs_accel = vec![Biaxial::default(); n + 1];
    let mut drift = vec![Biaxial::default(); n];
    abs_accel[0] = Biaxial {
        x: motion.accel_x.clone(),
        y: motion.accel_y.clone(),
    };
    for axis in 0..2 {
        let ground = motion.component(axis);
        let hist = model.integrate(ground, motion.dt, InitialState::default())?;
        for i in 0..n {
            let abs: Vec<f64> = hist.acc[i].iter().zip(ground).map(|(a, g)| a + g).collect();
            let (acc_slot, drift_slot) = if axis == 0 {
                (&mut abs_accel[i + 1].x, &mut drift[i].x)
            } else {
                (&mut abs_accel[i + 1].y, &mut drift[i].y)
            };
            *acc_slot = abs;
            *drift_slot = hist.drift[i].clone();
        }
    }
    Ok(ResponseRecord {
        building_id: building.id.clone(),
        motion_id: motion.id.clone(),
        scale_factor: motion.scale_factor,
        dt: motion.dt,
        abs_accel,
        drift,
    })
}
