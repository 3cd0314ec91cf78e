use drift_adapt::sim::{InitialState, ShearModel};

/// Single-story linear oscillator with mass-proportional damping that gives
/// exactly `zeta` at `f_hz`.
pub fn sdof(f_hz: f64, zeta: f64) -> ShearModel {
    let m = 1.0e5;
    let w = 2.0 * std::f64::consts::PI * f_hz;
    ShearModel {
        masses: vec![m],
        stiffness: vec![m * w * w],
        yield_disp: vec![1e9],
        post_yield_ratio: 0.05,
        rayleigh_mass: 2.0 * zeta * w,
        rayleigh_stiffness: 0.0,
    }
}

/// Closed-form steady-state relative displacement amplitude under
/// `a_g = amp · sin(Ω t)`.
pub fn magnification_amplitude(amp: f64, f_hz: f64, zeta: f64, r: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f_hz;
    amp / (w * w) / ((1.0 - r * r).powi(2) + (2.0 * zeta * r).powi(2)).sqrt()
}

/// Relative error of the simulated steady-state drift amplitude at frequency
/// ratio `r`, measured over the last 10 s of a 60 s run.
pub fn harmonic_error(r: f64) -> f64 {
    let (f, zeta, amp, dt) = (1.0, 0.05, 1.0, 1e-3);
    let model = sdof(f, zeta);
    let omega = 2.0 * std::f64::consts::PI * f * r;
    let n = (60.0 / dt) as usize + 1;
    let ground: Vec<f64> = (0..n).map(|k| amp * (omega * k as f64 * dt).sin()).collect();
    let h = model.integrate(&ground, dt, InitialState::default()).unwrap();
    let tail = n - (10.0 / dt) as usize;
    let peak = h.drift[0][tail..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let exact = magnification_amplitude(amp, f, zeta, r);
    (peak - exact).abs() / exact
}

fn trapz(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

fn k0_times(k: &[f64], u: &[f64]) -> Vec<f64> {
    let n = k.len();
    (0..n)
        .map(|i| {
            let below = k[i] * (u[i] - if i > 0 { u[i - 1] } else { 0.0 });
            let above = if i + 1 < n { k[i + 1] * (u[i + 1] - u[i]) } else { 0.0 };
            below - above
        })
        .collect()
}

#[derive(Debug)]
pub struct EnergyBalance {
    pub input: f64,
    pub kinetic: f64,
    pub damping: f64,
    pub hysteretic: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        (self.input - self.kinetic - self.damping - self.hysteretic).abs() / self.input.abs()
    }
}

/// Work terms from an integrated history, by trapezoidal quadrature.
pub fn energy_balance(model: &ShearModel, ground: &[f64], dt: f64) -> EnergyBalance {
    let h = model.integrate(ground, dt, InitialState::default()).unwrap();
    let n = model.n_dof();
    let steps = ground.len();
    let vel_at = |t: usize| -> Vec<f64> { (0..n).map(|i| h.vel[i][t]).collect() };
    let input = -trapz((0..steps).map(|t| (0..n).map(|i| model.masses[i] * ground[t] * h.vel[i][t]).sum::<f64>()), dt);
    let last = vel_at(steps - 1);
    let kinetic = 0.5 * (0..n).map(|i| model.masses[i] * last[i] * last[i]).sum::<f64>();
    let damping = trapz(
        (0..steps).map(|t| {
            let v = vel_at(t);
            let kv = k0_times(&model.stiffness, &v);
            (0..n)
                .map(|i| v[i] * (model.rayleigh_mass * model.masses[i] * v[i] + model.rayleigh_stiffness * kv[i]))
                .sum::<f64>()
        }),
        dt,
    );
    let mut hysteretic = 0.0;
    for s in 0..n {
        for t in 1..steps {
            let f = 0.5 * (h.story_force[s][t] + h.story_force[s][t - 1]);
            hysteretic += f * (h.drift[s][t] - h.drift[s][t - 1]);
        }
    }
    EnergyBalance {
        input,
        kinetic,
        damping,
        hysteretic,
    }
}
