#![allow(dead_code)]

use std::sync::Arc;

use modalreg::exosystem::ExoState;
use modalreg::regulator::{build_feedforward, forcing_column, solve_regulator, FeedforwardGain, SylvesterSolution};
use modalreg::scenarios::Scenario;
use modalreg::tolerances::ASSUMPTION1_FLOOR;
use num_complex::Complex64;

pub fn solve(s: &Scenario) -> (FeedforwardGain, SylvesterSolution) {
    let gain = build_feedforward(&s.gen, &s.coupling, &s.space, ASSUMPTION1_FLOOR).expect("assumption 1");
    let pi = solve_regulator(&s.gen, &s.coupling, &gain, &s.space).expect("solve");
    (gain, pi)
}

pub fn smooth_w0(s: &Scenario) -> ExoState {
    ExoState::from_fn(Arc::clone(&s.space), |k| Complex64::new(1.0 / (1.0 + k.abs() as f64), 0.5 / (1.0 + (k * k) as f64)))
}

/// Classical fourth-order Runge-Kutta for `z_n' = mu_n z_n + sum_k g_{n,k} w0_k e^{i omega_k t}`,
/// sampled at every multiple of `sample_every` steps.
pub fn rk4_states(s: &Scenario, gain: &FeedforwardGain, z0: &[Complex64], w0: &ExoState, step: f64, steps: usize, sample_every: usize) -> Vec<(f64, Vec<Complex64>)> {
    let forcing: Vec<(f64, Vec<Complex64>)> = w0
        .active()
        .map(|(k, omega, wk)| (omega, forcing_column(&s.coupling, gain, k).unwrap().coeffs().iter().map(|g| g * wk).collect()))
        .collect();
    let mu = s.gen.eigenvalues().to_vec();
    let rhs = |t: f64, z: &[Complex64]| -> Vec<Complex64> {
        let mut dz: Vec<Complex64> = mu.iter().zip(z).map(|(m, z)| m * z).collect();
        for (omega, g) in &forcing {
            let phase = Complex64::from_polar(1.0, omega * t);
            for (d, g) in dz.iter_mut().zip(g) {
                *d += g * phase;
            }
        }
        dz
    };
    let axpy = |z: &[Complex64], k: &[Complex64], h: f64| -> Vec<Complex64> { z.iter().zip(k).map(|(z, k)| z + k * h).collect() };
    let mut z = z0.to_vec();
    let mut out = vec![(0.0, z.clone())];
    for i in 0..steps {
        let t = i as f64 * step;
        let k1 = rhs(t, &z);
        let k2 = rhs(t + step / 2.0, &axpy(&z, &k1, step / 2.0));
        let k3 = rhs(t + step / 2.0, &axpy(&z, &k2, step / 2.0));
        let k4 = rhs(t + step, &axpy(&z, &k3, step));
        for j in 0..z.len() {
            z[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (step / 6.0);
        }
        if (i + 1) % sample_every == 0 {
            out.push(((i + 1) as f64 * step, z.clone()));
        }
    }
    out
}
