use crate::signal::{AudioSequence, StateTrajectory};

use super::{Circuit, CircuitError};

pub const MIN_OVERSAMPLE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceConfig {
    pub oversample: usize,
    /// Largest `h·ρ` allowed per RK4 step, `ρ` being the Jacobian norm.
    /// RK4 is stable on the negative real axis up to about 2.78.
    pub stability_target: f64,
    /// Largest change of the diode voltage per RK4 step, in units of `n·Vt`.
    pub diode_step: f64,
    /// Upper bound on RK4 steps inside one fine step.
    pub max_substeps: usize,
    /// Any state magnitude beyond this (V) is reported as instability.
    pub overflow_bound: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            oversample: 32,
            stability_target: 1.0,
            diode_step: 0.5,
            max_substeps: 1 << 16,
            overflow_bound: 50.0,
        }
    }
}

/// Circuit response to `x` from a zero initial state with the default
/// stiffness control, one state frame per input sample.
pub fn reference_integrate(
    circuit: &Circuit,
    x: &AudioSequence,
    oversample: usize,
) -> Result<StateTrajectory, CircuitError> {
    reference_integrate_with(
        circuit,
        x,
        &ReferenceConfig {
            oversample,
            ..ReferenceConfig::default()
        },
    )
}

/// RK4 on a grid `oversample` times finer than the input rate, driven by the
/// linearly interpolated input and read back at every input sample.
///
/// Each fine step is split into substeps sized from the current state so that
/// `h·ρ <= stability_target` and the diode voltage moves by at most
/// `diode_step·n·Vt`. Smooth regions keep one substep per fine step.
pub fn reference_integrate_with(
    circuit: &Circuit,
    x: &AudioSequence,
    cfg: &ReferenceConfig,
) -> Result<StateTrajectory, CircuitError> {
    if cfg.oversample < MIN_OVERSAMPLE {
        return Err(CircuitError::Config(format!(
            "oversample must be at least {MIN_OVERSAMPLE}, got {}",
            cfg.oversample
        )));
    }
    if !(x.rate_hz > 0.0) {
        return Err(CircuitError::Config(format!("invalid sample rate {}", x.rate_hz)));
    }
    if x.samples.iter().any(|v| !v.is_finite()) {
        return Err(CircuitError::Config("input contains non-finite samples".into()));
    }
    let dim = circuit.state_dim();
    let mut traj = StateTrajectory::with_capacity(dim, x.len());
    if x.is_empty() {
        return Ok(traj);
    }
    let diode = circuit.diode();
    let max_dv = cfg.diode_step * diode.n * diode.vt;
    let os = cfg.oversample as f64;
    let h = 1.0 / (x.rate_hz * os);
    let mut y = vec![0.0; dim];
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    traj.push(&y);

    for (i, pair) in x.samples.windows(2).enumerate() {
        let (x0, dx) = (pair[0], pair[1] - pair[0]);
        let unstable = |mag: f64| CircuitError::Unstable {
            sample: i + 1,
            magnitude: mag,
            oversample: cfg.oversample,
        };
        for j in 0..cfg.oversample {
            // input at local time t in [0, h] of fine step j
            let v_at = |t: f64| x0 + dx * (j as f64 + t / h) / os;
            let mut t = 0.0;
            let mut substeps = 0;
            loop {
                circuit.rhs(v_at(t), &y, &mut k1);
                let mut hs = (h - t).min(cfg.stability_target / circuit.stiffness(&y));
                if k1[0] != 0.0 {
                    hs = hs.min(max_dv / k1[0].abs());
                }
                let last = h - t - hs < 1e-9 * h;
                if last {
                    hs = h - t;
                }
                substeps += 1;
                if substeps > cfg.max_substeps || !(hs > 0.0) {
                    return Err(unstable(y.iter().fold(0.0_f64, |a, v| a.max(v.abs()))));
                }
                let (vm, vb) = (v_at(t + 0.5 * hs), v_at(t + hs));
                for d in 0..dim {
                    tmp[d] = y[d] + 0.5 * hs * k1[d];
                }
                circuit.rhs(vm, &tmp, &mut k2);
                for d in 0..dim {
                    tmp[d] = y[d] + 0.5 * hs * k2[d];
                }
                circuit.rhs(vm, &tmp, &mut k3);
                for d in 0..dim {
                    tmp[d] = y[d] + hs * k3[d];
                }
                circuit.rhs(vb, &tmp, &mut k4);
                for d in 0..dim {
                    y[d] += hs / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
                }
                if last {
                    break;
                }
                t += hs;
            }
            let mag = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if !mag.is_finite() || mag > cfg.overflow_bound {
                return Err(unstable(mag));
            }
        }
        traj.push(&y);
    }
    Ok(traj)
}
