//! Brute-force Kirchhoff current balance for the second-order clipper.
//!
//! Shares nothing with the state-space form in the parent module: the diode
//! law is evaluated from exponentials, the capacitor currents are unknowns,
//! and the linear-looking system is solved by Newton iteration with a
//! finite-difference Jacobian.

use super::Clipper2;

fn diode_pair(c: &Clipper2, v: f64) -> f64 {
    let nvt = c.diode.n * c.diode.vt;
    let forward = c.diode.is * ((v / nvt).exp() - 1.0);
    let reverse = c.diode.is * ((-v / nvt).exp() - 1.0);
    forward - reverse
}

/// Residual currents (A) at the resistor node and the output node for
/// candidate derivatives `d = (dy1/dt, dy2/dt)`.
fn residual(c: &Clipper2, v_in: f64, y1: f64, y2: f64, d: [f64; 2]) -> [f64; 2] {
    let v_out = y1;
    let v_mid = y1 + y2;
    let i_series_cap = c.c1 * d[1];
    let i_shunt_cap = c.c2 * d[0];
    [
        (c.gain * v_in - v_mid) / c.r - i_series_cap,
        i_series_cap - i_shunt_cap - diode_pair(c, v_out),
    ]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// State derivatives obtained by numerically solving the nodal equations.
pub fn nodal_derivative(c: &Clipper2, v_in: f64, y1: f64, y2: f64) -> (f64, f64) {
    let mut d = [0.0, 0.0];
    for _ in 0..50 {
        let r = residual(c, v_in, y1, y2, d);
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * d[k].abs().max(1.0);
            let mut dp = d;
            dp[k] += h;
            let rp = residual(c, v_in, y1, y2, dp);
            jac[0][k] = (rp[0] - r[0]) / h;
            jac[1][k] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let step = [
            (r[0] * jac[1][1] - r[1] * jac[0][1]) / det,
            (jac[0][0] * r[1] - jac[1][0] * r[0]) / det,
        ];
        let prev = d;
        d[0] -= step[0];
        d[1] -= step[1];
        if d == prev || norm(step) <= 1e-15 * norm(d) {
            break;
        }
    }
    (d[0], d[1])
}
