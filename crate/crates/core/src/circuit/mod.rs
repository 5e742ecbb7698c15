//! Diode clipper circuits as explicit ODEs, plus the reference integrator
//! and synthetic program material used to build datasets.

mod dataset;
mod nodal;
mod program;
mod reference;

pub use dataset::{synthesize_dataset, Manifest, ManifestEntry, Split, SplitFractions, MANIFEST_FILE};
pub use nodal::nodal_derivative;
pub use program::{ProgramConfig, ProgramGenerator, SegmentKind};
pub use reference::{reference_integrate, reference_integrate_with, ReferenceConfig, MIN_OVERSAMPLE};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid circuit configuration: {0}")]
    Config(String),
    #[error(
        "reference integration became unstable at sample {sample} (|y| = {magnitude:.3e}); \
         retry with an oversample factor above {oversample}"
    )]
    Unstable {
        sample: usize,
        magnitude: f64,
        oversample: usize,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Shockley diode constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    /// Saturation current (A).
    pub is: f64,
    /// Ideality factor.
    pub n: f64,
    /// Thermal voltage (V).
    pub vt: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self {
            is: 2.52e-9,
            n: 1.752,
            vt: 0.02585,
        }
    }
}

impl DiodeParams {
    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.is > 0.0 && self.n > 0.0 && self.vt > 0.0 {
            Ok(())
        } else {
            Err(CircuitError::Config(format!("diode constants must be positive: {self:?}")))
        }
    }

    /// Net current of an antiparallel pair at voltage `v`.
    pub fn pair_current(&self, v: f64) -> f64 {
        2.0 * self.is * (v / (self.n * self.vt)).sinh()
    }

    pub fn pair_conductance(&self, v: f64) -> f64 {
        let nvt = self.n * self.vt;
        2.0 * self.is / nvt * (v / nvt).cosh()
    }
}

/// First-order clipper: gain, series resistor, capacitor and diode pair to ground.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clipper1 {
    pub r: f64,
    pub c: f64,
    pub gain: f64,
    pub diode: DiodeParams,
}

impl Default for Clipper1 {
    fn default() -> Self {
        Self {
            r: 2200.0,
            c: 1e-8,
            gain: 5.0,
            diode: DiodeParams::default(),
        }
    }
}

impl Clipper1 {
    /// `dy1/dt` in V/s.
    pub fn rhs(&self, v_in: f64, y1: f64) -> f64 {
        (self.gain * v_in - y1) / (self.r * self.c) - self.diode.pair_current(y1) / self.c
    }

    pub fn jacobian(&self, y1: f64) -> f64 {
        -1.0 / (self.r * self.c) - self.diode.pair_conductance(y1) / self.c
    }
}

/// Second-order clipper: a series capacitor `c1` between the resistor and
/// the output node, `c2` and the diode pair from the output to ground.
///
/// States are the output voltage `y1` (across `c2`) and the series capacitor
/// voltage `y2`, so the resistor node sits at `y1 + y2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clipper2 {
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    pub gain: f64,
    pub diode: DiodeParams,
}

impl Default for Clipper2 {
    fn default() -> Self {
        Self {
            r: 2200.0,
            c1: 4.7e-7,
            c2: 1e-8,
            gain: 5.0,
            diode: DiodeParams::default(),
        }
    }
}

impl Clipper2 {
    /// `(dy1/dt, dy2/dt)` in V/s.
    pub fn rhs(&self, v_in: f64, y1: f64, y2: f64) -> (f64, f64) {
        let i_r = (self.gain * v_in - y1 - y2) / self.r;
        ((i_r - self.diode.pair_current(y1)) / self.c2, i_r / self.c1)
    }

    pub fn jacobian(&self, y1: f64) -> [[f64; 2]; 2] {
        let g = 1.0 / self.r;
        [
            [(-g - self.diode.pair_conductance(y1)) / self.c2, -g / self.c2],
            [-g / self.c1, -g / self.c1],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Circuit {
    Clipper1(Clipper1),
    Clipper2(Clipper2),
}

impl Circuit {
    pub fn name(&self) -> &'static str {
        match self {
            Circuit::Clipper1(_) => "clipper1",
            Circuit::Clipper2(_) => "clipper2",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Circuit::Clipper1(_) => 1,
            Circuit::Clipper2(_) => 2,
        }
    }

    pub fn diode(&self) -> DiodeParams {
        match self {
            Circuit::Clipper1(c) => c.diode,
            Circuit::Clipper2(c) => c.diode,
        }
    }

    pub fn with_diode(self, diode: DiodeParams) -> Self {
        match self {
            Circuit::Clipper1(c) => Circuit::Clipper1(Clipper1 { diode, ..c }),
            Circuit::Clipper2(c) => Circuit::Clipper2(Clipper2 { diode, ..c }),
        }
    }

    /// Writes `dy/dt` (V/s) into `dy`.
    pub fn rhs(&self, v_in: f64, y: &[f64], dy: &mut [f64]) {
        match self {
            Circuit::Clipper1(c) => dy[0] = c.rhs(v_in, y[0]),
            Circuit::Clipper2(c) => {
                let (d1, d2) = c.rhs(v_in, y[0], y[1]);
                dy[0] = d1;
                dy[1] = d2;
            }
        }
    }

    pub fn rhs_vec(&self, v_in: f64, y: &[f64]) -> Vec<f64> {
        let mut dy = vec![0.0; self.state_dim()];
        self.rhs(v_in, y, &mut dy);
        dy
    }

    /// Infinity norm of the state Jacobian; bounds every eigenvalue magnitude.
    pub fn stiffness(&self, y: &[f64]) -> f64 {
        match self {
            Circuit::Clipper1(c) => c.jacobian(y[0]).abs(),
            Circuit::Clipper2(c) => {
                let j = c.jacobian(y[0]);
                (j[0][0].abs() + j[0][1].abs()).max(j[1][0].abs() + j[1][1].abs())
            }
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Circuit {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clipper1" => Ok(Circuit::Clipper1(Clipper1::default())),
            "clipper2" => Ok(Circuit::Clipper2(Clipper2::default())),
            other => Err(CircuitError::Config(format!(
                "unknown circuit '{other}' (expected clipper1 or clipper2)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clipper1_examples() {
        let c = Clipper1::default();
        assert_eq!(c.rhs(0.0, 0.0), 0.0);
        let expected = 5.0 / (2200.0 * 1e-8);
        assert!((c.rhs(1.0, 0.0) - expected).abs() < 1e-9 * expected);
        assert!((expected - 227_272.727_272_727).abs() < 1e-6);
    }

    #[test]
    fn clipper2_equilibrium() {
        assert_eq!(Clipper2::default().rhs(0.0, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn clipper1_equilibrium_is_inside_linear_target() {
        let c = Clipper1::default();
        for v in [-1.0, -0.3, 0.05, 0.4, 1.0] {
            // bisection on the monotone decreasing rhs
            let (mut lo, mut hi) = (-5.0_f64, 5.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if c.rhs(v, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let y = 0.5 * (lo + hi);
            assert!(y.abs() < 5.0 * v.abs(), "v = {v}, y_eq = {y}");
            assert_eq!(y.signum(), v.signum());
        }
    }

    #[test]
    fn circuit_names_parse() {
        assert_eq!("clipper2".parse::<Circuit>().unwrap().state_dim(), 2);
        assert!("fuzz".parse::<Circuit>().is_err());
    }

    #[test]
    fn stiffness_bounds_linear_rate() {
        let c = Circuit::Clipper1(Clipper1::default());
        assert!(c.stiffness(&[0.0]) > 1.0 / (2200.0 * 1e-8));
        assert!(c.stiffness(&[0.7]) > 1e2 * c.stiffness(&[0.0]));
    }

    proptest! {
        #[test]
        fn clipper1_is_odd(v in -1.0f64..1.0, y in -1.0f64..1.0) {
            let c = Clipper1::default();
            prop_assert_eq!(c.rhs(v, y), -c.rhs(-v, -y));
        }

        #[test]
        fn clipper2_is_odd(v in -1.0f64..1.0, y1 in -1.0f64..1.0, y2 in -5.0f64..5.0) {
            let c = Clipper2::default();
            let (a, b) = c.rhs(v, y1, y2);
            let (na, nb) = c.rhs(-v, -y1, -y2);
            prop_assert_eq!((a, b), (-na, -nb));
        }
    }
}
