use std::fmt;
use std::str::FromStr;

use crate::neural::{Activation, LstmSpec, MlpSpec};
use crate::solvers::Scheme;

use super::{Architecture, Model, ModelError};

/// Named model configurations for the two clipper circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Odenet9Fe,
    Odenet9Ia,
    Stn3x4,
    Lstm8,
    Odenet20Rk4,
    Odenet30Fe,
    Odenet30Tr,
    Odenet30Rk4,
    Stn2x30,
    Lstm16,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Odenet9Fe,
        Preset::Odenet9Ia,
        Preset::Stn3x4,
        Preset::Lstm8,
        Preset::Odenet20Rk4,
        Preset::Odenet30Fe,
        Preset::Odenet30Tr,
        Preset::Odenet30Rk4,
        Preset::Stn2x30,
        Preset::Lstm16,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Odenet9Fe => "odenet9-fe",
            Preset::Odenet9Ia => "odenet9-ia",
            Preset::Stn3x4 => "stn3x4",
            Preset::Lstm8 => "lstm8",
            Preset::Odenet20Rk4 => "odenet20-rk4",
            Preset::Odenet30Fe => "odenet30-fe",
            Preset::Odenet30Tr => "odenet30-tr",
            Preset::Odenet30Rk4 => "odenet30-rk4",
            Preset::Stn2x30 => "stn2x30",
            Preset::Lstm16 => "lstm16",
        }
    }

    /// 1 for the first-order clipper presets, 2 for the second-order ones.
    pub fn state_dim(self) -> usize {
        match self {
            Preset::Odenet9Fe | Preset::Odenet9Ia | Preset::Stn3x4 | Preset::Lstm8 => 1,
            _ => 2,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Preset::Odenet9Ia => Scheme::Abm,
            Preset::Odenet30Tr => Scheme::Tr,
            Preset::Odenet20Rk4 | Preset::Odenet30Rk4 => Scheme::Rk4,
            _ => Scheme::Fe,
        }
    }

    pub fn architecture(self) -> Architecture {
        let mlp = |sizes: Vec<usize>, act| MlpSpec::new(sizes, act).expect("preset sizes are valid");
        match self {
            Preset::Odenet9Fe => Architecture::OdeNet {
                net: mlp(vec![2, 9, 9, 1], Activation::Relu),
                time_channel: false,
            },
            Preset::Odenet9Ia => Architecture::OdeNet {
                net: mlp(vec![2, 9, 9, 1], Activation::Selu),
                time_channel: false,
            },
            Preset::Stn3x4 => Architecture::Stn {
                net: mlp(vec![2, 4, 4, 4, 1], Activation::Tanh)
                    .with_bias(vec![false, true, false, false])
                    .expect("four layers"),
            },
            Preset::Lstm8 => Architecture::Lstm {
                net: LstmSpec::new(1, 8, 1).expect("positive sizes"),
            },
            Preset::Odenet20Rk4 => Architecture::OdeNet {
                net: mlp(vec![3, 20, 20, 2], Activation::Softsign),
                time_channel: false,
            },
            Preset::Odenet30Fe | Preset::Odenet30Tr | Preset::Odenet30Rk4 => Architecture::OdeNet {
                net: mlp(vec![3, 30, 30, 2], Activation::Softsign),
                time_channel: false,
            },
            Preset::Stn2x30 => Architecture::Stn {
                net: mlp(vec![3, 30, 30, 2], Activation::Tanh),
            },
            Preset::Lstm16 => Architecture::Lstm {
                net: LstmSpec::new(1, 16, 2).expect("positive sizes"),
            },
        }
    }

    /// Freshly initialized model trained (or to be trained) at `training_rate_hz`.
    pub fn build(self, seed: u64, training_rate_hz: f64) -> Result<Model, ModelError> {
        let arch = self.architecture();
        let params = match &arch {
            Architecture::OdeNet { net, .. } | Architecture::Stn { net } => net.init(seed),
            Architecture::Lstm { net } => net.init(seed),
        };
        Model::new(arch, self.state_dim(), params, training_rate_hz, self.scheme())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown model preset '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let expected = [
            (Preset::Odenet9Fe, 127),
            (Preset::Odenet9Ia, 127),
            (Preset::Stn3x4, 48),
            (Preset::Lstm8, 361),
            (Preset::Odenet20Rk4, 542),
            (Preset::Odenet30Fe, 1112),
            (Preset::Odenet30Tr, 1112),
            (Preset::Odenet30Rk4, 1112),
            (Preset::Stn2x30, 1112),
            (Preset::Lstm16, 1250),
        ];
        for (p, n) in expected {
            assert_eq!(p.build(0, 44100.0).unwrap().param_count(), n, "{p}");
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("odenet12".parse::<Preset>().is_err());
    }
}
