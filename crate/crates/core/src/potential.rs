//! Scalar potential descriptors shared by the quantum propagators.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type PotentialFn = dyn Fn([f64; 2], f64) -> f64 + Send + Sync;

/// User-supplied `U(r, t)`.
#[derive(Clone)]
pub struct CustomPotential(pub Arc<PotentialFn>);

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomPotential(..)")
    }
}

/// Additional scalar potential `U(r, t)` on top of the focusing term.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarPotential {
    #[default]
    Zero,
    /// `a / (r² + ε²)`; `ε = 0` is the exact scale-invariant `a / r²`.
    InverseSquare { strength: f64, eps: f64 },
    /// `c r²`.
    Quadratic { coef: f64 },
    /// `c r⁴`.
    Quartic { coef: f64 },
    #[serde(skip)]
    Custom(CustomPotential),
}

impl ScalarPotential {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(CustomPotential(Arc::new(f)))
    }

    pub fn value(&self, r: [f64; 2], t: f64) -> f64 {
        let r2 = r[0] * r[0] + r[1] * r[1];
        match self {
            Self::Zero => 0.0,
            Self::InverseSquare { strength, eps } => strength / (r2 + eps * eps),
            Self::Quadratic { coef } => coef * r2,
            Self::Quartic { coef } => coef * r2 * r2,
            Self::Custom(f) => (f.0)(r, t),
        }
    }

    /// `∇U` in the plane. Custom potentials use central differences.
    pub fn gradient(&self, r: [f64; 2], t: f64) -> [f64; 2] {
        let r2 = r[0] * r[0] + r[1] * r[1];
        let radial = match self {
            Self::Zero => 0.0,
            Self::InverseSquare { strength, eps } => {
                let d = r2 + eps * eps;
                -2.0 * strength / (d * d)
            }
            Self::Quadratic { coef } => 2.0 * coef,
            Self::Quartic { coef } => 4.0 * coef * r2,
            Self::Custom(f) => {
                let h = 1e-6 * (1.0 + r2.sqrt());
                let d0 = ((f.0)([r[0] + h, r[1]], t) - (f.0)([r[0] - h, r[1]], t)) / (2.0 * h);
                let d1 = ((f.0)([r[0], r[1] + h], t) - (f.0)([r[0], r[1] - h], t)) / (2.0 * h);
                return [d0, d1];
            }
        };
        [radial * r[0], radial * r[1]]
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Whether the value ignores `t`.
    pub fn is_static(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }

    /// Whether `β U(r√β) = U(r)` for every `β > 0`, i.e. the normalized image
    /// of the potential does not depend on the new time.
    pub fn is_scale_invariant(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::InverseSquare { eps, .. } => *eps == 0.0,
            Self::Quadratic { coef } | Self::Quartic { coef } => *coef == 0.0,
            Self::Custom(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_differences() {
        let cases = [
            ScalarPotential::InverseSquare {
                strength: 1.3,
                eps: 0.4,
            },
            ScalarPotential::Quadratic { coef: 0.7 },
            ScalarPotential::Quartic { coef: -0.2 },
            ScalarPotential::custom(|r, _| (r[0] * r[1]).sin()),
        ];
        let r = [0.8, -0.35];
        let h = 1e-5;
        for u in &cases {
            let g = u.gradient(r, 0.0);
            let d0 = (u.value([r[0] + h, r[1]], 0.0) - u.value([r[0] - h, r[1]], 0.0)) / (2.0 * h);
            let d1 = (u.value([r[0], r[1] + h], 0.0) - u.value([r[0], r[1] - h], 0.0)) / (2.0 * h);
            assert!(
                (g[0] - d0).abs() < 1e-7 && (g[1] - d1).abs() < 1e-7,
                "{u:?}"
            );
        }
        assert_eq!(ScalarPotential::Zero.gradient(r, 0.0), [0.0, 0.0]);
    }

    #[test]
    fn serde_tags() {
        let u: ScalarPotential =
            toml::from_str("kind = \"inverse-square\"\nstrength = 2.0\neps = 0.0").unwrap();
        assert!(u.is_scale_invariant());
        assert_eq!(u.value([1.0, 1.0], 0.0), 1.0);
    }
}
