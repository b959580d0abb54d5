//! External and pairwise potentials shared by the particle and grid solvers.

use std::fmt;
use std::sync::Arc;

use crate::geometry::{GradientFn, Point, ScalarFn};

#[derive(Clone, Default)]
pub enum ExternalPotential {
    #[default]
    None,
    /// `V = v0 sin^2(x) sin^2(y)`.
    SinSquared { v0: f64 },
    Custom {
        value: ScalarFn,
        gradient: GradientFn,
    },
}

impl fmt::Debug for ExternalPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalPotential::None => write!(f, "None"),
            ExternalPotential::SinSquared { v0 } => write!(f, "SinSquared {{ v0: {v0} }}"),
            ExternalPotential::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl ExternalPotential {
    /// True when the potential is identically zero, so its terms can be skipped.
    pub fn is_zero(&self) -> bool {
        match self {
            ExternalPotential::None => true,
            ExternalPotential::SinSquared { v0 } => *v0 == 0.0,
            ExternalPotential::Custom { .. } => false,
        }
    }

    pub fn value(&self, [x, y]: Point) -> f64 {
        match self {
            ExternalPotential::None => 0.0,
            ExternalPotential::SinSquared { v0 } => {
                let (sx, sy) = (x.sin(), y.sin());
                v0 * sx * sx * sy * sy
            }
            ExternalPotential::Custom { value, .. } => value(x, y),
        }
    }

    pub fn gradient(&self, [x, y]: Point) -> [f64; 2] {
        match self {
            ExternalPotential::None => [0.0; 2],
            ExternalPotential::SinSquared { v0 } => {
                let (sx, cx) = x.sin_cos();
                let (sy, cy) = y.sin_cos();
                [2.0 * v0 * sx * cx * sy * sy, 2.0 * v0 * sx * sx * sy * cy]
            }
            ExternalPotential::Custom { gradient, .. } => gradient(x, y),
        }
    }
}

/// Symmetric pair interaction `U(x, y) = U(y, x)`.
pub trait PairKernel: Send + Sync {
    fn value(&self, x: Point, y: Point) -> f64;
    /// Gradient with respect to the first argument.
    fn grad_x(&self, x: Point, y: Point) -> [f64; 2];
}

/// `U = strength * exp(-|d|^2 / (2 width^2))` on the minimum-image displacement.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    pub strength: f64,
    pub width: f64,
    pub lengths: [f64; 2],
}

impl GaussianKernel {
    pub fn new(strength: f64, width: f64, lengths: [f64; 2]) -> Self {
        GaussianKernel {
            strength,
            width,
            lengths,
        }
    }

    fn displacement(&self, x: Point, y: Point) -> [f64; 2] {
        let mut d = [x[0] - y[0], x[1] - y[1]];
        for (dk, l) in d.iter_mut().zip(self.lengths) {
            *dk -= l * (*dk / l).round();
        }
        d
    }
}

impl PairKernel for GaussianKernel {
    fn value(&self, x: Point, y: Point) -> f64 {
        let [dx, dy] = self.displacement(x, y);
        self.strength * (-(dx * dx + dy * dy) / (2.0 * self.width * self.width)).exp()
    }

    fn grad_x(&self, x: Point, y: Point) -> [f64; 2] {
        let [dx, dy] = self.displacement(x, y);
        let w2 = self.width * self.width;
        let e = self.strength * (-(dx * dx + dy * dy) / (2.0 * w2)).exp();
        [-e * dx / w2, -e * dy / w2]
    }
}

#[derive(Clone, Default)]
pub struct PotentialSpec {
    pub external: ExternalPotential,
    pub pair: Option<Arc<dyn PairKernel>>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("external", &self.external)
            .field("pair", &self.pair.is_some())
            .finish()
    }
}

impl PotentialSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn external(external: ExternalPotential) -> Self {
        PotentialSpec {
            external,
            pair: None,
        }
    }

    pub fn with_pair(mut self, kernel: Arc<dyn PairKernel>) -> Self {
        self.pair = Some(kernel);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_squared_gradient_matches_differences() {
        let v = ExternalPotential::SinSquared { v0: 5.0 };
        let h = 1e-6;
        for p in [[0.3, 1.2], [2.0, 4.5], [5.9, 0.1]] {
            let g = v.gradient(p);
            let fx = (v.value([p[0] + h, p[1]]) - v.value([p[0] - h, p[1]])) / (2.0 * h);
            let fy = (v.value([p[0], p[1] + h]) - v.value([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - fx).abs() < 1e-8 && (g[1] - fy).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_kernel_is_symmetric_and_periodic() {
        let k = GaussianKernel {
            strength: 2.0,
            width: 0.4,
            lengths: [6.0, 6.0],
        };
        let (a, b) = ([0.1, 5.9], [5.8, 0.3]);
        assert_eq!(k.value(a, b), k.value(b, a));
        let ga = k.grad_x(a, b);
        let gb = k.grad_x(b, a);
        assert!((ga[0] + gb[0]).abs() < 1e-15 && (ga[1] + gb[1]).abs() < 1e-15);
        assert!((k.value([0.0, 0.0], [0.0, 0.0]) - 2.0).abs() < 1e-15);
    }
}
