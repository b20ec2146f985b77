//! Built-in case-study plants and their growth-bound matrices.

use alloc::vec::Vec;

use crate::math;
use crate::odeint::{LipschitzMatrix, VectorField};

/// Degrees to radians.
pub fn deg(x: f64) -> f64 {
    x * core::f64::consts::PI / 180.0
}

/// Kinematic bicycle model of an autonomous vehicle.
///
/// State: planar position and heading. Inputs: rear-wheel velocity `u₁` and
/// steering angle `u₂`, with `α = arctan(tan(u₂)/2)`:
///
/// ```text
/// ẋ₁ = u₁ cos(α + x₃) / cos(α)
/// ẋ₂ = u₁ sin(α + x₃) / cos(α)
/// ẋ₃ = u₁ tan(u₂)
/// ```
pub struct Vehicle;

impl VectorField for Vehicle {
    fn dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], u: &[f64], dxdt: &mut [f64]) {
        let alpha = math::atan(math::tan(u[1]) / 2.0);
        let sec = 1.0 / math::cos(alpha);
        dxdt[0] = u[0] * math::cos(alpha + x[2]) * sec;
        dxdt[1] = u[0] * math::sin(alpha + x[2]) * sec;
        dxdt[2] = u[0] * math::tan(u[1]);
    }
}

/// Growth matrix of [`Vehicle`]: only the heading couples into the position,
/// with `L₁₃ = L₂₃ = |u₁| √(tan²(u₂)/4 + 1)` (the global bound on the
/// heading-derivative of the position rates); all other entries vanish.
pub struct VehicleLipschitz;

impl LipschitzMatrix for VehicleLipschitz {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, u: &[f64], l: &mut [f64]) {
        l.fill(0.0);
        let t = math::tan(u[1]);
        let c = math::abs(u[0]) * math::sqrt(t * t / 4.0 + 1.0);
        l[2] = c; // (0,2)
        l[5] = c; // (1,2)
    }
}

const AIRCRAFT_MASS: f64 = 60_000.0;
const GRAVITY: f64 = 9.81;

/// Longitudinal model of a DC9-30 on final approach.
///
/// State: velocity, flight path angle, altitude. Inputs: thrust `u₁` in
/// Newton and angle of attack `u₂` in radians. With `c = 1.25 + 4.2 u₂`,
/// drag `D = (2.7 + 3.08 c²) x₁²` and lift `L = 68.6 c x₁²`:
///
/// ```text
/// ẋ₁ = (u₁ cos u₂ − D − m g sin x₂) / m
/// ẋ₂ = (u₁ sin u₂ + L − m g cos x₂) / (m x₁)
/// ẋ₃ = x₁ sin x₂
/// ```
pub struct Aircraft;

impl VectorField for Aircraft {
    fn dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], u: &[f64], dxdt: &mut [f64]) {
        let c = 1.25 + 4.2 * u[1];
        let drag = (2.7 + 3.08 * c * c) * x[0] * x[0];
        let lift = 68.6 * c * x[0] * x[0];
        let mg = AIRCRAFT_MASS * GRAVITY;
        dxdt[0] = (u[0] * math::cos(u[1]) - drag - mg * math::sin(x[1])) / AIRCRAFT_MASS;
        dxdt[1] = (u[0] * math::sin(u[1]) + lift - mg * math::cos(x[1])) / (AIRCRAFT_MASS * x[0]);
        dxdt[2] = x[0] * math::sin(x[1]);
    }
}

/// Growth matrix of [`Aircraft`], valid on the landing-corridor enclosure
/// below. The enclosure pads the operating box `[58, 83] × [−3°, 0°] × [0, 56]`
/// by the worst-case one-period drift of the closed loop, and the entries
/// bound the partial derivatives of the field there.
pub struct AircraftLipschitz;

/// State enclosure the matrix entries are valid on.
const AC_X1_MIN: f64 = 57.3;
const AC_X1_MAX: f64 = 83.7;
const AC_X2_MIN: f64 = -0.081; // ≈ −4.6°
const AC_X2_MAX: f64 = 0.028; // ≈ 1.6°

impl LipschitzMatrix for AircraftLipschitz {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, u: &[f64], l: &mut [f64]) {
        let c = 1.25 + 4.2 * u[1];
        let m = AIRCRAFT_MASS;
        let x2_amp = math::abs(AC_X2_MIN).max(AC_X2_MAX);
        // D₁f₁ = −2(2.7 + 3.08 c²) x₁ / m, largest (least negative) at x₁ min
        l[0] = -2.0 * (2.7 + 3.08 * c * c) * AC_X1_MIN / m;
        // |D₂f₁| = g |cos x₂| ≤ g
        l[1] = GRAVITY;
        l[2] = 0.0;
        // |D₁f₂| ≤ 68.6 c / m + g / x₁²
        l[3] = 68.6 * c / m + GRAVITY / (AC_X1_MIN * AC_X1_MIN);
        // D₂f₂ = g sin x₂ / x₁, signed maximum at the upper flight-path angle
        l[4] = GRAVITY * math::sin(AC_X2_MAX) / AC_X1_MIN;
        l[5] = 0.0;
        // |D₁f₃| = |sin x₂|
        l[6] = math::sin(x2_amp);
        // |D₂f₃| = x₁ |cos x₂| ≤ x₁ max
        l[7] = AC_X1_MAX;
        l[8] = 0.0;
    }
}

/// Affine dynamics `ẋ = A x + B u + c` for tests and custom problems.
pub struct Affine {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Affine {
    /// `a` is row-major `n × n`, `b` row-major `n × m`, `c` length `n`.
    pub fn new(n: usize, m: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Option<Self> {
        if a.len() != n * n || b.len() != n * m || c.len() != n || n == 0 {
            return None;
        }
        Some(Self { n, m, a, b, c })
    }

    /// The natural growth matrix of affine dynamics: `A_ii` on the diagonal
    /// and `|A_ij|` off it.
    pub fn induced_lipschitz(&self) -> ConstantLipschitz {
        let mut l = self.a.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    l[i * self.n + j] = math::abs(l[i * self.n + j]);
                }
            }
        }
        ConstantLipschitz { n: self.n, l }
    }
}

impl VectorField for Affine {
    fn dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, x: &[f64], u: &[f64], dxdt: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = self.c[i];
            for j in 0..self.n {
                acc += self.a[i * self.n + j] * x[j];
            }
            for j in 0..self.m {
                acc += self.b[i * self.m + j] * u[j];
            }
            dxdt[i] = acc;
        }
    }
}

/// Input-independent growth matrix given as an explicit constant.
pub struct ConstantLipschitz {
    n: usize,
    l: Vec<f64>,
}

impl ConstantLipschitz {
    pub fn new(n: usize, l: Vec<f64>) -> Option<Self> {
        if l.len() != n * n || n == 0 {
            return None;
        }
        // off-diagonal entries must be non-negative
        for i in 0..n {
            for j in 0..n {
                if i != j && !(l[i * n + j] >= 0.0) {
                    return None;
                }
            }
        }
        Some(Self { n, l })
    }
}

impl LipschitzMatrix for ConstantLipschitz {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, _u: &[f64], l: &mut [f64]) {
        l.copy_from_slice(&self.l);
    }
}
