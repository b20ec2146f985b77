//! Fixed-step propagation of the nominal flow and of the growth-bound radius
//! over one sampling period.
//!
//! Both quantities are integrated with the classical 4th-order Runge-Kutta
//! scheme. The growth radius solves the radial problem `ṙ = L(u)·r + w`,
//! `r(0) = r₀`, which coincides with the closed form
//! `e^{Lτ} r₀ + ∫₀^τ e^{Ls} w ds`; integrating it keeps a single code path
//! and avoids a matrix-exponential dependency.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// Right-hand side `ẋ = f(x, u)` of the control system.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Writes `f(x, u)` into `dxdt`. Must be deterministic and total on the
    /// enclosure the growth bound was derived for.
    fn eval(&self, x: &[f64], u: &[f64], dxdt: &mut [f64]);
}

/// Input-parametrized matrix `L(u)` dominating the partial derivatives of
/// the field: `L_ij(u) ≥ D_j f_i` on the diagonal and `≥ |D_j f_i|` off it,
/// over the relevant state enclosure. Off-diagonal entries are non-negative.
pub trait LipschitzMatrix: Sync {
    fn dim(&self) -> usize;
    /// Writes the row-major `n × n` matrix for input `u` into `l`.
    fn eval(&self, u: &[f64], l: &mut [f64]);
}

/// Component-wise disturbance radius: the perturbation set is `⟦-w, w⟧`.
#[derive(Clone, Debug, PartialEq)]
pub struct Disturbance {
    w: Vec<f64>,
}

impl Disturbance {
    pub fn new(w: Vec<f64>) -> Result<Self, OdeError> {
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(OdeError::BadParameter("disturbance radius must be >= 0"));
        }
        Ok(Self { w })
    }

    pub fn zero(dim: usize) -> Self {
        Self { w: vec![0.0; dim] }
    }

    #[inline]
    pub fn radius(&self) -> &[f64] {
        &self.w
    }
}

/// Sampling time and the number of RK4 steps used per sampling period.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SamplingConfig {
    pub tau: f64,
    pub substeps: u32,
}

impl SamplingConfig {
    pub fn new(tau: f64, substeps: u32) -> Result<Self, OdeError> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(OdeError::BadParameter("sampling time must be positive"));
        }
        if substeps == 0 {
            return Err(OdeError::BadParameter("substeps must be >= 1"));
        }
        Ok(Self { tau, substeps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OdeError {
    /// A non-finite value appeared during integration; for the nominal flow
    /// this signals blow-up and hence blocking of the sampled system.
    #[error("non-finite value during integration")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// One RK4 step of `ẋ = f(x)` with step `h`, in place.
fn rk4_step(f: &mut dyn FnMut(&[f64], &mut [f64]), h: f64, x: &mut [f64], s: &mut Scratch) {
    let n = x.len();
    f(x, &mut s.k1);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * h * s.k1[i];
    }
    f(&s.tmp, &mut s.k2);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * h * s.k2[i];
    }
    f(&s.tmp, &mut s.k3);
    for i in 0..n {
        s.tmp[i] = x[i] + h * s.k3[i];
    }
    f(&s.tmp, &mut s.k4);
    for i in 0..n {
        x[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

/// Reusable RK4 stage buffers.
pub struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

fn integrate(
    f: &mut dyn FnMut(&[f64], &mut [f64]),
    x: &mut [f64],
    tau: f64,
    steps: u32,
    s: &mut Scratch,
) -> Result<(), OdeError> {
    let h = tau / steps as f64;
    for _ in 0..steps {
        rk4_step(f, h, x, s);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite);
        }
    }
    Ok(())
}

/// Nominal solution `φ(τ, c, u)` of the unperturbed system under a constant
/// input, approximated by `cfg.substeps` RK4 steps.
pub fn flow(
    vf: &dyn VectorField,
    c: &[f64],
    u: &[f64],
    cfg: SamplingConfig,
) -> Result<Vec<f64>, OdeError> {
    let mut x = c.to_vec();
    let mut s = Scratch::new(c.len());
    flow_into(vf, u, cfg, &mut x, &mut s)?;
    Ok(x)
}

/// Allocation-free variant of [`flow`]: integrates `x` in place.
pub fn flow_into(
    vf: &dyn VectorField,
    u: &[f64],
    cfg: SamplingConfig,
    x: &mut [f64],
    s: &mut Scratch,
) -> Result<(), OdeError> {
    debug_assert_eq!(x.len(), vf.dim());
    debug_assert_eq!(u.len(), vf.input_dim());
    integrate(&mut |y, dy| vf.eval(y, u, dy), x, cfg.tau, cfg.substeps, s)
}

/// Growth-bound radius `β(r, u)`: the solution at time `τ` of
/// `ṙ = L(u)·r + w`, `r(0) = r`. Monotone in `r`.
pub fn growth_radius(
    lip: &dyn LipschitzMatrix,
    w: &Disturbance,
    r: &[f64],
    u: &[f64],
    cfg: SamplingConfig,
) -> Result<Vec<f64>, OdeError> {
    let n = lip.dim();
    let mut l = vec![0.0; n * n];
    lip.eval(u, &mut l);
    let mut out = r.to_vec();
    let mut s = Scratch::new(n);
    growth_radius_into(&l, w.radius(), cfg, &mut out, &mut s)?;
    Ok(out)
}

/// Allocation-free variant of [`growth_radius`] on a pre-evaluated matrix.
pub fn growth_radius_into(
    l: &[f64],
    w: &[f64],
    cfg: SamplingConfig,
    r: &mut [f64],
    s: &mut Scratch,
) -> Result<(), OdeError> {
    let n = r.len();
    debug_assert_eq!(l.len(), n * n);
    debug_assert_eq!(w.len(), n);
    integrate(
        &mut |y, dy| {
            for i in 0..n {
                let mut acc = w[i];
                let row = &l[i * n..(i + 1) * n];
                for j in 0..n {
                    acc += row[j] * y[j];
                }
                dy[i] = acc;
            }
        },
        r,
        cfg.tau,
        cfg.substeps,
        s,
    )
}

/// One sampling period of the perturbed system `ẋ = f(x, u) + d(t)` with a
/// piecewise-constant disturbance `d` resampled uniformly from `⟦-w, w⟧` on
/// each of `segments` equal sub-intervals, integrated with
/// `steps_per_segment` RK4 steps per sub-interval.
pub fn flow_perturbed<R: Rng + ?Sized>(
    vf: &dyn VectorField,
    x0: &[f64],
    u: &[f64],
    w: &[f64],
    tau: f64,
    segments: u32,
    steps_per_segment: u32,
    rng: &mut R,
) -> Result<Vec<f64>, OdeError> {
    debug_assert_eq!(w.len(), vf.dim());
    let mut x = x0.to_vec();
    let mut s = Scratch::new(x0.len());
    let mut d = vec![0.0; x0.len()];
    let seg = tau / segments as f64;
    for _ in 0..segments {
        for i in 0..d.len() {
            d[i] = if w[i] > 0.0 {
                rng.gen_range(-w[i]..=w[i])
            } else {
                0.0
            };
        }
        integrate(
            &mut |y, dy| {
                vf.eval(y, u, dy);
                for i in 0..dy.len() {
                    dy[i] += d[i];
                }
            },
            &mut x,
            seg,
            steps_per_segment,
            &mut s,
        )?;
    }
    Ok(x)
}
