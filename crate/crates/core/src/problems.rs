//! Benchmark objectives with analytic gradients and optimum metadata, plus a
//! bounded-noise stochastic gradient oracle.
//!
//! Three problem families are available, addressable by name from configs:
//!
//! * `camel3` — the Three-Hump Camel function on [−5,5]²,
//!   f(x) = 2x₁² − 1.05x₁⁴ + x₁⁶/6 + x₁x₂ + x₂², global minimum 0 at the
//!   origin and two shallow local minima.
//! * `rosenbrock` — f(x) = (1−x₁)² + 100(x₂−x₁²)², global minimum at (1,1);
//!   metadata records the regional curvature constants (μ=0.2, L=2610 on
//!   the box (0,2)²) reported in the literature, flagged as estimates.
//! * `pl_quadratic` — f(x) = ½ Σ λᵢ(xᵢ−cᵢ)², a separable quadratic whose PL
//!   constant μ = min λ and smoothness L = max λ are exact, used by the
//!   convergence-verification suites.
//!
//! Problems are immutable after construction and freely shareable; the
//! stochastic oracle takes an explicit RNG so parallel runs never contend.

use crate::optim::GradientSample;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: problem has {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spectrum must be non-empty with positive entries")]
    BadSpectrum,
    #[error("domain box must satisfy lo < hi in every coordinate")]
    BadDomain,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

/// Polyak-Łojasiewicz / smoothness constants attached to a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlConstants {
    pub mu: f64,
    pub lipschitz: f64,
    /// True when the constants are literature/regional estimates rather than
    /// exact values.
    pub estimated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    ClippedGaussian,
    UniformBounded,
}

/// Bounded-noise model for the stochastic gradient oracle: zero-mean noise
/// with per-coordinate variance σ²/n, and the emitted gradient clipped to
/// sup-norm at most `clip_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub clip_bound: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { kind: NoiseKind::None, sigma: 0.0, clip_bound: f64::INFINITY }
    }

    fn is_active(&self) -> bool {
        self.kind != NoiseKind::None && self.sigma > 0.0
    }

    /// Perturb an exact gradient in place. Noise is drawn per coordinate and
    /// clamped symmetrically to ±(clip_bound − |gᵢ|); symmetric truncation of
    /// a symmetric distribution keeps the zero mean exact while enforcing the
    /// sup-norm bound exactly. A final clamp covers coordinates whose exact
    /// gradient already exceeds the bound.
    pub fn perturb<R: Rng>(&self, grad: &mut [f64], rng: &mut R) -> bool {
        if !self.is_active() {
            return false;
        }
        let n = grad.len() as f64;
        let per_coord_sd = self.sigma / n.sqrt();
        for gi in grad.iter_mut() {
            let noise = match self.kind {
                NoiseKind::UniformBounded => {
                    let half = per_coord_sd * 3f64.sqrt();
                    rng.gen_range(-half..=half)
                }
                NoiseKind::ClippedGaussian => per_coord_sd * standard_normal(rng),
                NoiseKind::None => unreachable!(),
            };
            let room = (self.clip_bound - gi.abs()).max(0.0);
            *gi += noise.clamp(-room, room);
            *gi = gi.clamp(-self.clip_bound, self.clip_bound);
        }
        true
    }
}

/// Box-Muller transform; avoids the open-interval edge by nudging u away
/// from zero.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, PartialEq)]
enum ProblemKind {
    Camel3,
    Rosenbrock,
    PlQuadratic { spectrum: Vec<f64>, center: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    kind: ProblemKind,
    name: String,
    dim: usize,
    f_star: Option<f64>,
    minimizers: Vec<Vec<f64>>,
    pl: Option<PlConstants>,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
    grad_bound: f64,
    grad_bound_estimated: bool,
}

impl Problem {
    pub fn camel3() -> Self {
        // Stationary points solve x₁(3.5 − 4.2x₁² + x₁⁴) = 0 with x₂ = −x₁/2;
        // the outer root pair x₁² = (4.2 + √3.64)/2 gives the local minima.
        let a = ((4.2 + 3.64f64.sqrt()) / 2.0).sqrt();
        let mut p = Problem {
            kind: ProblemKind::Camel3,
            name: "camel3".into(),
            dim: 2,
            f_star: Some(0.0),
            minimizers: vec![vec![0.0, 0.0], vec![a, -a / 2.0], vec![-a, a / 2.0]],
            pl: None,
            domain_lo: vec![-5.0, -5.0],
            domain_hi: vec![5.0, 5.0],
            grad_bound: 0.0,
            grad_bound_estimated: true,
        };
        p.grad_bound = p.grid_grad_bound(101);
        p
    }

    pub fn rosenbrock() -> Self {
        let mut p = Problem {
            kind: ProblemKind::Rosenbrock,
            name: "rosenbrock".into(),
            dim: 2,
            f_star: Some(0.0),
            minimizers: vec![vec![1.0, 1.0]],
            pl: Some(PlConstants { mu: 0.2, lipschitz: 2610.0, estimated: true }),
            domain_lo: vec![-5.0, -5.0],
            domain_hi: vec![5.0, 5.0],
            grad_bound: 0.0,
            grad_bound_estimated: true,
        };
        p.grad_bound = p.grid_grad_bound(101);
        p
    }

    /// Separable PL quadratic with the default domain box [−2, 2]ⁿ.
    pub fn pl_quadratic(spectrum: &[f64], center: &[f64]) -> Result<Self, ProblemError> {
        let n = spectrum.len();
        Self::pl_quadratic_with_box(spectrum, center, &vec![-2.0; n], &vec![2.0; n])
    }

    pub fn pl_quadratic_with_box(
        spectrum: &[f64],
        center: &[f64],
        lo: &[f64],
        hi: &[f64],
    ) -> Result<Self, ProblemError> {
        if spectrum.is_empty() || spectrum.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(ProblemError::BadSpectrum);
        }
        let n = spectrum.len();
        if center.len() != n {
            return Err(ProblemError::DimensionMismatch { expected: n, got: center.len() });
        }
        if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(&l, &h)| !(l < h)) {
            return Err(ProblemError::BadDomain);
        }
        let mu = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let lipschitz = spectrum.iter().cloned().fold(0.0, f64::max);
        // sup-norm gradient bound is exact for a separable quadratic
        let grad_bound = spectrum
            .iter()
            .zip(center)
            .zip(lo.iter().zip(hi))
            .map(|((&l, &c), (&a, &b))| l * (a - c).abs().max((b - c).abs()))
            .fold(0.0, f64::max);
        Ok(Problem {
            kind: ProblemKind::PlQuadratic { spectrum: spectrum.to_vec(), center: center.to_vec() },
            name: "pl_quadratic".into(),
            dim: n,
            f_star: Some(0.0),
            minimizers: vec![center.to_vec()],
            pl: Some(PlConstants { mu, lipschitz, estimated: false }),
            domain_lo: lo.to_vec(),
            domain_hi: hi.to_vec(),
            grad_bound,
            grad_bound_estimated: false,
        })
    }

    pub fn by_name(name: &str, spectrum: Option<&[f64]>, center: Option<&[f64]>) -> Result<Self, ProblemError> {
        match name {
            "camel3" => Ok(Self::camel3()),
            "rosenbrock" => Ok(Self::rosenbrock()),
            "pl_quadratic" => {
                let spectrum = spectrum.ok_or(ProblemError::BadSpectrum)?;
                let default_center = vec![0.0; spectrum.len()];
                let center = center.unwrap_or(&default_center);
                Self::pl_quadratic(spectrum, center)
            }
            other => Err(ProblemError::UnknownProblem(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn minimizers(&self) -> &[Vec<f64>] {
        &self.minimizers
    }

    pub fn pl_constants(&self) -> Option<PlConstants> {
        self.pl
    }

    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.domain_lo, &self.domain_hi)
    }

    /// Sup-norm gradient bound over the domain box: exact for quadratics,
    /// otherwise the maximum over a grid (see `grad_bound_estimated`).
    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }

    pub fn grad_bound_estimated(&self) -> bool {
        self.grad_bound_estimated
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        match &self.kind {
            ProblemKind::Camel3 => {
                let (x1, x2) = (x[0], x[1]);
                2.0 * x1 * x1 - 1.05 * x1.powi(4) + x1.powi(6) / 6.0 + x1 * x2 + x2 * x2
            }
            ProblemKind::Rosenbrock => {
                let (x1, x2) = (x[0], x[1]);
                (1.0 - x1).powi(2) + 100.0 * (x2 - x1 * x1).powi(2)
            }
            ProblemKind::PlQuadratic { spectrum, center } => {
                0.5 * spectrum
                    .iter()
                    .zip(center)
                    .zip(x)
                    .map(|((&l, &c), &xi)| l * (xi - c) * (xi - c))
                    .sum::<f64>()
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        match &self.kind {
            ProblemKind::Camel3 => {
                let (x1, x2) = (x[0], x[1]);
                vec![4.0 * x1 - 4.2 * x1.powi(3) + x1.powi(5) + x2, x1 + 2.0 * x2]
            }
            ProblemKind::Rosenbrock => {
                let (x1, x2) = (x[0], x[1]);
                vec![
                    -2.0 * (1.0 - x1) - 400.0 * x1 * (x2 - x1 * x1),
                    200.0 * (x2 - x1 * x1),
                ]
            }
            ProblemKind::PlQuadratic { spectrum, center } => spectrum
                .iter()
                .zip(center)
                .zip(x)
                .map(|((&l, &c), &xi)| l * (xi - c))
                .collect(),
        }
    }

    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval(x), self.grad(x))
    }

    /// Central finite differences (f(x+heᵢ) − f(x−heᵢ))/(2h); verification
    /// oracle for the analytic gradients.
    pub fn finite_diff_gradient(&self, x: &[f64], h: f64) -> Vec<f64> {
        assert!(h > 0.0, "finite-difference step must be positive");
        self.check_dim(x);
        let mut out = vec![0.0; self.dim];
        let mut probe = x.to_vec();
        for i in 0..self.dim {
            probe[i] = x[i] + h;
            let plus = self.eval(&probe);
            probe[i] = x[i] - h;
            let minus = self.eval(&probe);
            probe[i] = x[i];
            out[i] = (plus - minus) / (2.0 * h);
        }
        out
    }

    /// Gradient sample with bounded zero-mean noise. `kind == None` or σ = 0
    /// return the exact gradient unchanged.
    pub fn stochastic_gradient<R: Rng>(
        &self,
        x: &[f64],
        noise: &NoiseSpec,
        rng: &mut R,
    ) -> GradientSample {
        let (f, mut g) = self.eval_grad(x);
        let stochastic = noise.perturb(&mut g, rng);
        GradientSample { g, f_value: f, is_stochastic: stochastic }
    }

    /// True when the exact gradient at `x` already violates the clip bound,
    /// so the noisy oracle cannot stay centered on it.
    pub fn clip_infeasible(&self, x: &[f64], noise: &NoiseSpec) -> bool {
        let g = self.grad(x);
        g.iter().any(|v| v.abs() > noise.clip_bound)
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "{}: expected {} coordinates", self.name, self.dim);
    }

    fn grid_grad_bound(&self, points_per_axis: usize) -> f64 {
        assert_eq!(self.dim, 2);
        let mut bound: f64 = 0.0;
        for i in 0..points_per_axis {
            for j in 0..points_per_axis {
                let t = |idx: usize, lo: f64, hi: f64| {
                    lo + (hi - lo) * idx as f64 / (points_per_axis - 1) as f64
                };
                let x = [
                    t(i, self.domain_lo[0], self.domain_hi[0]),
                    t(j, self.domain_lo[1], self.domain_hi[1]),
                ];
                for gi in self.grad(&x) {
                    bound = bound.max(gi.abs());
                }
            }
        }
        bound
    }
}
