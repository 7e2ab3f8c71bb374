//! Discrete dynamic movement primitives.
//!
//! Per dimension, with `tau` the demo duration:
//!
//! ```text
//! tau * dv/dt = alpha_z * (beta_z * (g - y) - v) + f(x)
//! tau * dy/dt = v
//! tau * dx/dt = -alpha_x * x,           x(0) = 1
//! f(x) = x * sum_i(psi_i(x) * w_i) / sum_i(psi_i(x))
//! psi_i(x) = exp(-h_i * (x - c_i)^2)
//! ```
//!
//! The forcing term is not scaled by `g - y0`, so a motionless demo fits to
//! exactly zero weights.

mod demo;
mod skill;

use serde::{Deserialize, Serialize};

pub use demo::DemonstrationTrajectory;
pub use skill::{register_skill, skill_name, SkillStore, WORKSPACE_LIMIT};

/// Ridge term added to every regression denominator.
pub const RIDGE: f64 = 1e-8;
/// A basis whose weighted phase mass falls below this is reported as singular.
const SINGULAR_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DmpError {
    #[error("degenerate demonstration: {0}")]
    DegenerateDemo(String),
    #[error("n_basis must be at least 2, got {0}")]
    TooFewBasis(usize),
    #[error("gains must be positive")]
    BadGains,
    #[error("dt must lie in (0, T/10], got {0}")]
    BadDt(f64),
    #[error("duration factor must be at least 1, got {0}")]
    BadDurationFactor(f64),
    #[error("skill descriptions cannot be empty")]
    EmptyDescription,
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
    #[error("registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
}

impl Default for Gains {
    /// Critically damped transformation system.
    fn default() -> Self {
        let alpha_z = 25.0;
        Self {
            alpha_z,
            beta_z: alpha_z / 4.0,
            alpha_x: alpha_z / 3.0,
        }
    }
}

impl Gains {
    fn valid(&self) -> bool {
        [self.alpha_z, self.beta_z, self.alpha_x]
            .iter()
            .all(|g| g.is_finite() && *g > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpModel {
    pub n_basis: usize,
    pub duration: f64,
    pub gains: Gains,
    /// Basis centers in phase space, strictly decreasing.
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub y0: Vec<f64>,
    pub goal: Vec<f64>,
    /// `weights[d][i]` for dimension `d`, basis `i`.
    pub weights: Vec<Vec<f64>>,
}

/// A basis function the regression could barely see; its weight is ridge-dominated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularRegression {
    pub dimension: usize,
    pub basis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `positions[k][d]` at `times[k]`.
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl Rollout {
    pub fn last_position(&self) -> &[f64] {
        self.positions.last().map_or(&[], Vec::as_slice)
    }
}

/// Centers equally spaced in time, mapped through the canonical decay;
/// widths from the gap to the next center, last width copied.
pub fn basis(n_basis: usize, alpha_x: f64) -> (Vec<f64>, Vec<f64>) {
    let centers: Vec<f64> = (0..n_basis)
        .map(|i| (-alpha_x * i as f64 / (n_basis - 1) as f64).exp())
        .collect();
    let mut widths: Vec<f64> = centers.windows(2).map(|w| 1.0 / (w[1] - w[0]).powi(2)).collect();
    widths.push(*widths.last().expect("n_basis >= 2"));
    (centers, widths)
}

/// Derivative of samples `y` at non-uniform times `t`: three-point central
/// differences inside, one-sided at the ends.
fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        d[i] = (hm * hm * (y[i + 1] - y[i]) + hp * hp * (y[i] - y[i - 1])) / (hm * hp * (hm + hp));
    }
    d[0] = (y[1] - y[0]) / (t[1] - t[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    d
}

impl DmpModel {
    fn psi(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(move |(c, h)| (-h * (x - c).powi(2)).exp())
    }

    pub fn forcing(&self, dim: usize, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (psi, w) in self.psi(x).zip(&self.weights[dim]) {
            num += psi * w;
            den += psi;
        }
        if den <= f64::MIN_POSITIVE {
            0.0
        } else {
            x * num / den
        }
    }

    pub fn dims(&self) -> usize {
        self.goal.len()
    }

    /// Phase at time `t` of the canonical system.
    pub fn phase(&self, t: f64) -> f64 {
        (-self.gains.alpha_x * t / self.duration).exp()
    }

    /// Right-hand side of the coupled system, returning `(dy/dt, dv/dt, dx/dt)`.
    pub fn derivatives(&self, y: &[f64], v: &[f64], x: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let tau = self.duration;
        let Gains { alpha_z, beta_z, alpha_x } = self.gains;
        let dy = v.iter().map(|vd| vd / tau).collect();
        let dv = (0..self.dims())
            .map(|d| (alpha_z * (beta_z * (self.goal[d] - y[d]) - v[d]) + self.forcing(d, x)) / tau)
            .collect();
        (dy, dv, -alpha_x * x / tau)
    }

    /// Same model aimed at a different goal.
    pub fn with_goal(&self, goal: Vec<f64>) -> Self {
        Self { goal, ..self.clone() }
    }

    pub fn with_start(&self, y0: Vec<f64>) -> Self {
        Self { y0, ..self.clone() }
    }

    /// Explicit Euler over `duration * duration_factor` seconds.
    pub fn rollout(&self, dt: f64, duration_factor: f64) -> Result<Rollout, DmpError> {
        if !(dt > 0.0 && dt <= self.duration / 10.0) {
            return Err(DmpError::BadDt(dt));
        }
        if !(duration_factor >= 1.0 && duration_factor.is_finite()) {
            return Err(DmpError::BadDurationFactor(duration_factor));
        }
        let steps = (self.duration * duration_factor / dt).round() as usize;
        let mut y = self.y0.clone();
        let mut v = vec![0.0; self.dims()];
        let mut x = 1.0;
        let mut out = Rollout {
            dt,
            times: Vec::with_capacity(steps + 1),
            positions: Vec::with_capacity(steps + 1),
            velocities: Vec::with_capacity(steps + 1),
        };
        for k in 0..=steps {
            out.times.push(k as f64 * dt);
            out.positions.push(y.clone());
            out.velocities.push(v.iter().map(|vd| vd / self.duration).collect());
            if k == steps {
                break;
            }
            let (dy, dv, dx) = self.derivatives(&y, &v, x);
            for d in 0..self.dims() {
                y[d] += dy[d] * dt;
                v[d] += dv[d] * dt;
            }
            x += dx * dt;
        }
        Ok(out)
    }
}

/// Fits one model per demo, reporting bases the regression could not constrain.
pub fn fit_with_report(
    demo: &DemonstrationTrajectory,
    n_basis: usize,
    gains: Gains,
) -> Result<(DmpModel, Vec<SingularRegression>), DmpError> {
    demo.validate()?;
    if n_basis < 2 {
        return Err(DmpError::TooFewBasis(n_basis));
    }
    if !gains.valid() {
        return Err(DmpError::BadGains);
    }
    let tau = demo.duration();
    if tau <= 0.0 {
        return Err(DmpError::DegenerateDemo("zero duration".into()));
    }
    let (centers, widths) = basis(n_basis, gains.alpha_x);
    let dims = demo.dims();
    let y0 = demo.positions[0].clone();
    let goal = demo.positions.last().expect("validated").clone();
    let mut model = DmpModel {
        n_basis,
        duration: tau,
        gains,
        centers,
        widths,
        y0,
        goal,
        weights: vec![vec![0.0; n_basis]; dims],
    };
    let phases: Vec<f64> = demo.times.iter().map(|&t| model.phase(t)).collect();
    let psis: Vec<Vec<f64>> = phases.iter().map(|&x| model.psi(x).collect()).collect();
    let mut singular = Vec::new();
    for d in 0..dims {
        let y: Vec<f64> = demo.positions.iter().map(|p| p[d]).collect();
        let yd = derivative(&demo.times, &y);
        let ydd = derivative(&demo.times, &yd);
        let g = model.goal[d];
        let Gains { alpha_z, beta_z, .. } = gains;
        let target: Vec<f64> = (0..y.len())
            .map(|k| tau * tau * ydd[k] - alpha_z * (beta_z * (g - y[k]) - tau * yd[k]))
            .collect();
        for i in 0..n_basis {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..y.len() {
                let s = phases[k];
                num += s * psis[k][i] * target[k];
                den += s * s * psis[k][i];
            }
            if den < SINGULAR_MASS {
                singular.push(SingularRegression { dimension: d, basis: i });
            }
            model.weights[d][i] = num / (den + RIDGE);
        }
    }
    Ok((model, singular))
}

pub fn fit(demo: &DemonstrationTrajectory, n_basis: usize, gains: Gains) -> Result<DmpModel, DmpError> {
    fit_with_report(demo, n_basis, gains).map(|(m, _)| m)
}
