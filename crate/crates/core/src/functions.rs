//! Smooth terms `h` and prox-friendly terms `g`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{cholesky, cholesky_solve, dot, norm, symmetric_eigenvalues, LinearMap};
use crate::rng::Lcg;

/// A differentiable function with Lipschitz gradient.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Declared Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    fn bounded_below(&self) -> bool;
    fn coercive(&self) -> bool;
    /// Exposes the quadratic structure when there is one, which enables the
    /// closed-form x-steps.
    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }
}

/// `h(x) = ½ xᵀHx − qᵀx + c` with symmetric `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    n: usize,
    hess: Vec<f64>,
    lin: Vec<f64>,
    constant: f64,
    lipschitz: f64,
    bounded_below: bool,
    coercive: bool,
}

impl Quadratic {
    /// General quadratic. Boundedness flags are derived conservatively from
    /// the spectrum of `H`.
    pub fn new(n: usize, hess: Vec<f64>, lin: Vec<f64>, constant: f64) -> Result<Self> {
        if hess.len() != n * n || lin.len() != n {
            return Err(Error::Dimension("quadratic: inconsistent sizes".into()));
        }
        let ev = symmetric_eigenvalues(&hess, n);
        let lo = ev.first().copied().unwrap_or(0.0);
        let hi = ev.last().copied().unwrap_or(0.0);
        let lipschitz = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * hi.abs().max(1.0);
        let coercive = n > 0 && lo > tol;
        let bounded_below = coercive || (lo >= -tol && lin.iter().all(|v| *v == 0.0));
        Ok(Quadratic { n, hess, lin, constant, lipschitz, bounded_below, coercive })
    }

    /// `½‖Bx − b‖²` with `L = λ_max(B*B)`.
    pub fn least_squares(b_mat: &LinearMap, b: &[f64]) -> Result<Self> {
        if b.len() != b_mat.rows() {
            return Err(Error::Dimension("least_squares: rhs length".into()));
        }
        let hess = b_mat.gram_ata();
        let lin = b_mat.adjoint(b)?;
        let mut q = Self::new(b_mat.cols(), hess, lin, 0.5 * dot(b, b))?;
        q.bounded_below = true;
        Ok(q)
    }

    /// `½‖x − c‖²`.
    pub fn half_sq_dist(c: &[f64]) -> Self {
        let n = c.len();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            hess[i * n + i] = 1.0;
        }
        Quadratic {
            n,
            hess,
            lin: c.to_vec(),
            constant: 0.5 * dot(c, c),
            lipschitz: 1.0,
            bounded_below: true,
            coercive: true,
        }
    }

    /// The constant function `c` on `R^n`.
    pub fn constant(n: usize, c: f64) -> Self {
        Quadratic {
            n,
            hess: vec![0.0; n * n],
            lin: vec![0.0; n],
            constant: c,
            lipschitz: 0.0,
            bounded_below: true,
            coercive: false,
        }
    }

    /// `qᵀx`, which is unbounded below unless `q = 0`.
    pub fn linear(q: &[f64]) -> Self {
        let n = q.len();
        Quadratic {
            n,
            hess: vec![0.0; n * n],
            lin: q.iter().map(|v| -v).collect(),
            constant: 0.0,
            lipschitz: 0.0,
            bounded_below: q.iter().all(|v| *v == 0.0),
            coercive: false,
        }
    }

    /// Overrides the declared Lipschitz constant, e.g. to study an
    /// understated `L`.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn hessian(&self) -> &[f64] {
        &self.hess
    }

    /// The vector `q` in `½xᵀHx − qᵀx + c`.
    pub fn linear_term(&self) -> &[f64] {
        &self.lin
    }

    /// `prox_{t h}(v)`, the solution of `(I + tH) x = v + t q`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let mut sys: Vec<f64> = self.hess.iter().map(|h| t * h).collect();
        for i in 0..n {
            sys[i * n + i] += 1.0;
        }
        let rhs: Vec<f64> = v.iter().zip(&self.lin).map(|(vi, qi)| vi + t * qi).collect();
        let l = cholesky(&sys, n)?;
        Ok(cholesky_solve(&l, n, &rhs))
    }

    fn hv(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| dot(&self.hess[i * n..(i + 1) * n], x)).collect()
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64]) -> f64 {
        0.5 * dot(&self.hv(x), x) - dot(&self.lin, x) + self.constant
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hv(x);
        for (gi, qi) in g.iter_mut().zip(&self.lin) {
            *gi -= qi;
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn bounded_below(&self) -> bool {
        self.bounded_below
    }

    fn coercive(&self) -> bool {
        self.coercive
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// `Σ cos(x_i)`: smooth, nonconvex, bounded below, gradient 1-Lipschitz.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSum {
    pub n: usize,
}

impl SmoothFunction for CosineSum {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.cos()).sum()
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v.sin()).collect()
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn bounded_below(&self) -> bool {
        true
    }
    fn coercive(&self) -> bool {
        false
    }
}

/// Componentwise soft thresholding `sign(v)·max(|v| − γλ, 0)`.
pub fn prox_l1(v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let thr = gamma * lambda;
    v.iter().map(|x| x.signum() * (x.abs() - thr).max(0.0)).collect()
}

/// Componentwise hard thresholding at `√(2γλ)`; ties go to zero.
pub fn prox_l0(v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let thr = (2.0 * gamma * lambda).sqrt();
    v.iter().map(|x| if x.abs() > thr { *x } else { 0.0 }).collect()
}

/// Projection onto the box `[lower, upper]`.
pub fn prox_box(v: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != v.len() || upper.len() != v.len() {
        return Err(Error::Dimension("box bounds length".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::InvalidInput("box needs lower <= upper".into()));
    }
    Ok(v.iter().zip(lower.iter().zip(upper)).map(|(x, (l, u))| x.clamp(*l, *u)).collect())
}

/// Prox of `(λ/2)‖· − c‖²`, i.e. `(v + γλc)/(1 + γλ)`.
pub fn prox_quadratic(v: &[f64], gamma: f64, c: &[f64], lambda: f64) -> Vec<f64> {
    let gl = gamma * lambda;
    v.iter().zip(c).map(|(vi, ci)| (vi + gl * ci) / (1.0 + gl)).collect()
}

/// Tests `y ∈ λ∂‖·‖₁(z)` componentwise.
pub fn subdiff_member_l1(z: &[f64], y: &[f64], lambda: f64, tol: f64) -> bool {
    z.iter().zip(y).all(|(zi, yi)| {
        if zi.abs() <= tol {
            yi.abs() <= lambda + tol
        } else {
            (yi - lambda * zi.signum()).abs() <= tol
        }
    })
}

/// Tests `y ∈ ∂(λ‖·‖₀)(z)`: anything where `z_i = 0`, zero elsewhere.
pub fn subdiff_member_l0(z: &[f64], y: &[f64], _lambda: f64, tol: f64) -> bool {
    z.iter().zip(y).all(|(zi, yi)| *zi == 0.0 || yi.abs() <= tol)
}

/// The nonsmooth term `g`. Each variant has an exact prox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFunction {
    Zero,
    L1 { lambda: f64 },
    L0 { lambda: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `(λ/2)‖z − c‖²`.
    Quadratic { lambda: f64, c: Vec<f64> },
}

impl ProxFunction {
    /// Value, `+∞` outside the domain of an indicator.
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            ProxFunction::Zero => 0.0,
            ProxFunction::L1 { lambda } => lambda * z.iter().map(|v| v.abs()).sum::<f64>(),
            ProxFunction::L0 { lambda } => lambda * z.iter().filter(|v| **v != 0.0).count() as f64,
            ProxFunction::Box { lower, upper } => {
                let inside = z.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| l <= v && v <= u);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::Quadratic { lambda, c } => {
                0.5 * lambda * z.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
        }
    }

    /// One minimizer of `g(w) + ‖v − w‖²/(2γ)`.
    pub fn prox(&self, v: &[f64], gamma: f64) -> Vec<f64> {
        match self {
            ProxFunction::Zero => v.to_vec(),
            ProxFunction::L1 { lambda } => prox_l1(v, gamma, *lambda),
            ProxFunction::L0 { lambda } => prox_l0(v, gamma, *lambda),
            ProxFunction::Box { lower, upper } => {
                v.iter().zip(lower.iter().zip(upper)).map(|(x, (l, u))| x.clamp(*l, *u)).collect()
            }
            ProxFunction::Quadratic { lambda, c } => prox_quadratic(v, gamma, c, *lambda),
        }
    }

    /// Tests `y ∈ ∂g(z)` (limiting subdifferential) up to `tol`.
    pub fn subdiff_member(&self, z: &[f64], y: &[f64], tol: f64) -> bool {
        match self {
            ProxFunction::Zero => y.iter().all(|v| v.abs() <= tol),
            ProxFunction::L1 { lambda } => subdiff_member_l1(z, y, *lambda, tol),
            ProxFunction::L0 { lambda } => subdiff_member_l0(z, y, *lambda, tol),
            ProxFunction::Box { lower, upper } => {
                z.iter().zip(y).zip(lower.iter().zip(upper)).all(|((zi, yi), (l, u))| {
                    if *zi < l - tol || *zi > u + tol {
                        return false;
                    }
                    let at_lo = (zi - l).abs() <= tol;
                    let at_hi = (zi - u).abs() <= tol;
                    match (at_lo, at_hi) {
                        (true, true) => true,
                        (true, false) => *yi <= tol,
                        (false, true) => *yi >= -tol,
                        (false, false) => yi.abs() <= tol,
                    }
                })
            }
            ProxFunction::Quadratic { lambda, c } => {
                z.iter().zip(y).zip(c).all(|((zi, yi), ci)| (yi - lambda * (zi - ci)).abs() <= tol)
            }
        }
    }

    pub fn coercive(&self) -> bool {
        match self {
            ProxFunction::Zero | ProxFunction::L0 { .. } => false,
            ProxFunction::L1 { lambda } | ProxFunction::Quadratic { lambda, .. } => *lambda > 0.0,
            ProxFunction::Box { .. } => true,
        }
    }

    pub fn bounded_below(&self) -> bool {
        true
    }
}

/// `g(w) + ‖v − w‖²/(2γ)`.
pub fn prox_objective(g: &ProxFunction, v: &[f64], w: &[f64], gamma: f64) -> f64 {
    let d: f64 = v.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
    g.eval(w) + d / (2.0 * gamma)
}

/// A uniform grid `lo, lo + step, …, ≤ hi` used on every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

/// Brute-force grid minimizer of the prox subproblem, for dimensions 1 and 2.
pub fn prox_oracle(g: &ProxFunction, v: &[f64], gamma: f64, grid: Grid) -> Result<Vec<f64>> {
    let pts = grid.points()?;
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |w: Vec<f64>| {
        let val = prox_objective(g, v, &w, gamma);
        if val < best.0 {
            best = (val, w);
        }
    };
    match v.len() {
        1 => pts.iter().for_each(|a| consider(vec![*a])),
        2 => {
            for a in &pts {
                for b in &pts {
                    consider(vec![*a, *b]);
                }
            }
        }
        d => return Err(Error::InvalidInput(format!("prox_oracle supports dim 1 or 2, got {d}"))),
    }
    if best.1.is_empty() {
        return Err(Error::InvalidInput("grid has no finite objective value".into()));
    }
    Ok(best.1)
}

/// Finite-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// `max_i |∇h(x)_i − central difference_i| / (1 + |∇h(x)_i|)`.
pub fn grad_check(h: &dyn SmoothFunction, x: &[f64]) -> f64 {
    let g = h.grad(x);
    let mut worst = 0.0_f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + FD_STEP;
        let fp = h.eval(&xp);
        xp[i] = x[i] - FD_STEP;
        let fm = h.eval(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * FD_STEP);
        worst = worst.max((g[i] - fd).abs() / (1.0 + g[i].abs()));
    }
    worst
}

const SAMPLE_BOX: f64 = 3.0;

fn upper_model_holds(h: &dyn SmoothFunction, x: &[f64], y: &[f64], z: &[f64]) -> bool {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let lhs = h.eval(y);
    let rhs = h.eval(x) + dot(&h.grad(z), &d) + 0.5 * h.lipschitz() * dot(&d, &d);
    lhs <= rhs + 1e-9 * (1.0 + lhs.abs())
}

/// Checks `h(y) ≤ h(x) + ⟨∇h(z), y − x⟩ + (L/2)‖y − x‖²` for random `x, y`
/// and `z` in `{x, y, (x + y)/2}`.
pub fn semiconvexity_check(h: &dyn SmoothFunction, samples: usize, seed: u64) -> bool {
    let mut rng = Lcg::new(seed);
    let n = h.dim();
    (0..samples).all(|_| {
        let x = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        let y = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        [&x, &y, &mid].iter().all(|z| upper_model_holds(h, &x, &y, z))
    })
}

/// The descent lemma: the `z = x` case of [`semiconvexity_check`].
pub fn descent_lemma_check(h: &dyn SmoothFunction, samples: usize, seed: u64) -> bool {
    let mut rng = Lcg::new(seed);
    let n = h.dim();
    (0..samples).all(|_| {
        let x = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        let y = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        upper_model_holds(h, &x, &y, &x)
    })
}

/// Checks `‖∇h(x) − ∇h(y)‖ ≤ L‖x − y‖` on random pairs.
pub fn lipschitz_check(h: &dyn SmoothFunction, samples: usize, seed: u64) -> bool {
    let mut rng = Lcg::new(seed);
    let n = h.dim();
    (0..samples).all(|_| {
        let x = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        let y = rng.uniform_vec(n, -SAMPLE_BOX, SAMPLE_BOX);
        let dg: Vec<f64> = h.grad(&x).iter().zip(h.grad(&y)).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        norm(&dg) <= h.lipschitz() * norm(&dx) + 1e-9
    })
}
