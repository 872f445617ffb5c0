//! Convex dual problems for the entropy-minimizing targets.
//!
//! For one species the target `exp(lam . a)` with `a(v) = m (1, v, |v|^2)`
//! satisfying `int nu a exp(lam . a) dv = rho` is the minimizer of
//!
//! ```text
//! z(lam; rho) = int nu exp(lam . a) dv - lam . rho
//! ```
//!
//! whose gradient is `mu(exp_lam) - rho` and whose Hessian
//! `int nu a (x) a exp_lam dv` is positive definite on `{l2 < 0}`. The
//! cross-species pair problem has the same structure with six unknowns:
//! two mass multipliers and a shared momentum/energy block.
//!
//! Solves run a damped Newton iteration in a shifted and rescaled velocity
//! frame (origin at the guessed drift, unit thermal speed, unit weighted
//! mass) and map the multipliers back on return. Newton steps are invariant
//! under that linear change of variables; the frame only improves the
//! conditioning of the linear solves and balances the stopping test.

use nalgebra::{SMatrix, SVector};

use crate::error::{check_len, BgkError, Result};
use crate::grid::{Vec3, VelocityGrid};
use crate::kinetics::{
    dot, lambda_from_macros, norm2, Distribution, FrequencyField, MixedMomentVector6,
    MixedMultipliers, MomentVector5, Multipliers,
};

/// Controls for the damped Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once `|grad z| / |rho|` falls below this (checked in the solve
    /// frame and in the caller's units).
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Smallest step length tried before the line search gives up.
    pub min_step: f64,
    /// Tikhonov shift added to the Hessian diagonal.
    pub hessian_ridge: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 200,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            min_step: 1e-12,
            hessian_ridge: 0.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BgkError::Config(msg));
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad(format!("armijo_c must lie in (0,1), got {}", self.armijo_c));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad(format!(
                "backtrack_factor must lie in (0,1), got {}",
                self.backtrack_factor
            ));
        }
        if !(self.min_step > 0.0 && self.min_step < 1.0) {
            return bad(format!("min_step must lie in (0,1), got {}", self.min_step));
        }
        if !(self.hessian_ridge >= 0.0 && self.hessian_ridge.is_finite()) {
            return bad(format!(
                "hessian_ridge must be nonnegative, got {}",
                self.hessian_ridge
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Newton steps taken.
    pub iterations: usize,
    /// Relative gradient norm `|grad z| / |rho|` at the returned point, in
    /// the caller's units.
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Dual objective at every accepted iterate, starting with the initial guess.
    pub objective_history: Vec<f64>,
    /// Objective change of every accepted step, evaluated without
    /// cancellation. All entries are strictly negative.
    pub decrements: Vec<f64>,
    /// Energy multiplier at the last iterate; tends to `0-` when the moment
    /// vector is not realizable.
    pub final_l2: f64,
}

/// Value, gradient and Hessian of a dual objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation<const D: usize> {
    pub value: f64,
    pub gradient: SVector<f64, D>,
    pub hessian: SMatrix<f64, D, D>,
}

/// `int nu h(g) dv` with `h(z) = z ln z - z` and `h(0) = 0`.
pub fn weighted_entropy(g: &Distribution, nu: &FrequencyField, grid: &VelocityGrid) -> Result<f64> {
    check_len(grid.len(), g.len())?;
    check_len(grid.len(), nu.len())?;
    let sum: f64 = g
        .values()
        .iter()
        .zip(nu.values())
        .map(|(&x, &w)| w * entropy_density(x))
        .sum();
    Ok(grid.weight() * sum)
}

pub(crate) fn entropy_density(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln() - x
    } else {
        0.0
    }
}

/// `exp(x) - 1 - x` without cancellation near zero.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..=14 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// Velocity frame of a solve: `v = origin + scale * w`, densities divided by `sigma`.
#[derive(Debug, Clone, Copy)]
struct Frame {
    origin: Vec3,
    scale: f64,
    sigma: f64,
}

impl Frame {
    const IDENTITY: Frame = Frame {
        origin: [0.0; 3],
        scale: 1.0,
        sigma: 1.0,
    };
}

struct Block<'a> {
    mass: f64,
    nu: &'a [f64],
}

/// Layout: `D = blocks + 4`; entries `0..blocks` are the per-species mass
/// multipliers, then the shared momentum (3) and energy (1) multipliers.
struct Problem<'a, const D: usize> {
    grid: &'a VelocityGrid,
    blocks: Vec<Block<'a>>,
    frame: Frame,
    /// Target moments in frame units.
    target: SVector<f64, D>,
}

struct Point<const D: usize> {
    eta: SVector<f64, D>,
    value: f64,
    gradient: SVector<f64, D>,
    hessian: SMatrix<f64, D, D>,
    /// Per block: max exponent and `exp(e_i - max)` per node.
    shifted: Vec<(f64, Vec<f64>)>,
}

impl<'a, const D: usize> Problem<'a, D> {
    fn nb(&self) -> usize {
        D - 4
    }

    fn local_index(&self, block: usize, j: usize) -> usize {
        if j == 0 {
            block
        } else {
            self.nb() + j - 1
        }
    }

    fn basis(&self, v: Vec3) -> [f64; 5] {
        let f = &self.frame;
        let w = [0, 1, 2].map(|a| (v[a] - f.origin[a]) / f.scale);
        [1.0, w[0], w[1], w[2], norm2(w)]
    }

    /// Per-block reduced exponent coefficients `(eta_k, eta_1, eta_2)`.
    fn block_coeffs(&self, eta: &SVector<f64, D>, block: usize) -> [f64; 5] {
        let nb = self.nb();
        [eta[block], eta[nb], eta[nb + 1], eta[nb + 2], eta[nb + 3]]
    }

    fn in_domain(&self, eta: &SVector<f64, D>) -> bool {
        eta[D - 1] < 0.0 && eta.iter().all(|x| x.is_finite())
    }

    fn evaluate(&self, eta: SVector<f64, D>) -> Result<Point<D>> {
        if !self.in_domain(&eta) {
            return Err(BgkError::Domain(format!(
                "energy multiplier must be negative, got {}",
                eta[D - 1]
            )));
        }
        let weight = self.grid.weight();
        let mut value = 0.0;
        let mut gradient = SVector::<f64, D>::zeros();
        let mut hessian = SMatrix::<f64, D, D>::zeros();
        let mut shifted = Vec::with_capacity(self.nb());
        for (k, block) in self.blocks.iter().enumerate() {
            let c = self.block_coeffs(&eta, k);
            let m = block.mass;
            let exponents: Vec<f64> = self
                .grid
                .nodes()
                .iter()
                .map(|&v| {
                    let b = self.basis(v);
                    m * (0..5).map(|j| c[j] * b[j]).sum::<f64>()
                })
                .collect();
            let shift = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut zeroth = 0.0;
            let mut first = [0.0; 5];
            let mut second = [[0.0; 5]; 5];
            let mut scaled = Vec::with_capacity(exponents.len());
            for ((&v, &e), &nu) in self.grid.nodes().iter().zip(&exponents).zip(block.nu) {
                let x = (e - shift).exp();
                scaled.push(x);
                let wx = nu * x;
                zeroth += wx;
                let b = self.basis(v);
                for i in 0..5 {
                    let wb = wx * b[i];
                    first[i] += wb;
                    for j in i..5 {
                        second[i][j] += wb * b[j];
                    }
                }
            }
            let scale = weight * shift.exp();
            if !scale.is_finite() {
                return Err(BgkError::Overflow("dual objective"));
            }
            value += scale * zeroth;
            for i in 0..5 {
                let gi = self.local_index(k, i);
                gradient[gi] += scale * m * first[i];
                for j in i..5 {
                    let gj = self.local_index(k, j);
                    let h = scale * m * m * second[i][j];
                    hessian[(gi, gj)] += h;
                    if gi != gj {
                        hessian[(gj, gi)] += h;
                    }
                }
            }
            shifted.push((shift, scaled));
        }
        if !value.is_finite() {
            return Err(BgkError::Overflow("dual objective"));
        }
        value -= eta.dot(&self.target);
        gradient -= self.target;
        Ok(Point {
            eta,
            value,
            gradient,
            hessian,
            shifted,
        })
    }

    /// `z(eta + t d) - z(eta) - t grad . d`, which is nonnegative by convexity.
    fn remainder(&self, at: &Point<D>, dir: &SVector<f64, D>, t: f64) -> f64 {
        let weight = self.grid.weight();
        let mut total = 0.0;
        for (k, block) in self.blocks.iter().enumerate() {
            let c = self.block_coeffs(dir, k);
            let (shift, scaled) = &at.shifted[k];
            let sum: f64 = self
                .grid
                .nodes()
                .iter()
                .zip(scaled)
                .zip(block.nu)
                .map(|((&v, &x), &nu)| {
                    let b = self.basis(v);
                    let de = block.mass * (0..5).map(|j| c[j] * b[j]).sum::<f64>();
                    nu * x * expm1_minus_x(t * de)
                })
                .sum();
            total += weight * shift.exp() * sum;
        }
        total
    }

    // --- frame transforms ---

    fn eta_from_lambda(&self, lam: &[f64; D]) -> SVector<f64, D> {
        let nb = self.nb();
        let Frame {
            origin: o,
            scale: c,
            sigma,
        } = self.frame;
        let l1 = [lam[nb], lam[nb + 1], lam[nb + 2]];
        let l2 = lam[nb + 3];
        let mut eta = SVector::<f64, D>::zeros();
        for k in 0..nb {
            eta[k] = lam[k] + dot(l1, o) + l2 * norm2(o) - sigma.ln() / self.blocks[k].mass;
        }
        for a in 0..3 {
            eta[nb + a] = c * (l1[a] + 2.0 * l2 * o[a]);
        }
        eta[nb + 3] = c * c * l2;
        eta
    }

    fn lambda_from_eta(&self, eta: &SVector<f64, D>) -> [f64; D] {
        let nb = self.nb();
        let Frame {
            origin: o,
            scale: c,
            sigma,
        } = self.frame;
        let l2 = eta[nb + 3] / (c * c);
        let l1 = [0, 1, 2].map(|a| eta[nb + a] / c - 2.0 * l2 * o[a]);
        let mut lam = [0.0; D];
        for k in 0..nb {
            lam[k] =
                eta[k] + sigma.ln() / self.blocks[k].mass - dot(l1, o) - l2 * norm2(o);
        }
        lam[nb..nb + 3].copy_from_slice(&l1);
        lam[nb + 3] = l2;
        lam
    }

    /// Moment-like vector from caller units into frame units.
    fn moments_to_frame(&self, mu: &[f64; D]) -> SVector<f64, D> {
        let nb = self.nb();
        let Frame {
            origin: o,
            scale: c,
            sigma,
        } = self.frame;
        let mut x = SVector::<f64, D>::zeros();
        let mut total0 = 0.0;
        for k in 0..nb {
            x[k] = mu[k] / sigma;
            total0 += x[k];
        }
        let mut x1 = [0.0; 3];
        for a in 0..3 {
            x1[a] = (mu[nb + a] / sigma - o[a] * total0) / c;
            x[nb + a] = x1[a];
        }
        x[nb + 3] = (mu[nb + 3] / sigma - 2.0 * c * dot(o, x1) - norm2(o) * total0) / (c * c);
        x
    }

    fn moments_from_frame(&self, x: &SVector<f64, D>) -> [f64; D] {
        let nb = self.nb();
        let Frame {
            origin: o,
            scale: c,
            sigma,
        } = self.frame;
        let mut mu = [0.0; D];
        let mut total0 = 0.0;
        for k in 0..nb {
            mu[k] = sigma * x[k];
            total0 += x[k];
        }
        let x1 = [x[nb], x[nb + 1], x[nb + 2]];
        for a in 0..3 {
            mu[nb + a] = sigma * (c * x1[a] + o[a] * total0);
        }
        mu[nb + 3] = sigma * (c * c * x[nb + 3] + 2.0 * c * dot(o, x1) + norm2(o) * total0);
        mu
    }

    /// Objective in caller units from the frame objective.
    fn objective_to_caller(&self, z: f64) -> f64 {
        let sigma = self.frame.sigma;
        let shift: f64 = (0..self.nb())
            .map(|k| sigma.ln() / self.blocks[k].mass * self.target[k])
            .sum();
        sigma * (z - shift)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn newton<const D: usize>(
    problem: &Problem<'_, D>,
    initial: SVector<f64, D>,
    target_caller: &[f64; D],
    cfg: &NewtonConfig,
) -> Result<([f64; D], SolveReport)> {
    cfg.validate()?;
    let target_norm = problem.target.norm();
    let caller_norm = norm(target_caller);

    let mut point = problem.evaluate(initial)?;
    let mut report = SolveReport {
        iterations: 0,
        final_grad_norm: f64::INFINITY,
        converged: false,
        objective_history: vec![problem.objective_to_caller(point.value)],
        decrements: Vec::new(),
        final_l2: f64::NAN,
    };
    let fail = |reason: String, mut report: SolveReport, point: &Point<D>| {
        report.final_l2 = problem.lambda_from_eta(&point.eta)[D - 1];
        Err(BgkError::SolverFailure {
            reason,
            context: String::new(),
            report: Box::new(report),
        })
    };

    loop {
        let frame_rel = point.gradient.norm() / target_norm;
        let caller_rel = norm(&problem.moments_from_frame(&point.gradient)) / caller_norm;
        report.final_grad_norm = caller_rel;
        if frame_rel <= cfg.grad_tol && caller_rel <= cfg.grad_tol {
            report.converged = true;
            break;
        }
        if report.iterations >= cfg.max_iter {
            return fail("iteration limit reached".into(), report, &point);
        }

        let mut h = point.hessian;
        for i in 0..D {
            h[(i, i)] += cfg.hessian_ridge;
        }
        let Some(chol) = h.cholesky() else {
            return fail("Hessian is not positive definite".into(), report, &point);
        };
        let dir = -chol.solve(&point.gradient);
        let slope = point.gradient.dot(&dir);
        if !(slope < 0.0) {
            return fail("no descent direction".into(), report, &point);
        }

        let mut t = 1.0;
        while !problem.in_domain(&(point.eta + dir * t)) {
            t *= 0.5;
            if t < cfg.min_step {
                return fail("step cannot stay inside the domain".into(), report, &point);
            }
        }
        let decrement = loop {
            let dz = t * slope + problem.remainder(&point, &dir, t);
            if dz.is_finite() && dz <= cfg.armijo_c * t * slope {
                break dz;
            }
            t *= cfg.backtrack_factor;
            if t < cfg.min_step {
                return fail("line search failed".into(), report, &point);
            }
        };

        let next = match problem.evaluate(point.eta + dir * t) {
            Ok(p) => p,
            Err(e) => return fail(format!("evaluation failed: {e}"), report, &point),
        };
        let last = *report.objective_history.last().unwrap();
        report
            .objective_history
            .push(last + problem.frame.sigma * decrement);
        report.decrements.push(problem.frame.sigma * decrement);
        report.iterations += 1;
        point = next;
    }

    let lam = problem.lambda_from_eta(&point.eta);
    report.final_l2 = lam[D - 1];
    Ok((lam, report))
}

/// Rescale the mass multipliers of a frame-space guess so every block
/// carries its target weighted mass.
fn match_masses<const D: usize>(problem: &Problem<'_, D>, mut eta: SVector<f64, D>) -> Result<SVector<f64, D>> {
    let p = problem.evaluate(eta)?;
    for k in 0..problem.nb() {
        let current = p.gradient[k] + problem.target[k];
        let wanted = problem.target[k];
        if current > 0.0 && wanted > 0.0 && current.is_finite() {
            eta[k] += (wanted / current).ln() / problem.blocks[k].mass;
        }
    }
    Ok(eta)
}

fn frame_from_guess(u: Vec3, temperature: f64, min_mass: f64, sigma: f64) -> Frame {
    Frame {
        origin: u,
        scale: (temperature / min_mass).sqrt(),
        sigma,
    }
}

fn unrealizable(what: &str) -> BgkError {
    BgkError::Degenerate(format!("moment vector is not realizable: {what}"))
}

fn check_target(values: &[f64]) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(unrealizable("non-finite entry"));
    }
    Ok(())
}

/// Value, gradient and Hessian of the single-species dual at `lam`.
pub fn dual_eval(
    lam: &Multipliers,
    rho: &MomentVector5,
    nu: &FrequencyField,
    m: f64,
    grid: &VelocityGrid,
) -> Result<DualEvaluation<5>> {
    check_len(grid.len(), nu.len())?;
    lam.check_domain()?;
    let problem = Problem::<5> {
        grid,
        blocks: vec![Block {
            mass: m,
            nu: nu.values(),
        }],
        frame: Frame::IDENTITY,
        target: SVector::from(rho.to_array()),
    };
    let p = problem.evaluate(SVector::from(lam.to_array()))?;
    Ok(DualEvaluation {
        value: p.value,
        gradient: p.gradient,
        hessian: p.hessian,
    })
}

/// Value, gradient and Hessian of the cross-species dual at `lam`.
#[allow(clippy::too_many_arguments)]
pub fn mixed_dual_eval(
    lam: &MixedMultipliers,
    rho_bar: &MixedMomentVector6,
    nu12: &FrequencyField,
    nu21: &FrequencyField,
    m1: f64,
    m2: f64,
    grid: &VelocityGrid,
) -> Result<DualEvaluation<6>> {
    check_len(grid.len(), nu12.len())?;
    check_len(grid.len(), nu21.len())?;
    lam.check_domain()?;
    let problem = Problem::<6> {
        grid,
        blocks: vec![
            Block {
                mass: m1,
                nu: nu12.values(),
            },
            Block {
                mass: m2,
                nu: nu21.values(),
            },
        ],
        frame: Frame::IDENTITY,
        target: SVector::from(rho_bar.to_array()),
    };
    let p = problem.evaluate(SVector::from(lam.to_array()))?;
    Ok(DualEvaluation {
        value: p.value,
        gradient: p.gradient,
        hessian: p.hessian,
    })
}

/// Multipliers of the single-species target whose weighted moments equal `rho`.
///
/// Without an initial guess the iteration starts from the Maxwellian that
/// would be exact for a unit frequency.
pub fn solve_single_target(
    rho: &MomentVector5,
    nu: &FrequencyField,
    m: f64,
    grid: &VelocityGrid,
    cfg: &NewtonConfig,
    initial_guess: Option<Multipliers>,
) -> Result<(Multipliers, SolveReport)> {
    check_len(grid.len(), nu.len())?;
    let target = rho.to_array();
    check_target(&target)?;
    if !(rho.m0 > 0.0) {
        return Err(unrealizable("weighted mass must be positive"));
    }
    if !(rho.m2 > 0.0) {
        return Err(unrealizable("weighted energy must be positive"));
    }
    let guess = match initial_guess {
        Some(g) => {
            g.check_domain()?;
            g
        }
        None => {
            let u = rho.m1.map(|x| x / rho.m0);
            let temperature = m * (rho.m2 / rho.m0 - norm2(u)) / 3.0;
            if !(temperature > 0.0) {
                return Err(unrealizable("energy does not exceed drift energy"));
            }
            lambda_from_macros(rho.m0 / m, u, temperature, m)?
        }
    };
    let temperature = -0.5 / guess.l2;
    let u = guess.l1.map(|x| -x / (2.0 * guess.l2));
    let mut problem = Problem::<5> {
        grid,
        blocks: vec![Block {
            mass: m,
            nu: nu.values(),
        }],
        frame: frame_from_guess(u, temperature, m, rho.m0),
        target: SVector::zeros(),
    };
    problem.target = problem.moments_to_frame(&target);
    let eta0 = match_masses(&problem, problem.eta_from_lambda(&guess.to_array()))?;
    let (lam, report) = newton(&problem, eta0, &target, cfg)?;
    Ok((Multipliers::from_array(lam), report))
}

/// Multipliers of the cross-species target pair matching `rho_bar`; the two
/// targets share momentum and energy multipliers, hence drift and temperature.
#[allow(clippy::too_many_arguments)]
pub fn solve_mixed_target(
    rho_bar: &MixedMomentVector6,
    nu12: &FrequencyField,
    nu21: &FrequencyField,
    m1: f64,
    m2: f64,
    grid: &VelocityGrid,
    cfg: &NewtonConfig,
    initial_guess: Option<MixedMultipliers>,
) -> Result<(MixedMultipliers, SolveReport)> {
    check_len(grid.len(), nu12.len())?;
    check_len(grid.len(), nu21.len())?;
    let target = rho_bar.to_array();
    check_target(&target)?;
    if !(rho_bar.m0_first > 0.0 && rho_bar.m0_second > 0.0) {
        return Err(unrealizable("weighted masses must be positive"));
    }
    if !(rho_bar.m2 > 0.0) {
        return Err(unrealizable("weighted energy must be positive"));
    }
    let total0 = rho_bar.m0_first + rho_bar.m0_second;
    let guess = match initial_guess {
        Some(g) => {
            g.check_domain()?;
            g
        }
        None => {
            let (n1, n2) = (rho_bar.m0_first / m1, rho_bar.m0_second / m2);
            let u = rho_bar.m1.map(|x| x / total0);
            let temperature = (rho_bar.m2 - total0 * norm2(u)) / (3.0 * (n1 + n2));
            if !(temperature > 0.0) {
                return Err(unrealizable("energy does not exceed drift energy"));
            }
            let a = lambda_from_macros(n1, u, temperature, m1)?;
            let b = lambda_from_macros(n2, u, temperature, m2)?;
            MixedMultipliers::new(a.l0, b.l0, a.l1, a.l2)
        }
    };
    let temperature = -0.5 / guess.l2;
    let u = guess.l1.map(|x| -x / (2.0 * guess.l2));
    let mut problem = Problem::<6> {
        grid,
        blocks: vec![
            Block {
                mass: m1,
                nu: nu12.values(),
            },
            Block {
                mass: m2,
                nu: nu21.values(),
            },
        ],
        frame: frame_from_guess(u, temperature, m1.min(m2), total0),
        target: SVector::zeros(),
    };
    problem.target = problem.moments_to_frame(&target);
    let eta0 = match_masses(&problem, problem.eta_from_lambda(&guess.to_array()))?;
    let (lam, report) = newton(&problem, eta0, &target, cfg)?;
    Ok((MixedMultipliers::from_array(lam), report))
}
