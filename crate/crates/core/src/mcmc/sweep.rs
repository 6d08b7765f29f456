//! One Gibbs sweep over the augmented posterior.
//!
//! Conditionals: `z_i` is categorical over window cells, `u_i` truncated
//! normal, `beta_omega` and `beta` conjugate Gaussian regressions, the
//! probit precision conjugate Gamma, and each `mu_j` conjugate normal. The
//! dispersion `phi` and the random-effect variance have non-conjugate
//! conditionals (the Gamma prior on `phi` multiplies an inverse-Gamma-shaped
//! likelihood term) and are advanced by slice sampling, which leaves the
//! exact conditional invariant.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::dataset::StandardizedDataset;
use crate::error::{Error, Result};
use crate::model::{PriorConfig, WeightWindow};
use crate::stats::{self, normal_log_pdf};

use super::{initial_state, AugmentedState, McmcConfig, SweepStep, WindowPolicy};

const MAX_WINDOW_CELLS: i64 = 100_000;

/// Successive slice transitions per scale-parameter update. Each transition
/// leaves the conditional invariant; iterating decorrelates the heavier-
/// tailed scale draws at negligible cost.
const SCALE_SLICE_TRANSITIONS: usize = 4;

pub(super) struct Sweeper {
    design: Vec<Vec<f64>>,
    y: Vec<f64>,
    inv_var: Vec<f64>,
    prior: PriorConfig,
    policy: WindowPolicy,
    skip: Vec<SweepStep>,
    state: AugmentedState,
    /// Probit means `x_i' beta_omega`, refreshed whenever `beta_omega` moves.
    etas: Vec<f64>,
}

impl Sweeper {
    pub(super) fn new(
        dataset: &StandardizedDataset,
        prior: &PriorConfig,
        config: &McmcConfig,
    ) -> Result<Self> {
        let n = dataset.n();
        let p = dataset.p();
        for (i, r) in dataset.records.iter().enumerate() {
            if !(r.var > 0.0) || !r.var.is_finite() || !r.y.is_finite() {
                return Err(Error::Sampler(format!(
                    "observation {i}: invalid (y, var) = ({}, {})",
                    r.y, r.var
                )));
            }
        }
        let base = initial_state(p, prior, &config.window)?;
        let state = AugmentedState {
            z: vec![0; n],
            u: vec![-0.5; n],
            base,
        };
        let mut sweeper = Self {
            design: (0..n).map(|i| dataset.design_row(i)).collect(),
            y: dataset.records.iter().map(|r| r.y).collect(),
            inv_var: dataset.records.iter().map(|r| 1.0 / r.var).collect(),
            prior: prior.clone(),
            policy: config.window,
            skip: config.skip_updates.clone(),
            state,
            etas: vec![0.0; n],
        };
        sweeper.disperse_initial_state();
        sweeper.refresh_etas();
        Ok(sweeper)
    }

    /// Data-informed start: split observations at the response median into
    /// the two central cells and offset each cell's random effect to its
    /// half mean. A compact two-cell start sits next to the configurations
    /// the posterior concentrates on; both the metastable single-cluster
    /// state (dispersion inflates to cover the random-effect structure) and
    /// the metastable fragmented state (observations churn through freshly
    /// drawn empty cells) are hard to leave once entered.
    fn disperse_initial_state(&mut self) {
        let n = self.n();
        let y_mean = self.y.iter().sum::<f64>() / n as f64;
        self.state.base.beta[0] = y_mean;

        let j_lo = 0.max(self.state.base.mu.j_min());
        let j_hi = 1.min(self.state.base.mu.j_max());
        let bins = (j_hi - j_lo + 1) as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.y[a].partial_cmp(&self.y[b]).unwrap());
        for (rank, &i) in order.iter().enumerate() {
            self.state.z[i] = j_lo + ((rank * bins) / n) as i32;
            self.state.u[i] = self.state.z[i] as f64 - 0.5;
        }

        let mut sums = vec![(0.0f64, 0usize); bins];
        for i in 0..n {
            let c = (self.state.z[i] - j_lo) as usize;
            sums[c].0 += self.y[i];
            sums[c].1 += 1;
        }
        let mut offsets = Vec::with_capacity(bins);
        for (c, &(total, count)) in sums.iter().enumerate() {
            let offset = if count > 0 { total / count as f64 - y_mean } else { 0.0 };
            self.state.base.mu.set(j_lo + c as i32, offset);
            offsets.push(offset);
        }
        if self.prior.mu_variance_fixed.is_none() && offsets.len() > 1 {
            let spread = crate::stats::sample_variance(&offsets);
            self.state.base.sigma_mu2 = spread
                .max(1e-4)
                .min(self.prior.sigma_mu2_upper * 0.99);
        }
    }

    pub(super) fn state(&self) -> &AugmentedState {
        &self.state
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.state.base.beta.len()
    }

    fn skipped(&self, step: SweepStep) -> bool {
        self.skip.contains(&step)
    }

    fn refresh_etas(&mut self) {
        for i in 0..self.n() {
            self.etas[i] = crate::model::dot(&self.design[i], &self.state.base.beta_omega);
        }
    }

    pub(super) fn sweep<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        if !self.skipped(SweepStep::ClusterAssignments) {
            self.update_z(rng)?;
        }
        if !self.skipped(SweepStep::ProbitLatents) {
            self.update_u(rng);
        }
        if !self.skipped(SweepStep::WeightRegression) {
            self.update_beta_omega(rng)?;
            self.refresh_etas();
        }
        if !self.skipped(SweepStep::WeightScale) {
            self.update_sigma_omega(rng);
        }
        if !self.skipped(SweepStep::RandomEffects) {
            self.update_mu(rng);
        }
        if !self.skipped(SweepStep::Coefficients) {
            self.update_beta(rng)?;
        }
        if !self.skipped(SweepStep::Dispersion) {
            self.update_phi(rng);
        }
        if self.prior.mu_variance_fixed.is_none() && !self.skipped(SweepStep::RandomEffectVariance)
        {
            self.update_sigma_mu2(rng);
        }
        self.adapt_window(rng)?;
        self.check_finite()
    }

    /// Step 1: cell assignment. The random effects are collapsed out of the
    /// assignment probabilities: observation `i` joins cell `j` with
    /// probability proportional to
    /// `w_j(x_i) n(y_i - x_i'beta | m_j, phi var_i + s_j^2)`, where
    /// `(m_j, s_j^2)` is the conditional posterior of `mu_j` given the
    /// other observations currently in the cell (the prior `(0, sigma_mu^2)`
    /// for an empty cell). Sequential bookkeeping of the per-cell weighted
    /// sums keeps the scan exact.
    ///
    /// Collapsing matters: scoring cells by their materialized `mu_j` lets
    /// observations chase freshly redrawn empty cells whose draw happened to
    /// land nearby, which sustains a metastable fragmented regime; the
    /// marginal form prices an empty cell by its whole prior.
    fn update_z<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let base = &self.state.base;
        let j_min = base.mu.j_min();
        let j_max = base.mu.j_max();
        let cells = (j_max - j_min + 1) as usize;
        let window = WeightWindow {
            j_min,
            j_max,
            tail_mass_tol: 1e-8,
        };
        let mu_var = self.prior.mu_variance_fixed.unwrap_or(base.sigma_mu2);
        let phi = base.phi;

        // residuals and per-cell weighted member stats under current beta
        let residuals: Vec<f64> = (0..self.n())
            .map(|i| self.y[i] - crate::model::dot(&self.design[i], &base.beta))
            .collect();
        let mut wsum = vec![0.0f64; cells];
        let mut wres = vec![0.0f64; cells];
        for i in 0..self.n() {
            let c = (self.state.z[i] - j_min) as usize;
            let w = self.inv_var[i] / phi;
            wsum[c] += w;
            wres[c] += w * residuals[i];
        }

        let mut log_probs = vec![0.0f64; cells];
        for i in 0..self.n() {
            let w_i = self.inv_var[i] / phi;
            let current = (self.state.z[i] - j_min) as usize;
            wsum[current] -= w_i;
            wres[current] -= w_i * residuals[i];

            let noise_var = phi / self.inv_var[i];
            let weights = crate::model::window_weights(&window, self.etas[i], base.sigma_omega);
            let mut max_lp = f64::NEG_INFINITY;
            for (c, &w) in weights.values.iter().enumerate() {
                let lp = if w > 0.0 {
                    let prec = 1.0 / mu_var + wsum[c];
                    let m_c = wres[c] / prec;
                    w.ln() + normal_log_pdf(residuals[i], m_c, noise_var + 1.0 / prec)
                } else {
                    f64::NEG_INFINITY
                };
                log_probs[c] = lp;
                max_lp = max_lp.max(lp);
            }
            if max_lp == f64::NEG_INFINITY {
                return Err(Error::Sampler(format!(
                    "observation {i}: no window cell has positive probability \
                     (eta = {}, sigma_omega = {})",
                    self.etas[i], base.sigma_omega
                )));
            }
            let mut total = 0.0;
            for lp in log_probs.iter_mut() {
                *lp = (*lp - max_lp).exp();
                total += *lp;
            }
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = cells - 1;
            for (c, &pr) in log_probs.iter().enumerate() {
                target -= pr;
                if target <= 0.0 {
                    chosen = c;
                    break;
                }
            }
            self.state.z[i] = j_min + chosen as i32;
            wsum[chosen] += w_i;
            wres[chosen] += w_i * residuals[i];
        }
        Ok(())
    }

    /// Step 2: latent probit variable, normal truncated to the chosen cell.
    fn update_u<R: Rng>(&mut self, rng: &mut R) {
        let sigma = self.state.base.sigma_omega;
        for i in 0..self.n() {
            let z = self.state.z[i] as f64;
            self.state.u[i] =
                stats::draw_truncated_normal(rng, self.etas[i], sigma, z - 1.0, z);
        }
    }

    /// Step 3: conjugate Gaussian regression of `u` on the design.
    fn update_beta_omega<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.dim();
        let s2 = self.state.base.sigma_omega.powi(2);
        let prior_prec = vec![1.0 / self.prior.beta_omega_var; d];
        let coef = draw_regression(
            rng,
            &self.design,
            &self.state.u,
            |_i| 1.0 / s2,
            &prior_prec,
        )?;
        self.state.base.beta_omega = coef;
        Ok(())
    }

    /// Step 4: probit scale. With the precision-Gamma prior the conditional
    /// of `1/sigma_omega^2` is Gamma; the variance-Gamma variant is advanced
    /// by slice sampling on `log sigma_omega^2`.
    fn update_sigma_omega<R: Rng>(&mut self, rng: &mut R) {
        let n = self.n() as f64;
        let mut ssr = 0.0;
        for i in 0..self.n() {
            let r = self.state.u[i] - self.etas[i];
            ssr += r * r;
        }
        if self.prior.sigma_omega_variance_gamma {
            let logf = |t: f64| {
                let v = t.exp();
                // ga(v | 1, 1) prior, Gaussian likelihood, Jacobian v
                -v - 0.5 * n * t - 0.5 * ssr / v + t
            };
            let t0 = (self.state.base.sigma_omega.powi(2)).ln();
            let t = stats::slice_sample(rng, logf, t0, 1.0, f64::NEG_INFINITY, f64::INFINITY);
            self.state.base.sigma_omega = (t.exp()).sqrt();
        } else {
            let shape = self.prior.sigma_omega_prec_shape + 0.5 * n;
            let rate = self.prior.sigma_omega_prec_rate + 0.5 * ssr;
            let tau = Gamma::new(shape, 1.0 / rate)
                .expect("valid gamma")
                .sample(rng);
            self.state.base.sigma_omega = tau.powf(-0.5);
        }
    }

    /// Step 5: each active random effect from its conjugate normal
    /// conditional given its assigned observations.
    fn update_mu<R: Rng>(&mut self, rng: &mut R) {
        let j_min = self.state.base.mu.j_min();
        let cells = self.state.base.mu.len();
        let mu_var = self
            .prior
            .mu_variance_fixed
            .unwrap_or(self.state.base.sigma_mu2);
        let mut wsum = vec![0.0f64; cells];
        let mut wres = vec![0.0f64; cells];
        for i in 0..self.n() {
            let c = (self.state.z[i] - j_min) as usize;
            let w = self.inv_var[i] / self.state.base.phi;
            wsum[c] += w;
            wres[c] += w * (self.y[i] - crate::model::dot(&self.design[i], &self.state.base.beta));
        }
        for c in 0..cells {
            let prec = 1.0 / mu_var + wsum[c];
            let mean = wres[c] / prec;
            let z: f64 = rng.sample(StandardNormal);
            self.state.base.mu.set(j_min + c as i32, mean + z / prec.sqrt());
        }
    }

    /// Step 6: conjugate weighted Gaussian regression of `y - mu_z` on the
    /// design with observation precisions `1 / (phi var_i)`.
    fn update_beta<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.dim();
        let base = &self.state.base;
        let residual: Vec<f64> = (0..self.n())
            .map(|i| self.y[i] - base.mu.get(self.state.z[i]).unwrap())
            .collect();
        let phi = base.phi;
        let inv_var = &self.inv_var;
        let mut prior_prec = vec![1.0 / self.prior.slope_var; d];
        prior_prec[0] = 1.0 / self.prior.beta0_var;
        let coef = draw_regression(
            rng,
            &self.design,
            &residual,
            |i| inv_var[i] / phi,
            &prior_prec,
        )?;
        self.state.base.beta = coef;
        Ok(())
    }

    /// Step 7: dispersion. Under the Gamma(shape, rate) prior on `phi` the
    /// conditional is `phi^(shape - n/2 - 1) exp(-rate phi - S / (2 phi))`,
    /// which is not a Gamma; one slice transition on `log phi` targets it
    /// exactly.
    fn update_phi<R: Rng>(&mut self, rng: &mut R) {
        let base = &self.state.base;
        let mut s = 0.0;
        for i in 0..self.n() {
            let r = self.y[i]
                - crate::model::dot(&self.design[i], &base.beta)
                - base.mu.get(self.state.z[i]).unwrap();
            s += r * r * self.inv_var[i];
        }
        let shape = self.prior.phi_shape;
        let rate = self.prior.phi_rate;
        let n = self.n() as f64;
        let logf = |t: f64| (shape - 0.5 * n) * t - rate * t.exp() - 0.5 * s * (-t).exp();
        let mut t = base.phi.ln();
        for _ in 0..SCALE_SLICE_TRANSITIONS {
            t = stats::slice_sample(rng, logf, t, 1.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        self.state.base.phi = t.exp();
    }

    /// Step 8: random-effect variance on its bounded support, slice sampling
    /// the inverse-Gamma-shaped conditional truncated to `(0, upper)`.
    ///
    /// Cells with no assigned observations are collapsed out (they
    /// contribute nothing to the marginal conditional) and redrawn from the
    /// refreshed prior afterwards — a blocked draw of the variance together
    /// with the unoccupied random effects. Including them instead would turn
    /// the variance update into a self-reinforcing random walk over its own
    /// previous draws.
    fn update_sigma_mu2<R: Rng>(&mut self, rng: &mut R) {
        let j_min = self.state.base.mu.j_min();
        let cells = self.state.base.mu.len();
        let mut occupied = vec![false; cells];
        for &z in &self.state.z {
            occupied[(z - j_min) as usize] = true;
        }
        let mut m = 0.0;
        let mut a = 0.0;
        for (c, (_, v)) in self.state.base.mu.iter().enumerate() {
            if occupied[c] {
                m += 1.0;
                a += v * v / 2.0;
            }
        }
        if a > 0.0 {
            let upper = self.prior.sigma_mu2_upper;
            let logf = |t: f64| (1.0 - 0.5 * m) * t - a * (-t).exp();
            let mut t = self.state.base.sigma_mu2.ln().min(upper.ln() - 1e-12);
            for _ in 0..SCALE_SLICE_TRANSITIONS {
                t = stats::slice_sample(rng, logf, t, 2.0, f64::NEG_INFINITY, upper.ln());
            }
            self.state.base.sigma_mu2 = t.exp();
        }
        let sd = self.state.base.sigma_mu2.sqrt();
        for c in 0..cells {
            if !occupied[c] {
                let z: f64 = rng.sample(StandardNormal);
                self.state.base.mu.set(j_min + c as i32, z * sd);
            }
        }
    }

    /// Step 9: window adaptation. Resizes the active window to the minimal
    /// contiguous interval containing 0 and every `z_i` whose discarded
    /// weight mass is below the tolerance for every observation; new cells
    /// draw their random effect from the prior.
    fn adapt_window<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let tol = match self.policy {
            WindowPolicy::Fixed { .. } => return Ok(()),
            WindowPolicy::Adaptive { tail_mass_tol } => tail_mass_tol,
        };
        let sigma = self.state.base.sigma_omega;
        let needed = WeightWindow::covering(&self.etas, sigma, tol).map_err(|e| {
            Error::Sampler(format!("window allocation failed: {e} (sigma_omega = {sigma})"))
        })?;
        let mut j_min = needed.j_min;
        let mut j_max = needed.j_max;
        for &z in &self.state.z {
            j_min = j_min.min(z);
            j_max = j_max.max(z);
        }
        if (j_max as i64 - j_min as i64 + 1) > MAX_WINDOW_CELLS {
            return Err(Error::Sampler(format!(
                "window [{j_min}, {j_max}] exceeds {MAX_WINDOW_CELLS} cells; \
                 probit means span {:?}, sigma_omega = {sigma}",
                self.etas
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &e| {
                        (acc.0.min(e), acc.1.max(e))
                    })
            )));
        }
        let base = &mut self.state.base;
        if j_min != base.mu.j_min() || j_max != base.mu.j_max() {
            let mu_var = self.prior.mu_variance_fixed.unwrap_or(base.sigma_mu2);
            let sd = mu_var.sqrt();
            base.mu = base.mu.resize_with(j_min, j_max, |_| {
                let z: f64 = rng.sample(StandardNormal);
                z * sd
            });
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let base = &self.state.base;
        let finite = base.beta.iter().all(|v| v.is_finite())
            && base.beta_omega.iter().all(|v| v.is_finite())
            && base.mu.iter().all(|(_, v)| v.is_finite())
            && base.phi.is_finite()
            && base.phi > 0.0
            && base.sigma_omega.is_finite()
            && base.sigma_omega > 0.0
            && base.sigma_mu2.is_finite();
        if finite {
            Ok(())
        } else {
            Err(Error::Sampler(format!(
                "non-finite state after sweep: {:?}",
                self.state.base
            )))
        }
    }
}

/// Draws from the Gaussian conditional of a ridge-penalized weighted
/// regression: precision `Q = X' W X + diag(prior_prec)`, mean `Q^{-1} X' W r`.
fn draw_regression<R: Rng, W: Fn(usize) -> f64>(
    rng: &mut R,
    design: &[Vec<f64>],
    response: &[f64],
    weight: W,
    prior_prec: &[f64],
) -> Result<Vec<f64>> {
    let d = prior_prec.len();
    let mut q = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for (i, x) in design.iter().enumerate() {
        let w = weight(i);
        let wr = w * response[i];
        for a in 0..d {
            b[a] += x[a] * wr;
            for c in a..d {
                q[(a, c)] += w * x[a] * x[c];
            }
        }
    }
    for a in 0..d {
        q[(a, a)] += prior_prec[a];
        for c in 0..a {
            q[(a, c)] = q[(c, a)];
        }
    }
    let chol = Cholesky::new(q)
        .ok_or_else(|| Error::Sampler("regression precision not positive definite".into()))?;
    let mean = chol.solve(&b);
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    // sample = mean + L^{-T} z
    let lt = chol.l().transpose();
    let noise = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Sampler("triangular solve failed".into()))?;
    Ok((mean + noise).iter().copied().collect())
}
