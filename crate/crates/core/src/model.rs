//! The Bayesian nonparametric random-effects regression model as pure
//! density evaluations.
//!
//! The response density is an infinite mixture of normals indexed by the
//! integers,
//!
//! ```text
//! f(y | x) = sum_j n(y | x'b + mu_j, phi * var) * w_j(x)
//! w_j(x)   = Phi((j - x'b_w) / s_w) - Phi((j - 1 - x'b_w) / s_w)
//! ```
//!
//! so the weights are ordered-probit cell probabilities and sum to one over
//! all integers by telescoping. Computation truncates the index set to a
//! window chosen so the discarded tail mass is below a tolerance; densities
//! are evaluated in log space with log-sum-exp.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::StandardizedDataset;
use crate::error::{Error, Result};
use crate::stats::{self, log_sum_exp, normal_log_pdf, std_normal_cdf};

/// Random-effect values over a contiguous integer window containing 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuWindow {
    j_min: i32,
    values: Vec<f64>,
}

impl MuWindow {
    pub fn new(j_min: i32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("mu window must be non-empty".into()));
        }
        let j_max = j_min + values.len() as i32 - 1;
        if !(j_min <= 0 && j_max >= 0) {
            return Err(Error::Domain(format!(
                "mu window [{j_min}, {j_max}] must contain 0"
            )));
        }
        Ok(Self { j_min, values })
    }

    /// A single-cell window at 0 with the given value.
    pub fn singleton(mu0: f64) -> Self {
        Self {
            j_min: 0,
            values: vec![mu0],
        }
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.values.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: i32) -> bool {
        j >= self.j_min && j <= self.j_max()
    }

    pub fn get(&self, j: i32) -> Option<f64> {
        self.contains(j).then(|| self.values[(j - self.j_min) as usize])
    }

    pub fn set(&mut self, j: i32, value: f64) {
        assert!(self.contains(j), "mu index {j} outside window");
        self.values[(j - self.j_min) as usize] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.j_min + i as i32, v))
    }

    /// Map view keyed by index, for serialization.
    pub fn to_map(&self) -> BTreeMap<i32, f64> {
        self.iter().collect()
    }

    /// Rebuilds the window over `[j_min, j_max]`, keeping overlapping values
    /// and filling new cells with `fill(j)`.
    pub fn resize_with<F: FnMut(i32) -> f64>(&self, j_min: i32, j_max: i32, mut fill: F) -> Self {
        assert!(j_min <= 0 && j_max >= 0 && j_min <= j_max);
        let values = (j_min..=j_max)
            .map(|j| self.get(j).unwrap_or_else(|| fill(j)))
            .collect();
        Self { j_min, values }
    }
}

/// One full parameter configuration of the mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Random effects over the active window.
    pub mu: MuWindow,
    /// Intercept followed by one slope per moderator.
    pub beta: Vec<f64>,
    /// Dispersion multiplier on each study's sampling variance.
    pub phi: f64,
    /// Random-effect variance, in (0, sigma_mu2_upper).
    pub sigma_mu2: f64,
    /// Ordered-probit regression coefficients (intercept + slopes).
    pub beta_omega: Vec<f64>,
    /// Ordered-probit scale.
    pub sigma_omega: f64,
}

impl ModelState {
    pub fn validate(&self, prior: &PriorConfig) -> Result<()> {
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return Err(Error::Domain(format!("phi = {} must be positive", self.phi)));
        }
        if !(self.sigma_omega > 0.0) || !self.sigma_omega.is_finite() {
            return Err(Error::Domain(format!(
                "sigma_omega = {} must be positive",
                self.sigma_omega
            )));
        }
        if prior.mu_variance_fixed.is_none()
            && !(self.sigma_mu2 > 0.0 && self.sigma_mu2 < prior.sigma_mu2_upper)
        {
            return Err(Error::Domain(format!(
                "sigma_mu2 = {} outside (0, {})",
                self.sigma_mu2, prior.sigma_mu2_upper
            )));
        }
        if self.beta.len() != self.beta_omega.len() {
            return Err(Error::Domain(
                "beta and beta_omega must have equal length".into(),
            ));
        }
        Ok(())
    }

    /// Number of moderators (excluding the intercept).
    pub fn p(&self) -> usize {
        self.beta.len() - 1
    }
}

/// Prior hyperparameters. Gamma parameters are shape-rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Variance of the intercept prior.
    pub beta0_var: f64,
    /// Variance of each slope prior.
    pub slope_var: f64,
    pub phi_shape: f64,
    pub phi_rate: f64,
    /// Upper bound of the uniform prior on the random-effect variance.
    pub sigma_mu2_upper: f64,
    /// Variance of each probit-regression coefficient prior.
    pub beta_omega_var: f64,
    pub sigma_omega_prec_shape: f64,
    pub sigma_omega_prec_rate: f64,
    /// When set, replaces the hierarchical `mu_j ~ N(0, sigma_mu2)` prior
    /// with a fixed-variance `mu_j ~ N(0, v)`; sensitivity-run variant.
    pub mu_variance_fixed: Option<f64>,
    /// When true, the Gamma(1, 1) prior is placed on the probit variance
    /// itself instead of on its reciprocal; sensitivity-run variant.
    pub sigma_omega_variance_gamma: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta0_var: 1e5,
            slope_var: 1.0,
            phi_shape: 0.5,
            phi_rate: 0.5,
            sigma_mu2_upper: 100.0,
            beta_omega_var: 1e5,
            sigma_omega_prec_shape: 1.0,
            sigma_omega_prec_rate: 1.0,
            mu_variance_fixed: None,
            sigma_omega_variance_gamma: false,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("beta0_var", self.beta0_var),
            ("slope_var", self.slope_var),
            ("phi_shape", self.phi_shape),
            ("phi_rate", self.phi_rate),
            ("sigma_mu2_upper", self.sigma_mu2_upper),
            ("beta_omega_var", self.beta_omega_var),
            ("sigma_omega_prec_shape", self.sigma_omega_prec_shape),
            ("sigma_omega_prec_rate", self.sigma_omega_prec_rate),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be positive")));
            }
        }
        if let Some(v) = self.mu_variance_fixed {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "mu_variance_fixed = {v} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Effective variance of the `mu_j` prior given the current state.
    pub fn mu_variance(&self, state: &ModelState) -> f64 {
        self.mu_variance_fixed.unwrap_or(state.sigma_mu2)
    }

    /// Serializes to `key = value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("beta0_var", self.beta0_var.to_string());
        push("slope_var", self.slope_var.to_string());
        push("phi_shape", self.phi_shape.to_string());
        push("phi_rate", self.phi_rate.to_string());
        push("sigma_mu2_upper", self.sigma_mu2_upper.to_string());
        push("beta_omega_var", self.beta_omega_var.to_string());
        push("sigma_omega_prec_shape", self.sigma_omega_prec_shape.to_string());
        push("sigma_omega_prec_rate", self.sigma_omega_prec_rate.to_string());
        if let Some(v) = self.mu_variance_fixed {
            push("mu_variance_fixed", v.to_string());
        }
        push(
            "sigma_omega_variance_gamma",
            self.sigma_omega_variance_gamma.to_string(),
        );
        s
    }

    /// Parses `key = value` lines produced by [`PriorConfig::to_kv`];
    /// unknown keys are errors, missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Domain(format!("line {}: expected `key = value`", line_no + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse = |v: &str| -> Result<f64> {
                v.parse()
                    .map_err(|_| Error::Domain(format!("line {}: `{v}` is not a number", line_no + 1)))
            };
            match key {
                "beta0_var" => cfg.beta0_var = parse(value)?,
                "slope_var" => cfg.slope_var = parse(value)?,
                "phi_shape" => cfg.phi_shape = parse(value)?,
                "phi_rate" => cfg.phi_rate = parse(value)?,
                "sigma_mu2_upper" => cfg.sigma_mu2_upper = parse(value)?,
                "beta_omega_var" => cfg.beta_omega_var = parse(value)?,
                "sigma_omega_prec_shape" => cfg.sigma_omega_prec_shape = parse(value)?,
                "sigma_omega_prec_rate" => cfg.sigma_omega_prec_rate = parse(value)?,
                "mu_variance_fixed" => cfg.mu_variance_fixed = Some(parse(value)?),
                "sigma_omega_variance_gamma" => {
                    cfg.sigma_omega_variance_gamma = value.parse().map_err(|_| {
                        Error::Domain(format!("line {}: `{value}` is not a bool", line_no + 1))
                    })?
                }
                other => {
                    return Err(Error::Domain(format!(
                        "line {}: unknown key `{other}`",
                        line_no + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Truncation window over the integer mixture indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightWindow {
    pub j_min: i32,
    pub j_max: i32,
    pub tail_mass_tol: f64,
}

pub const DEFAULT_TAIL_MASS_TOL: f64 = 1e-8;

impl WeightWindow {
    pub fn new(j_min: i32, j_max: i32, tail_mass_tol: f64) -> Result<Self> {
        if j_min > 0 || j_max < 0 {
            return Err(Error::Domain(format!(
                "window [{j_min}, {j_max}] must contain 0"
            )));
        }
        if !(tail_mass_tol > 0.0 && tail_mass_tol < 1.0) {
            return Err(Error::Domain(format!(
                "tail_mass_tol = {tail_mass_tol} outside (0, 1)"
            )));
        }
        Ok(Self {
            j_min,
            j_max,
            tail_mass_tol,
        })
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Minimal window containing 0 whose discarded weight mass is below
    /// `tol` for every probit mean in `etas`, given scale `sigma_omega`.
    pub fn covering(etas: &[f64], sigma_omega: f64, tol: f64) -> Result<Self> {
        if !(sigma_omega > 0.0) || !sigma_omega.is_finite() {
            return Err(Error::Domain(format!(
                "sigma_omega = {sigma_omega} must be positive"
            )));
        }
        // split the tolerance between the two tails
        let q = -stats::std_normal_quantile(tol / 2.0);
        let mut j_min = 0i32;
        let mut j_max = 0i32;
        for &eta in etas {
            if !eta.is_finite() {
                return Err(Error::Domain("probit mean is not finite".into()));
            }
            // below-window mass Phi((j_min - 1 - eta)/s) <= tol/2
            j_min = j_min.min((eta - sigma_omega * q + 1.0).floor() as i32);
            // above-window mass 1 - Phi((j_max - eta)/s) <= tol/2
            j_max = j_max.max((eta + sigma_omega * q).ceil() as i32);
        }
        Self::new(j_min, j_max, tol)
    }
}

/// Ordered-probit cell probability for index `j` given the probit mean
/// `eta = x' beta_omega` and scale `sigma_omega`.
///
/// Both tails are computed on the side where the CDF keeps relative
/// precision, so far-out cells degrade gracefully to 0.
pub fn mixture_weight_eta(j: i32, eta: f64, sigma_omega: f64) -> f64 {
    let hi = (j as f64 - eta) / sigma_omega;
    let lo = (j as f64 - 1.0 - eta) / sigma_omega;
    let w = if lo >= 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    };
    w.max(0.0)
}

/// [`mixture_weight_eta`] with the probit mean formed from a design vector
/// (leading constant 1 included). Rejects non-finite inputs.
pub fn mixture_weight(j: i32, x_design: &[f64], beta_omega: &[f64], sigma_omega: f64) -> Result<f64> {
    if x_design.len() != beta_omega.len() {
        return Err(Error::Domain(format!(
            "design length {} != coefficient length {}",
            x_design.len(),
            beta_omega.len()
        )));
    }
    if !(sigma_omega > 0.0) || !sigma_omega.is_finite() {
        return Err(Error::Domain(format!(
            "sigma_omega = {sigma_omega} must be positive"
        )));
    }
    if x_design.iter().chain(beta_omega).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input to mixture_weight".into()));
    }
    Ok(mixture_weight_eta(j, dot(x_design, beta_omega), sigma_omega))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weight mass inside a window, computed by the telescoping identity
/// `1 - Phi((j_min - 1 - eta)/s) - Phi(-(j_max - eta)/s)`; never exceeds 1.
pub fn window_weight_mass(window: &WeightWindow, eta: f64, sigma_omega: f64) -> f64 {
    let below = std_normal_cdf((window.j_min as f64 - 1.0 - eta) / sigma_omega);
    let above = std_normal_cdf(-(window.j_max as f64 - eta) / sigma_omega);
    (1.0 - below - above).max(0.0)
}

/// All cell weights of a window plus their sum, from one CDF evaluation per
/// cut point (each cut evaluated on the side that keeps tail precision).
/// Matches [`mixture_weight_eta`] per cell up to rounding.
pub struct WindowWeights {
    pub values: Vec<f64>,
    pub mass: f64,
}

pub fn window_weights(window: &WeightWindow, eta: f64, sigma_omega: f64) -> WindowWeights {
    let cells = window.len();
    // cut k_j = (j - eta) / s for j = j_min - 1 ..= j_max; store the CDF for
    // cuts <= 0 and the survival function for cuts > 0
    let mut lower_cdf = vec![0.0f64; cells + 1];
    let mut upper_sf = vec![0.0f64; cells + 1];
    let mut positive = vec![false; cells + 1];
    for (idx, j) in (window.j_min - 1..=window.j_max).enumerate() {
        let k = (j as f64 - eta) / sigma_omega;
        if k > 0.0 {
            positive[idx] = true;
            upper_sf[idx] = std_normal_cdf(-k);
        } else {
            lower_cdf[idx] = std_normal_cdf(k);
        }
    }
    let mut values = Vec::with_capacity(cells);
    let mut mass = 0.0;
    for c in 0..cells {
        let w = match (positive[c], positive[c + 1]) {
            (false, false) => lower_cdf[c + 1] - lower_cdf[c],
            (true, true) => upper_sf[c] - upper_sf[c + 1],
            (false, true) => 1.0 - lower_cdf[c] - upper_sf[c + 1],
            (true, false) => unreachable!("cuts are increasing"),
        };
        let w = w.max(0.0);
        mass += w;
        values.push(w);
    }
    WindowWeights { values, mass }
}

/// Log of the mixture density of `y` given moderators, observation variance,
/// and a parameter state, truncated to `window`.
///
/// Weights are renormalized over the window, which is the truncated model
/// the sampler targets; with the window invariant satisfied the
/// renormalization changes the density by at most `tail_mass_tol`. The
/// state's random-effect window must cover `window`.
pub fn log_likelihood_density(
    y: f64,
    var: f64,
    x_design: &[f64],
    state: &ModelState,
    window: &WeightWindow,
) -> f64 {
    debug_assert!(state.mu.contains(window.j_min) && state.mu.contains(window.j_max));
    let eta = dot(x_design, &state.beta_omega);
    let location = dot(x_design, &state.beta);
    let noise_var = state.phi * var;
    let weights = window_weights(window, eta, state.sigma_omega);
    if weights.mass <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut terms = Vec::with_capacity(window.len());
    for (j, &w) in window.indices().zip(&weights.values) {
        if w <= 0.0 {
            continue;
        }
        let mu_j = state.mu.get(j).expect("window covered by mu");
        terms.push(w.ln() + normal_log_pdf(y, location + mu_j, noise_var));
    }
    log_sum_exp(&terms) - weights.mass.ln()
}

/// Mixture density on the natural scale.
pub fn likelihood_density(
    y: f64,
    var: f64,
    x_design: &[f64],
    state: &ModelState,
    window: &WeightWindow,
) -> f64 {
    log_likelihood_density(y, var, x_design, state, window).exp()
}

/// Log joint prior density of a state, measured in the coordinates
/// `(mu, beta, phi, sigma_mu2, beta_omega, sigma_omega^2)`.
///
/// Terms: `mu_j ~ N(0, sigma_mu2)` for active `j` (or the fixed-variance
/// variant), `beta_0 ~ N(0, beta0_var)`, slopes `~ N(0, slope_var)`,
/// `phi ~ Gamma(shape, rate)`, `sigma_mu2 ~ Uniform(0, upper)`,
/// `beta_omega_k ~ N(0, beta_omega_var)`, and `1/sigma_omega^2 ~ Gamma(1, 1)`
/// (or the variance-Gamma variant). Returns `-inf` outside any support.
pub fn log_prior(state: &ModelState, config: &PriorConfig) -> f64 {
    if !(state.phi > 0.0) || !(state.sigma_omega > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;

    let mu_var = match config.mu_variance_fixed {
        Some(v) => v,
        None => {
            if !(state.sigma_mu2 > 0.0 && state.sigma_mu2 < config.sigma_mu2_upper) {
                return f64::NEG_INFINITY;
            }
            total -= config.sigma_mu2_upper.ln(); // uniform density
            state.sigma_mu2
        }
    };
    for (_, mu_j) in state.mu.iter() {
        total += normal_log_pdf(mu_j, 0.0, mu_var);
    }

    total += normal_log_pdf(state.beta[0], 0.0, config.beta0_var);
    for &b in &state.beta[1..] {
        total += normal_log_pdf(b, 0.0, config.slope_var);
    }
    total += stats::gamma_log_pdf(state.phi, config.phi_shape, config.phi_rate);
    for &b in &state.beta_omega {
        total += normal_log_pdf(b, 0.0, config.beta_omega_var);
    }

    let s2 = state.sigma_omega * state.sigma_omega;
    if config.sigma_omega_variance_gamma {
        total += stats::gamma_log_pdf(s2, 1.0, 1.0);
    } else {
        // density of sigma_omega^2 induced by 1/sigma_omega^2 ~ Gamma(a, b)
        let tau = 1.0 / s2;
        total += stats::gamma_log_pdf(tau, config.sigma_omega_prec_shape, config.sigma_omega_prec_rate)
            - 2.0 * s2.ln();
    }
    total
}

/// Log posterior kernel: sum of per-observation log mixture densities plus
/// the log prior. Proportional to the posterior up to its normalizing
/// constant; only differences between states are meaningful.
pub fn log_posterior_kernel(
    dataset: &StandardizedDataset,
    state: &ModelState,
    config: &PriorConfig,
    window: &WeightWindow,
) -> f64 {
    let prior = log_prior(state, config);
    if prior == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut total = prior;
    for i in 0..dataset.n() {
        let r = &dataset.records[i];
        let x = dataset.design_row(i);
        total += log_likelihood_density(r.y, r.var, &x, state, window);
    }
    total
}
