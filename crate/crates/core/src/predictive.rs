//! Posterior-chain reporting: predictive densities on a grid, coefficient
//! tables on both scales, conditional median/IQR profiles, a
//! publication-bias probe, and the predictive mean-square-error fit score.

use std::io;

use serde::{Deserialize, Serialize};

use crate::dataset::{Standardization, StandardizedDataset};
use crate::error::{Error, Result};
use crate::mcmc::Chain;
use crate::model::{self, ModelState, WeightWindow};
use crate::stats::{self, FiveNumber};

/// Evaluation grid for predictive densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            y_min: -0.25,
            y_max: 1.25,
            points: 601,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_min < self.y_max) || self.points < 3 {
            return Err(Error::Domain(format!(
                "grid ({}, {}, {}) must be ordered with at least 3 points",
                self.y_min, self.y_max, self.points
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.y_max - self.y_min) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| self.y_min + i as f64 * h).collect()
    }

    /// Same spacing, bounds widened to cover `[lo, hi]`.
    fn extended_to(&self, lo: f64, hi: f64) -> Self {
        let h = self.step();
        let y_min = self.y_min.min(lo);
        let y_max = self.y_max.max(hi);
        let points = ((y_max - y_min) / h).ceil() as usize + 1;
        Self {
            y_min,
            y_max: y_min + h * (points - 1) as f64,
            points,
        }
    }
}

/// A predictive-density request: moderator values on the original scale, the
/// effect-size variance to condition on, and the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveQuery {
    /// Moderator values on the original scale (no leading constant).
    pub x: Vec<f64>,
    /// Effect-size sampling variance the density is conditioned on. The
    /// default, .001, reflects a large-sample study.
    pub var_condition: f64,
    pub grid: GridSpec,
}

impl PredictiveQuery {
    /// Query at the standardization centers: every moderator at standardized
    /// zero.
    pub fn baseline(standardization: &Standardization) -> Self {
        Self {
            x: standardization.centers.clone(),
            var_condition: 1e-3,
            grid: GridSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.var_condition > 0.0) || !self.var_condition.is_finite() {
            return Err(Error::Domain(format!(
                "var_condition = {} must be positive",
                self.var_condition
            )));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("query moderators must be finite".into()));
        }
        Ok(())
    }
}

/// Grid-based posterior predictive density with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    /// Normalized density values over `grid`.
    pub density: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Plain (non-excess) kurtosis; 3 for a normal.
    pub kurtosis: f64,
    /// Strict local maxima, nearby maxima merged.
    pub modes: Vec<f64>,
    pub quartiles: (f64, f64, f64),
    /// Raw grid mass before normalization; a value below .995 triggered one
    /// grid extension.
    pub raw_mass: f64,
    pub grid_extended: bool,
}

impl DensityEstimate {
    /// Linear-interpolated quantile from the grid CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_from_grid(&self.grid, &self.density, p)
    }
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 1..grid.len() {
        total += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    total
}

fn quantile_from_grid(grid: &[f64], density: &[f64], p: f64) -> f64 {
    let mut cum = 0.0;
    for i in 1..grid.len() {
        let seg = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        if cum + seg >= p {
            let t = if seg > 0.0 { (p - cum) / seg } else { 0.5 };
            return grid[i - 1] + t * (grid[i] - grid[i - 1]);
        }
        cum += seg;
    }
    *grid.last().unwrap()
}

/// Strict local maxima of `density`, merging maxima closer than 2 grid steps
/// (the higher one wins) and discarding maxima below 1% of the global peak
/// (Monte Carlo ripple in the averaged density, not structure).
fn detect_modes(grid: &[f64], density: &[f64]) -> Vec<f64> {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let floor = 0.01 * peak;
    let mut maxima: Vec<(usize, f64)> = Vec::new();
    for i in 1..grid.len() - 1 {
        if density[i] > density[i - 1] && density[i] > density[i + 1] && density[i] >= floor {
            maxima.push((i, density[i]));
        }
    }
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (i, d) in maxima {
        match merged.last_mut() {
            Some((prev_i, prev_d)) if i - *prev_i <= 2 => {
                if d > *prev_d {
                    *prev_i = i;
                    *prev_d = d;
                }
            }
            _ => merged.push((i, d)),
        }
    }
    merged.into_iter().map(|(i, _)| grid[i]).collect()
}

fn state_window(state: &ModelState) -> WeightWindow {
    WeightWindow {
        j_min: state.mu.j_min(),
        j_max: state.mu.j_max(),
        tail_mass_tol: model::DEFAULT_TAIL_MASS_TOL,
    }
}

fn average_density_on_grid(
    chain: &Chain,
    x_design: &[f64],
    var: f64,
    grid: &[f64],
) -> Vec<f64> {
    let mut density = vec![0.0; grid.len()];
    for state in &chain.states {
        // weights and component centers are fixed across the grid
        let window = state_window(state);
        let eta = model::dot(x_design, &state.beta_omega);
        let location = model::dot(x_design, &state.beta);
        let noise_var = state.phi * var;
        let weights = model::window_weights(&window, eta, state.sigma_omega);
        if weights.mass <= 0.0 {
            continue;
        }
        let cells: Vec<(f64, f64)> = window
            .indices()
            .zip(&weights.values)
            .filter(|&(_, &w)| w > 0.0)
            .map(|(j, &w)| (w / weights.mass, location + state.mu.get(j).unwrap()))
            .collect();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * noise_var).sqrt();
        let half_prec = 0.5 / noise_var;
        for (g, &y) in grid.iter().enumerate() {
            let mut f = 0.0;
            for &(w, center) in &cells {
                let d = y - center;
                f += w * (-half_prec * d * d).exp();
            }
            density[g] += norm * f;
        }
    }
    let m = chain.len() as f64;
    density.iter_mut().for_each(|d| *d /= m);
    density
}

/// Posterior predictive density at a query point: the average of the
/// mixture density over retained draws, evaluated on the grid and
/// normalized. The query is standardized internally. If more than .5% of
/// the mass falls outside the grid, the grid is extended once (same
/// spacing, tripled span) and the density recomputed.
pub fn predictive_density(
    chain: &Chain,
    query: &PredictiveQuery,
    standardization: &Standardization,
) -> Result<DensityEstimate> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    query.validate()?;
    let x_std = standardization.standardize_row(&query.x)?;
    if x_std.len() != chain.p() {
        return Err(Error::Mismatch(format!(
            "query has {} moderators, chain expects {}",
            x_std.len(),
            chain.p()
        )));
    }
    let mut design = Vec::with_capacity(x_std.len() + 1);
    design.push(1.0);
    design.extend_from_slice(&x_std);

    let mut spec = query.grid;
    let mut grid = spec.values();
    let mut density = average_density_on_grid(chain, &design, query.var_condition, &grid);
    let mut raw_mass = trapezoid(&grid, &density);
    let mut grid_extended = false;
    if raw_mass < 0.995 {
        eprintln!(
            "predictive grid ({}, {}) captures only {raw_mass:.4} of the mass; extending once",
            spec.y_min, spec.y_max
        );
        // size the extension from the exact predictive moments so one pass
        // is enough
        let (pm, pv) = predictive_moments(chain, &design, query.var_condition);
        let spread = 12.0 * pv.sqrt();
        spec = spec.extended_to(pm - spread, pm + spread);
        grid = spec.values();
        density = average_density_on_grid(chain, &design, query.var_condition, &grid);
        raw_mass = trapezoid(&grid, &density);
        grid_extended = true;
    }
    if !(raw_mass > 0.0) {
        return Err(Error::Domain(
            "predictive density vanishes on the grid".into(),
        ));
    }
    density.iter_mut().for_each(|d| *d /= raw_mass);

    let mean = trapezoid(&grid, &grid.iter().zip(&density).map(|(y, d)| y * d).collect::<Vec<_>>());
    let central =
        |k: i32| -> f64 { trapezoid(&grid, &grid.iter().zip(&density).map(|(y, d)| (y - mean).powi(k) * d).collect::<Vec<_>>()) };
    let variance = central(2);
    let skewness = central(3) / variance.powf(1.5);
    let kurtosis = central(4) / (variance * variance);
    let q25 = quantile_from_grid(&grid, &density, 0.25);
    let median = quantile_from_grid(&grid, &density, 0.5);
    let q75 = quantile_from_grid(&grid, &density, 0.75);
    let modes = detect_modes(&grid, &density);
    Ok(DensityEstimate {
        grid,
        density,
        mean,
        median,
        variance,
        skewness,
        kurtosis,
        modes,
        quartiles: (q25, median, q75),
        raw_mass,
        grid_extended,
    })
}

/// Writes a density as `y,density` rows.
pub fn write_density_csv<W: io::Write>(writer: W, est: &DensityEstimate) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["y", "density"])?;
    for (y, d) in est.grid.iter().zip(&est.density) {
        wtr.write_record([y.to_string(), d.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Posterior summary of one regression coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Set when the central 95% interval excludes zero.
    pub significant: bool,
}

/// Coefficient table on the standardized and original moderator scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub standardized: Vec<CoefficientSummary>,
    pub original: Vec<CoefficientSummary>,
}

fn summarize_coefficient(name: &str, draws: &[f64]) -> CoefficientSummary {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = stats::quantile_sorted(&sorted, 0.025);
    let hi = stats::quantile_sorted(&sorted, 0.975);
    CoefficientSummary {
        name: name.to_string(),
        mean: stats::mean(draws),
        ci_lower: lo,
        ci_upper: hi,
        significant: lo > 0.0 || hi < 0.0,
    }
}

/// Marginal posterior mean and central 95% interval per coefficient
/// (intercept + one slope per moderator), on both scales.
///
/// Original-scale draws divide each slope by its column scale and shift the
/// intercept by the recentering term, per draw, before summarizing.
pub fn coefficient_table(chain: &Chain, standardization: &Standardization) -> Result<CoefficientTable> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    let p = chain.p();
    if standardization.p() != p {
        return Err(Error::Mismatch(format!(
            "standardization has {} moderators, chain has {p}",
            standardization.p()
        )));
    }
    let name_of = |k: usize| -> String {
        if k == 0 {
            "intercept".to_string()
        } else {
            standardization.names[k - 1].clone()
        }
    };
    let mut standardized = Vec::with_capacity(p + 1);
    let mut original = Vec::with_capacity(p + 1);
    for k in 0..=p {
        let draws: Vec<f64> = chain.states.iter().map(|s| s.beta[k]).collect();
        standardized.push(summarize_coefficient(&name_of(k), &draws));
        let orig_draws: Vec<f64> = if k == 0 {
            chain
                .states
                .iter()
                .map(|s| {
                    s.beta[0]
                        - (1..=p)
                            .map(|j| {
                                s.beta[j] * standardization.centers[j - 1]
                                    / standardization.scales[j - 1]
                            })
                            .sum::<f64>()
                })
                .collect()
        } else {
            chain
                .states
                .iter()
                .map(|s| s.beta[k] / standardization.scales[k - 1])
                .collect()
        };
        original.push(summarize_coefficient(&name_of(k), &orig_draws));
    }
    Ok(CoefficientTable {
        standardized,
        original,
    })
}

/// Writes one coefficient table as CSV.
pub fn write_coefficients_csv<W: io::Write>(
    writer: W,
    table: &[CoefficientSummary],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["coefficient", "mean", "ci_lower", "ci_upper", "significant"])?;
    for c in table {
        wtr.write_record([
            c.name.as_str(),
            &c.mean.to_string(),
            &c.ci_lower.to_string(),
            &c.ci_upper.to_string(),
            &c.significant.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Informant whose indicator is switched on in a profile query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Informant {
    Mom,
    Dad,
    Teacher,
    SelfReport,
    Observer,
}

impl Informant {
    pub const ALL: [Informant; 5] = [
        Informant::Mom,
        Informant::Dad,
        Informant::Teacher,
        Informant::SelfReport,
        Informant::Observer,
    ];

    /// Column name of the indicator moderator.
    pub fn column(&self) -> &'static str {
        match self {
            Informant::Mom => "mom",
            Informant::Dad => "dad",
            Informant::Teacher => "teacher",
            Informant::SelfReport => "self",
            Informant::Observer => "observer",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mom" => Ok(Informant::Mom),
            "dad" => Ok(Informant::Dad),
            "teacher" => Ok(Informant::Teacher),
            "self" => Ok(Informant::SelfReport),
            "observer" => Ok(Informant::Observer),
            other => Err(Error::Domain(format!(
                "unknown informant `{other}` (expected mom, dad, teacher, self, or observer)"
            ))),
        }
    }
}

/// One point of a conditional profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub age: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Predictive median and interquartile range across ages, conditional on one
/// informant type.
///
/// The query sets the chosen informant indicator to 1 and the other four to
/// 0, `longsampl` to 1, `age` to each given value, and every remaining
/// moderator to its standardized zero (the column center). Ages outside the
/// observed range produce a warning on stderr.
pub fn profile_curve(
    chain: &Chain,
    informant: Informant,
    age_values: &[f64],
    standardization: &Standardization,
) -> Result<Vec<ProfilePoint>> {
    let idx = |name: &str| -> Result<usize> {
        standardization
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Mismatch(format!("standardization lacks a `{name}` column")))
    };
    let age_idx = idx("age")?;
    let long_idx = idx("longsampl")?;
    let informant_indices: Vec<usize> = Informant::ALL
        .iter()
        .map(|inf| idx(inf.column()))
        .collect::<Result<_>>()?;

    let (age_min, age_max) = (
        standardization.min[age_idx],
        standardization.max[age_idx],
    );
    let mut points = Vec::with_capacity(age_values.len());
    for &age in age_values {
        if age < age_min || age > age_max {
            eprintln!(
                "profile age {age} outside the observed range [{age_min}, {age_max}]"
            );
        }
        let mut x = standardization.centers.clone();
        for (inf, &i) in Informant::ALL.iter().zip(&informant_indices) {
            x[i] = if *inf == informant { 1.0 } else { 0.0 };
        }
        x[long_idx] = 1.0;
        x[age_idx] = age;
        let query = PredictiveQuery {
            x,
            var_condition: 1e-3,
            grid: GridSpec::default(),
        };
        let est = predictive_density(chain, &query, standardization)?;
        points.push(ProfilePoint {
            age,
            median: est.quartiles.1,
            q25: est.quartiles.0,
            q75: est.quartiles.2,
        });
    }
    Ok(points)
}

/// Writes profile points as `age,median,q25,q75` rows.
pub fn write_profile_csv<W: io::Write>(writer: W, points: &[ProfilePoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["age", "median", "q25", "q75"])?;
    for p in points {
        wtr.write_record([
            p.age.to_string(),
            p.median.to_string(),
            p.q25.to_string(),
            p.q75.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One point of the median-versus-SE curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeCurvePoint {
    pub se: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Publication-bias probe built from the SE moderator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationBiasReport {
    /// Posterior summary of the standardized SE slope.
    pub slope: CoefficientSummary,
    /// Predictive median and IQR across the observed SE range, all other
    /// moderators at standardized zero.
    pub curve: Vec<SeCurvePoint>,
    /// Total movement of the median across the SE range.
    pub median_range: f64,
    /// Average interquartile range along the curve.
    pub pooled_iqr: f64,
    /// Set only when the slope interval excludes zero AND the median moves
    /// more than the pooled IQR.
    pub bias_indicated: bool,
}

const SE_CURVE_POINTS: usize = 21;

/// Probes how strongly the standard-error moderator drives the predictive
/// distribution; a significant slope alone does not flag bias unless the
/// median curve also moves materially.
pub fn publication_bias_report(
    chain: &Chain,
    standardization: &Standardization,
) -> Result<PublicationBiasReport> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    let se_idx = standardization
        .names
        .iter()
        .position(|n| n == "SE")
        .ok_or_else(|| Error::Mismatch("standardization lacks an `SE` column".into()))?;
    let table = coefficient_table(chain, standardization)?;
    let slope = table.standardized[se_idx + 1].clone();

    let (se_min, se_max) = (standardization.min[se_idx], standardization.max[se_idx]);
    let mut curve = Vec::with_capacity(SE_CURVE_POINTS);
    for k in 0..SE_CURVE_POINTS {
        let se = se_min + (se_max - se_min) * k as f64 / (SE_CURVE_POINTS - 1) as f64;
        let mut x = standardization.centers.clone();
        x[se_idx] = se;
        let query = PredictiveQuery {
            x,
            var_condition: 1e-3,
            grid: GridSpec::default(),
        };
        let est = predictive_density(chain, &query, standardization)?;
        curve.push(SeCurvePoint {
            se,
            median: est.quartiles.1,
            q25: est.quartiles.0,
            q75: est.quartiles.2,
        });
    }
    let medians: Vec<f64> = curve.iter().map(|p| p.median).collect();
    let median_range = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let pooled_iqr = stats::mean(&curve.iter().map(|p| p.q75 - p.q25).collect::<Vec<_>>());
    let bias_indicated = slope.significant && median_range > pooled_iqr;
    Ok(PublicationBiasReport {
        slope,
        curve,
        median_range,
        pooled_iqr,
        bias_indicated,
    })
}

/// Predictive mean-square-error fit score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    /// Sum of the per-observation scores.
    pub total: f64,
    pub per_obs: Vec<f64>,
    pub per_obs_root: Vec<f64>,
    pub root_summary: FiveNumber,
}

/// Exact first two moments of the posterior predictive at a design point,
/// conditioned on observation variance `var`: averages of the per-draw
/// mixture moments with window-renormalized weights.
pub fn predictive_moments(chain: &Chain, x_design: &[f64], var: f64) -> (f64, f64) {
    let mut mean_acc = 0.0;
    let mut second_acc = 0.0;
    for state in &chain.states {
        let window = state_window(state);
        let eta = model::dot(x_design, &state.beta_omega);
        let location = model::dot(x_design, &state.beta);
        let noise_var = state.phi * var;
        let weights = model::window_weights(&window, eta, state.sigma_omega);
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for ((_, mu_j), &w) in state.mu.iter().zip(&weights.values) {
            if w <= 0.0 {
                continue;
            }
            let center = location + mu_j;
            m1 += w * center;
            m2 += w * (center * center + noise_var);
        }
        mean_acc += m1 / weights.mass;
        second_acc += m2 / weights.mass;
    }
    let m = chain.len() as f64;
    let mean = mean_acc / m;
    let variance = second_acc / m - mean * mean;
    (mean, variance)
}

/// Per-observation predictive mean-square error
/// `D_i = (y_i - E[Y_i | x_i])^2 + Var[Y_i | x_i]`, each observation's
/// predictive conditioned on its own sampling variance, plus the total and
/// the five-number summary of the square roots.
pub fn fit_score(chain: &Chain, dataset: &StandardizedDataset) -> Result<FitScore> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    if dataset.n() != chain.n_obs {
        return Err(Error::Mismatch(format!(
            "dataset has {} observations, chain was fitted to {}",
            dataset.n(),
            chain.n_obs
        )));
    }
    if dataset.standardization != chain.standardization {
        return Err(Error::Mismatch(
            "dataset standardization differs from the chain's".into(),
        ));
    }
    let mut per_obs = Vec::with_capacity(dataset.n());
    for i in 0..dataset.n() {
        let design = dataset.design_row(i);
        let r = &dataset.records[i];
        let (mean, variance) = predictive_moments(chain, &design, r.var);
        let bias = r.y - mean;
        per_obs.push(bias * bias + variance);
    }
    let per_obs_root: Vec<f64> = per_obs.iter().map(|d| d.sqrt()).collect();
    Ok(FitScore {
        total: per_obs.iter().sum(),
        root_summary: stats::five_number_summary(&per_obs_root),
        per_obs,
        per_obs_root,
    })
}

/// Grid route for the fit-score integrand: `D_i` as the integral of
/// `(y_i - y)^2 f(y)` over a normalized grid density. Used as the
/// independent check of the moment form.
pub fn squared_error_integral(est: &DensityEstimate, y_i: f64) -> f64 {
    let weighted: Vec<f64> = est
        .grid
        .iter()
        .zip(&est.density)
        .map(|(y, d)| (y_i - y) * (y_i - y) * d)
        .collect();
    trapezoid(&est.grid, &weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{standardize, EffectSizeRecord, ModeratorSchema};
    use crate::mcmc::{Chain, McmcConfig};
    use crate::model::{ModelState, MuWindow, PriorConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy_standardization(p: usize) -> Standardization {
        Standardization {
            names: (1..=p).map(|k| format!("x{k}")).collect(),
            centers: vec![0.0; p],
            scales: vec![1.0; p],
            constant: vec![false; p],
            min: vec![-2.0; p],
            max: vec![2.0; p],
        }
    }

    fn chain_of(states: Vec<ModelState>, std: Standardization, n_obs: usize) -> Chain {
        let windows = states
            .iter()
            .map(|s| (s.mu.j_min(), s.mu.j_max()))
            .collect();
        Chain {
            states,
            latents: Vec::new(),
            windows,
            config: McmcConfig::default(),
            prior: PriorConfig::default(),
            standardization: std,
            n_obs,
            chain_index: 0,
            dataset_digest: None,
        }
    }

    fn single_draw_chain(beta0: f64, mu0: f64, phi: f64, p: usize) -> Chain {
        let mut beta = vec![0.0; p + 1];
        beta[0] = beta0;
        let state = ModelState {
            mu: MuWindow::singleton(mu0),
            beta,
            phi,
            sigma_mu2: 0.5,
            beta_omega: vec![0.0; p + 1],
            sigma_omega: 1.0,
        };
        chain_of(vec![state], toy_standardization(p), 3)
    }

    #[test]
    fn single_draw_single_cluster_density_is_normal() {
        let chain = single_draw_chain(0.5, 0.1, 1.2, 1);
        let std = chain.standardization.clone();
        let query = PredictiveQuery {
            x: vec![0.0],
            var_condition: 0.004,
            grid: GridSpec::default(),
        };
        let est = predictive_density(&chain, &query, &std).unwrap();
        let expect_mean = 0.6;
        let expect_var = 1.2 * 0.004;
        assert!((est.mean - expect_mean).abs() < 1e-4, "{}", est.mean);
        assert!((est.variance - expect_var).abs() < 1e-5, "{}", est.variance);
        assert_eq!(est.modes.len(), 1);
        assert!((est.modes[0] - expect_mean).abs() < est.grid[1] - est.grid[0]);
        // integral of the normalized density is 1 by construction; raw mass
        // close to 1 because the grid covers the normal
        assert!((est.raw_mass - 1.0).abs() < 1e-6);
        // median of a normal equals its mean
        assert!((est.median - expect_mean).abs() < 1e-3);
        // IQR = 2 * 0.67449 * sd
        let iqr = est.quartiles.2 - est.quartiles.0;
        let expect_iqr = 2.0 * 0.674_489_75 * expect_var.sqrt();
        assert!((iqr - expect_iqr).abs() < 1e-3, "{iqr} vs {expect_iqr}");
    }

    #[test]
    fn grid_extends_when_mass_escapes() {
        let chain = single_draw_chain(3.0, 0.0, 1.0, 1);
        let std = chain.standardization.clone();
        let query = PredictiveQuery {
            x: vec![0.0],
            var_condition: 0.01,
            grid: GridSpec::default(),
        };
        let est = predictive_density(&chain, &query, &std).unwrap();
        assert!(est.grid_extended);
        assert!((est.mean - 3.0).abs() < 1e-3);
    }

    #[test]
    fn two_component_chain_is_bimodal() {
        let state = ModelState {
            mu: MuWindow::new(0, vec![-0.3, 0.3]).unwrap(),
            beta: vec![0.5, 0.0],
            phi: 1.0,
            sigma_mu2: 0.5,
            // eta = 0 sits on the boundary between cells 0 and 1, so the
            // two components share the mass evenly
            beta_omega: vec![0.0, 0.0],
            sigma_omega: 0.3,
        };
        let chain = chain_of(vec![state], toy_standardization(1), 3);
        let std = chain.standardization.clone();
        let query = PredictiveQuery {
            x: vec![0.0],
            var_condition: 0.002,
            grid: GridSpec::default(),
        };
        let est = predictive_density(&chain, &query, &std).unwrap();
        assert_eq!(est.modes.len(), 2, "modes {:?}", est.modes);
        assert!((est.modes[0] - 0.2).abs() < 0.02);
        assert!((est.modes[1] - 0.8).abs() < 0.02);
    }

    #[test]
    fn degenerate_chain_coefficients() {
        let mut states = Vec::new();
        for _ in 0..10 {
            states.push(ModelState {
                mu: MuWindow::singleton(0.0),
                beta: vec![0.44, 0.12],
                phi: 1.0,
                sigma_mu2: 0.5,
                beta_omega: vec![0.0, 0.0],
                sigma_omega: 1.0,
            });
        }
        let chain = chain_of(states, toy_standardization(1), 3);
        let table = coefficient_table(&chain, &chain.standardization).unwrap();
        let slope = &table.standardized[1];
        assert!((slope.mean - 0.12).abs() < 1e-12);
        assert!((slope.ci_lower - 0.12).abs() < 1e-12);
        assert!((slope.ci_upper - 0.12).abs() < 1e-12);
        assert!(slope.significant);
        let zero_chain = single_draw_chain(0.0, 0.0, 1.0, 1);
        let t = coefficient_table(&zero_chain, &zero_chain.standardization).unwrap();
        assert!(!t.standardized[1].significant);
    }

    #[test]
    fn original_scale_transform_recovers_raw_regression() {
        // standardized slope b on column with scale s, center c corresponds
        // to original slope b/s and intercept b0 - b c / s
        let std = Standardization {
            names: vec!["x1".into()],
            centers: vec![10.0],
            scales: vec![4.0],
            constant: vec![false],
            min: vec![2.0],
            max: vec![18.0],
        };
        let state = ModelState {
            mu: MuWindow::singleton(0.0),
            beta: vec![0.5, 0.2],
            phi: 1.0,
            sigma_mu2: 0.5,
            beta_omega: vec![0.0, 0.0],
            sigma_omega: 1.0,
        };
        let chain = chain_of(vec![state], std.clone(), 3);
        let table = coefficient_table(&chain, &std).unwrap();
        assert!((table.original[1].mean - 0.05).abs() < 1e-12);
        assert!((table.original[0].mean - (0.5 - 0.2 * 10.0 / 4.0)).abs() < 1e-12);
    }

    fn canonical_chain() -> (Chain, Standardization) {
        let schema = ModeratorSchema::canonical();
        let p = schema.len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<EffectSizeRecord> = (0..6)
            .map(|i| {
                let var = 0.004 + 0.002 * (i as f64);
                let mut x = vec![0.0; p];
                x[0] = var.sqrt(); // SE
                x[1] = 2000.0 + i as f64; // PY
                x[7] = if i % 2 == 0 { 1.0 } else { 0.0 }; // mom
                x[9] = if i % 2 == 1 { 1.0 } else { 0.0 }; // teacher
                x[18] = 60.0 + 12.0 * i as f64; // age
                x[26] = if i < 3 { 1.0 } else { 0.0 }; // longsampl
                x[27] = 40.0 + i as f64; // latitude
                x[28] = -80.0 + 2.0 * i as f64; // longitude
                EffectSizeRecord {
                    study_id: format!("S{i}"),
                    y: 0.4 + 0.05 * rng.sample::<f64, _>(StandardNormal),
                    var,
                    x,
                }
            })
            .collect();
        let data = standardize(&records, &schema).unwrap();
        let state = ModelState {
            mu: MuWindow::new(-2, vec![-0.05, 0.0, 0.05, 0.1, 0.0]).unwrap(),
            beta: {
                let mut b = vec![0.0; p + 1];
                b[0] = 0.5;
                b
            },
            phi: 1.0,
            sigma_mu2: 0.2,
            beta_omega: vec![0.0; p + 1],
            sigma_omega: 1.0,
        };
        let chain = chain_of(vec![state], data.standardization.clone(), data.n());
        (chain, data.standardization)
    }

    #[test]
    fn profile_curve_is_informant_symmetric_for_null_slopes() {
        let (chain, std) = canonical_chain();
        let ages = [72.0, 96.0, 120.0];
        let mom = profile_curve(&chain, Informant::Mom, &ages, &std).unwrap();
        let dad = profile_curve(&chain, Informant::Dad, &ages, &std).unwrap();
        for (a, b) in mom.iter().zip(&dad) {
            assert!((a.median - b.median).abs() < 1e-9);
            assert!((a.q25 - b.q25).abs() < 1e-9);
        }
        for p in &mom {
            assert!(p.q25 <= p.median && p.median <= p.q75);
        }
        assert!(Informant::parse("nanny").is_err());
        assert_eq!(Informant::parse("self").unwrap(), Informant::SelfReport);
    }

    #[test]
    fn bias_report_null_case() {
        let (chain, std) = canonical_chain();
        let report = publication_bias_report(&chain, &std).unwrap();
        assert!(!report.slope.significant);
        assert!(!report.bias_indicated);
        assert_eq!(report.curve.len(), SE_CURVE_POINTS);
    }

    #[test]
    fn fit_score_known_cases() {
        // analytic predictive Normal(y_i, .02): D_i = .02
        let chain = single_draw_chain(0.5, 0.0, 1.0, 1);
        let schema = ModeratorSchema::continuous(1);
        let records = vec![
            EffectSizeRecord {
                study_id: "a".into(),
                y: 0.5,
                var: 0.02,
                x: vec![-0.5],
            },
            EffectSizeRecord {
                study_id: "b".into(),
                y: 0.6,
                var: 0.01,
                x: vec![0.0],
            },
            EffectSizeRecord {
                study_id: "c".into(),
                y: 0.4,
                var: 0.02,
                x: vec![0.5],
            },
        ];
        let mut data = standardize(&records, &schema).unwrap();
        // fit_score requires matching standardization metadata
        data.standardization = chain.standardization.clone();
        let score = fit_score(&chain, &data).unwrap();
        // obs a: mean .5 = y, variance .02 -> D = .02
        assert!((score.per_obs[0] - 0.02).abs() < 1e-12);
        // obs b: bias .1, variance .01 -> D = .02
        assert!((score.per_obs[1] - 0.02).abs() < 1e-12);
        let total: f64 = score.per_obs.iter().sum();
        assert!((score.total - total).abs() < 1e-9);
    }

    #[test]
    fn grid_identity_matches_moment_form() {
        let chain = single_draw_chain(0.45, 0.05, 1.1, 1);
        let std = chain.standardization.clone();
        let query = PredictiveQuery {
            x: vec![0.3],
            var_condition: 0.006,
            grid: GridSpec::default(),
        };
        let est = predictive_density(&chain, &query, &std).unwrap();
        for y_i in [0.2, 0.5, 0.9] {
            let integral = squared_error_integral(&est, y_i);
            let moment = (y_i - est.mean).powi(2) + est.variance;
            assert!(
                (integral - moment).abs() < 1e-6,
                "y_i {y_i}: {integral} vs {moment}"
            );
        }
    }

    #[test]
    fn quartiles_match_direct_sampling() {
        let state = ModelState {
            mu: MuWindow::new(-1, vec![-0.2, 0.1, 0.25]).unwrap(),
            beta: vec![0.5, 0.1],
            phi: 1.4,
            sigma_mu2: 0.5,
            beta_omega: vec![0.2, -0.3],
            sigma_omega: 0.8,
        };
        let chain = chain_of(vec![state.clone()], toy_standardization(1), 3);
        let std = chain.standardization.clone();
        let query = PredictiveQuery {
            x: vec![0.4],
            var_condition: 0.01,
            grid: GridSpec::default(),
        };
        let est = predictive_density(&chain, &query, &std).unwrap();

        // direct simulation from the same draw
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let design = [1.0, 0.4];
        let eta = model::dot(&design, &state.beta_omega);
        let location = model::dot(&design, &state.beta);
        let sd = (state.phi * 0.01f64).sqrt();
        let weights: Vec<f64> = (state.mu.j_min()..=state.mu.j_max())
            .map(|j| model::mixture_weight_eta(j, eta, state.sigma_omega))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut samples = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let mut target = rng.gen::<f64>() * total;
            let mut cell = weights.len() - 1;
            for (c, &w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    cell = c;
                    break;
                }
            }
            let mu_j = state.mu.get(state.mu.j_min() + cell as i32).unwrap();
            samples.push(location + mu_j + sd * rng.sample::<f64, _>(StandardNormal));
        }
        for (p, grid_q) in [(0.25, est.quartiles.0), (0.5, est.quartiles.1), (0.75, est.quartiles.2)] {
            let direct = stats::quantile(&samples, p);
            assert!(
                (direct - grid_q).abs() < 0.01,
                "q{p}: grid {grid_q} vs direct {direct}"
            );
        }
    }
}
