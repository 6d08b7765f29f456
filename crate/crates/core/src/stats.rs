//! Shared numerical routines: normal CDF/quantile helpers, log-sum-exp,
//! descriptive statistics, a truncated-normal sampler, and a univariate
//! slice sampler used for the non-conjugate Gibbs steps.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use statrs::function::erf;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Standard normal CDF computed through `erfc` so both tails keep full
/// relative precision down to the underflow threshold.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Log density of a normal with the given mean and variance.
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Log of a Gamma density in shape-rate parameterization.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Numerically stable log(Σ exp(v)).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n-1 denominator; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Linear-interpolation quantile (R type 7) of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile of an unsorted slice.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&v, p)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn five_number_summary(xs: &[f64]) -> FiveNumber {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    FiveNumber {
        min: v[0],
        q25: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q75: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    }
}

/// Pearson product-moment correlation.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Two-sided Student's t quantile, `P(T <= t) = p` with `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid t distribution")
        .inverse_cdf(p)
}

/// Upper tail probability of a chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: f64) -> f64 {
    1.0 - ChiSquared::new(df).expect("valid chi-squared").cdf(x)
}

/// Draw from a normal with mean `m` and standard deviation `s`, truncated to
/// `(lo, hi]`.
///
/// Uses inverse-CDF sampling on whichever tail keeps the CDF values away
/// from 1, so cells far out in either tail stay accurate. If the interval
/// mass underflows entirely, the bound nearest the mean is returned.
pub fn draw_truncated_normal<R: Rng>(rng: &mut R, m: f64, s: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi && s > 0.0);
    let a = (lo - m) / s;
    let b = (hi - m) / s;
    let z = if a >= 0.0 {
        // right tail: work with survival values S(x) = Phi(-x)
        let sa = std_normal_cdf(-a);
        let sb = std_normal_cdf(-b);
        if sa <= sb {
            a
        } else {
            let u = rng.gen_range(sb..sa);
            -std_normal_quantile(u.max(f64::MIN_POSITIVE))
        }
    } else if b <= 0.0 {
        let fa = std_normal_cdf(a);
        let fb = std_normal_cdf(b);
        if fb <= fa {
            b
        } else {
            let u = rng.gen_range(fa..fb);
            std_normal_quantile(u.max(f64::MIN_POSITIVE))
        }
    } else {
        let fa = std_normal_cdf(a);
        let fb = std_normal_cdf(b);
        let u = rng.gen_range(fa..fb);
        std_normal_quantile(u)
    };
    m + s * z.clamp(a, b)
}

/// One univariate slice-sampling transition (stepping out + shrinkage) for a
/// log density `logf` supported on `(lo, hi)`.
///
/// The returned value leaves the density invariant; successive calls form a
/// Markov chain. `width` is the initial bracket size, `x0` the current value
/// (must satisfy `logf(x0) > -inf`).
pub fn slice_sample<R: Rng, F: Fn(f64) -> f64>(
    rng: &mut R,
    logf: F,
    x0: f64,
    width: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    const MAX_STEPS: usize = 64;
    const MAX_SHRINK: usize = 1024;
    let slice_depth: f64 = rand_distr::Exp1.sample(rng);
    let y = logf(x0) - slice_depth;
    let mut l = (x0 - width * rng.gen::<f64>()).max(lo);
    let mut r = (l + width).min(hi);
    for _ in 0..MAX_STEPS {
        if l <= lo || logf(l) <= y {
            break;
        }
        l = (l - width).max(lo);
    }
    for _ in 0..MAX_STEPS {
        if r >= hi || logf(r) <= y {
            break;
        }
        r = (r + width).min(hi);
    }
    for _ in 0..MAX_SHRINK {
        let x1 = l + (r - l) * rng.gen::<f64>();
        if logf(x1) > y {
            return x1;
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
    }
    x0
}

use rand_distr::Distribution;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_cdf_matches_known_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-10);
        assert!((std_normal_cdf(-1.0) - 0.158_655_253_931_457).abs() < 1e-10);
        // deep tail keeps relative precision
        let p = std_normal_cdf(-20.0);
        assert!((p - 2.753_624e-89).abs() / p < 1e-5);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.0) - 1.0).abs() < 1e-12);
        assert!((quantile(&xs, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_normal_respects_bounds_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (lo, hi) = (0.5, 1.5);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = draw_truncated_normal(&mut rng, 0.0, 1.0, lo, hi);
            assert!(x > lo && x <= hi);
            sum += x;
        }
        // E[X | 0.5 < X <= 1.5] for standard normal
        let num = (-0.5f64 * 0.25).exp() - (-0.5f64 * 2.25).exp();
        let den = (std_normal_cdf(hi) - std_normal_cdf(lo)) * (2.0 * std::f64::consts::PI).sqrt();
        let expect = num / den;
        assert!((sum / n as f64 - expect).abs() < 5e-3);
    }

    #[test]
    fn truncated_normal_far_tail_is_finite_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = draw_truncated_normal(&mut rng, 0.0, 1.0, 30.0, 31.0);
            assert!(x > 30.0 && x <= 31.0, "got {x}");
            let y = draw_truncated_normal(&mut rng, 0.0, 1.0, -31.0, -30.0);
            assert!(y > -31.0 && y <= -30.0, "got {y}");
        }
    }

    #[test]
    fn slice_sampler_recovers_gamma_moments() {
        // target: Gamma(3, 2) on (0, inf), mean 1.5, var 0.75
        let logf = |x: f64| gamma_log_pdf(x, 3.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut x = 1.0;
        let mut draws = Vec::with_capacity(200_000);
        for _ in 0..200_000 {
            x = slice_sample(&mut rng, logf, x, 1.0, 0.0, f64::INFINITY);
            draws.push(x);
        }
        let m = mean(&draws);
        let v = sample_variance(&draws);
        assert!((m - 1.5).abs() < 0.01, "mean {m}");
        assert!((v - 0.75).abs() < 0.02, "var {v}");
    }

    #[test]
    fn t_quantile_matches_reference() {
        // t(49) 97.5% point is about 2.0096
        let t = student_t_quantile(0.975, 49.0);
        assert!((t - 2.0096).abs() < 1e-3, "{t}");
    }
}
