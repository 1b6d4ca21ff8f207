//! Target densities and the tempered family `pi(x)^(1/T)`.
//!
//! Everything is evaluated in the log domain: the paper mixture has
//! `pi(0) ~ 1e-50`, which underflows any product of densities.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Smallest grid accepted by [`log_partition_quadrature`].
pub const MIN_QUADRATURE_POINTS: usize = 1000;

/// A (possibly unnormalized) density on the real line, evaluated as `log pi(x)`.
pub trait TargetDensity {
    fn log_density(&self, x: f64) -> f64;
}

impl<D: TargetDensity + ?Sized> TargetDensity for &D {
    fn log_density(&self, x: f64) -> f64 {
        (**self).log_density(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Finite mixture of univariate Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    // log(w) - log(sd) - log(sqrt(2 pi)) per component
    log_norm: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("target.weights", "mixture needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::config(
                    "target.weights",
                    format!("weight {} of component {i} not in (0, 1]", c.weight),
                ));
            }
            if !(c.sd > 0.0 && c.sd.is_finite()) {
                return Err(Error::config(
                    "target.sds",
                    format!("sd {} of component {i} must be positive", c.sd),
                ));
            }
            if !c.mean.is_finite() {
                return Err(Error::config("target.means", format!("mean of component {i} is not finite")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("target.weights", format!("weights sum to {total}, expected 1")));
        }
        let log_norm = components
            .iter()
            .map(|c| c.weight.ln() - c.sd.ln() - LN_SQRT_2PI)
            .collect();
        Ok(Self { components, log_norm })
    }

    /// Equal-weight mixture of N(-15, 1) and N(15, 1).
    pub fn bimodal() -> Self {
        Self::new(vec![
            Component { weight: 0.5, mean: -15.0, sd: 1.0 },
            Component { weight: 0.5, mean: 15.0, sd: 1.0 },
        ])
        .expect("valid mixture")
    }

    pub fn standard_normal() -> Self {
        Self::new(vec![Component { weight: 1.0, mean: 0.0, sd: 1.0 }]).expect("valid mixture")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn is_bimodal_benchmark(&self) -> bool {
        *self == Self::bimodal()
    }
}

impl TargetDensity for GaussianMixture {
    fn log_density(&self, x: f64) -> f64 {
        // streaming log-sum-exp: one exp per component
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for (c, ln) in self.components.iter().zip(&self.log_norm) {
            let z = (x - c.mean) / c.sd;
            let term = ln - 0.5 * z * z;
            if term > max {
                acc = acc * (max - term).exp() + 1.0;
                max = term;
            } else {
                acc += (term - max).exp();
            }
        }
        max + acc.ln()
    }
}

/// `pi(x)^(1/T)` for `T >= 1`.
#[derive(Debug, Clone)]
pub struct TemperedDensity<D> {
    base: D,
    temperature: f64,
}

impl<D: TargetDensity> TemperedDensity<D> {
    pub fn new(base: D, temperature: f64) -> Result<Self> {
        if !(temperature >= 1.0 && temperature.is_finite()) {
            return Err(Error::contract(format!("temperature {temperature} must be >= 1")));
        }
        Ok(Self { base, temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn base(&self) -> &D {
        &self.base
    }
}

impl<D: TargetDensity> TargetDensity for TemperedDensity<D> {
    fn log_density(&self, x: f64) -> f64 {
        if self.temperature == 1.0 {
            self.base.log_density(x)
        } else {
            self.base.log_density(x) / self.temperature
        }
    }
}

/// `log ∫_lo^hi exp(log_density(x)) dx` by composite Simpson's rule.
///
/// `n_points` is rounded up to the next odd count. The sum is taken relative
/// to the largest integrand value on the grid so neither tail underflows.
pub fn log_partition_quadrature<D: TargetDensity>(
    density: &D,
    lo: f64,
    hi: f64,
    n_points: usize,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::contract(format!("quadrature bounds [{lo}, {hi}] are not an interval")));
    }
    if n_points < MIN_QUADRATURE_POINTS {
        return Err(Error::contract(format!(
            "quadrature needs at least {MIN_QUADRATURE_POINTS} points, got {n_points}"
        )));
    }
    let n = if n_points.is_multiple_of(2) { n_points + 1 } else { n_points };
    let h = (hi - lo) / (n - 1) as f64;
    let logs: Vec<f64> = (0..n).map(|i| density.log_density(lo + i as f64 * h)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::contract("integrand is zero or non-finite on the whole grid"));
    }
    let mut sum = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let coef = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += coef * (l - max).exp();
    }
    Ok(max + (sum * h / 3.0).ln())
}

/// Closed form of `log ∫ N(x; 0, 1)^(1/T) dx = log( sqrt(2 pi T) (2 pi)^(-1/(2T)) )`.
pub fn tempered_gaussian_log_partition(temperature: f64) -> f64 {
    0.5 * (2.0 * PI * temperature).ln() - (2.0 * PI).ln() / (2.0 * temperature)
}
