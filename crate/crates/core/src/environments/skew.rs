use std::f64::consts::{FRAC_2_PI, PI};

use rand::Rng;
use rand_distr::{Distribution, SkewNormal};

use crate::error::{invalid_config, Result};

/// Skew-normal distribution parametrised by its mean, variance and shape.
#[derive(Debug, Clone, Copy)]
pub struct MomentSkewNormal {
    mean: f64,
    variance: f64,
    shape: f64,
    inner: SkewNormal<f64>,
}

impl MomentSkewNormal {
    pub fn new(mean: f64, variance: f64, shape: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid_config(
                "sigma2",
                format!("variance must be > 0, got {variance}"),
            ));
        }
        if !mean.is_finite() || !shape.is_finite() {
            return Err(invalid_config("kappa", "mean and shape must be finite"));
        }
        let delta = shape / (1.0 + shape * shape).sqrt();
        let scale = (variance / (1.0 - FRAC_2_PI * delta * delta)).sqrt();
        let location = mean - scale * delta * FRAC_2_PI.sqrt();
        let inner = SkewNormal::new(location, scale, shape)
            .map_err(|e| invalid_config("kappa", e.to_string()))?;
        Ok(Self {
            mean,
            variance,
            shape,
            inner,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Closed-form skewness of the distribution.
    pub fn skewness(&self) -> f64 {
        let delta = self.shape / (1.0 + self.shape * self.shape).sqrt();
        let m = delta * FRAC_2_PI.sqrt();
        (4.0 - PI) / 2.0 * m.powi(3) / (1.0 - m * m).powf(1.5)
    }
}

impl Distribution<f64> for MomentSkewNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inner.sample(rng)
    }
}

/// One draw with mean `mu`, variance `sigma2` and shape `kappa`.
pub fn sample_skew_normal<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(MomentSkewNormal::new(mu, sigma2, kappa)?.sample(rng))
}
