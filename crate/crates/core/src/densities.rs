//! Log densities and log masses with full normalizing constants.
//!
//! Every function is generic over [`Real`], so the same code scores plain
//! floats and records tape nodes. Parameter-domain checks look at the
//! current values and fail with a [`DensityError`] naming the distribution.

use statrs::function::factorial::ln_factorial;

use crate::autodiff::Real;
use crate::error::DensityError;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn positive<T: Real>(dist: &'static str, what: &str, x: T) -> Result<(), DensityError> {
    if x.value() > 0.0 && x.value().is_finite() {
        Ok(())
    } else {
        Err(DensityError::new(
            dist,
            format!("{what} must be positive and finite, got {}", x.value()),
        ))
    }
}

fn count(dist: &'static str, k: f64) -> Result<(), DensityError> {
    if k >= 0.0 && k.fract() == 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(DensityError::new(dist, format!("{k} is not a nonnegative integer")))
    }
}

/// N(x | μ, σ) with σ the standard deviation.
pub fn normal<T: Real>(x: T, mu: T, sigma: T) -> Result<T, DensityError> {
    positive("normal", "scale", sigma)?;
    let z = (x - mu) / sigma;
    Ok(-(z.square() * 0.5) - sigma.ln() - HALF_LN_2PI)
}

/// log-normal with location μ and scale σ of log x.
pub fn lognormal<T: Real>(x: T, mu: T, sigma: T) -> Result<T, DensityError> {
    positive("lognormal", "scale", sigma)?;
    positive("lognormal", "value", x)?;
    let log_x = x.ln();
    let z = (log_x - mu) / sigma;
    Ok(-(z.square() * 0.5) - sigma.ln() - log_x - HALF_LN_2PI)
}

/// Gamma with shape α and rate β.
pub fn gamma<T: Real>(x: T, shape: T, rate: T) -> Result<T, DensityError> {
    positive("gamma", "shape", shape)?;
    positive("gamma", "rate", rate)?;
    positive("gamma", "value", x)?;
    Ok(shape * rate.ln() - shape.ln_gamma() + (shape - 1.0) * x.ln() - rate * x)
}

/// Inverse gamma with shape α and scale β.
pub fn inverse_gamma<T: Real>(x: T, shape: T, scale: T) -> Result<T, DensityError> {
    positive("inverse_gamma", "shape", shape)?;
    positive("inverse_gamma", "scale", scale)?;
    positive("inverse_gamma", "value", x)?;
    Ok(shape * scale.ln() - shape.ln_gamma() - (shape + 1.0) * x.ln() - scale / x)
}

/// Exponential with rate λ.
pub fn exponential<T: Real>(x: T, rate: T) -> Result<T, DensityError> {
    positive("exponential", "rate", rate)?;
    if !(x.value() >= 0.0) {
        return Err(DensityError::new(
            "exponential",
            format!("value {} is negative", x.value()),
        ));
    }
    Ok(rate.ln() - rate * x)
}

/// Dirichlet over the simplex `x` with concentrations `alpha`.
pub fn dirichlet<T: Real>(x: &[T], alpha: &[T]) -> Result<T, DensityError> {
    if x.len() != alpha.len() || x.len() < 2 {
        return Err(DensityError::new(
            "dirichlet",
            format!("value has {} components, concentration {}", x.len(), alpha.len()),
        ));
    }
    for &a in alpha {
        positive("dirichlet", "concentration", a)?;
    }
    let total: f64 = x.iter().map(|v| v.value()).sum();
    if x.iter().any(|v| !(v.value() > 0.0)) || (total - 1.0).abs() > 1e-8 {
        return Err(DensityError::new("dirichlet", "value is not on the open simplex"));
    }
    let alpha_sum = T::sum(alpha);
    let mut terms = Vec::with_capacity(2 * x.len() + 1);
    terms.push(alpha_sum.ln_gamma());
    for (&xi, &ai) in x.iter().zip(alpha) {
        terms.push(-ai.ln_gamma());
        terms.push((ai - 1.0) * xi.ln());
    }
    Ok(T::sum(&terms))
}

/// Poisson mass of count `k` with rate λ.
pub fn poisson<T: Real>(k: f64, rate: T) -> Result<T, DensityError> {
    count("poisson", k)?;
    if !(rate.value() >= 0.0) || !rate.value().is_finite() {
        return Err(DensityError::new(
            "poisson",
            format!("rate {} is not a nonnegative finite number", rate.value()),
        ));
    }
    let log_factorial = ln_factorial(k as u64);
    if k == 0.0 {
        return Ok(-rate - log_factorial);
    }
    Ok(rate.ln() * k - rate - log_factorial)
}

/// Bernoulli mass of `y ∈ {0, 1}` with success log-odds `logit`.
pub fn bernoulli_logit<T: Real>(y: f64, logit: T) -> Result<T, DensityError> {
    if y == 1.0 {
        Ok(-(-logit).softplus())
    } else if y == 0.0 {
        Ok(-logit.softplus())
    } else {
        Err(DensityError::new(
            "bernoulli_logit",
            format!("outcome {y} is not 0 or 1"),
        ))
    }
}

/// Uniform on (a, b); `x` must lie inside.
pub fn uniform<T: Real>(x: T, lower: f64, upper: f64) -> Result<T, DensityError> {
    if !(lower < upper) {
        return Err(DensityError::new(
            "uniform",
            format!("empty interval ({lower}, {upper})"),
        ));
    }
    if !(x.value() >= lower && x.value() <= upper) {
        return Err(DensityError::new(
            "uniform",
            format!("value {} outside ({lower}, {upper})", x.value()),
        ));
    }
    Ok(T::from(-(upper - lower).ln()))
}

/// Name-dispatched scoring over plain values.
///
/// `values` holds the outcome (one entry, or the simplex point for
/// `dirichlet`); `params` holds the parameters in the order the individual
/// functions take them.
pub fn log_density(name: &str, values: &[f64], params: &[f64]) -> Result<f64, DensityError> {
    let arity = |dist: &'static str, nv: usize, np: usize| {
        if values.len() == nv && params.len() == np {
            Ok(())
        } else {
            Err(DensityError::new(
                dist,
                format!(
                    "expected {nv} value(s) and {np} parameter(s), got {} and {}",
                    values.len(),
                    params.len()
                ),
            ))
        }
    };
    match name {
        "normal" => arity("normal", 1, 2).and_then(|_| normal(values[0], params[0], params[1])),
        "lognormal" => arity("lognormal", 1, 2).and_then(|_| lognormal(values[0], params[0], params[1])),
        "gamma" => arity("gamma", 1, 2).and_then(|_| gamma(values[0], params[0], params[1])),
        "inverse_gamma" => arity("inverse_gamma", 1, 2).and_then(|_| inverse_gamma(values[0], params[0], params[1])),
        "exponential" => arity("exponential", 1, 1).and_then(|_| exponential(values[0], params[0])),
        "dirichlet" => dirichlet(values, params),
        "poisson" => arity("poisson", 1, 1).and_then(|_| poisson(values[0], params[0])),
        "bernoulli_logit" => arity("bernoulli_logit", 1, 1).and_then(|_| bernoulli_logit(values[0], params[0])),
        "uniform" => arity("uniform", 1, 2).and_then(|_| uniform(values[0], params[0], params[1])),
        other => Err(DensityError::new(
            "log_density",
            format!("unknown distribution `{other}`"),
        )),
    }
}
