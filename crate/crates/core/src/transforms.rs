//! Bijections from constrained supports to the real coordinate space.
//!
//! `constrain` is the inverse map T⁻¹: ζ ↦ θ together with
//! log|det J_{T⁻¹}(ζ)|; `unconstrain` is T. Both work per block, and
//! [`unpack`] applies a whole block layout to a packed ζ vector.

use serde::{Deserialize, Serialize};

use crate::autodiff::{logistic, Real};
use crate::error::TransformError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Identity { dim: usize },
    LowerBound { lower: f64, dim: usize },
    UpperBound { upper: f64, dim: usize },
    Interval { lower: f64, upper: f64, dim: usize },
    Simplex { k: usize },
    Ordered { k: usize },
    PositiveOrdered { k: usize },
}

impl TransformKind {
    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |msg: String| Err(TransformError::InvalidKind(msg));
        match *self {
            TransformKind::Identity { dim }
            | TransformKind::LowerBound { dim, .. }
            | TransformKind::UpperBound { dim, .. }
                if dim == 0 =>
            {
                bad("dimension must be positive".into())
            }
            TransformKind::LowerBound { lower: b, .. } | TransformKind::UpperBound { upper: b, .. }
                if !b.is_finite() =>
            {
                bad(format!("bound {b} is not finite"))
            }
            TransformKind::Interval { lower, upper, dim } => {
                if dim == 0 {
                    bad("dimension must be positive".into())
                } else if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    bad(format!("interval needs finite lower < upper, got ({lower}, {upper})"))
                } else {
                    Ok(())
                }
            }
            TransformKind::Simplex { k } | TransformKind::Ordered { k } | TransformKind::PositiveOrdered { k }
                if k < 2 =>
            {
                bad(format!("{} needs K >= 2, got {k}", self.name()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformKind::Identity { .. } => "identity",
            TransformKind::LowerBound { .. } => "lower_bound",
            TransformKind::UpperBound { .. } => "upper_bound",
            TransformKind::Interval { .. } => "interval",
            TransformKind::Simplex { .. } => "simplex",
            TransformKind::Ordered { .. } => "ordered",
            TransformKind::PositiveOrdered { .. } => "positive_ordered",
        }
    }

    pub fn unconstrained_dim(&self) -> usize {
        match *self {
            TransformKind::Simplex { k } => k - 1,
            _ => self.constrained_dim(),
        }
    }

    pub fn constrained_dim(&self) -> usize {
        match *self {
            TransformKind::Identity { dim }
            | TransformKind::LowerBound { dim, .. }
            | TransformKind::UpperBound { dim, .. }
            | TransformKind::Interval { dim, .. } => dim,
            TransformKind::Simplex { k } | TransformKind::Ordered { k } | TransformKind::PositiveOrdered { k } => k,
        }
    }

    /// θ = T⁻¹(ζ) and log|det J_{T⁻¹}(ζ)|.
    pub fn constrain<T: Real>(&self, zeta: &[T]) -> Result<(Vec<T>, T), TransformError> {
        let expected = self.unconstrained_dim();
        if zeta.len() != expected {
            return Err(TransformError::Shape {
                expected,
                got: zeta.len(),
            });
        }
        let out = match *self {
            TransformKind::Identity { .. } => (zeta.to_vec(), T::from(0.0)),
            TransformKind::LowerBound { lower, .. } => {
                let theta = zeta.iter().map(|&z| z.exp() + lower).collect();
                (theta, T::sum(zeta))
            }
            TransformKind::UpperBound { upper, .. } => {
                let theta = zeta.iter().map(|&z| -z.exp() + upper).collect();
                (theta, T::sum(zeta))
            }
            TransformKind::Interval { lower, upper, .. } => {
                let width = upper - lower;
                let mut terms = Vec::with_capacity(zeta.len());
                let theta = zeta
                    .iter()
                    .map(|&z| {
                        // log s + log(1 - s) = -softplus(-z) - softplus(z)
                        terms.push(-(-z).softplus() - z.softplus());
                        z.logistic() * width + lower
                    })
                    .collect();
                (theta, T::sum(&terms) + zeta.len() as f64 * width.ln())
            }
            TransformKind::Simplex { k } => simplex_constrain(k, zeta),
            TransformKind::Ordered { .. } => {
                let mut theta = Vec::with_capacity(zeta.len());
                theta.push(zeta[0]);
                for &z in &zeta[1..] {
                    let prev = theta[theta.len() - 1];
                    theta.push(prev + z.exp());
                }
                (theta, T::sum(&zeta[1..]))
            }
            TransformKind::PositiveOrdered { .. } => {
                let mut theta = Vec::with_capacity(zeta.len());
                theta.push(zeta[0].exp());
                for &z in &zeta[1..] {
                    let prev = theta[theta.len() - 1];
                    theta.push(prev + z.exp());
                }
                (theta, T::sum(zeta))
            }
        };
        Ok(out)
    }

    /// ζ = T(θ). θ must lie in the open support.
    pub fn unconstrain(&self, theta: &[f64]) -> Result<Vec<f64>, TransformError> {
        let expected = self.constrained_dim();
        if theta.len() != expected {
            return Err(TransformError::Shape {
                expected,
                got: theta.len(),
            });
        }
        let domain = |detail: String| {
            Err(TransformError::Domain {
                transform: self.name(),
                detail,
            })
        };
        if let Some(bad) = theta.iter().find(|x| !x.is_finite()) {
            return domain(format!("value {bad} is not finite"));
        }
        match *self {
            TransformKind::Identity { .. } => Ok(theta.to_vec()),
            TransformKind::LowerBound { lower, .. } => {
                if let Some(x) = theta.iter().find(|&&x| x <= lower) {
                    return domain(format!("{x} is not above {lower}"));
                }
                Ok(theta.iter().map(|&x| (x - lower).ln()).collect())
            }
            TransformKind::UpperBound { upper, .. } => {
                if let Some(x) = theta.iter().find(|&&x| x >= upper) {
                    return domain(format!("{x} is not below {upper}"));
                }
                Ok(theta.iter().map(|&x| (upper - x).ln()).collect())
            }
            TransformKind::Interval { lower, upper, .. } => {
                if let Some(x) = theta.iter().find(|&&x| x <= lower || x >= upper) {
                    return domain(format!("{x} is outside ({lower}, {upper})"));
                }
                Ok(theta
                    .iter()
                    .map(|&x| {
                        let u = (x - lower) / (upper - lower);
                        u.ln() - (-u).ln_1p()
                    })
                    .collect())
            }
            TransformKind::Simplex { k } => {
                if let Some(x) = theta.iter().find(|&&x| x <= 0.0) {
                    return domain(format!("component {x} is not positive"));
                }
                let total: f64 = theta.iter().sum();
                if (total - 1.0).abs() > 1e-8 {
                    return domain(format!("components sum to {total}, not 1"));
                }
                let mut stick = 1.0;
                let mut zeta = Vec::with_capacity(k - 1);
                for (i, &x) in theta[..k - 1].iter().enumerate() {
                    let z = x / stick;
                    if z >= 1.0 {
                        return domain("stick exhausted before the last component".into());
                    }
                    let offset = ((k - 1 - i) as f64).ln();
                    zeta.push(z.ln() - (-z).ln_1p() + offset);
                    stick -= x;
                }
                Ok(zeta)
            }
            TransformKind::Ordered { .. } => {
                if theta.windows(2).any(|w| w[1] <= w[0]) {
                    return domain("values are not strictly increasing".into());
                }
                let mut zeta = vec![theta[0]];
                zeta.extend(theta.windows(2).map(|w| (w[1] - w[0]).ln()));
                Ok(zeta)
            }
            TransformKind::PositiveOrdered { .. } => {
                if theta[0] <= 0.0 {
                    return domain(format!("first value {} is not positive", theta[0]));
                }
                if theta.windows(2).any(|w| w[1] <= w[0]) {
                    return domain("values are not strictly increasing".into());
                }
                let mut zeta = vec![theta[0].ln()];
                zeta.extend(theta.windows(2).map(|w| (w[1] - w[0]).ln()));
                Ok(zeta)
            }
        }
    }

    /// Whether θ lies in the open support. Simplex sums are checked to
    /// `1e-12`.
    pub fn satisfied_by(&self, theta: &[f64]) -> bool {
        if theta.len() != self.constrained_dim() || theta.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let increasing = || theta.windows(2).all(|w| w[1] > w[0]);
        match *self {
            TransformKind::Identity { .. } => true,
            TransformKind::LowerBound { lower, .. } => theta.iter().all(|&x| x > lower),
            TransformKind::UpperBound { upper, .. } => theta.iter().all(|&x| x < upper),
            TransformKind::Interval { lower, upper, .. } => theta.iter().all(|&x| x > lower && x < upper),
            TransformKind::Simplex { .. } => {
                theta.iter().all(|&x| x >= 0.0) && (theta.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            }
            TransformKind::Ordered { .. } => increasing(),
            TransformKind::PositiveOrdered { .. } => theta[0] > 0.0 && increasing(),
        }
    }
}

/// Stick-breaking with offset log(1/(K-k)), so ζ = 0 is the uniform simplex.
fn simplex_constrain<T: Real>(k: usize, zeta: &[T]) -> (Vec<T>, T) {
    let mut theta = Vec::with_capacity(k);
    let mut terms = Vec::with_capacity(3 * (k - 1));
    let mut log_stick = T::from(0.0);
    let mut stick = T::from(1.0);
    for (i, &z) in zeta.iter().enumerate() {
        let shifted = z - ((k - 1 - i) as f64).ln();
        let frac = shifted.logistic();
        theta.push(stick * frac);
        let log_frac = -(-shifted).softplus();
        let log_rest = -shifted.softplus();
        terms.push(log_frac);
        terms.push(log_rest);
        terms.push(log_stick);
        log_stick = log_stick + log_rest;
        stick = stick * (-frac + 1.0);
    }
    theta.push(stick);
    (theta, T::sum(&terms))
}

/// Shape of a parameter block in constrained space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Scalar,
    Vector,
    /// `rows` independent vectors, each transformed separately.
    Array {
        rows: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub kind: TransformKind,
    pub shape: Shape,
}

impl BlockSpec {
    pub fn scalar(name: &str, kind: TransformKind) -> Self {
        BlockSpec {
            name: name.to_owned(),
            kind,
            shape: Shape::Scalar,
        }
    }

    pub fn vector(name: &str, kind: TransformKind) -> Self {
        BlockSpec {
            name: name.to_owned(),
            kind,
            shape: Shape::Vector,
        }
    }

    pub fn array(name: &str, rows: usize, kind: TransformKind) -> Self {
        BlockSpec {
            name: name.to_owned(),
            kind,
            shape: Shape::Array { rows },
        }
    }

    pub fn rows(&self) -> usize {
        match self.shape {
            Shape::Array { rows } => rows,
            _ => 1,
        }
    }

    pub fn unconstrained_dim(&self) -> usize {
        self.rows() * self.kind.unconstrained_dim()
    }

    pub fn constrained_dim(&self) -> usize {
        self.rows() * self.kind.constrained_dim()
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        self.kind.validate()?;
        if self.shape == Shape::Scalar && self.kind.constrained_dim() != 1 {
            return Err(TransformError::InvalidKind(format!(
                "scalar block `{}` must have dimension 1",
                self.name
            )));
        }
        Ok(())
    }

    /// Flattened column names: `name`, `name.i`, or `name.r.i` (1-based).
    pub fn column_names(&self) -> Vec<String> {
        let width = self.kind.constrained_dim();
        match self.shape {
            Shape::Scalar => vec![self.name.clone()],
            Shape::Vector => (1..=width).map(|i| format!("{}.{i}", self.name)).collect(),
            Shape::Array { rows } => (1..=rows)
                .flat_map(|r| (1..=width).map(move |i| (r, i)))
                .map(|(r, i)| format!("{}.{r}.{i}", self.name))
                .collect(),
        }
    }

    pub fn constrain<T: Real>(&self, zeta: &[T]) -> Result<(Vec<T>, T), TransformError> {
        let expected = self.unconstrained_dim();
        if zeta.len() != expected {
            return Err(TransformError::Shape {
                expected,
                got: zeta.len(),
            });
        }
        if self.rows() == 1 {
            return self.kind.constrain(zeta);
        }
        let mut theta = Vec::with_capacity(self.constrained_dim());
        let mut log_dets = Vec::with_capacity(self.rows());
        for row in zeta.chunks(self.kind.unconstrained_dim()) {
            let (values, log_det) = self.kind.constrain(row)?;
            theta.extend(values);
            log_dets.push(log_det);
        }
        Ok((theta, T::sum(&log_dets)))
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Result<Vec<f64>, TransformError> {
        let expected = self.constrained_dim();
        if theta.len() != expected {
            return Err(TransformError::Shape {
                expected,
                got: theta.len(),
            });
        }
        let mut zeta = Vec::with_capacity(self.unconstrained_dim());
        for row in theta.chunks(self.kind.constrained_dim()) {
            zeta.extend(self.kind.unconstrain(row)?);
        }
        Ok(zeta)
    }

    pub fn satisfied_by(&self, theta: &[f64]) -> bool {
        theta.len() == self.constrained_dim()
            && theta
                .chunks(self.kind.constrained_dim())
                .all(|row| self.kind.satisfied_by(row))
    }
}

/// Constrained values of every block, flattened row-major per block.
#[derive(Clone, Debug, PartialEq)]
pub struct Constrained<T> {
    blocks: Vec<Vec<T>>,
    widths: Vec<usize>,
}

impl<T: Copy> Constrained<T> {
    pub fn from_blocks(specs: &[BlockSpec], blocks: Vec<Vec<T>>) -> Result<Self, TransformError> {
        if specs.len() != blocks.len() {
            return Err(TransformError::Shape {
                expected: specs.len(),
                got: blocks.len(),
            });
        }
        for (spec, values) in specs.iter().zip(&blocks) {
            if values.len() != spec.constrained_dim() {
                return Err(TransformError::Shape {
                    expected: spec.constrained_dim(),
                    got: values.len(),
                });
            }
        }
        Ok(Constrained {
            widths: specs.iter().map(|s| s.kind.constrained_dim()).collect(),
            blocks,
        })
    }

    /// All values of block `b`.
    pub fn block(&self, b: usize) -> &[T] {
        &self.blocks[b]
    }

    /// Row `r` of an array block (the whole block for scalars and vectors).
    pub fn row(&self, b: usize, r: usize) -> &[T] {
        let w = self.widths[b];
        &self.blocks[b][r * w..(r + 1) * w]
    }

    pub fn scalar(&self, b: usize) -> T {
        self.blocks[b][0]
    }

    pub fn blocks(&self) -> &[Vec<T>] {
        &self.blocks
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks.iter().flatten().copied().collect()
    }
}

/// Split a packed ζ by block, constrain each, and sum the log-Jacobians.
pub fn unpack<T: Real>(specs: &[BlockSpec], zeta: &[T]) -> Result<(Constrained<T>, T), TransformError> {
    let total: usize = specs.iter().map(BlockSpec::unconstrained_dim).sum();
    if zeta.len() != total {
        return Err(TransformError::Shape {
            expected: total,
            got: zeta.len(),
        });
    }
    let mut offset = 0;
    let mut blocks = Vec::with_capacity(specs.len());
    let mut log_dets = Vec::with_capacity(specs.len());
    for spec in specs {
        let n = spec.unconstrained_dim();
        let (theta, log_det) = spec.constrain(&zeta[offset..offset + n])?;
        blocks.push(theta);
        log_dets.push(log_det);
        offset += n;
    }
    Ok((
        Constrained {
            widths: specs.iter().map(|s| s.kind.constrained_dim()).collect(),
            blocks,
        },
        T::sum(&log_dets),
    ))
}

/// Inverse of [`unpack`] for plain values.
pub fn pack(specs: &[BlockSpec], theta: &Constrained<f64>) -> Result<Vec<f64>, TransformError> {
    let mut zeta = Vec::new();
    for (spec, values) in specs.iter().zip(theta.blocks()) {
        zeta.extend(spec.unconstrain(values)?);
    }
    Ok(zeta)
}

/// Stable logit, exposed for data generators.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Plain-float logistic.
pub fn sigmoid(x: f64) -> f64 {
    logistic(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_HALF: f64 = -std::f64::consts::LN_2;

    #[test]
    fn unconstrained_dims() {
        assert_eq!(TransformKind::Simplex { k: 3 }.unconstrained_dim(), 2);
        assert_eq!(TransformKind::LowerBound { lower: 0.0, dim: 4 }.unconstrained_dim(), 4);
        assert_eq!(TransformKind::PositiveOrdered { k: 2 }.unconstrained_dim(), 2);
    }

    #[test]
    fn constrain_examples() {
        let (theta, ld) = TransformKind::LowerBound { lower: 0.0, dim: 1 }
            .constrain(&[0.0])
            .unwrap();
        assert_eq!((theta, ld), (vec![1.0], 0.0));

        let (theta, ld) = TransformKind::Interval {
            lower: 0.0,
            upper: 1.0,
            dim: 1,
        }
        .constrain(&[0.0])
        .unwrap();
        assert_eq!(theta, vec![0.5]);
        assert!((ld - 2.0 * LN_HALF).abs() < 1e-15);

        let (theta, _) = TransformKind::Simplex { k: 3 }.constrain(&[0.0, 0.0]).unwrap();
        for x in theta {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }

        let (theta, ld) = TransformKind::PositiveOrdered { k: 2 }.constrain(&[0.0, 0.0]).unwrap();
        assert_eq!((theta, ld), (vec![1.0, 2.0], 0.0));
    }

    #[test]
    fn unconstrain_examples() {
        let z = TransformKind::LowerBound { lower: 0.0, dim: 1 }
            .unconstrain(&[std::f64::consts::E])
            .unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15);

        let third = 1.0 / 3.0;
        let z = TransformKind::Simplex { k: 3 }
            .unconstrain(&[third, third, third])
            .unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-14), "{z:?}");

        let z = TransformKind::Ordered { k: 2 }.unconstrain(&[0.0, 1.0]).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn boundary_values_are_rejected() {
        let lb = TransformKind::LowerBound { lower: 0.0, dim: 1 };
        assert!(matches!(lb.unconstrain(&[0.0]), Err(TransformError::Domain { .. })));
        let sx = TransformKind::Simplex { k: 3 };
        assert!(sx.unconstrain(&[0.0, 0.5, 0.5]).is_err());
        assert!(sx.unconstrain(&[0.2, 0.2, 0.2]).is_err());
        let iv = TransformKind::Interval {
            lower: 0.0,
            upper: 100.0,
            dim: 1,
        };
        assert!(iv.unconstrain(&[100.0]).is_err());
        assert!(TransformKind::PositiveOrdered { k: 2 }
            .unconstrain(&[1.0, 1.0])
            .is_err());
    }

    #[test]
    fn shape_mismatch() {
        assert_eq!(
            TransformKind::Simplex { k: 3 }.constrain(&[0.0; 3]).unwrap_err(),
            TransformError::Shape { expected: 2, got: 3 }
        );
    }

    #[test]
    fn invalid_kinds() {
        assert!(TransformKind::Interval {
            lower: 1.0,
            upper: 1.0,
            dim: 1
        }
        .validate()
        .is_err());
        assert!(TransformKind::Simplex { k: 1 }.validate().is_err());
        assert!(TransformKind::Ordered { k: 1 }.validate().is_err());
        assert!(TransformKind::Identity { dim: 3 }.validate().is_ok());
    }

    #[test]
    fn column_names_follow_layout() {
        let theta = BlockSpec::vector("theta", TransformKind::Simplex { k: 2 });
        let mu = BlockSpec::array("mu", 2, TransformKind::Identity { dim: 1 });
        let lam = BlockSpec::scalar("lambda", TransformKind::LowerBound { lower: 0.0, dim: 1 });
        assert_eq!(theta.column_names(), ["theta.1", "theta.2"]);
        assert_eq!(mu.column_names(), ["mu.1.1", "mu.2.1"]);
        assert_eq!(lam.column_names(), ["lambda"]);
    }

    #[test]
    fn array_blocks_transform_per_row() {
        let spec = BlockSpec::array("t", 2, TransformKind::Simplex { k: 3 });
        let (theta, _) = spec.constrain(&[0.0, 0.0, 1.0, -1.0]).unwrap();
        assert_eq!(theta.len(), 6);
        assert!(spec.satisfied_by(&theta));
        let back = spec.unconstrain(&theta).unwrap();
        for (a, b) in back.iter().zip([0.0, 0.0, 1.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unpack_then_pack() {
        let specs = vec![
            BlockSpec::vector("p", TransformKind::Simplex { k: 3 }),
            BlockSpec::scalar("s", TransformKind::LowerBound { lower: 0.0, dim: 1 }),
        ];
        let zeta = [0.3, -0.2, 1.1];
        let (theta, _) = unpack(&specs, &zeta[..]).unwrap();
        assert_eq!(theta.block(0).len(), 3);
        assert!((theta.scalar(1) - 1.1f64.exp()).abs() < 1e-15);
        let back = pack(&specs, &theta).unwrap();
        for (a, b) in back.iter().zip(zeta) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
