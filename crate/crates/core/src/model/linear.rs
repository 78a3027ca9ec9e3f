//! Linear classification head with an optional low-rank adapter.
//!
//! Logits are `W0·x + b`, or `W0·x + (alpha/r)·B·(A·x) + b` with an adapter.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::features::FeatureVector;
use super::ModelError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != rows * cols {
            return Err(ModelError::Dimension {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `M·x` for a sparse `x`.
    fn mul_sparse(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                x.entries().iter().map(|&(i, v)| row[i as usize] * v).sum()
            })
            .collect()
    }

    /// `M·v` for a dense `v` of length `cols`.
    fn mul_dense(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: usize, features: usize) -> Self {
        LinearModel {
            weights: Matrix::zeros(classes, features),
            bias: vec![0.0; classes],
        }
    }

    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self, ModelError> {
        if bias.len() != weights.rows() {
            return Err(ModelError::Dimension {
                what: "bias",
                expected: weights.rows(),
                found: bias.len(),
            });
        }
        Ok(LinearModel { weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn features(&self) -> usize {
        self.weights.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }
}

/// Low-rank update `(alpha/r)·B·A` with `A: r×F` and `B: C×r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub a: Matrix,
    pub b: Matrix,
    pub alpha: f64,
}

impl LoraAdapter {
    /// `A` drawn from N(0, 1/r) and `B` zero, so the adapter starts as a no-op.
    pub fn init<R: Rng + ?Sized>(
        rank: usize,
        alpha: f64,
        classes: usize,
        features: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        if rank == 0 {
            return Err(ModelError::Config("adapter rank must be at least 1".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::Config(format!(
                "adapter alpha must be positive, got {alpha}"
            )));
        }
        let normal = Normal::new(0.0, 1.0 / (rank as f64).sqrt()).expect("valid normal parameters");
        let mut a = Matrix::zeros(rank, features);
        for v in a.as_mut_slice() {
            *v = normal.sample(rng);
        }
        Ok(LoraAdapter {
            a,
            b: Matrix::zeros(classes, rank),
            alpha,
        })
    }

    pub fn new(a: Matrix, b: Matrix, alpha: f64) -> Result<Self, ModelError> {
        if a.rows() == 0 {
            return Err(ModelError::Config("adapter rank must be at least 1".into()));
        }
        if b.cols() != a.rows() {
            return Err(ModelError::Dimension {
                what: "adapter B columns",
                expected: a.rows(),
                found: b.cols(),
            });
        }
        Ok(LoraAdapter { a, b, alpha })
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    /// `W0 + (alpha/r)·B·A` as a plain model.
    pub fn merge(&self, base: &LinearModel) -> Result<LinearModel, ModelError> {
        check_adapter(base, self)?;
        let s = self.scaling();
        let mut merged = base.clone();
        for c in 0..base.classes() {
            let out = merged.weights.row_mut(c);
            for k in 0..self.rank() {
                let coef = s * self.b.get(c, k);
                if coef != 0.0 {
                    for (w, a) in out.iter_mut().zip(self.a.row(k)) {
                        *w += coef * a;
                    }
                }
            }
        }
        Ok(merged)
    }
}

fn check_adapter(model: &LinearModel, adapter: &LoraAdapter) -> Result<(), ModelError> {
    if adapter.a.cols() != model.features() {
        return Err(ModelError::Dimension {
            what: "adapter A columns",
            expected: model.features(),
            found: adapter.a.cols(),
        });
    }
    if adapter.b.rows() != model.classes() {
        return Err(ModelError::Dimension {
            what: "adapter B rows",
            expected: model.classes(),
            found: adapter.b.rows(),
        });
    }
    Ok(())
}

fn check_input(model: &LinearModel, x: &FeatureVector) -> Result<(), ModelError> {
    if x.min_dim() > model.features() {
        return Err(ModelError::Dimension {
            what: "feature index bound",
            expected: model.features(),
            found: x.min_dim(),
        });
    }
    Ok(())
}

/// Forward pass that also returns `A·x` when an adapter is present.
fn forward_parts(
    model: &LinearModel,
    adapter: Option<&LoraAdapter>,
    x: &FeatureVector,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut logits = model.weights.mul_sparse(x);
    for (z, b) in logits.iter_mut().zip(&model.bias) {
        *z += b;
    }
    let hidden = adapter.map(|ad| {
        let h = ad.a.mul_sparse(x);
        let s = ad.scaling();
        for (z, d) in logits.iter_mut().zip(ad.b.mul_dense(&h)) {
            *z += s * d;
        }
        h
    });
    (logits, hidden)
}

pub fn forward(model: &LinearModel, adapter: Option<&LoraAdapter>, x: &FeatureVector) -> Result<Vec<f64>, ModelError> {
    check_input(model, x)?;
    if let Some(ad) = adapter {
        check_adapter(model, ad)?;
    }
    Ok(forward_parts(model, adapter, x).0)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradients of the trainable parameters. `weights` is `None` when an adapter
/// is trained, since the base matrix is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Option<Matrix>,
    pub bias: Vec<f64>,
    pub adapter: Option<AdapterGradients>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGradients {
    pub a: Matrix,
    pub b: Matrix,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.weights.as_ref().is_none_or(Matrix::is_finite)
            && self.bias.iter().all(|v| v.is_finite())
            && self.adapter.as_ref().is_none_or(|g| g.a.is_finite() && g.b.is_finite())
    }
}

/// Mean cross-entropy over `batch` and its gradients.
pub fn loss_and_grads(
    model: &LinearModel,
    adapter: Option<&LoraAdapter>,
    batch: &[(FeatureVector, usize)],
) -> Result<(f64, Gradients), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Config("empty training batch".into()));
    }
    if let Some(ad) = adapter {
        check_adapter(model, ad)?;
    }
    let classes = model.classes();
    let n = batch.len() as f64;
    let mut grads = Gradients {
        weights: adapter.is_none().then(|| Matrix::zeros(classes, model.features())),
        bias: vec![0.0; classes],
        adapter: adapter.map(|ad| AdapterGradients {
            a: Matrix::zeros(ad.rank(), model.features()),
            b: Matrix::zeros(classes, ad.rank()),
        }),
    };
    let mut loss = 0.0;
    for (x, class) in batch {
        check_input(model, x)?;
        if *class >= classes {
            return Err(ModelError::Dimension {
                what: "class index bound",
                expected: classes,
                found: *class + 1,
            });
        }
        let (logits, hidden) = forward_parts(model, adapter, x);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        loss += log_total - logits[*class];

        let mut dz = softmax(&logits);
        dz[*class] -= 1.0;
        for d in &mut dz {
            *d /= n;
        }
        for (g, d) in grads.bias.iter_mut().zip(&dz) {
            *g += d;
        }
        if let Some(gw) = &mut grads.weights {
            for (c, d) in dz.iter().enumerate() {
                let row = gw.row_mut(c);
                for &(i, v) in x.entries() {
                    row[i as usize] += d * v;
                }
            }
        }
        if let (Some(ad), Some(ga), Some(h)) = (adapter, &mut grads.adapter, hidden) {
            let s = ad.scaling();
            for (c, d) in dz.iter().enumerate() {
                for (k, hk) in h.iter().enumerate() {
                    let cur = ga.b.get(c, k);
                    ga.b.set(c, k, cur + s * d * hk);
                }
            }
            for k in 0..ad.rank() {
                let back: f64 = dz.iter().enumerate().map(|(c, d)| ad.b.get(c, k) * d).sum::<f64>() * s;
                if back != 0.0 {
                    let row = ga.a.row_mut(k);
                    for &(i, v) in x.entries() {
                        row[i as usize] += back * v;
                    }
                }
            }
        }
    }
    Ok((loss / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_input_gives_bias() {
        let model = LinearModel::new(Matrix::from_vec(2, 3, vec![1.0; 6]).unwrap(), vec![0.5, -0.5]).unwrap();
        assert_eq!(
            forward(&model, None, &FeatureVector::default()).unwrap(),
            vec![0.5, -0.5]
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dense_oracle_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = LinearModel::new(random_matrix(&mut rng, 2, 8), vec![0.1, -0.2]).unwrap();
        let adapter = LoraAdapter::new(random_matrix(&mut rng, 2, 8), random_matrix(&mut rng, 2, 2), 16.0).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = forward(&model, Some(&adapter), &FeatureVector::from_dense(&x)).unwrap();
        for c in 0..2 {
            let mut expected = model.bias[c];
            for f in 0..8 {
                let mut w = model.weights.get(c, f);
                for k in 0..2 {
                    w += 8.0 * adapter.b.get(c, k) * adapter.a.get(k, f);
                }
                expected += w * x[f];
            }
            assert!((got[c] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_errors() {
        let model = LinearModel::zeros(2, 4);
        let x = FeatureVector::from_entries(vec![(4, 1.0)]);
        assert!(matches!(forward(&model, None, &x), Err(ModelError::Dimension { .. })));
        let adapter = LoraAdapter::new(Matrix::zeros(1, 5), Matrix::zeros(2, 1), 1.0).unwrap();
        assert!(forward(&model, Some(&adapter), &FeatureVector::default()).is_err());
        assert!(LinearModel::new(Matrix::zeros(2, 2), vec![0.0]).is_err());
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0 && p[1] < 1e-300);
    }

    #[test]
    fn uniform_loss_is_ln2() {
        let model = LinearModel::zeros(2, 4);
        let batch = vec![(FeatureVector::from_entries(vec![(1, 1.0)]), 1)];
        let (loss, grads) = loss_and_grads(&model, None, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grads.bias, vec![0.5, -0.5]);
    }

    #[test]
    fn adapter_freezes_base_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = LinearModel::zeros(3, 6);
        let adapter = LoraAdapter::init(2, 16.0, 3, 6, &mut rng).unwrap();
        let batch = vec![(FeatureVector::from_entries(vec![(0, 1.0)]), 2)];
        let (_, grads) = loss_and_grads(&model, Some(&adapter), &batch).unwrap();
        assert!(grads.weights.is_none());
        assert!(grads.adapter.is_some());
        assert!(loss_and_grads(&model, None, &[]).is_err());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[0.1, 2.0]), 1);
    }
}
