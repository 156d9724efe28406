use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median Euclidean distance over distinct pairs, or `None` with fewer
/// than two points or an all-zero median.
pub fn median_pairwise_distance(points: &[Vec<f64>]) -> Option<f64> {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(sq_dist(&points[i], &points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    (med > 0.0).then_some(med)
}

/// Exact GP regression with a squared-exponential kernel.
#[derive(Clone, Debug)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    /// Lower Cholesky factor of `K + (noise + jitter) I`.
    chol: Vec<Vec<f64>>,
    pub lengthscale: f64,
    pub prior_mean: f64,
    pub signal_var: f64,
    pub noise: f64,
    pub jitter: f64,
    pub kappa: f64,
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    y
}

fn backward(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

const JITTER_STEPS: [f64; 8] = [0.0, 1e-12, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5];

/// Fits a GP to `(features, targets)`. The prior mean is the target mean,
/// the signal variance the target variance floored at `1e-2`, and the
/// lengthscale the median pairwise distance (1 when undefined).
pub fn gp_fit(features: &[Vec<f64>], targets: &[f64], noise: f64, kappa: f64) -> Result<GpModel> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::invalid(format!(
            "gp_fit needs matching non-empty inputs, got {} features and {} targets",
            features.len(),
            targets.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim || f.iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("gp_fit features must be finite with one dimensionality"));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite {
            context: "gp_fit targets".into(),
        });
    }
    let n = targets.len() as f64;
    let prior_mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - prior_mean).powi(2)).sum::<f64>() / n;
    let signal_var = var.max(1e-2);
    let lengthscale = median_pairwise_distance(features).unwrap_or(1.0);

    let mut model = GpModel {
        x: features.to_vec(),
        alpha: Vec::new(),
        chol: Vec::new(),
        lengthscale,
        prior_mean,
        signal_var,
        noise,
        jitter: 0.0,
        kappa,
    };
    let k: Vec<Vec<f64>> = features
        .iter()
        .map(|a| features.iter().map(|b| model.kernel(a, b)).collect())
        .collect();
    let centred: Vec<f64> = targets.iter().map(|t| t - prior_mean).collect();
    for jitter in JITTER_STEPS {
        let mut a = k.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += noise + jitter;
        }
        if let Some(l) = cholesky(&a) {
            model.alpha = backward(&l, &forward(&l, &centred));
            model.chol = l;
            model.jitter = jitter;
            return Ok(model);
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: *JITTER_STEPS.last().unwrap(),
    })
}

impl GpModel {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_var * (-sq_dist(a, b) / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Posterior mean and standard deviation at `q`.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = self.x.iter().map(|x| self.kernel(x, q)).collect();
        let mean = self.prior_mean + ks.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>();
        let v = forward(&self.chol, &ks);
        let var = self.signal_var - v.iter().map(|x| x * x).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    pub fn ucb(&self, q: &[f64], kappa: f64) -> f64 {
        let (m, s) = self.predict(q);
        m + kappa * s
    }
}

/// Upper confidence bound with the model's own `kappa`.
pub fn gp_ucb(model: &GpModel, q: &[f64]) -> f64 {
    model.ucb(q, model.kappa)
}
