//! Small nonlinear least-squares helper over `levenberg-marquardt`.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};

/// y ≈ model(params, x); the model returns the value and its gradient with
/// respect to the parameters.
pub(crate) type Model<'m> = &'m dyn Fn(&[f64], f64) -> (f64, Vec<f64>);

struct Problem<'a> {
    model: Model<'a>,
    xs: &'a [f64],
    ys: &'a [f64],
    params: DVector<f64>,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.params.as_slice();
        let r = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().zip(self.ys).map(|(&x, &y)| (self.model)(p, x).0 - y),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let p = self.params.as_slice();
        let mut j = DMatrix::zeros(self.xs.len(), p.len());
        for (i, &x) in self.xs.iter().enumerate() {
            for (k, g) in (self.model)(p, x).1.into_iter().enumerate() {
                j[(i, k)] = g;
            }
        }
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn residual_norm(model: Model<'_>, params: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| ((model)(params, x).0 - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Local fit from one starting point.
pub(crate) fn fit(model: Model<'_>, start: &[f64], xs: &[f64], ys: &[f64]) -> Solution {
    let problem = Problem {
        model,
        xs,
        ys,
        params: DVector::from_column_slice(start),
    };
    let (solved, report) = LevenbergMarquardt::new().with_patience(200).minimize(problem);
    let params: Vec<f64> = solved.params.iter().copied().collect();
    let residual = residual_norm(model, &params, xs, ys);
    Solution {
        converged: report.termination.was_successful() && residual.is_finite(),
        params,
        residual,
    }
}

/// Best of several local fits by residual.
pub(crate) fn fit_multistart(model: Model<'_>, starts: &[Vec<f64>], xs: &[f64], ys: &[f64]) -> Option<Solution> {
    starts
        .iter()
        .map(|s| fit(model, s, xs, ys))
        .filter(|s| s.residual.is_finite() && s.params.iter().all(|p| p.is_finite()))
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponential(p: &[f64], x: f64) -> (f64, Vec<f64>) {
        let v = p[1].powf(x);
        (p[0] * v, vec![v, p[0] * x * p[1].powf(x - 1.0)])
    }

    #[test]
    fn recovers_exponential_decay() {
        let xs: Vec<f64> = (0..8).map(|d| d as f64 * 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 0.9 * 0.93f64.powf(x)).collect();
        let s = fit(&exponential, &[1.0, 0.99], &xs, &ys);
        assert!(s.converged);
        assert!((s.params[0] - 0.9).abs() < 1e-8);
        assert!((s.params[1] - 0.93).abs() < 1e-8);
        assert!(s.residual < 1e-8);
    }
}
