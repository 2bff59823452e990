//! Box-constrained Levenberg-Marquardt with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

/// Inclusive bounds of one parameter. `log` bounds are sampled
/// geometrically when generating start points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bound {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Bound {
    pub fn linear(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: false }
    }

    pub fn log(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: true }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Maps `u` in [0, 1] into the interval.
    pub fn at(&self, u: f64) -> f64 {
        if self.log && self.lo > 0.0 {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmSettings {
    pub max_iter: usize,
    pub step_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub ss_res: f64,
}

/// Minimises `sum (model(p, t_k) - y_k)^2` over the box `bounds`.
pub(crate) fn minimize<F>(
    model: F,
    t: &[f64],
    y: &[f64],
    start: &[f64],
    bounds: &[Bound],
    settings: LmSettings,
) -> Option<LmOutcome>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = t.len();
    let m = start.len();
    let residuals = |p: &[f64]| -> Option<DVector<f64>> {
        let r = DVector::from_iterator(n, t.iter().zip(y).map(|(&tk, &yk)| model(p, tk) - yk));
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let jacobian = |p: &[f64]| -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(n, m);
        let mut q = p.to_vec();
        for j in 0..m {
            let h = 1e-6
                * p[j]
                    .abs()
                    .max(1e-6 * (bounds[j].hi - bounds[j].lo).clamp(1e-9, 1.0));
            q[j] = p[j] + h;
            let up = residuals(&q)?;
            q[j] = p[j] - h;
            let down = residuals(&q)?;
            q[j] = p[j];
            jac.set_column(j, &((up - down) / (2.0 * h)));
        }
        Some(jac)
    };

    let mut p: Vec<f64> = start.iter().zip(bounds).map(|(x, b)| b.clamp(*x)).collect();
    let mut r = residuals(&p)?;
    let mut cost = r.norm_squared();
    let floor = 1e-300;
    let mut lambda = -1.0;
    let mut nu = 2.0;

    'outer: for _ in 0..settings.max_iter {
        if cost <= floor {
            break;
        }
        let jac = match jacobian(&p) {
            Some(j) => j,
            None => break,
        };
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let max_diag = jtj.diagonal().max();
        if !(max_diag > 0.0) {
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3 * max_diag;
        }
        loop {
            let mut a = jtj.clone();
            for j in 0..m {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12 * max_diag);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e30 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = p
                .iter()
                .zip(step.iter())
                .zip(bounds)
                .map(|((x, s), b)| b.clamp(x + s))
                .collect();
            let moved = p
                .iter()
                .zip(&trial)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if moved <= settings.step_tol * (scale + settings.step_tol) {
                break 'outer;
            }
            let accepted = residuals(&trial).map(|rt| (rt.norm_squared(), rt));
            match accepted {
                Some((c, rt)) if c < cost => {
                    let actual =
                        DVector::from_iterator(m, trial.iter().zip(&p).map(|(a, b)| a - b));
                    let predicted = -(2.0 * grad.dot(&actual) + (&jac * &actual).norm_squared());
                    let rho = if predicted > 0.0 {
                        (cost - c) / predicted
                    } else {
                        1.0
                    };
                    lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    p = trial;
                    r = rt;
                    cost = c;
                    continue 'outer;
                }
                _ => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e30 {
                        break 'outer;
                    }
                }
            }
        }
    }
    cost.is_finite().then_some(LmOutcome {
        params: p,
        ss_res: cost,
    })
}

/// Point `index` of the Halton sequence in the given prime base.
pub(crate) fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 5.0 * (-0.7 * x).exp()).collect();
        let model = |p: &[f64], x: f64| p[0] * (-p[1] * x).exp();
        let out = minimize(
            model,
            &t,
            &y,
            &[1.0, 0.1],
            &[Bound::linear(0.0, 10.0), Bound::linear(0.0, 5.0)],
            LmSettings {
                max_iter: 200,
                step_tol: 1e-10,
            },
        )
        .unwrap();
        assert!((out.params[0] - 5.0).abs() < 1e-8);
        assert!((out.params[1] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 2.0, 4.0, 6.0];
        let out = minimize(
            |p: &[f64], x: f64| p[0] * x,
            &t,
            &y,
            &[0.5],
            &[Bound::linear(0.0, 1.0)],
            LmSettings {
                max_iter: 200,
                step_tol: 1e-10,
            },
        )
        .unwrap();
        assert_eq!(out.params[0], 1.0);
    }

    #[test]
    fn halton_points() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }
}
