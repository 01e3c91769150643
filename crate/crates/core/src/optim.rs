//! Nelder–Mead simplex minimization.
//!
//! Uses the dimension-adaptive coefficients of Gao & Han, which behave better
//! than the textbook ones beyond a handful of parameters.

#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Iteration cap for a single simplex run.
    pub max_iter: usize,
    /// Relative spread of objective values across the simplex at convergence.
    pub ftol: f64,
    /// Absolute floor for the objective spread.
    pub fatol: f64,
    /// Maximum coordinate distance from the best vertex at convergence.
    pub xtol: f64,
    /// Per-coordinate initial simplex offsets; `None` uses 5% of each
    /// coordinate (or 0.00025 for zero coordinates).
    pub initial_step: Option<Vec<f64>>,
    /// Extra runs restarted from the best point with a fresh simplex.
    pub max_restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            ftol: 1e-8,
            fatol: 1e-30,
            xtol: 1e-10,
            initial_step: None,
            max_restarts: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration, across restarts.
    pub history: Vec<f64>,
}

impl NelderMead {
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let mut best = self.run(&mut f, x0);
        for _ in 0..self.max_restarts {
            let previous = best.value;
            let next = self.run(&mut f, &best.x);
            let improved = next.value < previous;
            let relative_gain = (previous - next.value) / previous.abs().max(f64::MIN_POSITIVE);
            best.iterations += next.iterations;
            best.evaluations += next.evaluations;
            best.history
                .extend(next.history.iter().map(|v| v.min(previous)));
            if improved {
                best.x = next.x;
                best.value = next.value;
            }
            best.converged = next.converged;
            if !improved || relative_gain <= self.ftol || best.value <= self.fatol {
                break;
            }
        }
        best
    }

    fn run(&self, f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        assert!(dim > 0, "cannot minimize over zero parameters");
        let d = dim as f64;
        let (alpha, beta, gamma, delta) = if dim > 1 {
            (1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d)
        } else {
            (1.0, 2.0, 0.5, 0.5)
        };

        let eval = |f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            let step = match &self.initial_step {
                Some(steps) => steps[i],
                None if x0[i] != 0.0 => 0.05 * x0[i],
                None => 0.00025,
            };
            v[i] += step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(f, x)).collect();
        let mut evaluations = dim + 1;
        let mut history = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        while iterations < self.max_iter {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let f_spread = values[dim] - values[0];
            let x_spread = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if f_spread <= self.fatol.max(self.ftol * values[0].abs()) && x_spread <= self.xtol
                || f_spread <= self.fatol
            {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; dim];
            for v in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / d;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(alpha);
            let fr = eval(f, &reflected);
            evaluations += 1;
            if fr < values[0] {
                let expanded = along(alpha * beta);
                let fe = eval(f, &expanded);
                evaluations += 1;
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
            } else {
                let (candidate, fc) = if fr < values[dim] {
                    let c = along(alpha * gamma);
                    let fc = eval(f, &c);
                    (c, fc)
                } else {
                    let c = along(-gamma);
                    let fc = eval(f, &c);
                    (c, fc)
                };
                evaluations += 1;
                if fc < values[dim].min(fr) {
                    simplex[dim] = candidate;
                    values[dim] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=dim {
                        for (x, b) in simplex[i].iter_mut().zip(&best) {
                            *x = b + delta * (*x - b);
                        }
                        values[i] = eval(f, &simplex[i]);
                    }
                    evaluations += dim;
                }
            }
            history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
        }

        let best = (0..=dim)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("non-empty simplex");
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
            evaluations,
            converged,
            history,
        }
    }
}
