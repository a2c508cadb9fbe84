//! Deterministic Nelder-Mead simplex descent.

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop once the spread of objective values across the simplex is below this.
    pub ftol: f64,
    /// ...and every vertex lies within this distance of the best one.
    pub xtol: f64,
    /// Stop as soon as the best value reaches this.
    pub target: Option<f64>,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_iter: 2000, ftol: 1e-14, xtol: 1e-10, target: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

impl NelderMead {
    /// Axis-aligned simplex around `start` with one step per coordinate.
    #[cfg(test)]
    pub fn axis_simplex(start: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
        let mut simplex = vec![start.to_vec()];
        for (i, s) in steps.iter().enumerate() {
            let mut v = start.to_vec();
            v[i] += s;
            simplex.push(v);
        }
        simplex
    }

    pub fn minimize<F>(&self, f: F, simplex: Vec<Vec<f64>>) -> Minimum
    where
        F: Fn(&[f64]) -> f64,
    {
        let n = simplex.len() - 1;
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut verts: Vec<(Vec<f64>, f64)> = simplex
            .into_iter()
            .map(|x| {
                let v = eval(&x);
                (x, v)
            })
            .collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            // stable sort keeps ties in first-found order
            verts.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = verts[0].1;
            if self.target.is_some_and(|t| best <= t) {
                converged = true;
                break;
            }
            let spread = verts[n].1 - best;
            let size = verts[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&verts[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= self.ftol && size <= self.xtol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (x, _) in &verts[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let worst = verts[n].0.clone();
            let f_worst = verts[n].1;
            let f_second = verts[n - 1].1;

            let reflected = lerp(&centroid, &worst, -REFLECT);
            let f_r = eval(&reflected);
            if f_r < best {
                let expanded = lerp(&centroid, &worst, -EXPAND);
                let f_e = eval(&expanded);
                verts[n] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
                continue;
            }
            if f_r < f_second {
                verts[n] = (reflected, f_r);
                continue;
            }
            if f_r < f_worst {
                let outside = lerp(&centroid, &reflected, CONTRACT);
                let f_o = eval(&outside);
                if f_o <= f_r {
                    verts[n] = (outside, f_o);
                    continue;
                }
            } else {
                let inside = lerp(&centroid, &worst, CONTRACT);
                let f_i = eval(&inside);
                if f_i < f_worst {
                    verts[n] = (inside, f_i);
                    continue;
                }
            }
            let anchor = verts[0].0.clone();
            for v in verts.iter_mut().skip(1) {
                let x = lerp(&anchor, &v.0, SHRINK);
                let fx = eval(&x);
                *v = (x, fx);
            }
        }
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (point, value) = verts.swap_remove(0);
        Minimum { point, value, iterations, converged }
    }
}
