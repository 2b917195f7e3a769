//! Bounded derivative-free local refinement (Nelder–Mead on a box).

/// Outcome of a local search.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Stop when the simplex spread of values is below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this fraction of the box width of the best.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of the box width.
    pub initial_step: f64,
}

impl NelderMeadConfig {
    /// Iteration cap `min(max(6n, 100), 1000)` for an `n`-dimensional search.
    pub fn for_dimension(n: usize) -> Self {
        Self {
            max_iterations: (6 * n).clamp(100, 1000),
            f_tol: 1e-14,
            x_tol: 1e-10,
            initial_step: 0.05,
        }
    }
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Minimizes `f` from `x0` inside `[lo, hi]`. Trial points are projected
/// onto the box. `f` returns `None` once the caller's evaluation budget is
/// spent, which ends the search with the best point so far.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    f0: f64,
    lo: &[f64],
    hi: &[f64],
    cfg: &NelderMeadConfig,
) -> LocalResult
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    let done = |simplex: Vec<(Vec<f64>, f64)>, it| {
        let best = simplex
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty simplex");
        LocalResult {
            x: best.0,
            f: best.1,
            iterations: it,
        }
    };
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = cfg.initial_step * (hi[i] - lo[i]);
        v[i] = if v[i] + step <= hi[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        clip(&mut v, lo, hi);
        match f(&v) {
            Some(fv) => simplex.push((v, fv)),
            None => return done(simplex, 0),
        }
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for it in 0..cfg.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .enumerate()
                    .map(|(i, (a, b))| (a - b).abs() / (hi[i] - lo[i]))
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= cfg.f_tol) || size <= cfg.x_tol {
            return done(simplex, it);
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let towards = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|i| centroid[i] + t * (worst.0[i] - centroid[i]))
                .collect();
            clip(&mut p, lo, hi);
            p
        };

        let xr = towards(-alpha);
        let Some(fr) = f(&xr) else {
            return done(simplex, it);
        };
        if fr < simplex[0].1 {
            let xe = towards(-alpha * gamma);
            let Some(fe) = f(&xe) else {
                simplex[n] = (xr, fr);
                return done(simplex, it);
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = towards(-alpha * rho);
            match f(&xc) {
                Some(fc) => (xc, fc),
                None => return done(simplex, it),
            }
        } else {
            let xc = towards(rho);
            match f(&xc) {
                Some(fc) => (xc, fc),
                None => return done(simplex, it),
            }
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = (0..n)
                .map(|i| best[i] + sigma * (vertex.0[i] - best[i]))
                .collect();
            clip(&mut p, lo, hi);
            match f(&p) {
                Some(fp) => *vertex = (p, fp),
                None => return done(simplex, it),
            }
        }
    }
    done(simplex, cfg.max_iterations)
}
