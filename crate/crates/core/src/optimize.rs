//! Bounded Nelder–Mead simplex minimisation.
//!
//! The search runs in coordinates scaled by the initial step of each
//! parameter, so one absolute tolerance serves parameters of very different
//! magnitude. Trial points are clamped into the box.

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    /// Initial simplex edge per coordinate (also the coordinate scale).
    pub step: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Convergence threshold on the simplex extent, in units of `step`.
    pub xatol: f64,
    /// Convergence threshold on the spread of objective values.
    pub fatol: f64,
    pub max_evals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
    /// Largest vertex distance from the best vertex, in original units.
    pub simplex_diameter: f64,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(opts.step.len() == n && opts.lower.len() == n && opts.upper.len() == n, "option vectors must match x0");
    let to_x = |u: &[f64]| -> Vec<f64> {
        (0..n).map(|i| (x0[i] + u[i] * opts.step[i]).clamp(opts.lower[i], opts.upper[i])).collect()
    };
    let to_u = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| (x[i] - x0[i]) / opts.step[i]).collect() };
    let mut evals = 0;
    let mut eval = |u: &[f64], evals: &mut usize| -> (Vec<f64>, f64) {
        let x = to_x(u);
        *evals += 1;
        let v = f(&x);
        (to_u(&x), if v.is_nan() { f64::INFINITY } else { v })
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push(eval(&vec![0.0; n], &mut evals));
    for i in 0..n {
        let mut u = vec![0.0; n];
        u[i] = 1.0;
        let mut v = eval(&u, &mut evals);
        if v.0 == simplex[0].0 {
            u[i] = -1.0;
            v = eval(&u, &mut evals);
        }
        simplex.push(v);
    }

    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].clone();
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(u, _)| u.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = simplex[1..].iter().map(|(_, v)| (v - best.1).abs()).fold(0.0, f64::max);
        if x_spread <= opts.xatol && f_spread <= opts.fatol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|(u, _)| u[i]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + t * (worst.0[i] - centroid[i])).collect() };

        let reflected = eval(&along(-REFLECT), &mut evals);
        if reflected.1 < best.1 {
            let expanded = eval(&along(-REFLECT * EXPAND), &mut evals);
            simplex[n] = if expanded.1 < reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
            continue;
        }
        let contracted = if reflected.1 < worst.1 {
            eval(&along(-REFLECT * CONTRACT), &mut evals)
        } else {
            eval(&along(CONTRACT), &mut evals)
        };
        if contracted.1 < reflected.1.min(worst.1) {
            simplex[n] = contracted;
            continue;
        }
        for k in 1..=n {
            let u: Vec<f64> = (0..n).map(|i| best.0[i] + SHRINK * (simplex[k].0[i] - best.0[i])).collect();
            simplex[k] = eval(&u, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best_x = to_x(&simplex[0].0);
    let simplex_diameter = simplex[1..]
        .iter()
        .map(|(u, _)| {
            let x = to_x(u);
            x.iter().zip(&best_x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    NelderMeadResult { x: best_x, f: simplex[0].1, evals, converged, simplex_diameter }
}
