//! Derivative-free minimization over a box.

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
}

/// Nelder-Mead restricted to `[lo, hi]` per coordinate by clamping trial
/// points. Stops once every vertex lies within `xtol` of the best one in
/// every coordinate, or after `max_iter` iterations.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    lo: &[f64],
    hi: &[f64],
    xtol: f64,
    max_iter: usize,
) -> Minimum {
    let dim = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for k in 0..dim {
            x[k] = x[k].clamp(lo[k], hi[k]);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for k in 0..dim {
        let mut x = x0.to_vec();
        x[k] += step[k];
        if x[k] > hi[k] {
            x[k] = x0[k] - step[k];
        }
        clamp(&mut x);
        let fx = f(&x);
        simplex.push((x, fx));
    }

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let size =
            simplex[1..].iter().flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if size < xtol {
            break;
        }
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64).collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..dim).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect();
            clamp(&mut x);
            let fx = f(&x);
            (x, fx)
        };
        let reflected = along(-1.0);
        if reflected.1 < simplex[0].1 {
            let expanded = along(-2.0);
            simplex[dim] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[dim - 1].1 {
            simplex[dim] = reflected;
        } else {
            let contracted = if reflected.1 < worst.1 { along(-0.5) } else { along(0.5) };
            if contracted.1 < worst.1.min(reflected.1) {
                simplex[dim] = contracted;
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex[1..].iter_mut() {
                    for k in 0..dim {
                        x[k] = best[k] + 0.5 * (x[k] - best[k]);
                    }
                    *fx = f(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum { x, f }
}
