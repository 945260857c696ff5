use crate::error::{check_positive, check_rate, Error, Result};

/// Maximizes `sum_i w_i x_i / (lambda_i + x_i)` subject to
/// `sum_i x_i <= budget`, `x_i >= 0`.
///
/// The stationarity condition gives `x_i = max(0, sqrt(w_i lambda_i / nu) - lambda_i)`.
/// Files enter the active set in decreasing order of `w_i / lambda_i`, so the
/// multiplier is found exactly by growing the active set instead of by a
/// numeric search. Files with zero weight get zero rate.
pub fn waterfill(weights: &[f64], lambdas: &[f64], budget: f64) -> Result<Vec<f64>> {
    if weights.len() != lambdas.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} files",
            weights.len(),
            lambdas.len()
        )));
    }
    check_positive("budget", budget)?;
    for (i, (&w, &l)) in weights.iter().zip(lambdas).enumerate() {
        check_rate(&format!("weights[{i}]"), w)?;
        check_positive(&format!("lambdas[{i}]"), l)?;
    }

    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if order.is_empty() {
        return Ok(vec![0.0; weights.len()]);
    }
    let threshold = |i: usize| weights[i] / lambdas[i];
    order.sort_by(|&a, &b| threshold(b).total_cmp(&threshold(a)).then(a.cmp(&b)));

    // scale = 1 / sqrt(nu) for the current active set.
    let mut lambda_sum = 0.0;
    let mut root_sum = 0.0;
    let mut scale = 0.0;
    for (m, &i) in order.iter().enumerate() {
        lambda_sum += lambdas[i];
        root_sum += (weights[i] * lambdas[i]).sqrt();
        scale = (budget + lambda_sum) / root_sum;
        let nu = 1.0 / (scale * scale);
        match order.get(m + 1) {
            Some(&next) if nu < threshold(next) => continue,
            _ => break,
        }
    }

    Ok(weights
        .iter()
        .zip(lambdas)
        .map(|(&w, &l)| {
            if w > 0.0 {
                (scale * (w * l).sqrt() - l).max(0.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn objective(w: &[f64], l: &[f64], x: &[f64]) -> f64 {
        w.iter()
            .zip(l)
            .zip(x)
            .map(|((w, l), x)| w * x / (l + x))
            .sum()
    }

    #[test]
    fn single_file_takes_everything() {
        assert_eq!(waterfill(&[1.0], &[1.0], 5.0).unwrap(), vec![5.0]);
    }

    #[test]
    fn symmetric_files_share_equally() {
        let x = waterfill(&[0.7, 0.7], &[2.0, 2.0], 4.0).unwrap();
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(x[1], 2.0, max_relative = 1e-14);
    }

    // Oracle: fine grid over the budget line.
    #[test]
    fn matches_grid_search() {
        let (w, l) = ([1.0, 1.0], [1.0, 4.0]);
        let x = waterfill(&w, &l, 3.0).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..=300_000 {
            let x1 = j as f64 * 1e-5;
            let v = objective(&w, &l, &[x1, 3.0 - x1]);
            if v > best.0 {
                best = (v, x1);
            }
        }
        assert!((x[0] - best.1).abs() < 1e-3, "{x:?} vs {}", best.1);
        assert_relative_eq!(x[0] + x[1], 3.0, max_relative = 1e-10);
    }

    #[test]
    fn inactive_files_get_nothing() {
        // A heavily discounted file should stay out with a small budget.
        let x = waterfill(&[1.0, 1e-6, 0.0], &[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2], 0.0);
        assert_relative_eq!(x[0], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn all_zero_weights() {
        assert_eq!(
            waterfill(&[0.0, 0.0], &[1.0, 2.0], 3.0).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(waterfill(&[1.0], &[1.0], 0.0).is_err());
        assert!(waterfill(&[1.0, 2.0], &[1.0], 1.0).is_err());
        assert!(waterfill(&[-1.0], &[1.0], 1.0).is_err());
    }
}
