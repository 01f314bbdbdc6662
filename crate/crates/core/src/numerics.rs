//! Small numerical kernels shared by the other modules.

use std::f64::consts::PI;

/// Pairwise (cascade) summation.
///
/// The reduction tree depends only on the slice length, so the result is
/// bit-identical no matter how the input was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `ln Σ exp(x_i)`, ignoring `-∞` entries. Returns `-∞` for an empty input.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let shifted: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface area of the unit sphere `S^{n-1} ⊂ R^n` (the `σ_n` of polar coordinates).
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Bisection for the root of a monotone predicate.
///
/// Returns the final bracket `(lo, hi)` with `pred(lo) == false` and
/// `pred(hi) == true`. Requires `pred(hi)` to hold on entry.
pub fn bisect_predicate(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
    mut pred: impl FnMut(f64) -> bool,
) -> (f64, f64) {
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Nodes and weights of the 8-point Gauss–Legendre rule on `[-1, 1]`.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Composite 8-point Gauss–Legendre quadrature on `[a, b]` with `panels` panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut parts = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + h * i as f64;
        let c = lo + 0.5 * h;
        let s: f64 = GL8.iter().map(|&(x, w)| w * f(c + 0.5 * h * x)).sum();
        parts.push(0.5 * h * s);
    }
    pairwise_sum(&parts)
}

/// Least-squares slope and intercept of `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=100).map(|k| 1.0 / k as f64).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-13);
    }

    #[test]
    fn log_sum_exp_handles_large_terms() {
        let l = log_sum_exp(&[1000.0, 1000.0]);
        assert!((l - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn gauss_legendre_polynomial_exact() {
        let v = gauss_legendre(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn bisection_finds_sqrt_two() {
        let (lo, hi) = bisect_predicate(0.0, 2.0, 1e-14, 200, |x| x * x >= 2.0);
        assert!((lo - 2f64.sqrt()).abs() < 1e-13 && hi >= lo);
    }
}
