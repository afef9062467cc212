//! One-dimensional maximization helpers used by the interaction-angle optimizers.

use rayon::prelude::*;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Evaluates `f` at each point. Every point is independent, so the parallel
/// map yields exactly the sequential values.
pub fn evaluate_grid<F>(points: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    points.par_iter().map(|&x| f(x)).collect()
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol * max(|x|, tiny)`.
/// Returns the best point seen together with its value.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..200 {
        let scale = best.0.abs().max(f64::MIN_POSITIVE);
        if b - a <= rel_tol * scale {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx > best.1 {
                best = (x, fx);
            }
        }
    }
    best
}

/// Indices of interior or right-edge local maxima of `values`
/// (`values[i] >= values[i-1]` and `values[i] >= values[i+1]`, with at least
/// one side strict). Index 0 is a maximum if it is not below index 1.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = if i == 0 {
                f64::NEG_INFINITY
            } else {
                values[i - 1]
            };
            let right = if i + 1 == n {
                f64::NEG_INFINITY
            } else {
                values[i + 1]
            };
            values[i] >= left && values[i] >= right && (values[i] > left || values[i] > right)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn golden_handles_reversed_bracket() {
        let (x, _) = golden_section_max(|x| (x).sin(), 2.5, 0.5, 1e-10);
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-7);
    }

    #[test]
    fn local_maxima_detection() {
        let v = [0.0, 1.0, 0.5, 0.5, 2.0, 2.0, 1.0, 3.0];
        assert_eq!(local_maxima(&v), vec![1, 4, 5, 7]);
    }

    #[test]
    fn grid_is_order_independent() {
        let pts: Vec<f64> = (0..10_000).map(|i| i as f64 * 1e-3).collect();
        let par = evaluate_grid(&pts, |x| (x * 3.1).sin().powi(2));
        let seq: Vec<f64> = pts.iter().map(|x| (x * 3.1).sin().powi(2)).collect();
        assert_eq!(par, seq);
    }
}
