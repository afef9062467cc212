//! Dawson's integral `D(x) = exp(-x^2) * int_0^x exp(t^2) dt`.

const SERIES_LIMIT: f64 = 6.0;

/// Dawson's integral, accurate to about 1e-15 relative for all finite `x`.
///
/// For `|x| <= 6` the Kummer form `exp(-x^2) sum x^(2n+1) / (n! (2n+1))` is
/// summed; every term is positive so there is no cancellation. Beyond that the
/// asymptotic series `1/(2x) sum (2n-1)!! / (2x^2)^n` is truncated at its
/// smallest term, whose size is below `exp(-36)`.
pub fn dawson(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        kummer_series(ax)
    } else {
        asymptotic(ax)
    };
    value.copysign(x)
}

fn kummer_series(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    // term_n = x^(2n+1) / n!
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= x2 / n;
        let contribution = term / (2.0 * n + 1.0);
        sum += contribution;
        if contribution < sum * 1e-17 {
            break;
        }
    }
    (-x2).exp() * sum
}

fn asymptotic(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * inv;
        if next >= term || next < 1e-18 {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * x)
}
