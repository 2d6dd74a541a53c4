//! Quantiles and Gaussian kernel density estimation.

use std::f64::consts::PI;

/// Lower bound for the KDE bandwidth.
pub const MIN_BANDWIDTH: f64 = 0.05;

/// Linear-interpolation quantile of an unsorted sample (`p` in `[0, 1]`).
/// Uses selection, so the input is reordered.
pub fn quantile(values: &mut [f64], p: f64) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, lo_val, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return Some(lo_val);
    }
    let hi_val = upper.iter().copied().min_by(f64::total_cmp).expect("upper is non-empty");
    Some(lo_val + frac * (hi_val - lo_val))
}

/// Silverman's rule of thumb, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let mut scratch = values.to_vec();
    let q1 = quantile(&mut scratch, 0.25).unwrap_or(0.0);
    let q3 = quantile(&mut scratch, 0.75).unwrap_or(0.0);
    let iqr = (q3 - q1) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    (0.9 * spread * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Evenly spaced points over `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Plain Gaussian KDE evaluated at `xs`.
pub fn gaussian_kde(values: &[f64], bandwidth: f64, xs: &[f64]) -> Vec<f64> {
    kde_with(values, bandwidth, xs, |v| [Some(v), None, None])
}

/// Gaussian KDE for data supported on `[lo, hi]`, with every kernel reflected
/// about both bounds so mass that would spill past a bound is folded back.
pub fn reflected_kde(values: &[f64], bandwidth: f64, lo: f64, hi: f64, xs: &[f64]) -> Vec<f64> {
    kde_with(values, bandwidth, xs, |v| {
        [Some(v), Some(2.0 * lo - v), Some(2.0 * hi - v)]
    })
}

fn kde_with(values: &[f64], bandwidth: f64, xs: &[f64], centers: impl Fn(f64) -> [Option<f64>; 3]) -> Vec<f64> {
    if values.is_empty() {
        return vec![0.0; xs.len()];
    }
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    xs.iter()
        .map(|&x| {
            values
                .iter()
                .flat_map(|&v| centers(v))
                .flatten()
                .map(|c| {
                    let z = (x - c) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}
