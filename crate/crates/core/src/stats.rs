//! Sample means and standard errors.

/// Mean and standard error of a sample (SE = sample std / √n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Two-pass mean and standard error; summation runs in slice order.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0, n };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Mean and SE of the paired differences `a_i - b_i`, plus the two side means.
pub fn paired(a: &[f64], b: &[f64]) -> (f64, f64, MeanSe) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (mean_se(a).mean, mean_se(b).mean, mean_se(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_sample() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn paired_difference() {
        let (a, b, d) = paired(&[1.0, 2.0], &[0.5, 1.0]);
        assert_eq!((a, b), (1.5, 0.75));
        assert_eq!(d.mean, 0.75);
    }
}
