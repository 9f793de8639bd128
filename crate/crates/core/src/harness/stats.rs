//! Small statistics toolkit for comparing experiment arms.

use statrs::distribution::{ContinuousCDF, Normal};

/// Nearest-rank percentile of `values` (`p` in percent). Returns `None` on
/// empty input.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Standardised statistic; positive when the first sample tends larger.
    pub z: f64,
    pub p_two_sided: f64,
    /// P-value for the alternative "first sample tends smaller".
    pub p_less: f64,
    /// P-value for the alternative "first sample tends larger".
    pub p_greater: f64,
}

/// Mann–Whitney U test, normal approximation with tie and continuity
/// correction. Both samples must be non-empty.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Option<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let r1: f64 = r[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;

    let n = n1 + n2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    if var <= 0.0 {
        return Some(MannWhitney {
            u,
            z: 0.0,
            p_two_sided: 1.0,
            p_less: 1.0,
            p_greater: 1.0,
        });
    }
    let sd = var.sqrt();
    let z = (u - mu) / sd;
    let z_hi = (u - mu - 0.5) / sd;
    let z_lo = (u - mu + 0.5) / sd;
    let p_greater = 1.0 - std_normal.cdf(z_hi);
    let p_less = std_normal.cdf(z_lo);
    let p_two_sided = (2.0 * p_greater.min(p_less)).min(1.0);
    Some(MannWhitney {
        u,
        z,
        p_two_sided,
        p_less,
        p_greater,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x)?;
    let my = mean(y)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation. `None` for mismatched lengths, fewer than two
/// points or a constant sample.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCorrelation {
    pub rho: f64,
    /// Exact one-sided p-value for a positive association, over all
    /// permutations of `y`.
    pub p_positive: f64,
}

/// Spearman correlation with an exact permutation test. Limited to at most
/// 9 points so the enumeration stays small.
pub fn spearman_test(x: &[f64], y: &[f64]) -> Option<RankCorrelation> {
    if x.len() > 9 {
        return None;
    }
    let rho = spearman(x, y)?;
    let mut perm: Vec<f64> = y.to_vec();
    let (mut hits, mut total) = (0u64, 0u64);
    permute(&mut perm, 0, &mut |p| {
        total += 1;
        if spearman(x, p).is_some_and(|r| r >= rho - 1e-12) {
            hits += 1;
        }
    });
    Some(RankCorrelation {
        rho,
        p_positive: hits as f64 / total as f64,
    })
}

fn permute(v: &mut Vec<f64>, k: usize, f: &mut impl FnMut(&[f64])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nearest_rank_by_hand() {
        let v = [3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0];
        // n = 10: rank ceil(1.0) = 1, ceil(9.0) = 9, ceil(5.0) = 5.
        assert_eq!(percentile(&v, 10.0), Some(3.0));
        assert_eq!(percentile(&v, 90.0), Some(19.0));
        assert_eq!(percentile(&v, 50.0), Some(11.0));
        // n = 7: ceil(0.7) = 1, ceil(6.3) = 7.
        let w = [7.0, 3.0, 5.0, 13.0, 11.0, 9.0, 15.0];
        assert_eq!(percentile(&w, 10.0), Some(3.0));
        assert_eq!(percentile(&w, 90.0), Some(15.0));
        assert_eq!(percentile(&[4.0], 10.0), Some(4.0));
        assert_eq!(percentile(&[], 10.0), None);
    }

    #[test]
    fn ranks_share_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn mann_whitney_separated_samples() {
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (10..20).map(f64::from).collect();
        let mw = mann_whitney(&a, &b).unwrap();
        assert_eq!(mw.u, 0.0);
        // mu = 50, sd = sqrt(100 * 21 / 12) = 13.2288; z = (0 - 50 + 0.5) / sd.
        let expected = Normal::new(0.0, 1.0).unwrap().cdf(-49.5 / (175.0f64).sqrt());
        assert_abs_diff_eq!(mw.p_less, expected, epsilon = 1e-12);
        assert!(mw.p_two_sided < 0.001);
        assert!(mw.p_greater > 0.99);
    }

    #[test]
    fn mann_whitney_identical_samples() {
        let a = [5.0; 8];
        let mw = mann_whitney(&a, &a).unwrap();
        assert_eq!(mw.p_two_sided, 1.0);
    }

    #[test]
    fn spearman_exact_p() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = spearman_test(&x, &x).unwrap();
        assert_abs_diff_eq!(t.rho, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.p_positive, 1.0 / 720.0, epsilon = 1e-15);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_abs_diff_eq!(spearman(&x, &rev).unwrap(), -1.0, epsilon = 1e-12);
        assert!(spearman(&x, &[1.0; 6]).is_none());
    }
}
