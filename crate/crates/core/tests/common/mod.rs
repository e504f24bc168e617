#![allow(dead_code)]

use manet_core::model::{IncidenceMatrix, MembershipMatrix, ParentParams};
use manet_core::sampler::SVectors;
use statrs::distribution::{Beta, ContinuousCDF};

/// Every set partition of `n` items as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max + 1 {
            prefix.push(label);
            extend(prefix, n, max.max(label), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut prefix = vec![0];
    extend(&mut prefix, n, 0, &mut out);
    out
}

/// Adjusted Rand index from the four pair counts over all unordered pairs.
pub fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut n11, mut n10, mut n01, mut n00) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (n00 * n11 - n01 * n10) / denom
}

/// Re-derives the routing rule from scratch and checks `s` against it.
pub fn check_s_vectors(s: &SVectors, z_star: &[usize], pi: &ParentParams, u: &MembershipMatrix) -> Result<(), String> {
    let pi = pi.as_array();
    for (i, &h) in z_star.iter().enumerate() {
        let members: Vec<usize> = (0..u.parents()).filter(|&k| u.row(h)[k] == 1).collect();
        for j in 0..pi.ncols() {
            let v = s.vector(i, j);
            let total: u32 = v.iter().map(|&x| u32::from(x)).sum();
            if members.is_empty() {
                if total != 0 {
                    return Err(format!("unit {i} event {j}: empty heir must give zero vector"));
                }
                continue;
            }
            if total != 1 {
                return Err(format!("unit {i} event {j}: vector {v:?} is not one-hot"));
            }
            let hot = v.iter().position(|&x| x == 1).unwrap();
            let lowest = members.iter().map(|&k| pi[[k, j]]).fold(f64::INFINITY, f64::min);
            let first_min = *members.iter().find(|&&k| pi[[k, j]] == lowest).unwrap();
            if hot != first_min {
                return Err(format!("unit {i} event {j}: hot {hot}, expected {first_min}"));
            }
        }
    }
    Ok(())
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against Beta(a, b).
pub fn ks_beta(samples: &mut [f64], a: f64, b: f64) -> f64 {
    let dist = Beta::new(a, b).unwrap();
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

pub fn small_data() -> IncidenceMatrix {
    IncidenceMatrix::from_rows(&[
        vec![1, 0, 1, 0, 1],
        vec![0, 0, 0, 0, 0],
        vec![1, 1, 1, 0, 0],
        vec![0, 1, 0, 1, 1],
        vec![1, 1, 0, 0, 0],
        vec![0, 0, 1, 1, 0],
    ])
    .unwrap()
}
