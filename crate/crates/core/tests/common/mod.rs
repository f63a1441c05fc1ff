//! Exhaustive oracles shared by the integration tests.
#![allow(dead_code)]

/// Minimum total cost over every labeling with cluster sizes in `[xi, zeta]`.
pub fn brute_force(costs: &[i64], n: usize, k: usize, xi: usize, zeta: usize) -> Option<i64> {
    let mut best = None;
    let mut labels = vec![0usize; n];
    loop {
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts.iter().all(|&c| c >= xi && c <= zeta) {
            let cost: i64 = labels.iter().enumerate().map(|(i, &l)| costs[i * k + l]).sum();
            best = Some(best.map_or(cost, |b: i64| b.min(cost)));
        }
        // next labeling in base k
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// Hubert–Arabie index from the four pair-agreement counts.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
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

pub fn k_of(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}
