//! Reference implementations used as test oracles. They share no code with
//! the library and favour directness over speed.
#![allow(dead_code)]

use rand::Rng;

/// Upper normal tail by composite Simpson quadrature of the density.
pub fn q_simpson(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b) = (x, x.max(0.0) + 40.0);
    let n = 200_000;
    let h = (b - a) / n as f64;
    let mut sum = pdf(a) + pdf(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * pdf(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Inverse of `q` by bisection on [-40, 40].
pub fn q_inv_bisect(p: f64, q: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn q_erfc(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Energy-detector false alarm at SNR `lambda` for a per-member MD target.
pub fn fa_oracle(lambda: f64, nu: u32, md: f64) -> f64 {
    let phi = q_inv_bisect(1.0 - md, q_erfc);
    q_erfc((2.0 * lambda + 1.0).sqrt() * phi + lambda * f64::from(nu).sqrt())
}

/// 0/X value of block `eta`: it alone must detect the idle slot.
pub fn value_0x_oracle(eta: usize, beta: f64, block_fa: &[f64]) -> f64 {
    let mut v = beta * (1.0 - block_fa[eta]);
    for (j, &f) in block_fa.iter().enumerate() {
        if j != eta {
            v *= f;
        }
    }
    v
}

/// 1/X value of block `eta` by enumerating which other blocks also detect
/// the idle slot; the slot goes to one of the competing SUs uniformly.
pub fn value_1x_oracle(eta: usize, beta: f64, block_fa: &[f64], sizes: &[usize]) -> f64 {
    let others: Vec<usize> = (0..block_fa.len()).filter(|&j| j != eta).collect();
    let mut expectation = 0.0;
    for mask in 0u32..(1 << others.len()) {
        let mut prob = 1.0;
        let mut competing = sizes[eta];
        for (bit, &j) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                prob *= 1.0 - block_fa[j];
                competing += sizes[j];
            } else {
                prob *= block_fa[j];
            }
        }
        expectation += prob * sizes[eta] as f64 / competing as f64;
    }
    beta * (1.0 - block_fa[eta]) * expectation
}

/// Monte Carlo estimate of the same 1/X value.
pub fn value_1x_monte_carlo<R: Rng>(eta: usize, beta: f64, block_fa: &[f64], sizes: &[usize], draws: usize, rng: &mut R) -> f64 {
    let mut wins = 0usize;
    for _ in 0..draws {
        if !rng.gen_bool(beta) {
            continue;
        }
        let detect: Vec<bool> = block_fa.iter().map(|&f| !rng.gen_bool(f)).collect();
        if !detect[eta] {
            continue;
        }
        let competing: usize = (0..sizes.len()).filter(|&j| detect[j]).map(|j| sizes[j]).sum();
        if rng.gen_range(0..competing) < sizes[eta] {
            wins += 1;
        }
    }
    wins as f64 / draws as f64
}

/// All set partitions of `0..n` by restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let k = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); k];
            for (item, &l) in labels.iter().enumerate() {
                blocks[l].push(item);
            }
            out.push(blocks);
            return;
        }
        let next = labels.iter().copied().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            labels.push(l);
            rec(i + 1, n, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}
