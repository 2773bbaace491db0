use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf_inv;

use crate::sets::Norm;

/// `±eᵢ` for `i = 1..n`, in the order `e₁, −e₁, e₂, −e₂, …`.
pub fn axis_directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            out.push(d);
        }
    }
    out
}

/// Scales `d` to unit length in `norm`. Zero vectors are returned unchanged.
pub fn normalize(mut d: Vec<f64>, norm: Norm) -> Vec<f64> {
    let len = norm.of(&d);
    if len > 0.0 {
        d.iter_mut().for_each(|x| *x /= len);
    }
    d
}

/// At least `count` directions spread over the unit sphere of `norm`.
///
/// The axis directions are always included. In 2D the rest are uniform
/// angles; in higher dimension they are a randomly shifted Halton sequence
/// pushed through the inverse normal CDF, so `seed` selects the sample.
pub fn sample_directions(n: usize, count: usize, norm: Norm, seed: u64) -> Vec<Vec<f64>> {
    let mut out = axis_directions(n);
    if n <= 1 {
        return out;
    }
    let extra = count.saturating_sub(out.len());
    if n == 2 {
        let m = extra.max(1);
        let offset = std::f64::consts::FRAC_PI_4 / m as f64;
        for k in 0..extra {
            let t = offset + std::f64::consts::TAU * k as f64 / m as f64;
            out.push(vec![t.cos(), t.sin()]);
        }
    } else {
        let primes = first_primes(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut k = 1u64;
        while out.len() < 2 * n + extra {
            let d: Vec<f64> = primes
                .iter()
                .zip(&shift)
                .map(|(&b, &s)| {
                    let u = (radical_inverse(k, b) + s).fract();
                    let u = u.clamp(1e-12, 1.0 - 1e-12);
                    std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0)
                })
                .collect();
            k += 1;
            if d.iter().any(|x| *x != 0.0) {
                out.push(d);
            }
        }
    }
    out.into_iter().map(|d| normalize(d, norm)).collect()
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_come_first() {
        let d = sample_directions(3, 50, Norm::Two, 7);
        assert_eq!(d.len(), 50);
        assert_eq!(&d[..6], &axis_directions(3)[..]);
    }

    #[test]
    fn unit_length_in_requested_norm() {
        for norm in [Norm::One, Norm::Two, Norm::Inf] {
            for d in sample_directions(5, 200, norm, 3) {
                assert!((norm.of(&d) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seed_changes_the_sample() {
        let a = sample_directions(4, 20, Norm::Two, 1);
        let b = sample_directions(4, 20, Norm::Two, 2);
        assert_ne!(a[10], b[10]);
        assert_eq!(a, sample_directions(4, 20, Norm::Two, 1));
    }

    #[test]
    fn sample_covers_every_orthant() {
        let d = sample_directions(3, 400, Norm::Two, 11);
        let mut seen = [false; 8];
        for v in &d[6..] {
            let o = v.iter().enumerate().fold(0, |acc, (i, x)| acc | ((*x > 0.0) as usize) << i);
            seen[o] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn two_dimensional_angles_are_uniform() {
        let d = sample_directions(2, 4 + 360, Norm::Two, 0);
        let mut angles: Vec<f64> = d[4..].iter().map(|v| v[1].atan2(v[0])).collect();
        angles.sort_by(f64::total_cmp);
        for w in angles.windows(2) {
            assert!((w[1] - w[0] - std::f64::consts::TAU / 360.0).abs() < 1e-9);
        }
    }
}
