//! First-order perturbation surrogate on cyclic symbol frames.

use super::{dbm_to_watts, PerturbationKernel};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::C64;
use rand_distr::{Distribution, StandardNormal};

const CHUNK: usize = 256;

fn check_len(n: usize, kernel: &PerturbationKernel) -> Result<()> {
    if n <= 2 * kernel.k_mem() {
        return Err(Error::domain(format!(
            "sequence of length {n} too short for kernel memory {}",
            kernel.k_mem()
        )));
    }
    Ok(())
}

/// `Δ_t = Σ_{k,l} C[k,l] x_{t+k} x_{t+l} x*_{t+k+l}` with cyclic indexing.
pub fn nonlinear_term(x: &[C64], kernel: &PerturbationKernel, exec: Execution) -> Result<Vec<C64>> {
    let n = x.len();
    check_len(n, kernel)?;
    let km = kernel.k_mem() as isize;
    let w = kernel.width();
    let c = kernel.coeffs();
    let at = |i: isize| x[i.rem_euclid(n as isize) as usize];
    let mut out = vec![C64::new(0.0, 0.0); n];
    exec.for_each_chunk_mut(&mut out, CHUNK, |ci, chunk| {
        for (j, o) in chunk.iter_mut().enumerate() {
            let t = (ci * CHUNK + j) as isize;
            let mut acc = C64::new(0.0, 0.0);
            for k in -km..=km {
                let xk = at(t + k);
                let row = &c[((k + km) as usize) * w..];
                for l in -km..=km {
                    acc += row[(l + km) as usize] * xk * at(t + l) * at(t + k + l).conj();
                }
            }
            *o = acc;
        }
    });
    Ok(out)
}

/// Gradient of a real loss with respect to `x` for `y = x + coeff·Δ(x)`, given
/// `g_y = ∂L/∂Re y + j ∂L/∂Im y`. Returns `g_x` in the same convention.
pub fn nonlinear_term_backward(
    x: &[C64],
    kernel: &PerturbationKernel,
    coeff: C64,
    g_y: &[C64],
) -> Result<Vec<C64>> {
    let n = x.len();
    check_len(n, kernel)?;
    if g_y.len() != n {
        return Err(Error::usage("gradient length mismatch"));
    }
    let km = kernel.k_mem() as isize;
    let idx = |i: isize| i.rem_euclid(n as isize) as usize;
    let mut g_x = g_y.to_vec();
    for t in 0..n as isize {
        let g = g_y[t as usize];
        if g == C64::new(0.0, 0.0) {
            continue;
        }
        for k in -km..=km {
            for l in -km..=km {
                let cc = coeff * kernel.get(k, l);
                let (a, b, d) = (idx(t + k), idx(t + l), idx(t + k + l));
                g_x[a] += g * (cc * x[b] * x[d].conj()).conj();
                g_x[b] += g * (cc * x[a] * x[d].conj()).conj();
                g_x[d] += g.conj() * cc * x[a] * x[b];
            }
        }
    }
    Ok(g_x)
}

/// `y_t = √P x_t + j γ P^{3/2} Δ_t + n_t` for unit-power symbols `x`, with
/// circular Gaussian noise of variance `noise_variance` (W). Output is in √W.
pub fn perturbation_channel(
    x: &[C64],
    kernel: &PerturbationKernel,
    power_dbm: f64,
    noise_variance: f64,
    seed: u64,
) -> Result<Vec<C64>> {
    if !(noise_variance >= 0.0) {
        return Err(Error::domain("noise variance must be nonnegative"));
    }
    let p = dbm_to_watts(power_dbm);
    let delta = nonlinear_term(x, kernel, Execution::default())?;
    let nl = C64::new(0.0, kernel.gamma() * p.powf(1.5));
    let sd = (0.5 * noise_variance).sqrt();
    let mut rng = crate::rng::stream(seed, "awgn");
    Ok(x.iter()
        .zip(&delta)
        .map(|(xi, d)| {
            let mut y = xi * p.sqrt() + nl * d;
            if sd > 0.0 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                y += C64::new(sd * re, sd * im);
            }
            y
        })
        .collect())
}

/// Adds circular Gaussian noise of total variance `noise_variance`.
pub fn awgn(x: &[C64], noise_variance: f64, seed: u64) -> Vec<C64> {
    let sd = (0.5 * noise_variance).sqrt();
    let mut rng = crate::rng::stream(seed, "awgn");
    x.iter()
        .map(|xi| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            xi + C64::new(sd * re, sd * im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_kernel(k_mem: usize, seed: u64) -> PerturbationKernel {
        let mut rng = crate::rng::rng_from_seed(seed);
        let w = 2 * k_mem + 1;
        let mut c = vec![C64::new(0.0, 0.0); w * w];
        for i in 0..w {
            for j in i..w {
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                c[i * w + j] = v;
                c[j * w + i] = v;
            }
        }
        PerturbationKernel::from_coeffs(k_mem, c, 1.3).unwrap()
    }

    fn random_symbols(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn matches_triple_sum_on_ring() {
        let kernel = random_kernel(3, 1);
        let n = 64;
        let mut rng = crate::rng::rng_from_seed(2);
        let x: Vec<C64> = (0..n)
            .map(|_| C64::from_polar(0.8, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let fast = nonlinear_term(&x, &kernel, Execution::Sequential).unwrap();
        // Unrestricted triple sum over (a, b, d) with the a + b - d = t selection.
        let km = kernel.k_mem() as isize;
        for t in 0..n as isize {
            let mut acc = C64::new(0.0, 0.0);
            for a in t - km..=t + km {
                for b in t - km..=t + km {
                    let d = a + b - t;
                    let (k, l) = (a - t, b - t);
                    let at = |i: isize| x[i.rem_euclid(n as isize) as usize];
                    acc += kernel.get(k, l) * at(a) * at(b) * at(d).conj();
                }
            }
            assert!((acc - fast[t as usize]).norm() < 1e-12);
        }
    }

    #[test]
    fn gamma_zero_is_awgn() {
        let kernel = random_kernel(2, 3).with_gamma_scale(0.0);
        let x = random_symbols(50, 4);
        let y = perturbation_channel(&x, &kernel, 0.0, 0.0, 1).unwrap();
        let a = dbm_to_watts(0.0).sqrt();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((xi * a - yi).norm() < 1e-15);
        }
        let noisy = perturbation_channel(&x, &kernel, 0.0, 1e-6, 1).unwrap();
        let var = noisy
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            / 50.0;
        assert!(var > 0.2e-6 && var < 3e-6);
    }

    #[test]
    fn cubic_homogeneity_in_power() {
        let kernel = random_kernel(2, 5);
        let x = random_symbols(40, 6);
        let nl = |dbm: f64| -> Vec<C64> {
            let a = dbm_to_watts(dbm).sqrt();
            perturbation_channel(&x, &kernel, dbm, 0.0, 0)
                .unwrap()
                .iter()
                .zip(&x)
                .map(|(y, xi)| y - xi * a)
                .collect()
        };
        let p0 = 1.0;
        let p1 = p0 + 10.0 * 2f64.log10();
        for (a, b) in nl(p0).iter().zip(nl(p1)) {
            assert!((a * 2f64.powf(1.5) - b).norm() < 1e-12 * b.norm().max(1e-20) + 1e-22);
        }
    }

    #[test]
    fn short_sequence_rejected() {
        let kernel = random_kernel(3, 1);
        assert!(perturbation_channel(&random_symbols(6, 1), &kernel, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let kernel = random_kernel(2, 7);
        let x = random_symbols(11, 8);
        let w = random_symbols(11, 9);
        let coeff = C64::new(0.0, 0.3);
        let loss = |x: &[C64]| -> f64 {
            let d = nonlinear_term(x, &kernel, Execution::Sequential).unwrap();
            x.iter()
                .zip(&d)
                .zip(&w)
                .map(|((xi, di), wi)| {
                    let y = xi + coeff * di;
                    (y * wi.conj()).re + 0.5 * y.norm_sqr()
                })
                .sum()
        };
        let d = nonlinear_term(&x, &kernel, Execution::Sequential).unwrap();
        let g_y: Vec<C64> = x
            .iter()
            .zip(&d)
            .zip(&w)
            .map(|((xi, di), wi)| wi + xi + coeff * di)
            .collect();
        let g = nonlinear_term_backward(&x, &kernel, coeff, &g_y).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            for (dir, part) in [(C64::new(1.0, 0.0), 0), (C64::new(0.0, 1.0), 1)] {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += dir * h;
                xm[i] -= dir * h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                let an = if part == 0 { g[i].re } else { g[i].im };
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
                    "{i} {part}: {fd} vs {an}"
                );
            }
        }
    }
}
