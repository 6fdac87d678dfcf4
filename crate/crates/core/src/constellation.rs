//! Square M-QAM with Gray labels, amplitude/sign factorization and
//! Maxwell–Boltzmann amplitude laws.
//!
//! Point indexing: `index = quadrant * A + amp_index`, where
//! `quadrant = 2 * sign_i + sign_q` (sign bit 0 is the positive half-axis) and
//! `amp_index = k_i * L + k_q` with `k` the 1D amplitude level (amplitude
//! `2k + 1` before scaling). `L` is the number of amplitude levels per
//! dimension and `A = L²` the size of the unsigned-symbol alphabet.
//!
//! Labels are `m` bits, most significant first:
//! `[sign_i, gray(k_i), sign_q, gray(k_q)]`.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    levels: usize,
    scale: f64,
    points: Vec<C64>,
    labels: Vec<u32>,
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Builds a unit-average-energy square QAM constellation.
pub fn build_qam(order: usize) -> Result<Constellation> {
    Constellation::new(order)
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 16 | 64 | 256) {
            return Err(Error::config(format!(
                "unsupported QAM order {order}; expected 16, 64 or 256"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let side = 1usize << (bits_per_symbol / 2);
        let levels = side / 2;
        let amp_bits = levels.trailing_zeros() as usize;
        let dim_energy: f64 = (0..levels)
            .map(|k| ((2 * k + 1) as f64).powi(2))
            .sum::<f64>()
            / levels as f64;
        let scale = 1.0 / (2.0 * dim_energy).sqrt();

        let a = levels * levels;
        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        let dim_bits = amp_bits + 1;
        for q in 0..4 {
            let (si, sq) = (q >> 1, q & 1);
            for amp in 0..a {
                let (ki, kq) = (amp / levels, amp % levels);
                let re = if si == 0 { 1.0 } else { -1.0 } * (2 * ki + 1) as f64 * scale;
                let im = if sq == 0 { 1.0 } else { -1.0 } * (2 * kq + 1) as f64 * scale;
                points.push(C64::new(re, im));
                let li = (si << amp_bits) | gray(ki);
                let lq = (sq << amp_bits) | gray(kq);
                labels.push(((li << dim_bits) | lq) as u32);
            }
        }
        Ok(Self {
            order,
            bits_per_symbol,
            levels,
            scale,
            points,
            labels,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Amplitude levels per dimension (`L`).
    pub fn levels_per_dim(&self) -> usize {
        self.levels
    }

    /// Size of the unsigned-symbol alphabet (`A = L²`).
    pub fn amp_alphabet_size(&self) -> usize {
        self.levels * self.levels
    }

    /// Positive 1D amplitude levels, scaled to unit energy under uniform input.
    pub fn amp_alphabet(&self) -> Vec<f64> {
        (0..self.levels)
            .map(|k| (2 * k + 1) as f64 * self.scale)
            .collect()
    }

    /// The odd-integer amplitude levels `1, 3, 5, ...` before scaling.
    pub fn amp_levels_int(&self) -> Vec<u32> {
        (0..self.levels as u32).map(|k| 2 * k + 1).collect()
    }

    /// Multiplier mapping odd-integer amplitudes to the unit-energy grid.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Bit `level` (0 = most significant) of the label of point `index`.
    pub fn bit(&self, index: usize, level: usize) -> u8 {
        ((self.labels[index] >> (self.bits_per_symbol - 1 - level)) & 1) as u8
    }

    pub fn decompose(&self, index: usize) -> (usize, usize) {
        let a = self.amp_alphabet_size();
        (index / a, index % a)
    }

    pub fn recompose(&self, quadrant: usize, amp_index: usize) -> usize {
        quadrant * self.amp_alphabet_size() + amp_index
    }

    /// First-quadrant point of an unsigned symbol.
    pub fn amp_point(&self, amp_index: usize) -> C64 {
        self.points[amp_index]
    }

    /// Per-dimension level indices `(k_i, k_q)` of an unsigned symbol.
    pub fn amp_pair(&self, amp_index: usize) -> (usize, usize) {
        (amp_index / self.levels, amp_index % self.levels)
    }

    pub fn amp_index_from_pair(&self, ki: usize, kq: usize) -> usize {
        ki * self.levels + kq
    }

    /// `|c|²` of each unsigned symbol on the unit-energy grid.
    pub fn amp_energies(&self) -> Vec<f64> {
        (0..self.amp_alphabet_size())
            .map(|a| self.points[a].norm_sqr())
            .collect()
    }

    /// Mean energy under an unsigned-symbol marginal (signs do not matter).
    pub fn energy_under(&self, amp_marginal: &[f64]) -> f64 {
        amp_marginal
            .iter()
            .zip(self.amp_energies())
            .map(|(p, e)| p * e)
            .sum()
    }

    /// Factor that rescales the grid to unit average energy under `amp_marginal`.
    pub fn normalization_for(&self, amp_marginal: &[f64]) -> f64 {
        1.0 / self.energy_under(amp_marginal).sqrt()
    }

    /// Full symbol prior for a marginal over unsigned symbols with uniform signs.
    pub fn symbol_prior(&self, amp_marginal: &[f64]) -> Vec<f64> {
        (0..self.order)
            .map(|i| amp_marginal[i % self.amp_alphabet_size()] / 4.0)
            .collect()
    }

    /// Debug CSV: `index,re,im,label`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im,label\n");
        for (i, (p, l)) in self.points.iter().zip(&self.labels).enumerate() {
            out.push_str(&format!(
                "{i},{},{},{:0width$b}\n",
                p.re,
                p.im,
                l,
                width = self.bits_per_symbol
            ));
        }
        out
    }
}

/// Maxwell–Boltzmann law over the 1D amplitude levels.
#[derive(Clone, Debug, PartialEq)]
pub struct MbDistribution {
    pub nu: f64,
    pub probs: Vec<f64>,
}

impl MbDistribution {
    pub fn new(amps: &[f64], nu: f64) -> Self {
        let e_min = amps.iter().map(|a| a * a).fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = amps.iter().map(|a| (-nu * (a * a - e_min)).exp()).collect();
        let z: f64 = w.iter().sum();
        Self {
            nu,
            probs: w.into_iter().map(|x| x / z).collect(),
        }
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// Product law over unsigned 2D symbols (`amp_index = k_i * L + k_q`).
    pub fn pair_law(&self) -> Vec<f64> {
        let l = self.probs.len();
        (0..l * l)
            .map(|a| self.probs[a / l] * self.probs[a % l])
            .collect()
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Finds the MB exponent whose 1D amplitude entropy equals `target` bits.
///
/// Bisection on `nu`, starting from the bracket `[0, 50]`; the upper end is
/// doubled while it still yields an entropy above the target.
pub fn mb_fit_entropy(c: &Constellation, target: f64, tol: f64) -> Result<MbDistribution> {
    let amps = c.amp_alphabet();
    let h_max = (amps.len() as f64).log2();
    if !(target > 0.0 && target <= h_max + 1e-15) || !(tol > 0.0) {
        return Err(Error::domain(format!(
            "MB entropy target {target} outside (0, {h_max}] or tol {tol} not positive"
        )));
    }
    let h = |nu: f64| MbDistribution::new(&amps, nu).entropy_bits();
    if h_max - target <= tol {
        return Ok(MbDistribution::new(&amps, 0.0));
    }
    let (mut lo, mut hi) = (0.0f64, 50.0f64);
    while h(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::domain(format!(
                "MB entropy target {target} below numerically reachable range"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if (hm - target).abs() <= tol {
            return Ok(MbDistribution::new(&amps, mid));
        }
        if hm > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let d = MbDistribution::new(&amps, nu);
    if (d.entropy_bits() - target).abs() <= tol {
        Ok(d)
    } else {
        Err(Error::Numerical {
            what: "MB bisection did not reach tolerance".into(),
            residual: (d.entropy_bits() - target).abs(),
        })
    }
}
