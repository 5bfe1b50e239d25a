//! Gray-coded rectangular constellations.
//!
//! Every constellation is a product of two Gray-coded PAM axes. A label is the
//! integer formed by the symbol's bits (first bit most significant); its
//! high `i_bits` select the in-phase level and its low `q_bits` the quadrature
//! level. Level index `a` on an axis with `L` levels sits at `L - 1 - 2a`, so
//! label 0 is always the upper-right point. The table:
//!
//! | modulation | I levels | Q levels | raw mean power |
//! |------------|----------|----------|----------------|
//! | BPSK       | 2        | 1        | 1              |
//! | QPSK       | 2        | 2        | 2              |
//! | 8QAM       | 4        | 2        | 6              |
//! | 16QAM      | 4        | 4        | 10             |
//! | 64QAM      | 8        | 8        | 42             |
//!
//! Points are divided by the square root of the raw mean power.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8QAM")]
    Qam8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl Modulation {
    pub const ALL: [Modulation; 5] =
        [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam8, Modulation::Qam16, Modulation::Qam64];

    /// (in-phase bits, quadrature bits)
    fn axis_bits(self) -> (u32, u32) {
        match self {
            Modulation::Bpsk => (1, 0),
            Modulation::Qpsk => (1, 1),
            Modulation::Qam8 => (2, 1),
            Modulation::Qam16 => (2, 2),
            Modulation::Qam64 => (3, 3),
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        let (i, q) = self.axis_bits();
        (i + q) as usize
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Qam8 => "8QAM",
            Modulation::Qam16 => "16QAM",
            Modulation::Qam64 => "64QAM",
        }
    }

    pub fn constellation<T: Real>(self) -> Constellation<T> {
        Constellation::new(self)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self> {
        Modulation::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DspError::Config(format!("unknown modulation '{s}'")))
    }
}

pub fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut v = g;
    while g > 1 {
        g >>= 1;
        v ^= g;
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    modulation: Modulation,
    points: Vec<Complex<T>>,
    i_levels: u32,
    q_levels: u32,
    scale: f64,
}

impl<T: Real> Constellation<T> {
    pub fn new(modulation: Modulation) -> Self {
        let (ib, qb) = modulation.axis_bits();
        let (li, lq) = (1u32 << ib, 1u32 << qb);
        let raw_power = pam_power(li) + pam_power(lq);
        let scale = 1.0 / raw_power.sqrt();
        let mut points = vec![Complex::new(T::zero(), T::zero()); modulation.order()];
        for a in 0..li {
            for b in 0..lq {
                let label = (gray_encode(a) << qb) | gray_encode(b);
                let re = pam_level(a, li) * scale;
                let im = pam_level(b, lq) * scale;
                points[label as usize] = Complex::new(T::lit(re), T::lit(im));
            }
        }
        Self { modulation, points, i_levels: li, q_levels: lq, scale }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex<T> {
        self.points[label]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest distance between two distinct points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    /// Nearest-point decision, sliced per axis.
    pub fn decide(&self, z: Complex<T>) -> usize {
        let qb = self.modulation.axis_bits().1;
        let a = slice_axis(z.re.as_f64() / self.scale, self.i_levels);
        let b = slice_axis(z.im.as_f64() / self.scale, self.q_levels);
        ((gray_encode(a) << qb) | gray_encode(b)) as usize
    }

    /// Bits of a label, most significant first.
    pub fn label_bits(&self, label: usize) -> impl Iterator<Item = bool> {
        let bps = self.bits_per_symbol();
        (0..bps).rev().map(move |k| (label >> k) & 1 == 1)
    }

    pub fn label_from_bits(&self, bits: &[bool]) -> usize {
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }
}

fn pam_level(idx: u32, levels: u32) -> f64 {
    f64::from(levels) - 1.0 - 2.0 * f64::from(idx)
}

fn pam_power(levels: u32) -> f64 {
    let l = f64::from(levels);
    (l * l - 1.0) / 3.0
}

fn slice_axis(x: f64, levels: u32) -> u32 {
    let l = f64::from(levels);
    let idx = ((l - 1.0 - x) / 2.0).round();
    idx.clamp(0.0, l - 1.0) as u32
}

/// Maps a bit sequence onto constellation points, `bits_per_symbol` bits per point.
pub fn map_bits<T: Real>(bits: &[bool], constellation: &Constellation<T>) -> Result<Vec<Complex<T>>> {
    let bps = constellation.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(DspError::Length(format!(
            "{} bits is not a multiple of {} bits per {} symbol",
            bits.len(),
            bps,
            constellation.modulation()
        )));
    }
    Ok(bits
        .chunks_exact(bps)
        .map(|chunk| constellation.point(constellation.label_from_bits(chunk)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_is_antipodal() {
        let c = Modulation::Bpsk.constellation::<f64>();
        let s = map_bits(&[false, true], &c).unwrap();
        assert_eq!(s, vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]);
    }

    #[test]
    fn qpsk_first_point_unit_magnitude() {
        let c = Modulation::Qpsk.constellation::<f64>();
        let s = map_bits(&[false, false], &c).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], c.point(0));
        assert!((s[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn every_constellation_has_unit_average_power() {
        for m in Modulation::ALL {
            let c = m.constellation::<f64>();
            assert_eq!(c.len(), 1 << m.bits_per_symbol());
            let p: f64 = c.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{m}: {p}");
        }
    }

    #[test]
    fn qam16_power_by_brute_force() {
        // lattice {±1,±3}² scaled by 1/sqrt(10), averaged directly
        let mut acc = 0.0;
        for i in [-3.0f64, -1.0, 1.0, 3.0] {
            for q in [-3.0f64, -1.0, 1.0, 3.0] {
                acc += (i * i + q * q) / 10.0;
            }
        }
        assert!((acc / 16.0 - 1.0).abs() < 1e-12);
        let c = Modulation::Qam16.constellation::<f64>();
        let bits: Vec<bool> = (0..16usize).flat_map(|l| c.label_bits(l).collect::<Vec<_>>()).collect();
        let syms = map_bits(&bits, &c).unwrap();
        let p = crate::signal::mean_power(&syms);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bit_map_is_bijective() {
        for m in Modulation::ALL {
            let c = m.constellation::<f64>();
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    assert!((c.point(i) - c.point(j)).norm() > 1e-9, "{m}: labels {i} and {j} collide");
                }
            }
        }
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit() {
        for m in Modulation::ALL {
            let c = m.constellation::<f64>();
            let dmin = c.min_distance();
            for i in 0..c.len() {
                for j in 0..c.len() {
                    if i == j {
                        continue;
                    }
                    let d = (c.point(i) - c.point(j)).norm();
                    if (d - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{m}: {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn slicer_matches_brute_force_nearest_point() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in Modulation::ALL {
            let c = m.constellation::<f64>();
            for _ in 0..2000 {
                let z = Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let brute = (0..c.len())
                    .min_by(|&a, &b| (c.point(a) - z).norm().partial_cmp(&(c.point(b) - z).norm()).unwrap())
                    .unwrap();
                assert_eq!(c.decide(z), brute, "{m} at {z}");
            }
        }
    }

    #[test]
    fn indivisible_bits_is_length_error() {
        let c = Modulation::Qam8.constellation::<f64>();
        assert!(matches!(map_bits(&[true; 4], &c), Err(DspError::Length(_))));
    }

    #[test]
    fn gray_round_trip() {
        for v in 0..256 {
            assert_eq!(gray_decode(gray_encode(v)), v);
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("16qam".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert!("32QAM".parse::<Modulation>().is_err());
    }
}
