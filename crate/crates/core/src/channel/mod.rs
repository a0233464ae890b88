//! Channel synthesis: distance-dependent path loss with Rician small-scale
//! fading and a uniform linear array at the reader.

mod text;

pub use text::{parse_channel_text, write_channel_text};

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::params::SystemParams;

/// Stream labels for the keyed generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Geometry = 1,
    DirectLink = 2,
    Forward = 3,
    Backward = 4,
    Selection = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator keyed by `(seed, trial, index, stream)`.
///
/// Keys are hashed rather than drawn sequentially, so a trial's channels do
/// not depend on which other trials ran or in which order.
pub fn keyed_rng(seed: u64, trial: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    let mut k = splitmix(seed);
    k = splitmix(k ^ trial);
    k = splitmix(k ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    k = splitmix(k ^ stream as u64);
    ChaCha8Rng::seed_from_u64(k)
}

fn cscg<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    }
}

/// Steering vector of a half-wavelength ULA, entry `m` equal to
/// `e^{-jπ m sin θ}` (zero-based `m`).
pub fn steering(theta: f64, len: usize) -> ComplexVector {
    DVector::from_fn(len, |m, _| Complex64::from_polar(1.0, -PI * m as f64 * theta.sin()))
}

fn check_link(d: f64, kappa: f64, rho: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain("gen_rician", format!("distance {d} must be positive")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain("gen_rician", format!("path-loss exponent {rho} must be positive")));
    }
    if !(kappa >= 0.0) {
        return Err(Error::domain("gen_rician", format!("Rician factor {kappa} must be >= 0")));
    }
    Ok(())
}

/// One Rician-faded link of length `m`:
/// `sqrt(d^{-ρ})·(sqrt(κ/(κ+1))·a(θ) + sqrt(1/(κ+1))·g)` with `g` i.i.d. CN(0, 1).
pub fn gen_rician_vector<R: Rng + ?Sized>(
    d: f64,
    theta: f64,
    m: usize,
    kappa: f64,
    rho: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    check_link(d, kappa, rho)?;
    let scale = d.powf(-rho).sqrt();
    let (los, nlos) = rician_weights(kappa);
    let a = steering(theta, m);
    Ok(DVector::from_fn(m, |i, _| {
        let g = cscg(rng);
        (a[i] * los + g * nlos) * scale
    }))
}

/// An `m x q` Rician link between two arrays; the line-of-sight part is
/// `a_m(θ_rx)·a_q(θ_tx)^H`. With `q = 1` this matches [`gen_rician_vector`].
pub fn gen_rician_matrix<R: Rng + ?Sized>(
    d: f64,
    theta_rx: f64,
    theta_tx: f64,
    m: usize,
    q: usize,
    kappa: f64,
    rho: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    check_link(d, kappa, rho)?;
    let scale = d.powf(-rho).sqrt();
    let (los, nlos) = rician_weights(kappa);
    let a_rx = steering(theta_rx, m);
    let a_tx = steering(theta_tx, q);
    let mut out = ComplexMatrix::zeros(m, q);
    for j in 0..q {
        for i in 0..m {
            let g = cscg(rng);
            out[(i, j)] = (a_rx[i] * a_tx[j].conj() * los + g * nlos) * scale;
        }
    }
    Ok(out)
}

/// Cascaded backscatter channel `α·h_tr·h_st^T` (an `M x Q` matrix).
///
/// `h_st[q]` is the coefficient from source antenna `q` to the tag, so with a
/// single source antenna this is the vector `α·h_st·h_tr`, and with several
/// it equals `α·h_tr·h̄^H` for `h̄ = conj(h_st)`.
pub fn cascade(h_st: &ComplexVector, h_tr: &ComplexVector, alpha: f64) -> ComplexMatrix {
    let a = Complex64::new(alpha, 0.0);
    ComplexMatrix::from_fn(h_tr.len(), h_st.len(), |i, j| a * h_st[j] * h_tr[i])
}

/// Links of one tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TagChannel {
    /// Source-to-tag coefficients, one per source antenna.
    pub h_st: ComplexVector,
    /// Tag-to-reader vector, one entry per reader antenna.
    pub h_tr: ComplexVector,
    /// Cascaded backscatter link `α·h_tr·h_st^T` (`M x Q`).
    pub h_str: ComplexMatrix,
}

/// One draw of every link in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub alpha: f64,
    /// Direct link as seen at the reader, `M x Q` (column `q` is the channel
    /// from source antenna `q`).
    pub h_sr: ComplexMatrix,
    pub tags: Vec<TagChannel>,
}

/// Composite single-source channels of one tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SimoLinks {
    /// `h0`: the direct link.
    pub h0: ComplexVector,
    /// `h1 = h0 + h̄1`.
    pub h1: ComplexVector,
    /// `h̄1`: the backscatter link alone.
    pub hbar1: ComplexVector,
}

impl SimoLinks {
    pub fn new(h_sr: ComplexVector, h_str: ComplexVector) -> Result<Self> {
        if h_sr.len() != h_str.len() || h_sr.is_empty() {
            return Err(Error::Dimension(format!(
                "direct link has {} entries, backscatter link {}",
                h_sr.len(),
                h_str.len()
            )));
        }
        Ok(Self {
            h1: &h_sr + &h_str,
            h0: h_sr,
            hbar1: h_str,
        })
    }

    pub fn dim(&self) -> usize {
        self.h0.len()
    }
}

/// Composite multi-source channels of one tag (`M x Q` each).
#[derive(Debug, Clone, PartialEq)]
pub struct MimoLinks {
    pub g0: ComplexMatrix,
    pub g1: ComplexMatrix,
    pub gbar1: ComplexMatrix,
}

impl MimoLinks {
    pub fn new(h_sr: ComplexMatrix, h_str: ComplexMatrix) -> Result<Self> {
        if h_sr.shape() != h_str.shape() {
            return Err(Error::Dimension(format!(
                "direct link is {:?}, backscatter link {:?}",
                h_sr.shape(),
                h_str.shape()
            )));
        }
        Ok(Self {
            g1: &h_sr + &h_str,
            g0: h_sr,
            gbar1: h_str,
        })
    }

    pub fn rx_dim(&self) -> usize {
        self.g0.nrows()
    }

    pub fn tx_dim(&self) -> usize {
        self.g0.ncols()
    }

    /// Receive-side channels for a fixed transmit beam `x`, normalized so
    /// that `δ_i = σ_s²|v^H h_i|² + σ_w²‖v‖²` with `σ_s² = ‖x‖²`.
    pub fn for_transmit(&self, x: &ComplexVector, sigma_s: f64) -> SimoLinks {
        let s = Complex64::new(1.0 / sigma_s, 0.0);
        let h0 = &self.g0 * x * s;
        let hbar1 = &self.gbar1 * x * s;
        SimoLinks {
            h1: &h0 + &hbar1,
            h0,
            hbar1,
        }
    }

    /// Transmit-side channels for a fixed receive beam `v`: `g_i = G_i^H v`.
    pub fn for_receive(&self, v: &ComplexVector) -> SimoLinks {
        let h0 = self.g0.adjoint() * v;
        let hbar1 = self.gbar1.adjoint() * v;
        SimoLinks {
            h1: &h0 + &hbar1,
            h0,
            hbar1,
        }
    }
}

impl ChannelRealization {
    /// Builds a realization from raw links, computing every cascade.
    pub fn from_links(alpha: f64, h_sr: ComplexMatrix, links: Vec<(ComplexVector, ComplexVector)>) -> Result<Self> {
        let (m, q) = h_sr.shape();
        if m == 0 || q == 0 {
            return Err(Error::Dimension("direct link must be nonempty".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParam(format!("alpha = {alpha} outside [0, 1]")));
        }
        let mut tags = Vec::with_capacity(links.len());
        for (k, (h_st, h_tr)) in links.into_iter().enumerate() {
            if h_st.len() != q || h_tr.len() != m {
                return Err(Error::Dimension(format!(
                    "tag {}: forward link has {} entries (want {q}), backward {} (want {m})",
                    k + 1,
                    h_st.len(),
                    h_tr.len()
                )));
            }
            let h_str = cascade(&h_st, &h_tr, alpha);
            tags.push(TagChannel { h_st, h_tr, h_str });
        }
        Ok(Self { alpha, h_sr, tags })
    }

    pub fn rx_antennas(&self) -> usize {
        self.h_sr.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.h_sr.ncols()
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    /// Single-source composites for tag `k` (zero-based), using the first
    /// source antenna.
    pub fn simo_links(&self, k: usize) -> SimoLinks {
        let h_sr = self.h_sr.column(0).into_owned();
        let h_str = self.tags[k].h_str.column(0).into_owned();
        SimoLinks {
            h1: &h_sr + &h_str,
            h0: h_sr,
            hbar1: h_str,
        }
    }

    pub fn mimo_links(&self, k: usize) -> MimoLinks {
        let h_str = self.tags[k].h_str.clone();
        MimoLinks {
            g1: &self.h_sr + &h_str,
            g0: self.h_sr.clone(),
            gbar1: h_str,
        }
    }

    /// The same realization with the direct link removed.
    pub fn without_direct_link(&self) -> Self {
        Self {
            alpha: self.alpha,
            h_sr: ComplexMatrix::zeros(self.h_sr.nrows(), self.h_sr.ncols()),
            tags: self.tags.clone(),
        }
    }
}

fn draw_distance(fixed: Option<f64>, range: (f64, f64), rng: &mut ChaCha8Rng) -> f64 {
    fixed.unwrap_or_else(|| {
        if range.1 > range.0 {
            rng.random_range(range.0..range.1)
        } else {
            range.0
        }
    })
}

fn draw_angle(fixed: Option<f64>, rng: &mut ChaCha8Rng) -> f64 {
    fixed.unwrap_or_else(|| rng.random_range(-FRAC_PI_2..FRAC_PI_2))
}

/// Draws every link of trial `trial` under `params`.
///
/// Deterministic in `(params, trial)`: each tag and link reads its own keyed
/// stream, so changing `K` leaves the other tags' draws untouched.
pub fn gen_channel_set(params: &SystemParams, trial: u64) -> Result<ChannelRealization> {
    params.validate()?;
    let (m, q) = (params.rx_antennas, params.tx_antennas);
    let seed = params.seed;

    let mut geo = keyed_rng(seed, trial, 0, Stream::Geometry);
    let d_sr = draw_distance(params.d_sr, params.dist_range, &mut geo);
    let th_rx = draw_angle(params.los_angle, &mut geo);
    let th_tx = draw_angle(params.los_angle, &mut geo);
    let mut rng = keyed_rng(seed, trial, 0, Stream::DirectLink);
    let h_sr = gen_rician_matrix(d_sr, th_rx, th_tx, m, q, params.kappa, params.rho, &mut rng)?;

    let mut links = Vec::with_capacity(params.num_tags);
    for k in 0..params.num_tags {
        let idx = k as u64 + 1;
        let mut geo = keyed_rng(seed, trial, idx, Stream::Geometry);
        let d_st = draw_distance(params.d_st, params.dist_range, &mut geo);
        let d_tr = draw_distance(params.d_tr, params.dist_range, &mut geo);
        let th_st = draw_angle(params.los_angle, &mut geo);
        let th_tr = draw_angle(params.los_angle, &mut geo);
        let mut fwd = keyed_rng(seed, trial, idx, Stream::Forward);
        let h_st = gen_rician_vector(d_st, th_st, q, params.kappa, params.rho, &mut fwd)?;
        let mut bwd = keyed_rng(seed, trial, idx, Stream::Backward);
        let h_tr = gen_rician_vector(d_tr, th_tr, m, params.kappa, params.rho, &mut bwd)?;
        links.push((h_st, h_tr));
    }
    ChannelRealization::from_links(params.alpha, h_sr, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cascade_examples() {
        let h_tr = dvector![c(1.0, 0.0), c(-1.0, 0.0)];
        let out = cascade(&dvector![c(0.0, 2.0)], &h_tr, 0.8);
        assert!((out[(0, 0)] - c(0.0, 1.6)).norm() < 1e-15);
        assert!((out[(1, 0)] - c(0.0, -1.6)).norm() < 1e-15);
        assert!(cascade(&dvector![c(0.3, 2.0)], &h_tr, 0.0).iter().all(|z| *z == c(0.0, 0.0)));
        assert_eq!(cascade(&dvector![c(1.0, 0.0)], &h_tr, 1.0).column(0).into_owned(), h_tr);
    }

    #[test]
    fn pure_los_is_deterministic() {
        let mut rng = keyed_rng(3, 0, 0, Stream::DirectLink);
        let theta = 0.4;
        let v = gen_rician_vector(2.0, theta, 5, f64::INFINITY, 3.0, &mut rng).unwrap();
        for (m, z) in v.iter().enumerate() {
            assert!((z.norm() - 2f64.powf(-1.5)).abs() < 1e-14);
            let want = Complex64::from_polar(1.0, -PI * m as f64 * theta.sin());
            assert!((z / z.norm() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_distance_has_no_path_loss() {
        let mut a = keyed_rng(9, 1, 2, Stream::Backward);
        let mut b = keyed_rng(9, 1, 2, Stream::Backward);
        let v1 = gen_rician_vector(1.0, 0.1, 3, 2.8, 3.0, &mut a).unwrap();
        let v2 = gen_rician_vector(1.0, 0.1, 3, 2.8, 7.0, &mut b).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn rejects_bad_links() {
        let mut rng = keyed_rng(0, 0, 0, Stream::Forward);
        assert!(gen_rician_vector(0.0, 0.0, 2, 1.0, 3.0, &mut rng).is_err());
        assert!(gen_rician_vector(1.0, 0.0, 2, 1.0, 0.0, &mut rng).is_err());
        assert!(gen_rician_vector(1.0, 0.0, 2, -1.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn matrix_with_one_column_matches_vector() {
        let mut a = keyed_rng(4, 4, 4, Stream::DirectLink);
        let mut b = keyed_rng(4, 4, 4, Stream::DirectLink);
        let v = gen_rician_vector(2.5, 0.3, 4, 2.8, 3.0, &mut a).unwrap();
        let m = gen_rician_matrix(2.5, 0.3, -1.0, 4, 1, 2.8, 3.0, &mut b).unwrap();
        assert_eq!(m.column(0).into_owned(), v);
    }

    fn t_col(ch: &ChannelRealization, k: usize) -> ComplexVector {
        ch.tags[k].h_str.column(0).into_owned()
    }

    #[test]
    fn realization_is_deterministic_and_composites_hold() {
        let p = SystemParams::default();
        let a = gen_channel_set(&p, 17).unwrap();
        let b = gen_channel_set(&p, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_channel_set(&p, 18).unwrap());
        for k in 0..a.num_tags() {
            let l = a.simo_links(k);
            assert_eq!(l.h1, &l.h0 + &l.hbar1);
            assert_eq!(l.hbar1, t_col(&a, k));
            let t = &a.tags[k];
            assert_eq!(t.h_str, cascade(&t.h_st, &t.h_tr, a.alpha));
        }
    }

    #[test]
    fn adding_tags_keeps_existing_draws() {
        let p = SystemParams::default();
        let small = gen_channel_set(&SystemParams { num_tags: 2, ..p.clone() }, 3).unwrap();
        let big = gen_channel_set(&p, 3).unwrap();
        assert_eq!(small.h_sr, big.h_sr);
        assert_eq!(small.tags[..], big.tags[..2]);
    }

    #[test]
    fn fixed_geometry_with_pure_los_is_fully_deterministic() {
        let p = SystemParams {
            num_tags: 1,
            kappa: f64::INFINITY,
            d_st: Some(2.0),
            d_sr: Some(3.0),
            d_tr: Some(1.5),
            los_angle: Some(0.2),
            ..Default::default()
        };
        let a = gen_channel_set(&p, 0).unwrap();
        let b = gen_channel_set(&SystemParams { seed: 99, ..p.clone() }, 5).unwrap();
        assert!((&a.h_sr - &b.h_sr).iter().all(|z| z.norm() < 1e-15));
        assert!((&a.tags[0].h_str - &b.tags[0].h_str).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn mimo_reductions_match_matrix_products() {
        let p = SystemParams {
            tx_antennas: 3,
            ..Default::default()
        };
        let ch = gen_channel_set(&p, 2).unwrap();
        let links = ch.mimo_links(1);
        let x = dvector![c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.4)];
        let s = 0.7;
        let rx = links.for_transmit(&x, s);
        let direct = (&links.g1 * &x) / c(s, 0.0);
        assert!((&rx.h1 - direct).norm() < 1e-14);
        let v = dvector![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        let tx = links.for_receive(&v);
        let lhs = tx.h1.dotc(&x);
        let rhs = v.dotc(&(&links.g1 * &x));
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
