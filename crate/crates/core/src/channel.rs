//! Frequency-selective Rician channels for the BS-UE direct link and the
//! per-element BS-RIS-UE reflected links.
//!
//! Each link has a path-loss budget `beta = G0 * (d / d0)^-alpha`. A fraction
//! `K / (K + 1)` of it is a deterministic line-of-sight component on the first
//! tap, carrying the RIS array steering phase; the rest is circular Gaussian
//! scatter spread over the taps with an exponential power-delay profile.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codebook::ReflectionPattern;
use crate::error::{invalid, mismatch, Error, Result};
use crate::units::db_to_linear;

/// Fading parameters of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// Linear Rician K-factor. `0` is Rayleigh, `inf` pure line of sight.
    pub rician_k: f64,
    pub pathloss_exponent: f64,
    pub num_taps: usize,
    /// Exponential power-delay-profile decay per tap (nepers).
    pub delay_decay: f64,
}

impl LinkParams {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.rician_k >= 0.0) {
            return Err(invalid(format!("{name}: Rician K must be >= 0, got {}", self.rician_k)));
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(invalid(format!(
                "{name}: path-loss exponent must be > 0, got {}",
                self.pathloss_exponent
            )));
        }
        if self.num_taps == 0 {
            return Err(invalid(format!("{name}: num_taps must be >= 1")));
        }
        if !(self.delay_decay >= 0.0 && self.delay_decay.is_finite()) {
            return Err(invalid(format!("{name}: delay decay must be >= 0")));
        }
        Ok(())
    }

    /// Normalized scatter power per tap (sums to one).
    fn delay_profile(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.num_taps)
            .map(|l| (-self.delay_decay * l as f64).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    fn los_fraction(&self) -> f64 {
        if self.rician_k.is_infinite() {
            1.0
        } else {
            self.rician_k / (self.rician_k + 1.0)
        }
    }
}

/// Geometry and fading of all three links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingParams {
    pub direct: LinkParams,
    pub incident: LinkParams,
    pub reflected: LinkParams,
    /// Disable to model a blocked BS-UE path.
    pub direct_link: bool,
    /// Path gain at the reference distance, dB.
    pub reference_gain_db: f64,
    pub reference_distance_m: f64,
    pub bs_position: [f64; 3],
    pub ris_position: [f64; 3],
    pub ue_position: [f64; 3],
    /// Columns of the RIS planar array in the y-z plane; elements fill row by
    /// row at half-wavelength spacing. `0` puts all elements in one row.
    pub ris_columns: usize,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            direct: LinkParams {
                rician_k: 0.0,
                pathloss_exponent: 3.5,
                num_taps: 4,
                delay_decay: 0.5,
            },
            incident: LinkParams {
                rician_k: 10.0,
                pathloss_exponent: 2.2,
                num_taps: 4,
                delay_decay: 0.5,
            },
            reflected: LinkParams {
                rician_k: 10.0,
                pathloss_exponent: 2.2,
                num_taps: 4,
                delay_decay: 0.5,
            },
            direct_link: true,
            reference_gain_db: -30.0,
            reference_distance_m: 1.0,
            bs_position: [0.0, 0.0, 0.0],
            ris_position: [40.0, 30.0, 0.0],
            ue_position: [42.0, 28.0, -1.0],
            ris_columns: 0,
        }
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl FadingParams {
    /// All links single-tap (flat fading).
    pub fn narrowband(mut self) -> Self {
        self.direct.num_taps = 1;
        self.incident.num_taps = 1;
        self.reflected.num_taps = 1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.direct.validate("direct")?;
        self.incident.validate("incident")?;
        self.reflected.validate("reflected")?;
        if !self.reference_gain_db.is_finite() {
            return Err(invalid("reference gain must be finite"));
        }
        if !(self.reference_distance_m > 0.0 && self.reference_distance_m.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "reference distance must be > 0, got {}",
                self.reference_distance_m
            )));
        }
        for (name, d) in [
            ("BS-UE", distance(self.bs_position, self.ue_position)),
            ("BS-RIS", distance(self.bs_position, self.ris_position)),
            ("RIS-UE", distance(self.ris_position, self.ue_position)),
        ] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidGeometry(format!("{name} distance must be > 0, got {d}")));
            }
        }
        Ok(())
    }

    fn budget(&self, d: f64, exponent: f64) -> f64 {
        db_to_linear(self.reference_gain_db) * (d / self.reference_distance_m).powf(-exponent)
    }

    /// Mean power `E[sum_l |h_l|^2]` of the direct link.
    pub fn direct_budget(&self) -> f64 {
        if !self.direct_link {
            return 0.0;
        }
        self.budget(
            distance(self.bs_position, self.ue_position),
            self.direct.pathloss_exponent,
        )
    }

    pub fn incident_budget(&self) -> f64 {
        self.budget(
            distance(self.bs_position, self.ris_position),
            self.incident.pathloss_exponent,
        )
    }

    pub fn reflected_budget(&self) -> f64 {
        self.budget(
            distance(self.ris_position, self.ue_position),
            self.reflected.pathloss_exponent,
        )
    }

    /// Mean per-subcarrier power of the composite channel under uniformly random phases.
    pub fn random_phase_power(&self, num_elements: usize) -> f64 {
        self.direct_budget() + num_elements as f64 * self.incident_budget() * self.reflected_budget()
    }

    /// Planar-array steering phasors of the RIS toward `node`.
    fn steering(&self, node: [f64; 3], num_elements: usize) -> Vec<Complex64> {
        let d = distance(self.ris_position, node);
        let u: Vec<f64> = (0..3).map(|i| (node[i] - self.ris_position[i]) / d).collect();
        let columns = if self.ris_columns == 0 { num_elements } else { self.ris_columns };
        (0..num_elements)
            .map(|m| {
                let col = (m % columns) as f64;
                let row = (m / columns) as f64;
                Complex64::from_polar(1.0, PI * (col * u[1] + row * u[2]))
            })
            .collect()
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn draw_link<R: Rng + ?Sized>(
    link: &LinkParams,
    budget: f64,
    los_phasor: Complex64,
    rng: &mut R,
) -> Vec<Complex64> {
    let scatter = budget * (1.0 - link.los_fraction());
    let mut taps: Vec<Complex64> = link
        .delay_profile()
        .into_iter()
        .map(|p| {
            if scatter > 0.0 {
                complex_gaussian(rng, scatter * p)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    taps[0] += los_phasor * (budget * link.los_fraction()).sqrt();
    taps
}

/// Linear convolution of two tap vectors.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `H[k] = sum_l h_l exp(-j 2 pi k l / N)` for `k = 0..N`.
pub fn frequency_response(taps: &[Complex64], n_subcarriers: usize) -> Vec<Complex64> {
    (0..n_subcarriers)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| {
                    let angle = -2.0 * PI * ((k * l) % n_subcarriers) as f64 / n_subcarriers as f64;
                    h * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

/// One draw of all time-domain channel taps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    direct_taps: Vec<Complex64>,
    incident_taps: Vec<Vec<Complex64>>,
    reflected_taps: Vec<Vec<Complex64>>,
    cascaded_taps: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps; the cascade is computed here.
    pub fn from_taps(
        direct_taps: Vec<Complex64>,
        incident_taps: Vec<Vec<Complex64>>,
        reflected_taps: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if direct_taps.is_empty() {
            return Err(mismatch("direct link needs at least one tap"));
        }
        if incident_taps.is_empty() || incident_taps.len() != reflected_taps.len() {
            return Err(mismatch(format!(
                "{} incident vs {} reflected element links",
                incident_taps.len(),
                reflected_taps.len()
            )));
        }
        let l1 = incident_taps[0].len();
        let l2 = reflected_taps[0].len();
        if l1 == 0
            || l2 == 0
            || incident_taps.iter().any(|r| r.len() != l1)
            || reflected_taps.iter().any(|r| r.len() != l2)
        {
            return Err(mismatch("per-element tap rows must be non-empty and equal length"));
        }
        let all_finite = direct_taps
            .iter()
            .chain(incident_taps.iter().flatten())
            .chain(reflected_taps.iter().flatten())
            .all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(invalid("channel taps must be finite"));
        }
        let cascaded_taps = incident_taps
            .iter()
            .zip(&reflected_taps)
            .map(|(a, b)| convolve(a, b))
            .collect();
        Ok(Self {
            direct_taps,
            incident_taps,
            reflected_taps,
            cascaded_taps,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.cascaded_taps.len()
    }

    pub fn direct_taps(&self) -> &[Complex64] {
        &self.direct_taps
    }

    pub fn incident_taps(&self) -> &[Vec<Complex64>] {
        &self.incident_taps
    }

    pub fn reflected_taps(&self) -> &[Vec<Complex64>] {
        &self.reflected_taps
    }

    pub fn cascaded_taps(&self) -> &[Vec<Complex64>] {
        &self.cascaded_taps
    }

    /// Longest impulse response among the direct and cascaded links.
    pub fn max_delay_spread(&self) -> usize {
        self.direct_taps.len().max(self.cascaded_taps[0].len())
    }

    /// Per-subcarrier responses of the direct and every cascaded link.
    pub fn response(&self, n_subcarriers: usize) -> Result<ChannelResponse> {
        if n_subcarriers < self.max_delay_spread() {
            return Err(invalid(format!(
                "{n_subcarriers} subcarriers cannot resolve {} taps",
                self.max_delay_spread()
            )));
        }
        Ok(ChannelResponse {
            direct: frequency_response(&self.direct_taps, n_subcarriers),
            cascaded: self
                .cascaded_taps
                .iter()
                .map(|t| frequency_response(t, n_subcarriers))
                .collect(),
        })
    }

    /// Flat-fading view: the response at subcarrier 0 (sum of taps).
    pub fn narrowband_response(&self) -> ChannelResponse {
        let dc = |t: &[Complex64]| vec![t.iter().sum::<Complex64>()];
        ChannelResponse {
            direct: dc(&self.direct_taps),
            cascaded: self.cascaded_taps.iter().map(|t| dc(t)).collect(),
        }
    }
}

/// Frequency-domain direct and per-element cascaded responses.
///
/// Used both for ground truth and for estimates produced by cascaded
/// channel estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub direct: Vec<Complex64>,
    /// `cascaded[m][k]`: element `m`, subcarrier `k`.
    pub cascaded: Vec<Vec<Complex64>>,
}

impl ChannelResponse {
    pub fn num_elements(&self) -> usize {
        self.cascaded.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.direct.len()
    }

    /// `direct + sum_m c_m * cascaded[m]` for explicit element coefficients.
    pub fn compose_coefficients(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.num_elements() {
            return Err(mismatch(format!(
                "pattern has {} elements, channel has {}",
                coeffs.len(),
                self.num_elements()
            )));
        }
        let mut h = self.direct.clone();
        for (c, g) in coeffs.iter().zip(&self.cascaded) {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for (hk, gk) in h.iter_mut().zip(g) {
                *hk += c * gk;
            }
        }
        Ok(h)
    }

    pub fn compose(&self, rp: &ReflectionPattern) -> Result<Vec<Complex64>> {
        self.compose_coefficients(&rp.coefficients())
    }
}

/// Draws a realization for an `num_elements`-element RIS.
pub fn draw_channel<R: Rng + ?Sized>(
    params: &FadingParams,
    num_elements: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    params.validate()?;
    if num_elements == 0 {
        return Err(invalid("the RIS needs at least one element"));
    }
    let one = Complex64::new(1.0, 0.0);
    let direct = if params.direct_link {
        draw_link(&params.direct, params.direct_budget(), one, rng)
    } else {
        vec![Complex64::new(0.0, 0.0); params.direct.num_taps]
    };
    let (beta1, beta2) = (params.incident_budget(), params.reflected_budget());
    let to_bs = params.steering(params.bs_position, num_elements);
    let to_ue = params.steering(params.ue_position, num_elements);
    let incident = to_bs
        .iter()
        .map(|&a| draw_link(&params.incident, beta1, a, rng))
        .collect();
    let reflected = to_ue
        .iter()
        .map(|&a| draw_link(&params.reflected, beta2, a, rng))
        .collect();
    ChannelRealization::from_taps(direct, incident, reflected)
}

/// Noiseless composite frequency response under `rp`.
pub fn compose_effective_channel(
    ch: &ChannelRealization,
    rp: &ReflectionPattern,
    n_subcarriers: usize,
) -> Result<Vec<Complex64>> {
    if rp.num_elements() != ch.num_elements() {
        return Err(mismatch(format!(
            "pattern has {} elements, channel has {}",
            rp.num_elements(),
            ch.num_elements()
        )));
    }
    ch.response(n_subcarriers)?.compose(rp)
}
