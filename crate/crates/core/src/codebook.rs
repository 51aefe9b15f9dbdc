//! Reflection patterns with B-level phase quantization and the codebook
//! generators: random, sum-distance maximizing (SDM), DFT and exhaustive.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Angular distances closer than this are treated as ties by [`quantize_phase`].
const TIE_EPS: f64 = 1e-12;

/// Largest universe enumerated explicitly (exhaustive codebooks, SDM init).
const MAX_ENUMERATED: u64 = 1 << 20;

pub const DEFAULT_SDM_MAX_SWEEPS: usize = 100;

fn wrap_to_pi(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Nearest of the `levels` legitimate phases `2*pi*b/levels` to `theta`.
///
/// Equidistant candidates resolve to the lower index.
pub fn quantize_phase(theta: f64, levels: u32) -> Result<u32> {
    if levels < 2 {
        return Err(invalid(format!("phase levels must be >= 2, got {levels}")));
    }
    if !theta.is_finite() {
        return Err(invalid(format!("phase must be finite, got {theta}")));
    }
    let step = 2.0 * PI / levels as f64;
    let lo = ((theta.rem_euclid(2.0 * PI) / step).floor() as u32).min(levels - 1);
    let hi = (lo + 1) % levels;
    let d_lo = wrap_to_pi(theta - step * lo as f64).abs();
    let d_hi = wrap_to_pi(theta - step * hi as f64).abs();
    Ok(if (d_lo - d_hi).abs() <= TIE_EPS {
        lo.min(hi)
    } else if d_lo < d_hi {
        lo
    } else {
        hi
    })
}

/// Unit phasors of the `levels` legitimate phases.
pub fn phase_table(levels: u32) -> Vec<Complex64> {
    (0..levels)
        .map(|b| Complex64::from_polar(1.0, 2.0 * PI * b as f64 / levels as f64))
        .collect()
}

/// One RIS configuration: a discrete phase index per element.
///
/// A pattern may also be switched off entirely (every element absorbing),
/// which is the reference state used while estimating the direct link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReflectionPattern {
    phase_indices: Vec<u32>,
    levels: u32,
    switched_off: bool,
}

impl ReflectionPattern {
    pub fn new(phase_indices: Vec<u32>, levels: u32) -> Result<Self> {
        if levels < 2 {
            return Err(invalid(format!("phase levels must be >= 2, got {levels}")));
        }
        if phase_indices.is_empty() {
            return Err(invalid("a reflection pattern needs at least one element"));
        }
        if let Some(bad) = phase_indices.iter().find(|&&i| i >= levels) {
            return Err(invalid(format!("phase index {bad} out of range for B = {levels}")));
        }
        Ok(Self {
            phase_indices,
            levels,
            switched_off: false,
        })
    }

    /// All elements switched off: every reflection coefficient is zero.
    pub fn off(num_elements: usize, levels: u32) -> Result<Self> {
        let mut rp = Self::new(vec![0; num_elements], levels)?;
        rp.switched_off = true;
        Ok(rp)
    }

    /// Quantizes continuous phases (radians) to the nearest legitimate level.
    pub fn from_phases(phases: &[f64], levels: u32) -> Result<Self> {
        let idx = phases
            .iter()
            .map(|&p| quantize_phase(p, levels))
            .collect::<Result<Vec<_>>>()?;
        Self::new(idx, levels)
    }

    /// Quantizes the arguments of arbitrary complex coefficients.
    pub fn from_coefficients(coeffs: &[Complex64], levels: u32) -> Result<Self> {
        let phases: Vec<f64> = coeffs.iter().map(|c| c.arg()).collect();
        Self::from_phases(&phases, levels)
    }

    pub fn num_elements(&self) -> usize {
        self.phase_indices.len()
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn phase_indices(&self) -> &[u32] {
        &self.phase_indices
    }

    pub fn is_off(&self) -> bool {
        self.switched_off
    }

    pub fn phase(&self, element: usize) -> f64 {
        2.0 * PI * self.phase_indices[element] as f64 / self.levels as f64
    }

    pub fn coefficient(&self, element: usize) -> Complex64 {
        if self.switched_off {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(1.0, self.phase(element))
        }
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        (0..self.num_elements()).map(|m| self.coefficient(m)).collect()
    }

    /// Copy with one element's phase index replaced.
    pub fn with_phase(&self, element: usize, index: u32) -> Self {
        let mut out = self.clone();
        out.phase_indices[element] = index % self.levels;
        out.switched_off = false;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Random,
    Sdm,
    Dft,
    /// The full universal set of `B^M` patterns.
    Exhaustive,
}

impl fmt::Display for CodebookKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodebookKind::Random => "random",
            CodebookKind::Sdm => "sdm",
            CodebookKind::Dft => "dft",
            CodebookKind::Exhaustive => "exhaustive",
        })
    }
}

impl FromStr for CodebookKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(CodebookKind::Random),
            "sdm" => Ok(CodebookKind::Sdm),
            "dft" | "orthogonal" => Ok(CodebookKind::Dft),
            "exhaustive" | "full" => Ok(CodebookKind::Exhaustive),
            other => Err(invalid(format!("unknown codebook kind '{other}'"))),
        }
    }
}

/// An ordered, immutable set of reflection patterns sharing `M` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    patterns: Vec<ReflectionPattern>,
    kind: CodebookKind,
    generation_seed: Option<u64>,
}

impl Codebook {
    pub fn new(
        patterns: Vec<ReflectionPattern>,
        kind: CodebookKind,
        generation_seed: Option<u64>,
    ) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| invalid("a codebook needs at least one pattern"))?;
        let (m, b) = (first.num_elements(), first.levels());
        if let Some(p) = patterns
            .iter()
            .find(|p| p.num_elements() != m || p.levels() != b)
        {
            return Err(invalid(format!(
                "pattern with M = {}, B = {} in a codebook of M = {m}, B = {b}",
                p.num_elements(),
                p.levels()
            )));
        }
        Ok(Self {
            patterns,
            kind,
            generation_seed,
        })
    }

    pub fn patterns(&self) -> &[ReflectionPattern] {
        &self.patterns
    }

    pub fn pattern(&self, index: usize) -> &ReflectionPattern {
        &self.patterns[index]
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.patterns[0].num_elements()
    }

    pub fn levels(&self) -> u32 {
        self.patterns[0].levels()
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn generation_seed(&self) -> Option<u64> {
        self.generation_seed
    }

    /// Gram matrix of the coefficient vectors, `G[i][j] = <c_i, c_j>`.
    pub fn gram(&self) -> Vec<Vec<Complex64>> {
        let coeffs: Vec<Vec<Complex64>> = self.patterns.iter().map(|p| p.coefficients()).collect();
        coeffs
            .iter()
            .map(|a| {
                coeffs
                    .iter()
                    .map(|b| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
                    .collect()
            })
            .collect()
    }

    /// Writes the codebook in the text exchange format (see [`Codebook::to_text`]).
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Text exchange format:
    ///
    /// ```text
    /// # rislink codebook v1
    /// M 4
    /// B 8
    /// Q 2
    /// kind random
    /// seed 42
    /// patterns
    /// 0 3 5 7
    /// 1 1 0 6
    /// ```
    ///
    /// `seed` is `none` for deterministic generators. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# rislink codebook v1\n");
        out.push_str(&format!("M {}\n", self.num_elements()));
        out.push_str(&format!("B {}\n", self.levels()));
        out.push_str(&format!("Q {}\n", self.len()));
        out.push_str(&format!("kind {}\n", self.kind));
        match self.generation_seed {
            Some(s) => out.push_str(&format!("seed {s}\n")),
            None => out.push_str("seed none\n"),
        }
        out.push_str("patterns\n");
        for p in &self.patterns {
            let row: Vec<String> = p.phase_indices().iter().map(|i| i.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |detail: String| Error::Parse {
            what: "codebook".into(),
            detail,
        };
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let (mut m, mut b, mut q, mut kind, mut seed) = (None, None, None, None, None);
        for line in lines.by_ref() {
            if line == "patterns" {
                break;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| perr(format!("malformed header line '{line}'")))?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|e| perr(format!("bad value for {key}: {e}")))
            };
            match key {
                "M" => m = Some(num(value)? as usize),
                "B" => b = Some(num(value)? as u32),
                "Q" => q = Some(num(value)? as usize),
                "kind" => kind = Some(value.parse::<CodebookKind>()?),
                "seed" => {
                    seed = Some(if value == "none" {
                        None
                    } else {
                        Some(num(value)?)
                    })
                }
                other => return Err(perr(format!("unknown header key '{other}'"))),
            }
        }
        let m = m.ok_or_else(|| perr("missing M".into()))?;
        let b = b.ok_or_else(|| perr("missing B".into()))?;
        let q = q.ok_or_else(|| perr("missing Q".into()))?;
        let kind = kind.ok_or_else(|| perr("missing kind".into()))?;
        let seed = seed.ok_or_else(|| perr("missing seed".into()))?;

        let mut patterns = Vec::with_capacity(q);
        for line in lines {
            let idx = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| perr(format!("bad phase index: {e}")))?;
            if idx.len() != m {
                return Err(perr(format!("row has {} entries, expected M = {m}", idx.len())));
            }
            patterns.push(ReflectionPattern::new(idx, b)?);
        }
        if patterns.len() != q {
            return Err(perr(format!("found {} patterns, header says Q = {q}", patterns.len())));
        }
        Codebook::new(patterns, kind, seed)
    }
}

fn validate_mbq(m: usize, b: u32, q: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("M must be >= 1"));
    }
    if b < 2 {
        return Err(invalid(format!("B must be >= 2, got {b}")));
    }
    if q == 0 {
        return Err(invalid("Q must be >= 1"));
    }
    Ok(())
}

/// `B^M`, or `None` when it does not fit in a `u64`.
pub fn universe_size(m: usize, b: u32) -> Option<u64> {
    (b as u64).checked_pow(u32::try_from(m).ok()?)
}

fn random_pattern<R: Rng>(m: usize, b: u32, rng: &mut R) -> ReflectionPattern {
    let idx = (0..m).map(|_| rng.gen_range(0..b)).collect();
    ReflectionPattern {
        phase_indices: idx,
        levels: b,
        switched_off: false,
    }
}

/// Pattern number `n` of the universal set, element 0 as the least significant digit.
fn enumerated_pattern(n: u64, m: usize, b: u32) -> ReflectionPattern {
    let mut rest = n;
    let idx = (0..m)
        .map(|_| {
            let d = (rest % b as u64) as u32;
            rest /= b as u64;
            d
        })
        .collect();
    ReflectionPattern {
        phase_indices: idx,
        levels: b,
        switched_off: false,
    }
}

/// Q patterns with i.i.d. uniform phase indices.
pub fn gen_random_codebook(m: usize, b: u32, q: usize, seed: u64) -> Result<Codebook> {
    validate_mbq(m, b, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = (0..q).map(|_| random_pattern(m, b, &mut rng)).collect();
    Codebook::new(patterns, CodebookKind::Random, Some(seed))
}

/// A single uniformly drawn pattern: the random phase-shift baseline.
pub fn random_phase_pattern(m: usize, b: u32, seed: u64) -> Result<ReflectionPattern> {
    Ok(gen_random_codebook(m, b, 1, seed)?.patterns.swap_remove(0))
}

/// Every one of the `B^M` patterns, in base-B counting order.
pub fn gen_exhaustive_codebook(m: usize, b: u32) -> Result<Codebook> {
    validate_mbq(m, b, 1)?;
    let size = universe_size(m, b)
        .filter(|&s| s <= MAX_ENUMERATED)
        .ok_or_else(|| invalid(format!("B^M too large to enumerate for M = {m}, B = {b}")))?;
    let patterns = (0..size).map(|n| enumerated_pattern(n, m, b)).collect();
    Codebook::new(patterns, CodebookKind::Exhaustive, None)
}

/// First `q` columns of the order-`m` DFT: `c_{q,m} = exp(-j 2 pi q m / M)`.
///
/// `levels` must be a multiple of `m` so every DFT phase is representable.
pub fn gen_dft_codebook(m: usize, q: usize, levels: u32) -> Result<Codebook> {
    validate_mbq(m, levels, q)?;
    if q > m {
        return Err(invalid(format!("DFT codebook needs Q <= M, got Q = {q}, M = {m}")));
    }
    if levels as usize % m != 0 {
        return Err(invalid(format!(
            "DFT codebook of order {m} needs B to be a multiple of M, got B = {levels}"
        )));
    }
    let scale = levels / m as u32;
    let patterns = (0..q)
        .map(|col| {
            let idx = (0..m)
                .map(|el| (((m - (col * el) % m) % m) as u32) * scale)
                .collect();
            ReflectionPattern::new(idx, levels)
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(patterns, CodebookKind::Dft, None)
}

/// `sum_{i<j} ||c_i - c_j||_2` over the coefficient vectors.
pub fn sum_pairwise_distance(cb: &Codebook) -> f64 {
    let coeffs: Vec<Vec<Complex64>> = cb.patterns.iter().map(|p| p.coefficients()).collect();
    let mut total = 0.0;
    for i in 0..coeffs.len() {
        for j in (i + 1)..coeffs.len() {
            total += sq_distance(&coeffs[i], &coeffs[j]).sqrt();
        }
    }
    total
}

fn sq_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Progress of the SDM coordinate ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct SdmTrace {
    /// Objective of the random distinct initialization.
    pub initial_distance: f64,
    /// Objective after each completed sweep.
    pub sweep_distances: Vec<f64>,
    /// A full sweep made no change before the sweep cap.
    pub converged: bool,
}

/// Random distinct initialization shared by the SDM generator.
pub fn sdm_initialization(m: usize, b: u32, q: usize, seed: u64) -> Result<Codebook> {
    validate_mbq(m, b, q)?;
    if q < 2 {
        return Err(invalid("SDM codebook needs Q >= 2"));
    }
    let universe = universe_size(m, b);
    if universe.is_some_and(|u| (q as u64) > u) {
        return Err(invalid(format!(
            "cannot draw Q = {q} distinct patterns from B^M = {}",
            universe.unwrap_or(u64::MAX)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = match universe {
        Some(u) if u <= MAX_ENUMERATED && (q as u64) * 2 > u => {
            let mut all: Vec<u64> = (0..u).collect();
            let (chosen, _) = all.partial_shuffle(&mut rng, q);
            chosen.iter().map(|&n| enumerated_pattern(n, m, b)).collect()
        }
        _ => {
            let mut seen = HashSet::with_capacity(q);
            let mut out = Vec::with_capacity(q);
            while out.len() < q {
                let p = random_pattern(m, b, &mut rng);
                if seen.insert(p.phase_indices.clone()) {
                    out.push(p);
                }
            }
            out
        }
    };
    Codebook::new(patterns, CodebookKind::Sdm, Some(seed))
}

/// Sum-distance maximizing codebook by greedy coordinate ascent.
pub fn gen_sdm_codebook(m: usize, b: u32, q: usize, seed: u64) -> Result<Codebook> {
    gen_sdm_codebook_traced(m, b, q, seed, DEFAULT_SDM_MAX_SWEEPS).map(|(cb, _)| cb)
}

/// SDM generation returning the ascent trace.
///
/// Starting from [`sdm_initialization`], each sweep visits every
/// (pattern, element) pair and moves that element to the level that most
/// increases the sum of pairwise distances, skipping moves that would
/// duplicate another pattern. Stops after a sweep without changes or after
/// `max_sweeps` sweeps.
pub fn gen_sdm_codebook_traced(
    m: usize,
    b: u32,
    q: usize,
    seed: u64,
    max_sweeps: usize,
) -> Result<(Codebook, SdmTrace)> {
    let init = sdm_initialization(m, b, q, seed)?;
    let table = phase_table(b);
    let mut idx: Vec<Vec<u32>> = init.patterns.iter().map(|p| p.phase_indices.clone()).collect();

    let coeff_of = |row: &[u32]| -> Vec<Complex64> { row.iter().map(|&i| table[i as usize]).collect() };
    let mut dist2 = vec![vec![0.0; q]; q];
    let refresh_row = |dist2: &mut Vec<Vec<f64>>, idx: &[Vec<u32>], r: usize| {
        let cr = coeff_of(&idx[r]);
        for p in 0..q {
            if p != r {
                let d = sq_distance(&cr, &coeff_of(&idx[p]));
                dist2[r][p] = d;
                dist2[p][r] = d;
            }
        }
    };
    for r in 0..q {
        refresh_row(&mut dist2, &idx, r);
    }
    let objective = |dist2: &Vec<Vec<f64>>| -> f64 {
        (0..q)
            .flat_map(|i| ((i + 1)..q).map(move |j| (i, j)))
            .map(|(i, j)| dist2[i][j].sqrt())
            .sum()
    };

    let mut trace = SdmTrace {
        initial_distance: objective(&dist2),
        sweep_distances: Vec::new(),
        converged: false,
    };
    let mut candidate_d2 = vec![0.0; q];
    for _ in 0..max_sweeps {
        let mut changed = false;
        for r in 0..q {
            for el in 0..m {
                let cur = idx[r][el];
                let cur_c = table[cur as usize];
                let mut best = (cur, 0.0);
                for lvl in 0..b {
                    if lvl == cur {
                        continue;
                    }
                    let new_c = table[lvl as usize];
                    let mut gain = 0.0;
                    let mut duplicate = false;
                    for p in 0..q {
                        if p == r {
                            continue;
                        }
                        let other = table[idx[p][el] as usize];
                        let rest = dist2[r][p] - (cur_c - other).norm_sqr();
                        let nd2 = (rest + (new_c - other).norm_sqr()).max(0.0);
                        if idx[p][el] == lvl && rest < 1e-9 {
                            duplicate = true;
                            break;
                        }
                        candidate_d2[p] = nd2;
                        gain += nd2.sqrt() - dist2[r][p].sqrt();
                    }
                    if !duplicate && gain > best.1 + 1e-12 {
                        best = (lvl, gain);
                    }
                }
                if best.0 != cur {
                    idx[r][el] = best.0;
                    refresh_row(&mut dist2, &idx, r);
                    changed = true;
                }
            }
        }
        trace.sweep_distances.push(objective(&dist2));
        if !changed {
            trace.converged = true;
            break;
        }
    }

    let patterns = idx
        .into_iter()
        .map(|row| ReflectionPattern::new(row, b))
        .collect::<Result<Vec<_>>>()?;
    Ok((Codebook::new(patterns, CodebookKind::Sdm, Some(seed))?, trace))
}

/// Dispatches to the generator for `kind`.
pub fn generate(kind: CodebookKind, m: usize, b: u32, q: usize, seed: u64) -> Result<Codebook> {
    match kind {
        CodebookKind::Random => gen_random_codebook(m, b, q, seed),
        CodebookKind::Sdm => gen_sdm_codebook(m, b, q, seed),
        CodebookKind::Dft => gen_dft_codebook(m, q, b),
        CodebookKind::Exhaustive => {
            let cb = gen_exhaustive_codebook(m, b)?;
            if cb.len() != q {
                return Err(invalid(format!(
                    "exhaustive codebook has Q = B^M = {}, configured Q = {q}",
                    cb.len()
                )));
            }
            Ok(cb)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_phase(0.0, 4).unwrap(), 0);
        assert_eq!(quantize_phase(PI / 4.0 + 1e-9, 4).unwrap(), 1);
        assert_eq!(quantize_phase(PI / 4.0, 4).unwrap(), 0);
        assert_eq!(quantize_phase(-PI / 4.0, 4).unwrap(), 0);
        assert_eq!(quantize_phase(PI - 1e-3, 2).unwrap(), 1);
        assert_eq!(quantize_phase(7.0 * PI / 4.0 + 1e-9, 4).unwrap(), 0);
        assert!(quantize_phase(0.3, 1).is_err());
        assert!(quantize_phase(f64::NAN, 4).is_err());
    }

    #[test]
    fn quantize_midpoint_sweep_breaks_ties_low() {
        for b in 2..=16u32 {
            let step = 2.0 * PI / b as f64;
            for k in 0..b {
                let mid = step * (k as f64 + 0.5);
                let expect = k.min((k + 1) % b);
                assert_eq!(quantize_phase(mid, b).unwrap(), expect, "B={b} k={k}");
                // Off-midpoint values go to the strictly nearer level.
                assert_eq!(quantize_phase(mid - 1e-6, b).unwrap(), k);
                assert_eq!(quantize_phase(mid + 1e-6, b).unwrap(), (k + 1) % b);
            }
        }
    }

    #[test]
    fn pattern_validation() {
        assert!(ReflectionPattern::new(vec![0, 4], 4).is_err());
        assert!(ReflectionPattern::new(vec![], 4).is_err());
        assert!(ReflectionPattern::new(vec![0], 1).is_err());
        let off = ReflectionPattern::off(3, 4).unwrap();
        assert!(off.is_off());
        assert!(off.coefficients().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn random_codebook_shape_and_determinism() {
        let cb = gen_random_codebook(1, 8, 5, 7).unwrap();
        assert_eq!(cb.len(), 5);
        assert_eq!(cb.num_elements(), 1);
        assert_eq!(cb.levels(), 8);
        assert_eq!(cb, gen_random_codebook(1, 8, 5, 7).unwrap());
        assert_ne!(
            gen_random_codebook(16, 8, 5, 7).unwrap(),
            gen_random_codebook(16, 8, 5, 8).unwrap()
        );
    }

    #[test]
    fn random_codebook_bits_uniform() {
        let cb = gen_random_codebook(4, 2, 100_000, 11).unwrap();
        for el in 0..4 {
            let ones = cb.patterns().iter().filter(|p| p.phase_indices()[el] == 1).count();
            let freq = ones as f64 / cb.len() as f64;
            assert!((freq - 0.5).abs() < 0.01, "element {el}: {freq}");
        }
    }

    #[test]
    fn random_phase_pattern_matches_single_entry_codebook() {
        let p = random_phase_pattern(16, 4, 99).unwrap();
        assert_eq!(&p, gen_random_codebook(16, 4, 1, 99).unwrap().pattern(0));
    }

    #[test]
    fn dft_order_two() {
        let cb = gen_dft_codebook(2, 2, 2).unwrap();
        let c0 = cb.pattern(0).coefficients();
        let c1 = cb.pattern(1).coefficients();
        assert!((c0[0] - 1.0).norm() < 1e-15 && (c0[1] - 1.0).norm() < 1e-15);
        assert!((c1[0] - 1.0).norm() < 1e-15 && (c1[1] + 1.0).norm() < 1e-15);
        assert!(cb.gram()[0][1].norm() < 1e-15);
    }

    #[test]
    fn dft_gram_is_scaled_identity() {
        for (m, q) in [(4, 4), (8, 3), (16, 16)] {
            let g = gen_dft_codebook(m, q, m as u32).unwrap().gram();
            for i in 0..q {
                for j in 0..q {
                    let want = if i == j { m as f64 } else { 0.0 };
                    assert!((g[i][j] - want).norm() < 1e-12, "M={m} ({i},{j}) = {}", g[i][j]);
                }
            }
        }
    }

    #[test]
    fn dft_phases_match_formula() {
        let cb = gen_dft_codebook(8, 8, 16).unwrap();
        for (q, p) in cb.patterns().iter().enumerate() {
            for (el, c) in p.coefficients().iter().enumerate() {
                let want = Complex64::from_polar(1.0, -2.0 * PI * (q * el) as f64 / 8.0);
                assert!((c - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dft_rejects_bad_parameters() {
        assert!(gen_dft_codebook(4, 5, 4).is_err());
        assert!(gen_dft_codebook(4, 2, 6).is_err());
    }

    #[test]
    fn sum_distance_examples() {
        let same = Codebook::new(
            vec![ReflectionPattern::new(vec![1, 2], 4).unwrap(); 2],
            CodebookKind::Random,
            None,
        )
        .unwrap();
        assert_eq!(sum_pairwise_distance(&same), 0.0);

        let antipodal = Codebook::new(
            vec![
                ReflectionPattern::new(vec![0], 2).unwrap(),
                ReflectionPattern::new(vec![1], 2).unwrap(),
            ],
            CodebookKind::Random,
            None,
        )
        .unwrap();
        assert!((sum_pairwise_distance(&antipodal) - 2.0).abs() < 1e-15);

        // ||[1, 1] - [1, -1]|| = ||[0, 2]|| = 2.
        let dft = gen_dft_codebook(2, 2, 2).unwrap();
        assert!((sum_pairwise_distance(&dft) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sdm_rejects_oversized_codebook() {
        assert!(gen_sdm_codebook(2, 2, 5, 1).is_err());
        assert!(gen_sdm_codebook(2, 2, 1, 1).is_err());
        assert!(gen_sdm_codebook(2, 2, 4, 1).is_ok());
    }

    #[test]
    fn sdm_single_element_recovers_all_phases() {
        for b in 2..=8u32 {
            let cb = gen_sdm_codebook(1, b, b as usize, 3).unwrap();
            let mut got: Vec<u32> = cb.patterns().iter().map(|p| p.phase_indices()[0]).collect();
            got.sort_unstable();
            assert_eq!(got, (0..b).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sdm_two_of_eight_are_antipodal() {
        for seed in 0..20 {
            let cb = gen_sdm_codebook(1, 8, 2, seed).unwrap();
            assert!((sum_pairwise_distance(&cb) - 2.0).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn sdm_trace_is_monotone_and_distinct() {
        let (cb, trace) = gen_sdm_codebook_traced(6, 4, 12, 5, 100).unwrap();
        let init = sdm_initialization(6, 4, 12, 5).unwrap();
        assert!((trace.initial_distance - sum_pairwise_distance(&init)).abs() < 1e-9);
        let mut prev = trace.initial_distance;
        for &d in &trace.sweep_distances {
            assert!(d >= prev - 1e-9);
            prev = d;
        }
        assert!((prev - sum_pairwise_distance(&cb)).abs() < 1e-9);
        let distinct: HashSet<_> = cb.patterns().iter().collect();
        assert_eq!(distinct.len(), cb.len());
    }

    #[test]
    fn text_format_round_trip() {
        let cb = gen_random_codebook(5, 8, 3, 42).unwrap();
        assert_eq!(Codebook::from_text(&cb.to_text()).unwrap(), cb);
        let dft = gen_dft_codebook(4, 4, 4).unwrap();
        assert_eq!(Codebook::from_text(&dft.to_text()).unwrap(), dft);
    }

    #[test]
    fn text_format_rejects_malformed_input() {
        let good = gen_random_codebook(3, 4, 2, 1).unwrap().to_text();
        assert!(Codebook::from_text(&good.replace("Q 2", "Q 3")).is_err());
        assert!(Codebook::from_text(&good.replace("M 3", "M 4")).is_err());
        assert!(Codebook::from_text(&good.replace("kind random", "kind fancy")).is_err());
        assert!(Codebook::from_text("M 1\nB 2\n").is_err());
    }

    #[test]
    fn exhaustive_enumerates_universe() {
        let cb = gen_exhaustive_codebook(3, 2).unwrap();
        assert_eq!(cb.len(), 8);
        let distinct: HashSet<_> = cb.patterns().iter().collect();
        assert_eq!(distinct.len(), 8);
        assert!(generate(CodebookKind::Exhaustive, 3, 2, 7, 0).is_err());
    }
}
