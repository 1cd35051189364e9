//! Relay broadcast scenarios: channel generation and the JSON file format.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::ComplexVec;

/// Squared channel norms `||h_(i,k)||^2` of the two-pair reference setup
/// used for the published rate-region plots. Only the norms are known.
pub const REFERENCE_NORMS_SQ: [[f64; 2]; 2] = [[3.28, 2.9], [1.77, 2.2]];

const NOTE_ANTENNA_MISMATCH: &str = "n_antennas differs from n_pairs";
const NOTE_SYNTHETIC_DIRECTIONS: &str =
    "channel norms follow the two-pair reference setup; directions are synthetic";

/// Channels, noise power and relay power budget for one broadcast phase.
///
/// Pairs are indexed `0..n_pairs` and the two nodes of a pair are `0` and `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    n_pairs: usize,
    n_antennas: usize,
    sigma2: f64,
    power_budget: f64,
    seed: Option<u64>,
    channels: Vec<[ComplexVec; 2]>,
    notes: Vec<String>,
}

impl Scenario {
    pub fn new(
        n_antennas: usize,
        channels: Vec<[ComplexVec; 2]>,
        sigma2: f64,
        power_budget: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        let n_pairs = channels.len();
        if n_pairs == 0 {
            return invalid("a scenario needs at least one pair");
        }
        if n_antennas == 0 {
            return invalid("n_antennas must be positive");
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return invalid(format!("sigma2 must be positive and finite, got {sigma2}"));
        }
        if !(power_budget > 0.0 && power_budget.is_finite()) {
            return invalid(format!("power_budget must be positive and finite, got {power_budget}"));
        }
        for (i, pair) in channels.iter().enumerate() {
            for (k, h) in pair.iter().enumerate() {
                if h.len() != n_antennas {
                    return invalid(format!(
                        "channel ({i}, {k}) has length {}, expected {n_antennas}",
                        h.len()
                    ));
                }
                if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return invalid(format!("channel ({i}, {k}) has non-finite entries"));
                }
            }
        }
        let mut notes = Vec::new();
        if n_antennas != n_pairs {
            notes.push(NOTE_ANTENNA_MISMATCH.to_string());
        }
        Ok(Scenario {
            n_pairs,
            n_antennas,
            sigma2,
            power_budget,
            seed,
            channels,
            notes,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Free-form metadata flags carried through the file format.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Appends a free-form note, e.g. the command that produced the file.
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// `h_(pair, node)`.
    pub fn channel(&self, pair: usize, node: usize) -> &ComplexVec {
        &self.channels[pair][node]
    }

    pub fn channels(&self) -> &[[ComplexVec; 2]] {
        &self.channels
    }

    /// `||h_(i,k)||^2` for every node.
    pub fn channel_norms_sq(&self) -> Vec<[f64; 2]> {
        self.channels
            .iter()
            .map(|p| [p[0].norm_squared(), p[1].norm_squared()])
            .collect()
    }

    /// Same channels with a different noise power and budget.
    pub fn with_power(&self, sigma2: f64, power_budget: f64) -> Result<Self> {
        let mut s = Scenario::new(
            self.n_antennas,
            self.channels.clone(),
            sigma2,
            power_budget,
            self.seed,
        )?;
        s.notes = self.notes.clone();
        Ok(s)
    }

    /// `sigma2 = 1` and `P = 10^(snr_db / 10)`.
    pub fn at_snr_db(&self, snr_db: f64) -> Result<Self> {
        self.with_power(1.0, snr_from_db(snr_db))
    }

    /// Rescale every channel to the given squared norms, keeping directions.
    pub fn with_channel_norms(&self, norms_sq: &[[f64; 2]]) -> Result<Self> {
        if norms_sq.len() != self.n_pairs {
            return invalid(format!(
                "expected {} norm pairs, got {}",
                self.n_pairs,
                norms_sq.len()
            ));
        }
        let mut channels = self.channels.clone();
        for (pair, target) in channels.iter_mut().zip(norms_sq) {
            for (h, &t) in pair.iter_mut().zip(target) {
                let n = h.norm();
                if n == 0.0 || !(t > 0.0) {
                    return invalid("cannot rescale a zero channel or to a non-positive norm");
                }
                *h *= Complex64::from(t.sqrt() / n);
            }
        }
        let mut s = Scenario::new(
            self.n_antennas,
            channels,
            self.sigma2,
            self.power_budget,
            self.seed,
        )?;
        s.notes = self.notes.clone();
        Ok(s)
    }

    /// Two pairs, two antennas, random directions from `seed` and the squared
    /// norms of [`REFERENCE_NORMS_SQ`].
    pub fn reference_two_pair(seed: u64, sigma2: f64, power_budget: f64) -> Result<Self> {
        let base = generate_channels(2, 2, sigma2, power_budget, seed)?;
        let mut s = base.with_channel_norms(&REFERENCE_NORMS_SQ)?;
        s.notes.push(NOTE_SYNTHETIC_DIRECTIONS.to_string());
        Ok(s)
    }
}

pub fn snr_from_db(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Seeded uniform/Gaussian source on a ChaCha8 stream.
///
/// Each independent work item owns a stream, selected with
/// [`ChaCha8Rng::set_stream`], so results never depend on scheduling.
pub struct GaussianSource {
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianSource { rng }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Circular complex Gaussian with unit variance (each part variance 1/2),
    /// by Box-Muller.
    pub fn complex_normal(&mut self) -> Complex64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    }

    pub fn complex_normal_vec(&mut self, len: usize) -> ComplexVec {
        ComplexVec::from_fn(len, |_, _| self.complex_normal())
    }

    /// Uniform on the complex unit sphere.
    pub fn unit_vector(&mut self, len: usize) -> ComplexVec {
        loop {
            let v = self.complex_normal_vec(len);
            let n = v.norm();
            if n > 1e-300 {
                return v / Complex64::from(n);
            }
        }
    }
}

/// i.i.d. unit-variance circular Gaussian channels. Channel `h_(i,k)` is drawn
/// from stream `2i + k`, so the result is a pure function of the arguments.
pub fn generate_channels(
    n_pairs: usize,
    n_antennas: usize,
    sigma2: f64,
    power_budget: f64,
    seed: u64,
) -> Result<Scenario> {
    generate_channels_with(Exec::default(), n_pairs, n_antennas, sigma2, power_budget, seed)
}

pub fn generate_channels_with(
    exec: Exec,
    n_pairs: usize,
    n_antennas: usize,
    sigma2: f64,
    power_budget: f64,
    seed: u64,
) -> Result<Scenario> {
    if n_pairs == 0 || n_antennas == 0 {
        return invalid(format!(
            "dimensions must be positive (n_pairs = {n_pairs}, n_antennas = {n_antennas})"
        ));
    }
    let channels = exec.map(n_pairs, |i| {
        let draw = |k: u64| GaussianSource::new(seed, 2 * i as u64 + k).complex_normal_vec(n_antennas);
        [draw(0), draw(1)]
    });
    Scenario::new(n_antennas, channels, sigma2, power_budget, Some(seed))
}

// ---- file format ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    n_pairs: usize,
    n_antennas: usize,
    sigma2: f64,
    power_budget: f64,
    seed: Option<u64>,
    channels: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    notes: Vec<String>,
}

fn fmt_f64(x: f64) -> String {
    // 17 significant digits round-trip every finite double.
    format!("{x:.16e}")
}

impl Scenario {
    /// Serialize to the scenario JSON format.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"n_pairs\": {},", self.n_pairs);
        let _ = writeln!(out, "  \"n_antennas\": {},", self.n_antennas);
        let _ = writeln!(out, "  \"sigma2\": {},", fmt_f64(self.sigma2));
        let _ = writeln!(out, "  \"power_budget\": {},", fmt_f64(self.power_budget));
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "  \"seed\": {s},");
            }
            None => out.push_str("  \"seed\": null,\n"),
        }
        if !self.notes.is_empty() {
            let notes: Vec<String> = self
                .notes
                .iter()
                .map(|n| serde_json::to_string(n).expect("string serialization"))
                .collect();
            let _ = writeln!(out, "  \"notes\": [{}],", notes.join(", "));
        }
        out.push_str("  \"channels\": [\n");
        for (i, pair) in self.channels.iter().enumerate() {
            out.push_str("    [\n");
            for (k, h) in pair.iter().enumerate() {
                let entries: Vec<String> = h
                    .iter()
                    .map(|z| format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im)))
                    .collect();
                let _ = write!(out, "      [{}]", entries.join(", "));
                out.push_str(if k == 0 { ",\n" } else { "\n" });
            }
            out.push_str("    ]");
            out.push_str(if i + 1 < self.channels.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        if raw.channels.len() != raw.n_pairs {
            return Err(Error::Parse(format!(
                "scenario: field `channels` has {} pairs but n_pairs = {}",
                raw.channels.len(),
                raw.n_pairs
            )));
        }
        let mut channels = Vec::with_capacity(raw.n_pairs);
        for (i, pair) in raw.channels.iter().enumerate() {
            if pair.len() != 2 {
                return Err(Error::Parse(format!(
                    "scenario: field `channels[{i}]` must hold exactly 2 node channels, found {}",
                    pair.len()
                )));
            }
            let h = |k: usize| -> ComplexVec {
                ComplexVec::from_iterator(
                    pair[k].len(),
                    pair[k].iter().map(|&[re, im]| Complex64::new(re, im)),
                )
            };
            channels.push([h(0), h(1)]);
        }
        let mut s = Scenario::new(raw.n_antennas, channels, raw.sigma2, raw.power_budget, raw.seed)
            .map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        for note in raw.notes {
            if !s.notes.contains(&note) {
                s.notes.push(note);
            }
        }
        Ok(s)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }
}
