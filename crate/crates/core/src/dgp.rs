//! Data-generating process: draws exogenous shifters, instruments, and
//! errors, and synthesizes equilibrium datasets of arbitrary sample size.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{solve_equilibrium, ExogenousDraw, StructuralParams};

/// Column header shared by the CSV reader and writer.
pub const CSV_HEADER: &str = "log_p,log_q,log_x1d,log_x2d,log_x1s,log_x2s,z1s,z2s";

/// Configuration for one synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub params: StructuralParams,
    /// Number of markets T.
    pub sample_size: usize,
    pub seed: u64,
    /// Uniform bounds for all four shifters (levels).
    pub shifter_low: f64,
    pub shifter_high: f64,
    /// Standard deviation of the additive noise contaminating the log
    /// cost-shifter instruments.
    pub instrument_noise_sd: f64,
}

impl DgpConfig {
    /// Standard shifter bounds (1, 3) and unit instrument noise.
    pub fn new(params: StructuralParams, sample_size: usize, seed: u64) -> Self {
        Self {
            params,
            sample_size,
            seed,
            shifter_low: 1.0,
            shifter_high: 3.0,
            instrument_noise_sd: 1.0,
        }
    }

    /// Requires positive shifter bounds with `low <= high` (equality gives a
    /// degenerate point mass), a positive sample size, non-negative
    /// instrument noise, and valid structural parameters.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.shifter_low.is_finite() || !self.shifter_high.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "shifter bounds must be finite, got shifter_low = {}, shifter_high = {}",
                self.shifter_low, self.shifter_high
            )));
        }
        if self.shifter_low <= 0.0 || self.shifter_high < self.shifter_low {
            return Err(Error::InvalidConfig(format!(
                "shifter bounds must satisfy 0 < shifter_low <= shifter_high, \
                 got shifter_low = {}, shifter_high = {}",
                self.shifter_low, self.shifter_high
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::InvalidConfig(
                "sample_size must be at least 1".to_string(),
            ));
        }
        if !self.instrument_noise_sd.is_finite() || self.instrument_noise_sd < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "instrument_noise_sd must be non-negative, got {}",
                self.instrument_noise_sd
            )));
        }
        Ok(())
    }
}

/// Generating provenance carried alongside a synthesized dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub params: StructuralParams,
}

/// Column-oriented sample of log-scale equilibrium outcomes, exogenous
/// shifters, and instruments. Datasets read back from CSV carry no metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketDataset {
    pub log_p: Vec<f64>,
    pub log_q: Vec<f64>,
    pub log_x1d: Vec<f64>,
    pub log_x2d: Vec<f64>,
    pub log_x1s: Vec<f64>,
    pub log_x2s: Vec<f64>,
    pub z1s: Vec<f64>,
    pub z2s: Vec<f64>,
    pub meta: Option<DatasetMeta>,
}

impl MarketDataset {
    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_p.is_empty()
    }

    fn columns(&self) -> [(&'static str, &Vec<f64>); 8] {
        [
            ("log_p", &self.log_p),
            ("log_q", &self.log_q),
            ("log_x1d", &self.log_x1d),
            ("log_x2d", &self.log_x2d),
            ("log_x1s", &self.log_x1s),
            ("log_x2s", &self.log_x2s),
            ("z1s", &self.z1s),
            ("z2s", &self.z2s),
        ]
    }

    /// Equal column lengths and finite entries.
    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        for (name, col) in self.columns() {
            if col.len() != t {
                return Err(Error::Dimension(format!(
                    "column {name} has length {}, expected {t}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "column {name} has a non-finite entry at index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Serializes the columns at 17 significant digits, which round-trips
    /// every finite f64 exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 + self.len() * 8 * 26);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let row = [
                self.log_p[i],
                self.log_q[i],
                self.log_x1d[i],
                self.log_x2d[i],
                self.log_x1s[i],
                self.log_x2s[i],
                self.z1s[i],
                self.z2s[i],
            ];
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV schema produced by [`MarketDataset::to_csv`].
    ///
    /// Errors cite the 1-based file row (the header is row 1) and the column
    /// name of the offending cell.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse {
                row: 1,
                column: "header".to_string(),
                message: format!("expected header `{CSV_HEADER}`, got `{header}`"),
            });
        }
        let names: Vec<&str> = CSV_HEADER.split(',').collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 8];
        for (offset, line) in lines.enumerate() {
            let row = offset + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 8 {
                return Err(Error::Parse {
                    row,
                    column: "row".to_string(),
                    message: format!("expected 8 fields, got {}", cells.len()),
                });
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|e| Error::Parse {
                    row,
                    column: names[j].to_string(),
                    message: format!("cannot parse `{}` as a number: {e}", cell.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: names[j].to_string(),
                        message: format!("non-finite value `{}`", cell.trim()),
                    });
                }
                cols[j].push(v);
            }
        }
        let mut it = cols.into_iter();
        Ok(Self {
            log_p: it.next().unwrap(),
            log_q: it.next().unwrap(),
            log_x1d: it.next().unwrap(),
            log_x2d: it.next().unwrap(),
            log_x1s: it.next().unwrap(),
            log_x2s: it.next().unwrap(),
            z1s: it.next().unwrap(),
            z2s: it.next().unwrap(),
            meta: None,
        })
    }

    /// JSON object carrying both columns and metadata; serde's shortest
    /// round-trip float encoding is lossless.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            column: format!("byte column {}", e.column()),
            message: e.to_string(),
        })
    }
}

/// Draws one market's exogenous state in the fixed order
/// (x1d, x2d, x1s, x2s, z-noise 1, z-noise 2, eps_d, eps_s), so a given
/// RNG state defines the draw unambiguously.
///
/// `config` must already be validated; the distribution constructors cannot
/// fail for a valid configuration.
pub fn draw_exogenous<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> ExogenousDraw {
    let shifter = Uniform::new_inclusive(config.shifter_low, config.shifter_high)
        .expect("validated shifter bounds");
    let noise =
        Normal::new(0.0, config.instrument_noise_sd).expect("validated instrument noise sd");
    let eps = Normal::new(0.0, config.params.sigma).expect("validated sigma");

    let x1d = shifter.sample(rng);
    let x2d = shifter.sample(rng);
    let x1s = shifter.sample(rng);
    let x2s = shifter.sample(rng);
    let z1s = x1s.ln() + noise.sample(rng);
    let z2s = x2s.ln() + noise.sample(rng);
    let eps_d = eps.sample(rng);
    let eps_s = eps.sample(rng);
    ExogenousDraw {
        x1d,
        x2d,
        x1s,
        x2s,
        z1s,
        z2s,
        eps_d,
        eps_s,
    }
}

/// Generates `config.sample_size` independent markets, each solved to
/// equilibrium. A fixed `(config, seed)` yields a bit-identical dataset on
/// every run.
pub fn generate_dataset(config: &DgpConfig) -> Result<MarketDataset> {
    use rand::SeedableRng;
    config.validate()?;
    let t = config.sample_size;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut data = MarketDataset {
        log_p: Vec::with_capacity(t),
        log_q: Vec::with_capacity(t),
        log_x1d: Vec::with_capacity(t),
        log_x2d: Vec::with_capacity(t),
        log_x1s: Vec::with_capacity(t),
        log_x2s: Vec::with_capacity(t),
        z1s: Vec::with_capacity(t),
        z2s: Vec::with_capacity(t),
        meta: Some(DatasetMeta {
            seed: config.seed,
            params: config.params,
        }),
    };
    for _ in 0..t {
        let draw = draw_exogenous(config, &mut rng);
        let eq = solve_equilibrium(&config.params, &draw)?;
        data.log_p.push(eq.log_p);
        data.log_q.push(eq.log_q);
        data.log_x1d.push(draw.x1d.ln());
        data.log_x2d.push(draw.x2d.ln());
        data.log_x1s.push(draw.x1s.ln());
        data.log_x2s.push(draw.x2s.ln());
        data.z1s.push(draw.z1s);
        data.z2s.push(draw.z2s);
    }
    data.validate()?;
    Ok(data)
}
