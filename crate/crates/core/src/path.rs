//! Sampled paths, model parameters and the Brownian simulators.
//!
//! Every simulated path is a pure function of `(seed, path_index)`: the
//! generator for path `i` is ChaCha8 keyed with `seed` (expanded through
//! `SeedableRng::seed_from_u64`) and positioned on stream `i`. Paths can
//! therefore be produced in any order, on any number of threads.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, param, Error, Result};

/// Drift, volatility, truncation level and horizon of one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub c: f64,
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma: f64, c: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            c,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit-volatility parameters, the setting of `W_t = B_t + mu t`.
    pub fn bm(mu: f64, c: f64, horizon: f64) -> Result<Self> {
        Self::new(mu, 1.0, c, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(param(format!("drift must be finite, got {}", self.mu)));
        }
        check_positive("sigma", self.sigma)?;
        check_positive("c", self.c)?;
        check_positive("horizon", self.horizon)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.mu, self.sigma, self.c, horizon)
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.mu, self.sigma, c, self.horizon)
    }
}

/// Grid resolution, Monte Carlo sample size and master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_steps: usize, n_paths: usize, seed: u64) -> Result<Self> {
        let s = Self {
            n_steps,
            n_paths,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(param("n_steps must be >= 1"));
        }
        if self.n_paths == 0 {
            return Err(param("n_paths must be >= 1"));
        }
        Ok(())
    }
}

/// Ordered `(time, value)` samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Path {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Path {
    /// Builds a path, checking equal lengths, finite entries and
    /// non-decreasing times. The empty path is allowed.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(param(format!(
                "times and values differ in length ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(param(format!("value at index {i} is not finite")));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(param(format!("time at index {i} is not finite")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] < w[0]) {
            return Err(param(format!("times decrease at index {}", i + 1)));
        }
        Ok(Self { times, values })
    }

    /// Values on the integer grid `0, 1, ..., n-1`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64).collect();
        Self::new(times, values)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` to every value, keeping the time grid.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Writes the path as `time,value` CSV with LF line endings.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::Io {
            context: "writing path csv".into(),
            source: e.into(),
        };
        w.write_record(["time", "value"]).map_err(io)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            // Display for f64 never switches to exponent notation.
            w.write_record([t.to_string(), v.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            context: "writing path csv".into(),
            source: e,
        })
    }

    /// Parses `time,value` CSV. Row numbers in errors are 1-based file lines.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = r.headers().map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "value" {
            return Err(Error::Csv {
                row: 1,
                message: format!(
                    "expected header `time,value`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let row = k + 2;
            let rec = rec.map_err(|e| Error::Csv {
                row,
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(Error::Csv {
                    row,
                    message: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                match s.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(Error::Csv {
                        row,
                        message: format!("invalid {what} `{s}`"),
                    }),
                }
            };
            let t = parse(&rec[0], "time")?;
            let v = parse(&rec[1], "value")?;
            if let Some(&prev) = times.last() {
                if t < prev {
                    return Err(Error::Csv {
                        row,
                        message: format!("time {t} precedes previous time {prev}"),
                    });
                }
            }
            times.push(t);
            values.push(v);
        }
        Self::new(times, values)
    }
}

/// The generator for path `path_index` under master `seed`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Exact Gaussian increments of a standard Brownian motion on a fixed step.
pub struct BrownianIncrements {
    rng: ChaCha8Rng,
    sd: f64,
}

impl BrownianIncrements {
    pub fn new(dt: f64, seed: u64, path_index: u64) -> Self {
        Self {
            rng: path_rng(seed, path_index),
            sd: dt.sqrt(),
        }
    }

    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sd * z
    }
}

/// Uniform grid `t_i = T i / n`, `i = 0..=n`.
pub fn uniform_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    let n = n_steps as f64;
    (0..=n_steps).map(|i| horizon * (i as f64) / n).collect()
}

/// Standard Brownian motion `B` on the uniform grid, before drift is added.
fn brownian_values(horizon: f64, n_steps: usize, seed: u64, path_index: u64) -> Vec<f64> {
    let mut inc = BrownianIncrements::new(horizon / n_steps as f64, seed, path_index);
    let mut b = 0.0;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(0.0);
    for _ in 0..n_steps {
        b += inc.next_increment();
        out.push(b);
    }
    out
}

/// `W_t = B_t + mu t` sampled on `n_steps + 1` uniform points of `[0, T]`.
pub fn generate_bm_path(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    params.validate()?;
    if n_steps == 0 {
        return Err(param("n_steps must be >= 1"));
    }
    let times = uniform_grid(params.horizon, n_steps);
    let values = brownian_values(params.horizon, n_steps, seed, path_index)
        .into_iter()
        .zip(&times)
        .map(|(b, &t)| b + params.mu * t)
        .collect();
    Ok(Path { times, values })
}

/// Price path `P_t = exp(mu t + sigma B_t)` driven by the same Gaussian
/// stream as [`generate_bm_path`].
pub fn generate_gbm_price_path(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    params.validate()?;
    if n_steps == 0 {
        return Err(param("n_steps must be >= 1"));
    }
    let times = uniform_grid(params.horizon, n_steps);
    let values = brownian_values(params.horizon, n_steps, seed, path_index)
        .into_iter()
        .zip(&times)
        .map(|(b, &t)| (params.mu * t + params.sigma * b).exp())
        .collect();
    Ok(Path { times, values })
}

pub fn negate_path(p: &Path) -> Path {
    Path {
        times: p.times.clone(),
        values: p.values.iter().map(|v| -v).collect(),
    }
}

/// Samples with `a <= t <= b`. An inverted interval gives the empty path.
pub fn slice_path(p: &Path, a: f64, b: f64) -> Path {
    if a > b {
        return Path::empty();
    }
    let lo = p.times.partition_point(|&t| t < a);
    let hi = p.times.partition_point(|&t| t <= b);
    if lo >= hi {
        return Path::empty();
    }
    Path {
        times: p.times[lo..hi].to_vec(),
        values: p.values[lo..hi].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::compensated_sum;

    fn params(mu: f64) -> ModelParams {
        ModelParams::bm(mu, 1.0, 1.0).unwrap()
    }

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let p = params(0.0);
        let a = generate_bm_path(&p, 100, 7, 3).unwrap();
        let b = generate_bm_path(&p, 100, 7, 3).unwrap();
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.len(), 101);
        assert_eq!(a, b);
        let c = generate_bm_path(&p, 100, 7, 4).unwrap();
        assert_ne!(a.values(), c.values());
        let d = generate_bm_path(&p, 100, 8, 3).unwrap();
        assert_ne!(a.values(), d.values());
    }

    #[test]
    fn grid_is_uniform_and_ends_at_horizon() {
        let p = ModelParams::bm(0.3, 1.0, 2.5).unwrap();
        let path = generate_bm_path(&p, 10, 1, 0).unwrap();
        assert_eq!(*path.times().last().unwrap(), 2.5);
        for w in path.times().windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn gbm_log_matches_bm() {
        let p = ModelParams::new(0.2, 0.7, 1.0, 1.0).unwrap();
        let price = generate_gbm_price_path(&p, 500, 11, 2).unwrap();
        assert_eq!(price.values()[0], 1.0);
        let unit = ModelParams::bm(0.0, 1.0, 1.0).unwrap();
        let b = generate_bm_path(&unit, 500, 11, 2).unwrap();
        for ((&t, &pv), &bv) in price.times().iter().zip(price.values()).zip(b.values()) {
            assert!((pv.ln() - (0.2 * t + 0.7 * bv)).abs() < 1e-12);
        }
    }

    #[test]
    fn increments_have_expected_moments() {
        // 10^6 increments: 1000 paths of 1000 steps.
        let mu = 0.8;
        let p = ModelParams::bm(mu, 1.0, 1.0).unwrap();
        let dt = 1e-3;
        let mut incs = Vec::with_capacity(1_000_000);
        for i in 0..1000 {
            let path = generate_bm_path(&p, 1000, 5, i).unwrap();
            incs.extend(path.values().windows(2).map(|w| w[1] - w[0]));
        }
        let n = incs.len() as f64;
        let mean = compensated_sum(&incs) / n;
        let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - mu * dt).abs() < 5.0 * se, "mean {mean}");
        // variance of the sample variance is about 2 dt^2 / n
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn negate_twice_is_identity() {
        let p = Path::from_values(vec![0.0, 3.0, 1.0, 4.0]).unwrap();
        let n = negate_path(&p);
        assert_eq!(n.values(), &[-0.0, -3.0, -1.0, -4.0]);
        assert_eq!(negate_path(&n), p);
    }

    #[test]
    fn slicing() {
        let p = Path::from_values(vec![0.0, 3.0, 1.0, 4.0]).unwrap();
        assert_eq!(slice_path(&p, 0.0, 3.0), p);
        let one = slice_path(&p, 2.0, 2.0);
        assert_eq!(one.values(), &[1.0]);
        assert!(slice_path(&p, 2.0, 1.0).is_empty());
        assert_eq!(slice_path(&p, 0.5, 2.5).values(), &[3.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Path::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(Path::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Path::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(ModelParams::bm(0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, -1.0, 1.0, 1.0).is_err());
        assert!(generate_bm_path(&params(0.0), 0, 0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = Path::new(vec![0.0, 0.5, 1.0], vec![0.0, -1e-7, 12345.678]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "time,value\n0,0\n0.5,-0.0000001\n1,12345.678\n");
        assert_eq!(Path::read_csv(&buf[..]).unwrap(), p);
    }

    #[test]
    fn csv_errors_carry_row() {
        let bad = "time,value\n0,1\n1,abc\n";
        match Path::read_csv(bad.as_bytes()) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let header = "t,v\n0,1\n";
        assert!(matches!(
            Path::read_csv(header.as_bytes()),
            Err(Error::Csv { row: 1, .. })
        ));
    }
}
