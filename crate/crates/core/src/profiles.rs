//! Time-series ingestion and synthetic profile generation.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::WindTurbineSpec;
use crate::physics::wind_power;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "time_iso8601",
    "wind_speed_mps",
    "wind_power_norm",
    "demand_norm",
    "wind_forecast_norm",
    "wind_nowcast_norm",
];

/// Length of the forecast resolution blocks in minutes.
pub const FORECAST_BLOCK_MIN: usize = 30;

/// Standard deviation (m/s) of the per-block forecast noise, calibrated so the
/// canonical month has a forecast RMSE of 3.3 m/s.
pub const FORECAST_NOISE_STD: f64 = 3.2215;

/// Nowcast noise standard deviation as a fraction of the forecast noise.
pub const NOWCAST_NOISE_RATIO: f64 = 0.3;

pub const FORECAST_RMSE_TARGET: f64 = 3.3;

pub const DEMAND_AMPLITUDE: f64 = 0.04;
pub const DEMAND_PERIOD_MIN: f64 = 25.0;

pub const CANONICAL_SEED: u64 = 1;
pub const CANONICAL_START_EPOCH: i64 = 1_609_459_200;
pub const CANONICAL_DURATION_MIN: usize = 30 * 24 * 60;

/// A uniformly sampled set of channels sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    pub start_epoch: i64,
    pub step_s: u32,
    pub demand_multiplier: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub wind_power_norm: Vec<f64>,
    pub wind_forecast: Vec<f64>,
    pub wind_nowcast: Vec<f64>,
}

impl TimeSeriesSet {
    /// A set of `len` samples with unit demand and no wind.
    pub fn flat(start_epoch: i64, step_s: u32, len: usize) -> Self {
        TimeSeriesSet {
            start_epoch,
            step_s,
            demand_multiplier: vec![1.0; len],
            wind_speed: vec![0.0; len],
            wind_power_norm: vec![0.0; len],
            wind_forecast: vec![0.0; len],
            wind_nowcast: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.demand_multiplier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step_min(&self) -> f64 {
        f64::from(self.step_s) / 60.0
    }

    fn channels(&self) -> [&Vec<f64>; 5] {
        [
            &self.demand_multiplier,
            &self.wind_speed,
            &self.wind_power_norm,
            &self.wind_forecast,
            &self.wind_nowcast,
        ]
    }

    fn map_channels(&self, step_s: u32, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        TimeSeriesSet {
            start_epoch: self.start_epoch,
            step_s,
            demand_multiplier: f(&self.demand_multiplier),
            wind_speed: f(&self.wind_speed),
            wind_power_norm: f(&self.wind_power_norm),
            wind_forecast: f(&self.wind_forecast),
            wind_nowcast: f(&self.wind_nowcast),
        }
    }

    /// Invariant violations; `strict` additionally applies the canonical demand band.
    pub fn violations(&self, strict: bool) -> Vec<String> {
        let mut out = Vec::new();
        if self.step_s == 0 {
            out.push("step_s must be positive".to_string());
        }
        let n = self.len();
        let names = ["demand_multiplier", "wind_speed", "wind_power_norm", "wind_forecast", "wind_nowcast"];
        for (name, ch) in names.iter().zip(self.channels()) {
            if ch.len() != n {
                out.push(format!("{name}: length {} differs from grid length {n}", ch.len()));
            }
            if ch.iter().any(|x| !x.is_finite()) {
                out.push(format!("{name}: non-finite value"));
            }
        }
        for (name, ch) in names[2..].iter().zip(&self.channels()[2..]) {
            if let Some(i) = ch.iter().position(|&x| !(0.0..=1.0).contains(&x)) {
                out.push(format!("{name}[{i}] = {} outside [0, 1]", ch[i]));
            }
        }
        if let Some(i) = self.wind_speed.iter().position(|&x| x < 0.0) {
            out.push(format!("wind_speed[{i}] is negative"));
        }
        if let Some(i) = self.demand_multiplier.iter().position(|&x| x <= 0.0) {
            out.push(format!("demand_multiplier[{i}] must be positive"));
        }
        if strict {
            if let Some(i) = self
                .demand_multiplier
                .iter()
                .position(|&x| !(0.9..=1.1).contains(&x))
            {
                out.push(format!("demand_multiplier[{i}] = {} outside [0.9, 1.1]", self.demand_multiplier[i]));
            }
        }
        out
    }

    /// Resamples every channel to `step_s`: block means when coarsening, linear
    /// interpolation when refining.
    pub fn resample(&self, step_s: u32) -> Result<Self> {
        if step_s == 0 {
            return Err(Error::Domain("resample step must be positive".into()));
        }
        if step_s == self.step_s {
            return Ok(self.clone());
        }
        if step_s > self.step_s {
            if step_s % self.step_s != 0 {
                return Err(Error::Domain(format!(
                    "target step {step_s} s is not a multiple of source step {} s",
                    self.step_s
                )));
            }
            let factor = (step_s / self.step_s) as usize;
            Ok(self.map_channels(step_s, |x| block_mean(x, factor)))
        } else {
            if self.step_s % step_s != 0 {
                return Err(Error::Domain(format!(
                    "source step {} s is not a multiple of target step {step_s} s",
                    self.step_s
                )));
            }
            let factor = (self.step_s / step_s) as usize;
            Ok(self.map_channels(step_s, |x| interpolate(x, factor)))
        }
    }

    /// Copy of samples `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        let to = to.min(self.len());
        let from = from.min(to);
        let mut out = self.map_channels(self.step_s, |x| x[from..to].to_vec());
        out.start_epoch = self.start_epoch + from as i64 * i64::from(self.step_s);
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            let t = self.start_epoch + i as i64 * i64::from(self.step_s);
            let stamp = DateTime::<Utc>::from_timestamp(t, 0)
                .ok_or_else(|| Error::Domain(format!("timestamp {t} out of range")))?
                .to_rfc3339_opts(SecondsFormat::Secs, true);
            w.write_record([
                stamp,
                format!("{}", self.wind_speed[i]),
                format!("{}", self.wind_power_norm[i]),
                format!("{}", self.demand_multiplier[i]),
                format!("{}", self.wind_forecast[i]),
                format!("{}", self.wind_nowcast[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn block_mean(x: &[f64], factor: usize) -> Vec<f64> {
    x.chunks(factor).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn interpolate(x: &[f64], factor: usize) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity((x.len() - 1) * factor + 1);
    for w in x.windows(2) {
        for k in 0..factor {
            let a = k as f64 / factor as f64;
            out.push(w[0] + a * (w[1] - w[0]));
        }
    }
    out.push(x[x.len() - 1]);
    out
}

fn parse_time(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| t.and_utc().timestamp())
}

/// Reads a profile CSV. Missing optional columns take neutral defaults: unit
/// demand, zero wind, and forecast/nowcast equal to the measured power.
/// `target_step_s` resamples the result.
pub fn ingest_csv<R: Read>(reader: R, target_step_s: Option<u32>) -> Result<TimeSeriesSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let t_col = col(CSV_HEADER[0]).ok_or(Error::Parse {
        line: 1,
        msg: format!("missing column {}", CSV_HEADER[0]),
    })?;
    let cols: Vec<Option<usize>> = CSV_HEADER[1..].iter().map(|c| col(c)).collect();
    if cols.iter().all(Option::is_none) {
        return Err(Error::Parse {
            line: 1,
            msg: "no data columns".into(),
        });
    }

    let mut times = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); 5];
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).ok_or(Error::Parse {
            line,
            msg: format!("missing field {}", c + 1),
        });
        let t = parse_time(field(t_col)?).ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad timestamp {:?}", rec.get(t_col).unwrap_or("")),
        })?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Monotonicity { line });
            }
        }
        times.push(t);
        for (k, c) in cols.iter().enumerate() {
            if let Some(c) = *c {
                let raw = field(c)?;
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {raw:?} in column {}", CSV_HEADER[k + 1]),
                })?;
                data[k].push(v);
            }
        }
    }

    let n = times.len();
    let step = if n >= 2 { times[1] - times[0] } else { 60 };
    for (i, w) in times.windows(2).enumerate() {
        if w[1] - w[0] != step {
            return Err(Error::Parse {
                line: i + 3,
                msg: format!("irregular time step {} s (expected {step} s)", w[1] - w[0]),
            });
        }
    }
    let step_s = u32::try_from(step).map_err(|_| Error::Parse {
        line: 3,
        msg: format!("time step {step} s out of range"),
    })?;
    let [speed, power, demand, forecast, nowcast]: [Vec<f64>; 5] = data.try_into().expect("five channels");
    let power = if cols[1].is_some() { power } else { vec![0.0; n] };
    let forecast = if cols[3].is_some() { forecast } else { power.clone() };
    let nowcast = if cols[4].is_some() { nowcast } else { forecast.clone() };
    let set = TimeSeriesSet {
        start_epoch: times.first().copied().unwrap_or(CANONICAL_START_EPOCH),
        step_s,
        demand_multiplier: if cols[2].is_some() { demand } else { vec![1.0; n] },
        wind_speed: if cols[0].is_some() { speed } else { vec![0.0; n] },
        wind_power_norm: power,
        wind_forecast: forecast,
        wind_nowcast: nowcast,
    };
    if let Some(v) = set.violations(false).into_iter().next() {
        return Err(Error::Invalid(v));
    }
    match target_step_s {
        Some(s) => set.resample(s),
        None => Ok(set),
    }
}

/// Sinusoidal demand multiplier `1 + amplitude·sin(2πt/period)`.
pub fn synth_demand_multiplier(duration_min: f64, step_min: f64, amplitude: f64, period_min: f64) -> Result<Vec<f64>> {
    if step_min <= 0.0 || duration_min < 0.0 || period_min <= 0.0 {
        return Err(Error::Domain("duration, step and period must be positive".into()));
    }
    let n = (duration_min / step_min).round();
    if (n * step_min - duration_min).abs() > 1e-9 * duration_min.max(1.0) {
        return Err(Error::Domain(format!("step {step_min} min does not divide duration {duration_min} min")));
    }
    Ok((0..n as usize)
        .map(|i| 1.0 + amplitude * (std::f64::consts::TAU * i as f64 * step_min / period_min).sin())
        .collect())
}

/// Parameters of the synthetic wind speed process: a slow Ornstein-Uhlenbeck
/// component plus fast turbulence, both sampled exactly at 1-min resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSynthParams {
    pub mean: f64,
    pub std: f64,
    pub tau_min: f64,
    pub turbulence_std: f64,
    pub turbulence_tau_min: f64,
}

impl Default for WindSynthParams {
    fn default() -> Self {
        WindSynthParams {
            mean: 10.0,
            std: 3.5,
            tau_min: 360.0,
            turbulence_std: 1.2,
            turbulence_tau_min: 4.0,
        }
    }
}

/// Synthetic 1-min wind speed series (m/s), clamped at zero.
pub fn synth_wind_speed(len_min: usize, params: &WindSynthParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_slow = (-1.0 / params.tau_min).exp();
    let a_fast = (-1.0 / params.turbulence_tau_min).exp();
    let s_slow = params.std * (1.0 - a_slow * a_slow).sqrt();
    let s_fast = params.turbulence_std * (1.0 - a_fast * a_fast).sqrt();
    let mut slow: f64 = params.std * normal(&mut rng);
    let mut fast: f64 = params.turbulence_std * normal(&mut rng);
    let mut out = Vec::with_capacity(len_min);
    for _ in 0..len_min {
        out.push((params.mean + slow + fast).max(0.0));
        let z1 = normal(&mut rng);
        let z2 = normal(&mut rng);
        slow = a_slow * slow + s_slow * z1;
        fast = a_fast * fast + s_fast * z2;
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn block_noise(blocks: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..blocks).map(|_| normal(&mut rng)).collect()
}

/// Block-mean forecast with `noise_std` Gaussian error per 30-min block.
pub fn synth_wind_forecast_with(speed: &[f64], noise_std: f64, seed: u64) -> Vec<f64> {
    let means = block_mean(speed, FORECAST_BLOCK_MIN);
    let noise = block_noise(means.len(), seed);
    (0..speed.len())
        .map(|i| {
            let b = i / FORECAST_BLOCK_MIN;
            (means[b] + noise_std * noise[b]).max(0.0)
        })
        .collect()
}

/// Forecast wind speed (m/s) at 1-min resolution using the calibrated noise level.
pub fn synth_wind_forecast(speed: &[f64], seed: u64) -> Vec<f64> {
    synth_wind_forecast_with(speed, FORECAST_NOISE_STD, seed)
}

/// Nowcast wind speed: the forecast's noise draws scaled by `ratio`.
pub fn synth_wind_nowcast(speed: &[f64], seed: u64, ratio: f64) -> Vec<f64> {
    synth_wind_forecast_with(speed, FORECAST_NOISE_STD * ratio, seed)
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Noise standard deviation giving a forecast RMSE of `target`, by bisection.
pub fn calibrate_forecast_noise(speed: &[f64], seed: u64, target: f64) -> Result<f64> {
    let err = |s: f64| rmse(&synth_wind_forecast_with(speed, s, seed), speed) - target;
    let (mut lo, mut hi) = (0.0, 2.0 * target);
    if err(lo) > 0.0 {
        return Err(Error::Domain(format!(
            "resampling error alone ({:.3} m/s) exceeds target {target} m/s",
            err(0.0) + target
        )));
    }
    while err(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Domain("forecast calibration did not bracket the target".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if err(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normalized wind power per sample.
pub fn wind_power_channel(speed: &[f64], spec: &WindTurbineSpec) -> Result<Vec<f64>> {
    speed.iter().map(|&v| Ok(wind_power(v, spec)? / spec.capacity)).collect()
}

/// Synthetic 1-min profile set: demand multiplier, wind speed and the
/// normalized measured, forecast and nowcast power.
pub fn synthetic_profiles(len_min: usize, seed: u64) -> TimeSeriesSet {
    let wt = WindTurbineSpec::canonical("WT1");
    let speed = synth_wind_speed(len_min, &WindSynthParams::default(), seed);
    let forecast = synth_wind_forecast(&speed, seed);
    let nowcast = synth_wind_nowcast(&speed, seed, NOWCAST_NOISE_RATIO);
    TimeSeriesSet {
        start_epoch: CANONICAL_START_EPOCH,
        step_s: 60,
        demand_multiplier: synth_demand_multiplier(len_min as f64, 1.0, DEMAND_AMPLITUDE, DEMAND_PERIOD_MIN)
            .expect("unit step divides any whole duration"),
        wind_power_norm: wind_power_channel(&speed, &wt).expect("speeds are non-negative"),
        wind_forecast: wind_power_channel(&forecast, &wt).expect("speeds are non-negative"),
        wind_nowcast: wind_power_channel(&nowcast, &wt).expect("speeds are non-negative"),
        wind_speed: speed,
    }
}

/// The canonical one-month profile set.
pub fn canonical_profiles() -> TimeSeriesSet {
    synthetic_profiles(CANONICAL_DURATION_MIN, CANONICAL_SEED)
}

/// Scales the demand multiplier by `1 - fraction` on `[start_min, end_min)`.
pub fn apply_demand_dip(set: &mut TimeSeriesSet, fraction: f64, start_min: f64, end_min: f64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) || end_min < start_min {
        return Err(Error::Domain(format!(
            "demand dip {fraction}:{start_min}:{end_min} needs 0 <= fraction < 1 and start <= end"
        )));
    }
    let step = set.step_min();
    for (i, m) in set.demand_multiplier.iter_mut().enumerate() {
        let t = i as f64 * step;
        if t >= start_min && t < end_min {
            *m *= 1.0 - fraction;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demand_multiplier_shape() {
        let m = synth_demand_multiplier(50.0, 0.25, 0.04, 25.0).unwrap();
        assert_eq!(m[0], 1.0);
        let max = m.iter().cloned().fold(f64::MIN, f64::max);
        let min = m.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 1.04).abs() < 1e-12 && (min - 0.96).abs() < 1e-12);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(synth_demand_multiplier(10.0, 3.0, 0.04, 25.0).is_err());
    }

    #[test]
    fn interpolation_round_trips_on_grid_points() {
        let x = vec![1.0, 3.0, 2.0];
        let up = interpolate(&x, 4);
        assert_eq!(up.len(), 9);
        assert_eq!(up[4], 3.0);
        assert_eq!(up[2], 2.0);
    }

    #[test]
    fn forecast_is_deterministic_and_noise_free_limit() {
        let s = synth_wind_speed(600, &WindSynthParams::default(), 3);
        assert_eq!(synth_wind_forecast(&s, 11), synth_wind_forecast(&s, 11));
        let clean = synth_wind_forecast_with(&s, 0.0, 11);
        let means = block_mean(&s, FORECAST_BLOCK_MIN);
        let expect: Vec<f64> = (0..s.len()).map(|i| means[i / FORECAST_BLOCK_MIN]).collect();
        assert_eq!(clean, expect);
    }

    #[test]
    fn nowcast_error_below_forecast_error() {
        let s = synth_wind_speed(7 * 1440, &WindSynthParams::default(), 5);
        let f = rmse(&synth_wind_forecast(&s, 5), &s);
        let n = rmse(&synth_wind_nowcast(&s, 5, NOWCAST_NOISE_RATIO), &s);
        assert!(n <= f);
    }

    #[test]
    fn dip_scales_window_only() {
        let mut set = TimeSeriesSet::flat(0, 300, 10);
        apply_demand_dip(&mut set, 0.2, 10.0, 20.0).unwrap();
        assert_eq!(set.demand_multiplier[1], 1.0);
        assert!((set.demand_multiplier[2] - 0.8).abs() < 1e-15);
        assert!((set.demand_multiplier[3] - 0.8).abs() < 1e-15);
        assert_eq!(set.demand_multiplier[4], 1.0);
    }
}
