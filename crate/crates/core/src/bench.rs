//! Epoch-time sweep over synthetic graphs of increasing size, with a
//! least-squares fit of time against objects plus links.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{generate, with_random_splits, GenSpec, DBLP_SCALES};
use crate::error::{Error, Result};
use crate::hin::HinGraph;
use crate::training::{TrainConfig, Trainer};

/// `(authors, total objects, total links)` of one DBLP-like graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub authors: usize,
    pub objects: usize,
    pub links: usize,
}

impl ScaleSpec {
    /// The eight scaled DBLP graphs.
    pub fn dblp() -> Vec<ScaleSpec> {
        DBLP_SCALES
            .iter()
            .map(|&(authors, objects, links)| ScaleSpec {
                authors,
                objects,
                links,
            })
            .collect()
    }

    /// `n` graphs, each twice the size of the previous one, ending at the
    /// largest DBLP scale.
    pub fn doubling(n: usize) -> Vec<ScaleSpec> {
        let (a, o, l) = DBLP_SCALES[DBLP_SCALES.len() - 1];
        (0..n)
            .rev()
            .map(|k| {
                let f = 0.5f64.powi(k as i32);
                let r = |x: usize| (x as f64 * f).round() as usize;
                ScaleSpec {
                    authors: r(a),
                    objects: r(o),
                    links: r(l),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub scales: Vec<ScaleSpec>,
    /// Timed epochs per scale, after one untimed warmup epoch.
    pub repeats: usize,
    /// Kernel threads; 0 keeps the current pool.
    pub threads: usize,
    pub train_percent: f64,
    pub train: TrainConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scales: ScaleSpec::dblp(),
            repeats: 3,
            threads: 0,
            train_percent: 20.0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub scale: ScaleSpec,
    /// Realized object and link counts.
    pub objects: usize,
    pub links: usize,
    pub median_seconds: f64,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub epoch_seconds: Vec<f64>,
}

impl ScalePoint {
    pub fn size(&self) -> usize {
        self.objects + self.links
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept,
        r2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub points: Vec<ScalePoint>,
    pub fit: Option<LinearFit>,
    /// Largest time ratio between consecutive scales.
    pub max_ratio: f64,
    /// Largest consecutive ratio rescaled to one doubling of size:
    /// `(t₂/t₁)^(ln 2 / ln(s₂/s₁))`.
    pub max_doubling_ratio: f64,
    pub monotone: bool,
    pub threads: usize,
    pub repeats: usize,
    pub failures: Vec<String>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn panic_message(panic: Box<dyn std::any::Any + Send>) -> String {
    panic
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panic".into())
}

/// Runs `f`, turning errors and panics into a failure message.
fn guarded<T>(scale: ScaleSpec, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(format!("scale {scale:?}: {e}")),
        Err(panic) => Err(format!(
            "scale {scale:?}: aborted: {}",
            panic_message(panic)
        )),
    }
}

fn point(scale: ScaleSpec, g: &HinGraph, times: Vec<f64>) -> ScalePoint {
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / times.len() as f64;
    ScalePoint {
        scale,
        objects: g.total_objects(),
        links: g.total_links(),
        median_seconds: median(&times),
        mean_seconds: mean,
        std_seconds: var.sqrt(),
        epoch_seconds: times,
    }
}

fn sweep(cfg: &BenchConfig) -> BenchReport {
    let seed = cfg.train.seed;
    let mut failures = Vec::new();
    let mut graphs = Vec::new();
    for &scale in &cfg.scales {
        let built = guarded(scale, || {
            let spec = GenSpec::dblp_scaled(scale.authors, scale.objects, scale.links, seed)?;
            with_random_splits(&generate(&spec)?, cfg.train_percent, seed)
        });
        match built {
            Ok(g) => graphs.push((scale, g)),
            Err(f) => failures.push(f),
        }
    }
    let mut live: Vec<(ScaleSpec, &HinGraph, Trainer<'_>, Vec<f64>)> = Vec::new();
    for (scale, g) in &graphs {
        let warm = guarded(*scale, || {
            let mut t = Trainer::new(g, &cfg.train)?;
            t.step()?;
            Ok(t)
        });
        match warm {
            Ok(t) => live.push((*scale, g, t, Vec::with_capacity(cfg.repeats))),
            Err(f) => failures.push(f),
        }
    }
    // Round-robin over scales so that slow spells of the host are spread
    // across all sizes instead of landing on one.
    for _ in 0..cfg.repeats {
        let mut k = 0;
        while k < live.len() {
            let (scale, _, trainer, times) = &mut live[k];
            let timed = guarded(*scale, || {
                let start = Instant::now();
                trainer.step()?;
                Ok(start.elapsed().as_secs_f64())
            });
            match timed {
                Ok(t) => {
                    times.push(t);
                    k += 1;
                }
                Err(f) => {
                    failures.push(f);
                    live.remove(k);
                }
            }
        }
    }
    let points: Vec<ScalePoint> = live
        .into_iter()
        .map(|(scale, g, _, times)| {
            let p = point(scale, g, times);
            log::info!("scale {:?}: median epoch {:.4}s", scale, p.median_seconds);
            p
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| p.size() as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.median_seconds).collect();
    let fit = (points.len() >= 2).then(|| linear_fit(&x, &y));
    let mut max_ratio: f64 = 0.0;
    let mut max_doubling_ratio: f64 = 0.0;
    let mut monotone = true;
    for w in points.windows(2) {
        let ratio = w[1].median_seconds / w[0].median_seconds;
        let growth = w[1].size() as f64 / w[0].size() as f64;
        monotone &= ratio >= 1.0;
        max_ratio = max_ratio.max(ratio);
        if growth > 1.0 {
            max_doubling_ratio = max_doubling_ratio.max(ratio.powf(2f64.ln() / growth.ln()));
        }
    }
    BenchReport {
        points,
        fit,
        max_ratio,
        max_doubling_ratio,
        monotone,
        threads: current_threads(),
        repeats: cfg.repeats,
        failures,
    }
}

#[cfg(feature = "parallel")]
fn current_threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn current_threads() -> usize {
    1
}

/// Times training epochs (forward, backward, update) per scale. All graphs
/// are built and warmed up first, then the timed epochs visit the scales
/// in turn. Graph generation is not timed. A scale that fails is recorded
/// in `failures` and the sweep continues without it.
pub fn run_scaling(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.scales.len() < 5 {
        return Err(Error::Config(format!(
            "need at least 5 scales, got {}",
            cfg.scales.len()
        )));
    }
    if cfg.repeats < 3 {
        return Err(Error::Config(format!(
            "need at least 3 repeats, got {}",
            cfg.repeats
        )));
    }
    let sizes: Vec<usize> = cfg.scales.iter().map(|s| s.objects + s.links).collect();
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("scales must be strictly increasing".into()));
    }
    cfg.train.check()?;
    #[cfg(feature = "parallel")]
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| sweep(cfg)));
    }
    Ok(sweep(cfg))
}

impl BenchReport {
    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>8} {:>9} {:>9} {:>10} {:>10} {:>10}\n",
            "authors", "objects", "links", "median_s", "mean_s", "std_s"
        );
        for p in &self.points {
            out.push_str(&format!(
                "{:>8} {:>9} {:>9} {:>10.4} {:>10.4} {:>10.4}\n",
                p.scale.authors,
                p.objects,
                p.links,
                p.median_seconds,
                p.mean_seconds,
                p.std_seconds
            ));
        }
        if let Some(f) = self.fit {
            out.push_str(&format!(
                "fit: slope {:.3e} s/unit, intercept {:.4} s, R^2 {:.4}\n",
                f.slope, f.intercept, f.r2
            ));
        }
        out.push_str(&format!(
            "max ratio {:.3}, per doubling {:.3}, monotone {}, threads {}\n",
            self.max_ratio, self.max_doubling_ratio, self.monotone, self.threads
        ));
        for f in &self.failures {
            out.push_str(&format!("FAILED {f}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("authors,objects,links,median_seconds,mean_seconds,std_seconds\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.scale.authors,
                p.objects,
                p.links,
                p.median_seconds,
                p.mean_seconds,
                p.std_seconds
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_fits_perfectly() {
        let f = linear_fit(&[1.0, 2.0, 4.0, 8.0], &[3.0, 5.0, 9.0, 17.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn doubling_sweep_spans_requested_range() {
        let s = ScaleSpec::doubling(6);
        assert_eq!(s.len(), 6);
        assert_eq!(s[5], ScaleSpec::dblp()[7]);
        let span = (s[5].objects + s[5].links) as f64 / (s[0].objects + s[0].links) as f64;
        assert!((span - 32.0).abs() < 0.1);
    }

    #[test]
    fn config_is_checked() {
        let c = BenchConfig {
            repeats: 2,
            ..BenchConfig::default()
        };
        assert!(run_scaling(&c).is_err());
        let mut c = BenchConfig::default();
        c.scales.truncate(4);
        assert!(run_scaling(&c).is_err());
    }
}
