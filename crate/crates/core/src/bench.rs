//! Runtime scaling of the solver over a ladder of problem sizes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assignment::project_to_universe;
use crate::baselines::{greedy_init, random_init};
use crate::config::BenchConfig;
use crate::error::{Error, Result};
use crate::kernels::{build_adjacency, build_similarity, KernelConfig};
use crate::solver::{build_wbar_apply, hippi_solve, power_step, SolverConfig, UniverseSizeRule};
use crate::synthgen::{generate, GenConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub k: usize,
    pub d: usize,
    /// Median time of one projection plus power step, from a greedy start.
    pub per_iteration_seconds: f64,
    /// Complete solve from a random start.
    pub solve_iterations: Option<usize>,
    pub solve_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Slope of log(time per iteration) against log(m).
    pub exponent: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("a slope needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all sizes are equal"));
    }
    Ok(sxy / sxx)
}

/// Benchmarks one size: `m / points_per_object` objects of
/// `points_per_object` points each.
pub fn bench_size(
    m: usize,
    cfg: &BenchConfig,
    kernel: &KernelConfig,
    solver: &SolverConfig,
    seed: u64,
) -> Result<BenchRow> {
    let k = m / cfg.points_per_object;
    let p = generate(&GenConfig {
        k,
        d_true: cfg.points_per_object,
        coord_noise_sigma: 0.01,
        feature_noise_sigma: 0.1,
        seed,
        ..Default::default()
    })?;
    let w = build_similarity(&p, kernel)?;
    let a = build_adjacency(&p, kernel)?;
    let op = build_wbar_apply(&w, &a)?;
    let u0 = greedy_init(&w, cfg.d)?;
    let (_, mut v) = power_step(&u0, &op)?;
    let mut times = Vec::with_capacity(cfg.timed_iterations);
    for _ in 0..cfg.timed_iterations {
        let start = Instant::now();
        let u = project_to_universe(&v, u0.index(), solver.projection)?;
        v = power_step(&u, &op)?.1;
        times.push(start.elapsed().as_secs_f64());
    }
    let (solve_iterations, solve_seconds) = if cfg.full_solve {
        let solver = SolverConfig {
            universe_size: UniverseSizeRule::Explicit(cfg.d),
            ..solver.clone()
        };
        let start = Instant::now();
        let u0 = random_init(w.index(), cfg.d, seed)?;
        let (_, trace) = hippi_solve(&w, &a, &u0, &solver)?;
        (Some(trace.iterations), Some(start.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    let row = BenchRow {
        m: p.total_points(),
        k,
        d: cfg.d,
        per_iteration_seconds: median(times),
        solve_iterations,
        solve_seconds,
    };
    log::info!(
        "m = {}: {:.4} s per iteration",
        row.m,
        row.per_iteration_seconds
    );
    Ok(row)
}

pub fn run_bench(
    cfg: &BenchConfig,
    kernel: &KernelConfig,
    solver: &SolverConfig,
    seed: u64,
) -> Result<BenchReport> {
    cfg.validate()?;
    let rows = cfg
        .sizes
        .iter()
        .map(|&m| bench_size(m, cfg, kernel, solver, seed))
        .collect::<Result<Vec<_>>>()?;
    let exponent = if rows.len() >= 2 {
        let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let ts: Vec<f64> = rows.iter().map(|r| r.per_iteration_seconds).collect();
        loglog_slope(&ms, &ts)?
    } else {
        f64::NAN
    };
    Ok(BenchReport { rows, exponent })
}

pub fn bench_to_csv(report: &BenchReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.2)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.2).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_ladder_has_one_row_per_size() {
        let cfg = BenchConfig {
            sizes: vec![60, 120],
            d: 30,
            points_per_object: 20,
            timed_iterations: 2,
            full_solve: true,
        };
        let r = run_bench(&cfg, &KernelConfig::default(), &SolverConfig::default(), 1).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[1].k, 6);
        assert!(r.rows.iter().all(|row| row.solve_iterations.is_some()));
        assert!(r.exponent.is_finite());
        let csv = bench_to_csv(&r).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
}
