//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use hippi::assignment::{
    assignment_score, lap_auction, lap_exact, project_to_universe, AuctionConfig, ScoreBlock,
};
use hippi::baselines::{pairwise_lap_matchings, random_init, spectral_sync};
use hippi::bench::run_bench;
use hippi::config::{BenchConfig, InitMethod, RunConfig};
use hippi::evaluation::{cycle_error, evaluate_assignment, verify_cycle_consistency};
use hippi::kernels::{build_adjacency, build_similarity, psd_report, KernelConfig};
use hippi::pipeline::{cmd_generate, cmd_solve, ASSIGNMENT_FILE, TRACE_FILE};
use hippi::solver::{
    build_wbar_apply, hippi_solve, objective, DenseOperator, SolverConfig, SolverTrace,
    UniverseSizeRule, WbarOperator,
};
use hippi::synthgen::{generate, GenConfig};
use hippi::{BlockIndex, Object, ProblemInstance, ProjectionMethod, UniverseAssignment};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Noisy instances with k <= 5 and at most 10 points per object.
fn small_suite() -> Vec<ProblemInstance> {
    (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let cfg = GenConfig {
                k: rng.random_range(2..=5),
                d_true: rng.random_range(3..=8),
                visibility: 0.8,
                coord_noise_sigma: 0.02,
                feature_dim: 4,
                feature_noise_sigma: 0.5,
                outlier_fraction: 0.2,
                seed,
                ..Default::default()
            };
            generate(&cfg).expect("suite instance")
        })
        .collect()
}

/// Solves the small suite once with the plain kernel and once with the
/// self-weighted one (200 runs).
fn solve_small_suite() -> Vec<(ProblemInstance, UniverseAssignment, SolverTrace, bool)> {
    let suite = small_suite();
    [KernelConfig::default(), geometric_kernel()]
        .iter()
        .flat_map(|kernel| {
            suite
                .iter()
                .cloned()
                .enumerate()
                .map(move |(s, p)| (kernel.clone(), s, p))
        })
        .map(|(kernel, s, p)| {
            let w = build_similarity(&p, &kernel).unwrap();
            let a = build_adjacency(&p, &kernel).unwrap();
            let psd = psd_report(&a).is_psd();
            let d =
                hippi::solver::universe_size(&p.sizes(), UniverseSizeRule::TwiceAverage).unwrap();
            let u0 = random_init(w.index(), d, s as u64).unwrap();
            let (u, trace) = hippi_solve(&w, &a, &u0, &SolverConfig::default()).unwrap();
            (p, u, trace, psd)
        })
        .collect()
}

fn criterion_1(
    runs: &[(ProblemInstance, UniverseAssignment, SolverTrace, bool)],
    secs: f64,
) -> Outcome {
    assert_eq!(runs.len(), 200);
    let m_max = runs
        .iter()
        .map(|r| r.0.block_index().max_size())
        .max()
        .unwrap();
    let k_max = runs.iter().map(|r| r.0.num_objects()).max().unwrap();
    let all_psd = runs.iter().all(|r| r.3);
    let worst = runs
        .iter()
        .map(|r| r.2.worst_relative_decrease())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-9 && all_psd && m_max <= 10 && k_max <= 5 && secs < 30.0,
        format!("100 instances x 2 kernels (k<={k_max}, m_i<={m_max}, psd={all_psd}), worst relative decrease {worst:.2e}, {secs:.2}s"),
    )
}

fn criterion_2(runs: &[(ProblemInstance, UniverseAssignment, SolverTrace, bool)]) -> Outcome {
    let stalled = runs
        .iter()
        .filter(|r| {
            let t = &r.2;
            t.converged && t.iterations < 200
        })
        .count();
    let longest = runs.iter().map(|r| r.2.iterations).max().unwrap();
    outcome(
        stalled == runs.len(),
        format!(
            "{stalled}/{} runs stalled before 200 iterations, longest {longest}",
            runs.len()
        ),
    )
}

/// All injections of `rows` rows into `cols` columns.
fn injections(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rows: usize, cols: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == rows {
            out.push(cur.clone());
            return;
        }
        for c in 0..cols {
            if !cur.contains(&c) {
                cur.push(c);
                rec(rows, cols, cur, out);
                cur.pop();
            }
        }
    }
    rec(rows, cols, &mut cur, &mut out);
    out
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut exact_ok = 0;
    let mut auction_ok = 0;
    for _ in 0..200 {
        let k = rng.random_range(1..=3);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=5)).collect();
        let index = BlockIndex::from_sizes(&sizes).unwrap();
        let d = rng.random_range(*sizes.iter().max().unwrap()..=7);
        // dyadic scores keep every sum exact
        let v = DMatrix::from_fn(index.total(), d, |_, _| {
            rng.random_range(-64..=64) as f64 / 16.0
        });
        let u = project_to_universe(&v, &index, ProjectionMethod::Exact).unwrap();
        let mut brute = 0.0;
        for i in 0..k {
            let r = index.range(i);
            let best = injections(r.len(), d)
                .iter()
                .map(|inj| {
                    inj.iter()
                        .enumerate()
                        .map(|(p, &c)| v[(r.start + p, c)])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            brute += best;
        }
        if assignment_score(&v, &u) == brute {
            exact_ok += 1;
        }

        // integer block: ties are at least 1 apart, eps_min < 1 / rows
        let rows = rng.random_range(1..=5);
        let cols = rng.random_range(rows..=7);
        let scores: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(0..=20) as f64)
            .collect();
        let block = ScoreBlock::new(rows, cols, scores).unwrap();
        let cfg = AuctionConfig::for_block(&block);
        assert!(cfg.eps_min < 1.0 / rows as f64);
        let a = lap_auction(&block, &cfg).unwrap();
        let e = lap_exact(&block).unwrap();
        if block.objective(&a) == block.objective(&e) {
            auction_ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        exact_ok == 200 && auction_ok == 200 && secs < 10.0,
        format!("projection optimal {exact_ok}/200, auction = exact {auction_ok}/200, {secs:.2}s"),
    )
}

fn criterion_4(runs: &[(ProblemInstance, UniverseAssignment, SolverTrace, bool)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for s in 0..1000u64 {
        let k = rng.random_range(1..=6);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=8)).collect();
        let index = BlockIndex::from_sizes(&sizes).unwrap();
        let d = rng.random_range(*sizes.iter().max().unwrap()..=12);
        let u = random_init(&index, d, s).unwrap();
        let x = u.expand();
        if verify_cycle_consistency(&x).total() != 0 || cycle_error(&x) != 0.0 {
            bad += 1;
        }
    }
    let solver_bad = runs
        .iter()
        .filter(|r| {
            let x = r.1.expand();
            verify_cycle_consistency(&x).total() != 0 || cycle_error(&x) != 0.0
        })
        .count();
    outcome(
        bad == 0 && solver_bad == 0,
        format!(
            "violations in {bad}/1000 random assignments and {solver_bad}/{} solver outputs",
            runs.len()
        ),
    )
}

fn all_assignments(index: &BlockIndex, d: usize) -> Vec<UniverseAssignment> {
    let mut all: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..index.num_objects() {
        let blocks = injections(index.size(i), d);
        all = all
            .into_iter()
            .flat_map(|prefix| {
                blocks.iter().map(move |b| {
                    let mut a = prefix.clone();
                    a.extend(b);
                    a
                })
            })
            .collect();
    }
    all.into_iter()
        .map(|a| UniverseAssignment::new(a, d, index.clone()).unwrap())
        .collect()
}

fn random_problem(rng: &mut ChaCha8Rng, sizes: &[usize], feature_dim: usize) -> ProblemInstance {
    let objects = sizes
        .iter()
        .map(|&n| Object {
            points: (0..n).map(|_| vec![rng.random(), rng.random()]).collect(),
            features: (0..n)
                .map(|_| {
                    (0..feature_dim)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect(),
            distances: None,
            labels: None,
        })
        .collect();
    ProblemInstance::new(objects, None).unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = 0;
    for s in 0..50u64 {
        let k = rng.random_range(2..=3);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=3)).collect();
        let p = random_problem(&mut rng, &sizes, 3);
        let kernel = KernelConfig::default();
        let w = build_similarity(&p, &kernel).unwrap();
        let a = build_adjacency(&p, &kernel).unwrap();
        let op = build_wbar_apply(&w, &a).unwrap();
        let d = 3;
        let f_star = all_assignments(w.index(), d)
            .iter()
            .map(|u| objective(u, &op).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut best_init: Option<(f64, UniverseAssignment)> = None;
        for t in 0..5 {
            let u0 = random_init(w.index(), d, 100 * s + t).unwrap();
            let f0 = objective(&u0, &op).unwrap();
            if best_init.as_ref().is_none_or(|(f, _)| f0 > *f) {
                best_init = Some((f0, u0));
            }
        }
        let (_, u0) = best_init.unwrap();
        let (_, trace) = hippi_solve(&w, &a, &u0, &SolverConfig::default()).unwrap();
        if (trace.final_objective() - f_star).abs() <= 1e-12 * f_star.abs() {
            hits += 1;
        }
    }
    outcome(
        hits * 10 >= 50 * 9,
        format!("global optimum reached on {hits}/50 tiny instances"),
    )
}

/// Kernel for the recovery and ambiguity suites: every point is as similar
/// to itself as to an exact partner, so the reweighting keeps `U` itself and
/// the adjacency enters the objective directly.
fn geometric_kernel() -> KernelConfig {
    KernelConfig {
        sigma: 1.0,
        mu: 4.0,
        self_weight: 1.0,
        ..Default::default()
    }
}

fn criterion_6() -> Outcome {
    let mut perfect = 0;
    let mut worst: f64 = 1.0;
    let (mut pairs, mut pairs_perfect) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let cfg = GenConfig {
            k: rng.random_range(2..=5),
            d_true: rng.random_range(4..=15),
            transform_family: hippi::TransformFamily::Rigid,
            seed,
            ..Default::default()
        };
        let p = generate(&cfg).unwrap();
        let kernel = geometric_kernel();
        let w = build_similarity(&p, &kernel).unwrap();
        let a = build_adjacency(&p, &kernel).unwrap();
        let d = hippi::solver::universe_size(&p.sizes(), UniverseSizeRule::TwiceAverage).unwrap();
        let u0 = random_init(w.index(), d, seed).unwrap();
        let (u, _) = hippi_solve(&w, &a, &u0, &SolverConfig::default()).unwrap();
        let f = evaluate_assignment(&u, &p.ground_truth().unwrap())
            .unwrap()
            .fscore;
        worst = worst.min(f);
        if f == 1.0 {
            perfect += 1;
        }
        if cfg.k == 2 {
            pairs += 1;
            pairs_perfect += usize::from(f == 1.0);
        }
    }
    outcome(
        perfect >= 95,
        format!("fscore 1.0 on {perfect}/100 noiseless instances from random init (worst {worst:.3}; k=2: {pairs_perfect}/{pairs})"),
    )
}

fn criterion_7() -> Outcome {
    let (mut ours, mut spectral) = (0.0, 0.0);
    for seed in 0..20u64 {
        let cfg = GenConfig {
            k: 5,
            d_true: 12,
            feature_prototypes: Some(3),
            feature_noise_sigma: 0.05,
            coord_noise_sigma: 0.01,
            seed: 7000 + seed,
            ..Default::default()
        };
        let p = generate(&cfg).unwrap();
        let truth = p.ground_truth().unwrap();
        let kernel = geometric_kernel();
        let w = build_similarity(&p, &kernel).unwrap();
        let a = build_adjacency(&p, &kernel).unwrap();
        let d = hippi::solver::universe_size(&p.sizes(), UniverseSizeRule::MaxBlock).unwrap();
        let baseline = spectral_sync(&pairwise_lap_matchings(&w).unwrap(), d).unwrap();
        let u0 = hippi::baselines::greedy_init(&w, d).unwrap();
        let (u, _) = hippi_solve(&w, &a, &u0, &SolverConfig::default()).unwrap();
        ours += evaluate_assignment(&u, &truth).unwrap().fscore / 20.0;
        spectral += evaluate_assignment(&baseline, &truth).unwrap().fscore / 20.0;
    }
    outcome(
        ours > spectral,
        format!("mean fscore over 20 ambiguous instances: hippi {ours:.3}, spectral {spectral:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tr = |x: &UniverseAssignment, y: &UniverseAssignment, op: &DenseOperator| {
        // ‖XᵀW̄Y‖²_F
        let wy = op.apply(&y.to_dense());
        (x.to_dense().transpose() * wy).norm_squared()
    };
    let (mut accepted, mut tried, mut failed) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    while accepted < 1000 {
        tried += 1;
        let k = rng.random_range(1..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=4)).collect();
        let index = BlockIndex::from_sizes(&sizes).unwrap();
        let m = index.total();
        let d = rng.random_range(*sizes.iter().max().unwrap()..=6);
        let r = rng.random_range(1..=m);
        let b = DMatrix::from_fn(m, r, |_, _| rng.random_range(-1.0..1.0));
        let op = DenseOperator(&b * b.transpose());
        let u = random_init(&index, d, rng.random()).unwrap();
        let v = random_init(&index, d, rng.random()).unwrap();
        let (vv, uv, uu) = (tr(&v, &v, &op), tr(&u, &v, &op), tr(&u, &u, &op));
        if vv > uv {
            continue;
        }
        accepted += 1;
        let excess = (uv - uu) / uu.abs().max(uv.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(excess);
        if excess > 1e-9 {
            failed += 1;
        }
    }
    outcome(
        failed == 0,
        format!("{accepted} triples accepted of {tried}, {failed} violations, worst relative excess {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let cfg = BenchConfig {
        sizes: vec![500, 1000, 2000, 4000],
        d: 40,
        points_per_object: 20,
        timed_iterations: 5,
        full_solve: false,
    };
    let report = run_bench(&cfg, &KernelConfig::default(), &SolverConfig::default(), 9).unwrap();
    let times: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("m={} {:.4}s", r.m, r.per_iteration_seconds))
        .collect();
    let full = run_bench(
        &BenchConfig {
            sizes: vec![1000],
            timed_iterations: 1,
            full_solve: true,
            ..cfg
        },
        &KernelConfig::default(),
        &SolverConfig::default(),
        9,
    )
    .unwrap();
    let row = &full.rows[0];
    let solve = row.solve_seconds.unwrap();
    outcome(
        (1.6..=2.6).contains(&report.exponent) && solve < 60.0,
        format!(
            "exponent {:.2} ({}); m=1000 full solve {solve:.2}s in {} iterations",
            report.exponent,
            times.join(", "),
            row.solve_iterations.unwrap()
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut generated = Vec::new();
    let mut files = Vec::new();
    for run in 0..2 {
        let root = dir.path().join(format!("run{run}"));
        let mut cfg = RunConfig {
            seed: Some(10),
            init: InitMethod::Random,
            generate: GenConfig {
                k: 6,
                d_true: 15,
                visibility: 0.8,
                coord_noise_sigma: 0.02,
                feature_noise_sigma: 0.3,
                outlier_fraction: 0.2,
                ..Default::default()
            },
            out: Some(root.join("problem.json")),
            ..Default::default()
        };
        let path = cmd_generate(&cfg).unwrap().path;
        generated.push(std::fs::read(&path).unwrap());
        cfg.problem = Some(path);
        cfg.out = Some(root.join("out"));
        cmd_solve(&cfg).unwrap();
        files.push((
            std::fs::read(root.join("out").join(ASSIGNMENT_FILE)).unwrap(),
            std::fs::read(root.join("out").join(TRACE_FILE)).unwrap(),
        ));
    }
    let same = files[0] == files[1] && generated[0] == generated[1];
    outcome(
        same,
        format!(
            "two runs gave {} problem, assignment and trace files",
            if same { "byte-identical" } else { "different" }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let runs = solve_small_suite();
    let suite_secs = start.elapsed().as_secs_f64();

    let results: Vec<(&str, Outcome)> = vec![
        ("monotone objective", criterion_1(&runs, suite_secs)),
        ("finite convergence", criterion_2(&runs)),
        ("projection oracle", criterion_3()),
        ("cycle consistency", criterion_4(&runs)),
        ("tiny global optimum", criterion_5()),
        ("noiseless recovery", criterion_6()),
        ("geometric advantage", criterion_7()),
        ("bilinear bound", criterion_8()),
        ("scaling", criterion_9()),
        ("determinism", criterion_10()),
    ];
    let mut failures = 0;
    for (n, (name, o)) in results.iter().enumerate() {
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            n + 1,
            o.detail
        );
        failures += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failures,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
