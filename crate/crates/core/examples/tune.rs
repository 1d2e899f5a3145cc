// Scratch harness for fixture calibration. Not part of the deliverable.

use submine_core::dataset::{generate, Dataset, ModeSpec, SynthSpec};
use submine_core::ensemble::{compare_sharing, evaluate};
use submine_core::miner::{
    adjusted_rand_index, core_assignments, mine, subclass_size_distribution, tail_fraction,
    MineConfig,
};
use submine_core::oracle::subset_enumeration_optimum;
use submine_core::selfpaced::{acs_train, AcsConfig};
use submine_core::solver::SolverConfig;

fn three_mode_spec(seed: u64) -> SynthSpec {
    // three modes at 120 degrees, radius 5, pairwise distance ~8.66 = 29 sigma
    let r = 5.0;
    SynthSpec {
        dim: 2,
        modes: vec![
            ModeSpec { mean: vec![r, 0.0], stddev: 0.3, count: 20 },
            ModeSpec { mean: vec![-0.5 * r, 0.866 * r], stddev: 0.3, count: 10 },
            ModeSpec { mean: vec![-0.5 * r, -0.866 * r], stddev: 0.3, count: 5 },
        ],
        outlier_count: 5,
        neg_count: 60,
        neg_spread: 1.0,
        seed,
    }
}

fn eval_recovery(lambda: f64, per_sample: bool) {
    let mut ari_ok = 0;
    let mut outlier_ok = 0;
    let mut big_experts_ok = 0;
    let mut first_is_largest = 0;
    for seed in 0..10u64 {
        let ds = generate(&three_mode_spec(1000 + seed)).unwrap();
        let config = MineConfig {
            acs: AcsConfig {
                lambda_init: lambda,
                lambda_per_sample: per_sample,
                ..AcsConfig::default()
            },
            ..MineConfig::default()
        };
        let ensemble = mine(&ds, &config).unwrap();
        let sizes = subclass_size_distribution(&ensemble);
        let assignment = core_assignments(&ensemble);
        let ids = ds.mode_ids().unwrap();

        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..ds.n_pos() {
            if ids[i] >= 0 {
                a.push(assignment[i]);
                b.push(ids[i]);
            }
        }
        let ari = adjusted_rand_index(&a, &b);
        let n_big = ensemble.experts.iter().filter(|e| e.core.len() >= 5).count();
        if ari >= 0.8 {
            ari_ok += 1;
        }
        if n_big >= 3 {
            big_experts_ok += 1;
        }
        // all planted outliers in cores < 5
        let mut all_small = true;
        for i in 0..ds.n_pos() {
            if ids[i] == -1 {
                let expert = assignment[i] as usize;
                if ensemble.experts[expert].core.len() >= 5 {
                    all_small = false;
                }
            }
        }
        if all_small {
            outlier_ok += 1;
        }
        // majority mode of round-1 core
        let first = &ensemble.experts[0];
        let mut counts = std::collections::HashMap::new();
        for &i in &first.core {
            *counts.entry(ids[i]).or_insert(0usize) += 1;
        }
        let majority = counts.iter().max_by_key(|(_, &c)| c).map(|(&m, _)| m);
        if majority == Some(0) {
            first_is_largest += 1;
        }
        if seed < 3 {
            println!(
                "  seed {seed}: sizes {:?} ari {:.3} big {} outliers_small {}",
                &sizes[..sizes.len().min(6)],
                ari,
                n_big,
                all_small
            );
        }
    }
    println!(
        "lambda {lambda} per_sample {per_sample}: ari_ok {ari_ok}/10 big {big_experts_ok}/10 outliers {outlier_ok}/10 first_largest {first_is_largest}/10"
    );
}

fn eval_spectrum(lambda: f64) {
    let ds = generate(&three_mode_spec(1000)).unwrap();
    for k in [0.001, 1000.0] {
        let config = AcsConfig {
            k_init: k,
            k_final: k,
            lambda_init: lambda,
            ..AcsConfig::default()
        };
        let out = acs_train(&ds, &config, None).unwrap();
        println!(
            "spectrum lambda {lambda} k {k}: |v| = {} of {} degenerate {}",
            out.indicators.count_active(),
            ds.n_pos(),
            out.degenerate_singleton
        );
    }
}

fn eval_oracle(lambda_lo: f64, lambda_hi: f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut close = 0;
    let mut monotone = 0;
    let total = 50;
    let t0 = std::time::Instant::now();
    for trial in 0..total {
        let n_outliers = rng.random_range(0..=2);
        let n_pos = rng.random_range(4..=8) - n_outliers;
        let n_neg = rng.random_range(6..=12);
        let spread: f64 = rng.random_range(0.3..0.7);
        let ds = generate(&SynthSpec {
            dim: 2,
            modes: vec![
                ModeSpec {
                    mean: vec![rng.random_range(2.0..3.5), rng.random_range(-1.0..1.0)],
                    stddev: spread,
                    count: n_pos,
                },
            ],
            outlier_count: n_outliers,
            neg_count: n_neg,
            neg_spread: 1.0,
            seed: 5000 + trial,
        })
        .unwrap();
        let lambda = rng.random_range(lambda_lo..lambda_hi);
        let config = AcsConfig {
            lambda_init: lambda,
            ..AcsConfig::default()
        };
        let out = acs_train(&ds, &config, None).unwrap();
        let acs_obj = submine_core::loss::self_paced_objective(
            &out.model,
            &ds,
            &out.indicators,
            &submine_core::loss::RiskParams::from_k(lambda, config.k_final),
        )
        .unwrap();
        let (opt, _) =
            subset_enumeration_optimum(&ds, config.k_final, lambda, &SolverConfig::default())
                .unwrap();
        let rel = (acs_obj - opt).abs() / opt.abs().max(1.0);
        if rel <= 1e-6 {
            close += 1;
        } else if trial < 60 {
            println!("  trial {trial}: acs {acs_obj:.6} opt {opt:.6} rel {rel:.2e} lambda {lambda:.2}");
        }
        let mut ok = true;
        for pair in out.trace.windows(2) {
            if pair[0].k == pair[1].k && pair[1].objective > pair[0].objective + 1e-6 {
                ok = false;
            }
        }
        if ok {
            monotone += 1;
        }
    }
    println!(
        "oracle: close {close}/{total} monotone {monotone}/{total} in {:?}",
        t0.elapsed()
    );
}

fn eval_sharing(lambda: f64) {
    let spec = |seed: u64| SynthSpec {
        dim: 2,
        modes: vec![
            ModeSpec { mean: vec![3.0, 3.0], stddev: 0.4, count: 15 },
            ModeSpec { mean: vec![-3.0, 3.0], stddev: 0.4, count: 15 },
            ModeSpec { mean: vec![0.0, 3.0], stddev: 0.6, count: 10 },
        ],
        outlier_count: 0,
        neg_count: 40,
        neg_spread: 1.0,
        seed,
    };
    let mut wins = 0;
    for seed in 0..10u64 {
        let train = generate(&spec(3000 + seed)).unwrap();
        let test = generate(&spec(4000 + seed)).unwrap();
        let config = MineConfig {
            acs: AcsConfig {
                lambda_init: lambda,
                ..AcsConfig::default()
            },
            ..MineConfig::default()
        };
        let (cmp, _, _) = compare_sharing(&train, &test, &config).unwrap();
        let on = cmp.with_sharing.ap;
        let off = cmp.without_sharing.ap;
        if on >= off {
            wins += 1;
        }
        println!("  sharing seed {seed}: on {on:.4} off {off:.4}");
    }
    println!("sharing lambda {lambda}: wins {wins}/10");
}

fn eval_tail(lambda: f64) {
    let mut ok = 0;
    for seed in 0..10u64 {
        let ds = generate(&SynthSpec {
            dim: 2,
            modes: vec![
                ModeSpec { mean: vec![5.0, 0.0], stddev: 0.3, count: 25 },
                ModeSpec { mean: vec![-2.5, 4.33], stddev: 0.3, count: 20 },
            ],
            outlier_count: 55,
            neg_count: 60,
            neg_spread: 1.0,
            seed: 7000 + seed,
        })
        .unwrap();
        let config = MineConfig {
            acs: AcsConfig {
                lambda_init: lambda,
                ..AcsConfig::default()
            },
            ..MineConfig::default()
        };
        let ensemble = mine(&ds, &config).unwrap();
        let tf = tail_fraction(&ensemble, 5);
        if (0.40..=0.70).contains(&tf) {
            ok += 1;
        }
        println!("  tail seed {seed}: {tf:.3} experts {}", ensemble.experts.len());
    }
    println!("tail lambda {lambda}: ok {ok}/10");
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    let t0 = std::time::Instant::now();
    match which {
        "recovery" => {
            for lambda in [0.005, 0.01, 0.02, 0.03, 0.05, 0.1] {
                eval_recovery(lambda, false);
            }
        }
        "recovery_ps" => {
            for lambda in [0.01, 0.02, 0.03, 0.05] {
                eval_recovery(lambda, true);
            }
        }
        "spectrum" => {
            for lambda in [0.001, 0.005, 0.01, 0.02, 0.05] {
                eval_spectrum(lambda);
            }
        }
        "oracle" => eval_oracle(0.5, 5.0),
        "kvar" => {
            for (k_init, k_final) in [(0.9f64, 1.2f64)] {
                for lambda in [0.075] {
                    let mut ari_ok = 0;
                    let mut big_ok = 0;
                    let mut out_ok = 0;
                    let mut first_ok = 0;
                    for seed in 0..10u64 {
                        let ds = generate(&three_mode_spec(1000 + seed)).unwrap();
                        let config = MineConfig {
                            acs: AcsConfig {
                                k_init,
                                k_final,
                                lambda_init: lambda,
                                ..AcsConfig::default()
                            },
                            ..MineConfig::default()
                        };
                        let ensemble = mine(&ds, &config).unwrap();
                        let assignment = core_assignments(&ensemble);
                        let ids = ds.mode_ids().unwrap();
                        let mut a = Vec::new();
                        let mut b = Vec::new();
                        for i in 0..ds.n_pos() {
                            if ids[i] >= 0 {
                                a.push(assignment[i]);
                                b.push(ids[i]);
                            }
                        }
                        if adjusted_rand_index(&a, &b) >= 0.8 {
                            ari_ok += 1;
                        }
                        if ensemble.experts.iter().filter(|e| e.core.len() >= 5).count() >= 3 {
                            big_ok += 1;
                        }
                        let mut all_small = true;
                        for i in 0..ds.n_pos() {
                            if ids[i] == -1
                                && ensemble.experts[assignment[i] as usize].core.len() >= 5
                            {
                                all_small = false;
                            }
                        }
                        if all_small {
                            out_ok += 1;
                        }
                        let first = &ensemble.experts[0];
                        let mut counts = std::collections::HashMap::new();
                        for &i in &first.core {
                            *counts.entry(ids[i]).or_insert(0usize) += 1;
                        }
                        if counts.iter().max_by_key(|(_, &c)| c).map(|(&m, _)| m) == Some(0) {
                            first_ok += 1;
                        }
                    }
                    println!(
                        "k {k_init}->{k_final} lambda {lambda}: ari {ari_ok}/10 big {big_ok}/10 out {out_ok}/10 first {first_ok}/10"
                    );
                }
            }
        }
        "sharing" => {
            for lambda in [2.0, 4.0, 8.0] {
                eval_sharing(lambda);
            }
        }
        "tail" => {
            for lambda in [2.0, 4.0] {
                eval_tail(lambda);
            }
        }
        "eval_seeded" => {
            let ds = generate(&three_mode_spec(1000)).unwrap();
            let config = MineConfig {
                acs: AcsConfig { lambda_init: 4.0, ..AcsConfig::default() },
                ..MineConfig::default()
            };
            let ensemble = mine(&ds, &config).unwrap();
            let test = generate(&three_mode_spec(2000)).unwrap();
            let report = evaluate(&ensemble, &test, true).unwrap();
            println!("ap {:.4} prefix {:?}", report.ap, report.ap_per_expert_prefix);
        }
        other => println!("unknown probe {other}"),
    }
    println!("total {:?}", t0.elapsed());
}
