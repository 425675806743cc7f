//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use kfold_stability::bounds::{
    kappa_convoluted, mixing_correction, mixing_penalty, one_round_bound_mixing, varpi_prime, varsigma_iid,
    BlockRc,
};
use kfold_stability::complexity::{rademacher_complexity_with, RcMethod, RcOptions};
use kfold_stability::dependence::{mixing_beta, DependenceProfile, MixingModel};
use kfold_stability::folds::{block_layout, blocked_kfold};
use kfold_stability::risk::compute_risks;
use kfold_stability::selection::{select_k, SelectConfig};
use kfold_stability::tails::{estimate_orlicz_norm, TailClass, TailProfile};
use kfold_stability::verify::{coverage_trial, CoverageConfig, Generator, Theorem};
use kfold_stability::{Error, Exec, LossMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

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

fn lemma1_coverage() -> Outcome {
    let cfg = CoverageConfig {
        n: 200,
        trials: 5000,
        seed: 101,
        ..CoverageConfig::default()
    };
    let r = coverage_trial(&Generator::ar1(0.6, 1.0), Theorem::Lemma1, &cfg).expect("lemma1 run");
    let worst = r
        .grid
        .iter()
        .map(|g| g.empirical - (g.bound - 2.0 * g.std_err))
        .fold(f64::INFINITY, f64::min);
    outcome(
        r.pass && r.grid.len() == 10,
        format!("{} grid points, smallest margin {worst:.4}", r.grid.len()),
    )
}

fn theorem1_coverage() -> Outcome {
    let cfg = CoverageConfig {
        n: 200,
        k: 5,
        varpi: 0.1,
        trials: 2000,
        rc_draws: 256,
        seed: 102,
        ..CoverageConfig::default()
    };
    let gen = Generator::BoundedUniform { m: 1.0, classes: 8 };
    let r = coverage_trial(&gen, Theorem::OneRound, &cfg).expect("one-round coverage run");
    outcome(
        r.pass,
        format!(
            "violations {}/{}; frequency {:.4} <= {:.4}",
            r.violations,
            r.feasible_trials,
            r.frequency,
            r.target + r.tolerance
        ),
    )
}

fn theorem2_coverage() -> Outcome {
    let cfg = CoverageConfig {
        n: 200,
        k: 5,
        varpi: 0.1,
        trials: 2000,
        rc_draws: 256,
        seed: 103,
        ..CoverageConfig::default()
    };
    let gen = Generator::GaussianLoss {
        mean: 2.0,
        sd: 0.5,
        classes: 8,
    };
    let r = coverage_trial(&gen, Theorem::Convoluted, &cfg).expect("average-bound coverage run");
    outcome(
        r.pass,
        format!(
            "violations {}/{} feasible ({} infeasible); frequency {:.4} <= mean kappa {:.4} + {:.4}",
            r.violations, r.feasible_trials, r.infeasible, r.frequency, r.target, r.tolerance
        ),
    )
}

fn mixing_feasibility() -> Outcome {
    let model = MixingModel::Exponential { beta0: 0.5, r: 0.5 };
    let layout = block_layout(24, 24, 3).expect("layout");
    let mut ok = layout.a_t() == 4 && layout.a_s() == 4;
    let vp = varpi_prime(0.1, &model, &layout).expect("varpi'");
    ok &= (vp + 0.025).abs() < 1e-15;

    // The bound itself must refuse the configuration.
    let bf = blocked_kfold(48, 2, 3).expect("blocked split");
    let lm = LossMatrix::from_rows(vec![vec![0.5]; 48], Some(1.0)).expect("losses");
    let rs = compute_risks(&lm, &bf.folds).expect("risks");
    let opts = RcOptions::new(32, 0);
    let rc = BlockRc {
        train: rademacher_complexity_with(&lm, &bf.train_family0(0), opts).expect("rc"),
        test: rademacher_complexity_with(&lm, &bf.test_family0(0), opts).expect("rc"),
    };
    ok &= matches!(
        one_round_bound_mixing(&rs, 0, &rc, &bf.layout, &model, Some(1.0), 0.1),
        Err(Error::InfeasibleMixing { .. })
    );

    // Sweep block lengths: infeasible exactly when (mu-1)(2 beta0 r^a) >= varpi.
    for a in 1..=12usize {
        let layout = block_layout(2 * 3 * a, 2 * 3 * a, 3).expect("layout");
        let hand = 0.1 - 2.0 * (2.0 * 0.5 * 0.5f64.powi(a as i32));
        let got = varpi_prime(0.1, &model, &layout).expect("varpi'");
        ok &= (got - hand).abs() < 1e-15;
        ok &= (got <= 0.0) == (hand <= 0.0);
    }

    let cfg = CoverageConfig {
        mu: 3,
        block_len: 4,
        trials: 1000,
        seed: 104,
        mixing: MixingModel::Exponential { beta0: 1.0, r: 0.6 },
        ..CoverageConfig::default()
    };
    let yu = coverage_trial(&Generator::ar1(0.6, 1.0), Theorem::Yu, &cfg).expect("block check");
    ok &= yu.pass;
    outcome(
        ok,
        format!(
            "varpi' = {vp}; block gap {:.4} <= {:.4} + 3 SE ({:.4})",
            yu.frequency, yu.target, yu.tolerance
        ),
    )
}

fn orlicz_accuracy() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(105);
    let normal: Vec<f64> = (0..100_000).map(|_| r.sample(StandardNormal)).collect();
    let exp = Exp::new(1.0).expect("rate");
    let expo: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut r)).collect();
    let g = estimate_orlicz_norm(&normal, 2.0, 1e-8).expect("psi2");
    let e = estimate_orlicz_norm(&expo, 1.0, 1e-8).expect("psi1");
    let target_g = (8.0f64 / 3.0).sqrt();
    let ok = (g / target_g - 1.0).abs() <= 0.05 && (e / 2.0 - 1.0).abs() <= 0.05;
    outcome(
        ok,
        format!("N(0,1) psi2 {g:.4} vs {target_g:.4}; Exp(1) psi1 {e:.4} vs 2"),
    )
}

fn rademacher_equivalence() -> Outcome {
    let ones = |l: usize| LossMatrix::from_rows(vec![vec![1.0]; l], None).expect("losses");
    let exact = |lm: &LossMatrix, l: usize| {
        let idx: Vec<usize> = (0..l).collect();
        rademacher_complexity_with(lm, &idx, RcOptions::new(1, 0).with_method(RcMethod::Exhaustive))
            .expect("exact")
            .value
    };
    let hand = [exact(&ones(1), 1), exact(&ones(2), 2), exact(&ones(3), 3)];
    let mut ok = hand == [2.0, 1.0, 1.0];

    let mut r = ChaCha8Rng::seed_from_u64(106);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for l in 1..=14usize {
        for m in [1usize, 3, 8, 32] {
            if (1u64 << l) * m as u64 > 1 << 20 {
                continue;
            }
            let values: Vec<f64> = (0..l * m).map(|_| r.random::<f64>() * 2.0).collect();
            let lm = LossMatrix::from_flat(l, m, values, None).expect("losses");
            let idx: Vec<usize> = (0..l).collect();
            let ex =
                rademacher_complexity_with(&lm, &idx, RcOptions::new(1, 0).with_method(RcMethod::Exhaustive))
                    .expect("exact");
            let mc = rademacher_complexity_with(
                &lm,
                &idx,
                RcOptions::new(4000, l as u64 * 100 + m as u64).with_method(RcMethod::MonteCarlo),
            )
            .expect("mc");
            let z = (mc.value - ex.value).abs() / mc.std_err.max(1e-12);
            worst = worst.max(z);
            ok &= z <= 4.0;
            cases += 1;
        }
    }
    outcome(
        ok,
        format!("hand cases {hand:?}; {cases} instances, worst |z| = {worst:.2}"),
    )
}

fn lemma_a1() -> Outcome {
    let cfg = CoverageConfig {
        n: 200,
        k: 10,
        trials: 500,
        seed: 107,
        ..CoverageConfig::default()
    };
    let gen = Generator::ExponentialLoss {
        rate: 1.0,
        classes: 4,
    };
    let r = coverage_trial(&gen, Theorem::LemmaA1, &cfg).expect("variance-ratio run");
    outcome(
        r.pass,
        format!(
            "ratio within (8 + 4/9)(1 + {}) in {}/{} runs",
            cfg.a1_slack,
            r.feasible_trials - r.violations,
            r.feasible_trials
        ),
    )
}

fn selection_summary(lm: &LossMatrix, cfg: &SelectConfig) -> (usize, usize, String) {
    let s = select_k(lm, cfg).expect("selection");
    let json = serde_json::json!({
        "k_star": s.k_star,
        "b_star": s.b_star_label,
        "rhs_star": s.rhs_star,
        "confidence": s.confidence,
        "seed": s.seed,
    });
    (
        s.k_star,
        s.b_star,
        serde_json::to_string_pretty(&json).expect("json"),
    )
}

fn selection_determinism() -> Outcome {
    let hyps: Vec<Vec<f64>> = [-0.5, 0.0, 0.5]
        .iter()
        .flat_map(|&a| [0.5, 1.0, 1.5].map(|b| vec![a, b]))
        .collect();
    let gen = Generator::LinearModel {
        b_true: vec![0.2, 1.1],
        noise_sd: 0.5,
        design_sd: vec![1.0, 1.0],
        hypotheses: hyps,
    };
    let lm = gen.sample(60, 108).expect("sample").losses;
    let cfg = SelectConfig {
        seed: 108,
        rc_draws: 512,
        ..SelectConfig::default()
    };
    let runs: Vec<_> = (0..3).map(|_| selection_summary(&lm, &cfg)).collect();
    let mut ok = runs.iter().all(|r| r.2 == runs[0].2);
    let seq = selection_summary(
        &lm,
        &SelectConfig {
            exec: Exec::Sequential,
            ..cfg.clone()
        },
    );
    ok &= seq.2 == runs[0].2;
    let (k_star, b_star, _) = runs[0].clone();

    // Append columns that are entry-wise worse than an existing hypothesis.
    let mut changed = Vec::new();
    for (src, offset) in [(0usize, 0.5), (4, 0.1), (8, 2.0), (b_star, 1.0)] {
        let rows: Vec<Vec<f64>> = (0..lm.n())
            .map(|i| {
                let mut row = lm.row(i).to_vec();
                row.push(row[src] + offset);
                row
            })
            .collect();
        let bigger = LossMatrix::from_rows(rows, None).expect("losses");
        let (k2, b2, _) = selection_summary(&bigger, &cfg);
        if (k2, b2) != (k_star, b_star) {
            changed.push((src, offset, k2, b2));
        }
    }
    ok &= changed.is_empty();
    outcome(
        ok,
        format!("(K*, b*) = ({k_star}, {b_star}) over 3 runs + sequential; dominated injections that moved it: {changed:?}"),
    )
}

fn profile(class: TailClass) -> TailProfile {
    TailProfile {
        nu: 2.0,
        psi_norm: 0.4,
        psi2: Some(0.4),
        psi1: Some(0.5),
        sigma_tilde: 0.3,
        xi: 1.0,
        envelope: Some(1.0),
        envelope_certified: class == TailClass::Bounded,
        tail_class: class,
    }
}

fn dep(v: f64) -> DependenceProfile {
    DependenceProfile {
        gamma: vec![1.0],
        gamma0: 1.0,
        v,
        degenerate: false,
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn monotonicity() -> Outcome {
    let mut ok = true;
    let mut failed = Vec::new();
    let mut check = |name: &str, cond: bool| {
        if !cond {
            failed.push(name.to_string());
        }
        ok &= cond;
    };
    for class in [TailClass::Bounded, TailClass::Subgaussian] {
        let p = profile(class);
        // n/K grows with n at fixed K.
        let by_fold: Vec<f64> = (1..=20)
            .map(|i| varsigma_iid(&p, 10 * i, 5, 0.1, 1.0).unwrap().0)
            .collect();
        check("varsigma in n/K", strictly_decreasing(&by_fold));
        let by_varpi: Vec<f64> = (1..=20)
            .map(|i| varsigma_iid(&p, 200, 5, i as f64 * 0.045, 1.0).unwrap().0)
            .collect();
        check("varsigma in varpi", strictly_decreasing(&by_varpi));
    }
    for class in [TailClass::Subgaussian, TailClass::Subexponential] {
        let p = profile(class);
        for varpi in [0.05, 0.3] {
            let by_k: Vec<f64> = (2..22)
                .map(|k| kappa_convoluted(&p, &dep(0.7), k, varpi, 1.0).unwrap().0)
                .collect();
            check("kappa in K", strictly_decreasing(&by_k));
            let by_v: Vec<f64> = (0..20)
                .map(|i| {
                    kappa_convoluted(&p, &dep(i as f64 * 0.25), 5, varpi, 1.0)
                        .unwrap()
                        .0
                })
                .collect();
            check("kappa in V", by_v.windows(2).all(|w| w[1] > w[0]));
        }
    }
    let by_mu: Vec<f64> = (2..22).map(|mu| mixing_penalty(1.0, 0.05, mu)).collect();
    check("penalty in mu", strictly_decreasing(&by_mu));
    // The opposing effect: at fixed varpi, more blocks shrink varpi'.
    let model = MixingModel::Exponential { beta0: 0.5, r: 0.5 };
    let vps: Vec<f64> = (2..22)
        .map(|mu| {
            let layout = block_layout(2 * mu * 3, 2 * mu * 3, mu).unwrap();
            0.5 - mixing_correction(&model, &layout).unwrap()
        })
        .collect();
    check("varpi' in mu", strictly_decreasing(&vps));
    check(
        "beta",
        mixing_beta(&model, 1).unwrap() > mixing_beta(&model, 2).unwrap(),
    );
    outcome(
        ok,
        if failed.is_empty() {
            "all grids monotone".into()
        } else {
            format!("failed: {failed:?}")
        },
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    // libtest arguments (filters, --nocapture) are accepted and ignored.
    let criteria: [Criterion; 9] = [
        (
            "1 Chebyshev coverage, AR(1)",
            Duration::from_secs(60),
            lemma1_coverage,
        ),
        (
            "2 one-round bound coverage, bounded",
            Duration::from_secs(120),
            theorem1_coverage,
        ),
        (
            "3 average bound coverage, psi_2",
            Duration::from_secs(120),
            theorem2_coverage,
        ),
        (
            "4 mixing feasibility and block approximation",
            Duration::from_secs(180),
            mixing_feasibility,
        ),
        (
            "5 Orlicz estimator accuracy",
            Duration::from_secs(10),
            orlicz_accuracy,
        ),
        (
            "6 Rademacher MC vs enumeration",
            Duration::from_secs(30),
            rademacher_equivalence,
        ),
        ("7 gap variance ratio", Duration::from_secs(60), lemma_a1),
        (
            "8 selection determinism and dominance",
            Duration::from_secs(60),
            selection_determinism,
        ),
        ("9 monotonicity grids", Duration::from_secs(5), monotonicity),
    ];
    let mut failures = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failures += usize::from(!pass);
        println!(
            "[{}] criterion {name}: {} ({:.2}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
