//! Acceptance gate: every numerical claim the library rests on, checked
//! end to end at its stated tolerance.
//!
//! Each criterion is one test that prints a single `PASS criterion N` line
//! on success (visible with `--nocapture`), so a full run doubles as a
//! checklist. Criteria with stated runtime budgets assert them.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, InverseGamma};

use reshuffle::estimate::EstimatorKind;
use reshuffle::experiment::{
    data_stream, filter_stream, oracle_check, run_nl_loss, run_sv_loss, ExperimentConfig,
    ExperimentKind, LossName, ResultRow, KL_ORACLE_TOLERANCE, TV_ORACLE_TOLERANCE,
};
use reshuffle::filter::{csmc_sweep, FilterConfig};
use reshuffle::models::{simulate, SvModel};
use reshuffle::pgibbs::{
    acf, chain_median, particle_gibbs, sample_sigma2, sigma2_posterior, IgPrior, PgConfig,
    PgPriors,
};
use reshuffle::rng::RngStream;
use reshuffle::select::{
    kl_reshuffle, ml_select, tv_reshuffle, SelectionInput, SelectionScheme,
};

/// Two-sided critical value of the Kolmogorov-Smirnov statistic at
/// significance 0.01 for sample size 10^4: 1.62762 / sqrt(n).
const KS_CRITICAL_N_1E4: f64 = 0.01628;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-replicate values for one (scheme, particles, estimator, loss) cell,
/// ordered by replicate.
fn replicate_values(
    rows: &[ResultRow],
    scheme: SelectionScheme,
    particles: usize,
    estimator: EstimatorKind,
    loss: LossName,
) -> Vec<f64> {
    let mut values: Vec<(usize, f64)> = rows
        .iter()
        .filter(|row| {
            row.scheme == scheme
                && row.particles == particles
                && row.estimator == estimator
                && row.loss == loss
        })
        .map(|row| (row.replicate, row.value))
        .collect();
    values.sort_by_key(|&(replicate, _)| replicate);
    values.into_iter().map(|(_, value)| value).collect()
}

#[test]
fn criterion_01_kl_reshuffle_matches_enumeration() {
    let start = Instant::now();
    let report = oracle_check(8, 1000, 0).expect("oracle protocol runs");
    let elapsed = start.elapsed();
    assert!(
        report.max_kl_gap <= KL_ORACLE_TOLERANCE,
        "greedy KL objective drifted {:.3e} from the enumerated optimum",
        report.max_kl_gap
    );
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "oracle comparison took {elapsed:?}, budget is 10 s"
    );
    println!(
        "PASS criterion 1: KL selection matches exhaustive enumeration on 1000 random \
         vectors (max gap {:.3e}, {elapsed:?})",
        report.max_kl_gap
    );
}

#[test]
fn criterion_02_tv_reshuffle_matches_enumeration_and_brackets() {
    let report = oracle_check(8, 1000, 0).expect("oracle protocol runs");
    assert!(
        report.max_tv_gap <= TV_ORACLE_TOLERANCE,
        "TV objective drifted {:.3e} from the enumerated optimum",
        report.max_tv_gap
    );
    assert!(
        report.tv_counts_bracketed,
        "a TV count left its floor/ceiling bracket"
    );
    println!(
        "PASS criterion 2: TV selection matches exhaustive enumeration and every count \
         stays in the rounding bracket (max gap {:.3e})",
        report.max_tv_gap
    );
}

#[test]
fn criterion_03_deterministic_schemes_conserve_and_repeat() {
    let mut rng = RngStream::new(0xFACE, 0).rng();
    for case in 0..10_000 {
        let particles = rng.random_range(1..=24);
        let offspring = rng.random_range(1..=48);
        let weights: Vec<f64> = (0..particles).map(|_| rng.random_range(1e-8..1.0)).collect();
        let log_likelihoods: Vec<f64> =
            (0..particles).map(|_| rng.random_range(-30.0..5.0)).collect();

        let weight_input = SelectionInput::weights(&weights);
        let likelihood_input = SelectionInput::log_likelihoods(&log_likelihoods);
        let runs = [
            kl_reshuffle(&weight_input, offspring),
            kl_reshuffle(&likelihood_input, offspring),
            tv_reshuffle(&weight_input, offspring),
            tv_reshuffle(&likelihood_input, offspring),
            ml_select(&weight_input, offspring),
            ml_select(&likelihood_input, offspring),
        ];
        let reruns = [
            kl_reshuffle(&weight_input, offspring),
            kl_reshuffle(&likelihood_input, offspring),
            tv_reshuffle(&weight_input, offspring),
            tv_reshuffle(&likelihood_input, offspring),
            ml_select(&weight_input, offspring),
            ml_select(&likelihood_input, offspring),
        ];
        for (first, second) in runs.into_iter().zip(reruns) {
            let first = first.expect("valid input selects");
            let second = second.expect("valid input selects");
            assert_eq!(
                first.total(),
                offspring,
                "case {case}: offspring total {} diverged from {offspring}",
                first.total()
            );
            assert_eq!(first, second, "case {case}: repeated call changed the counts");
        }
    }
    println!(
        "PASS criterion 3: all six deterministic schemes conserve the offspring total and \
         are bit-stable over 10000 fuzzed inputs"
    );
}

#[test]
fn criterion_04_kl_reshuffle_is_scale_invariant() {
    let mut rng = RngStream::new(0xBEEF, 0).rng();
    for case in 0..100 {
        let particles = rng.random_range(1..=32);
        let offspring = rng.random_range(1..=32);
        let weights: Vec<f64> = (0..particles).map(|_| rng.random_range(1e-6..1.0)).collect();
        let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let base = kl_reshuffle(&SelectionInput::weights(&weights), offspring)
            .expect("valid input selects");
        for k in [1e-6_f64, 1.0, 1e6] {
            let scaled: Vec<f64> = weights.iter().map(|w| w * k).collect();
            let linear = kl_reshuffle(&SelectionInput::weights(&scaled), offspring)
                .expect("scaled input selects");
            assert_eq!(base, linear, "case {case}: scaling by {k} moved the counts");
            let shifted: Vec<f64> = log_weights.iter().map(|l| l + k.ln()).collect();
            let logged = kl_reshuffle(&SelectionInput::log_weights(&shifted), offspring)
                .expect("shifted input selects");
            assert_eq!(
                base, logged,
                "case {case}: log-space shift by ln({k}) moved the counts"
            );
        }
    }
    println!(
        "PASS criterion 4: KL selection is exactly invariant under weight scaling by \
         1e-6, 1, and 1e6, linearly and in log space"
    );
}

#[test]
fn criterion_05_likelihood_schemes_dominate_on_volatility_data() {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(ExperimentKind::SvLoss);
    config.seed = 0;
    config.replicates = 10;
    config.particle_counts = vec![500];
    config.step_counts = vec![500];
    config.schemes = vec![
        SelectionScheme::ML,
        SelectionScheme::KL_P,
        SelectionScheme::TV_P,
        SelectionScheme::KL_W,
        SelectionScheme::TV_W,
        SelectionScheme::STRATIFIED,
        SelectionScheme::SYSTEMATIC,
    ];
    config.estimators = vec![EstimatorKind::Mmse];
    config.losses = vec![LossName::Squared];
    let rows = run_sv_loss(&config).expect("volatility grid runs");

    let value = |scheme| {
        replicate_values(&rows, scheme, 500, EstimatorKind::Mmse, LossName::Squared)
    };
    let ml = value(SelectionScheme::ML);
    let kl_p = value(SelectionScheme::KL_P);
    let tv_p = value(SelectionScheme::TV_P);
    let kl_w = value(SelectionScheme::KL_W);
    let tv_w = value(SelectionScheme::TV_W);
    let stratified = value(SelectionScheme::STRATIFIED);
    let systematic = value(SelectionScheme::SYSTEMATIC);

    let likelihood_top = mean(&kl_p).max(mean(&tv_p));
    assert!(
        likelihood_top <= mean(&ml),
        "mean loss: kl_p {:.4} and tv_p {:.4} should not exceed the winner-takes-all \
         search at {:.4}",
        mean(&kl_p),
        mean(&tv_p),
        mean(&ml)
    );
    for (name, group) in [
        ("kl_w", &kl_w),
        ("tv_w", &tv_w),
        ("stratified", &stratified),
        ("systematic", &systematic),
    ] {
        assert!(
            likelihood_top < mean(group),
            "mean loss: likelihood group {:.4} should sit below {name} {:.4}",
            likelihood_top,
            mean(group)
        );
    }

    let wins = (0..10)
        .filter(|&r| kl_p[r] + tv_p[r] < stratified[r] + systematic[r])
        .count();
    assert!(
        wins >= 8,
        "likelihood group beat the stochastic baselines in only {wins}/10 replicates"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "volatility comparison took {elapsed:?}, budget is 5 min"
    );
    println!(
        "PASS criterion 5: likelihood-based selection dominates mean squared loss on \
         volatility data (kl_p {:.4}, tv_p {:.4} <= ml {:.4}, all below the weight \
         group; {wins}/10 replicate wins; {elapsed:?})",
        mean(&kl_p),
        mean(&tv_p),
        mean(&ml)
    );
}

#[test]
fn criterion_06_fifty_particles_match_five_hundred() {
    let base = {
        let mut config = ExperimentConfig::new(ExperimentKind::SvLoss);
        config.seed = 0;
        config.replicates = 50;
        config.step_counts = vec![500];
        config.estimators = vec![EstimatorKind::Sampled];
        config.losses = vec![LossName::Squared];
        config
    };
    let mut small = base.clone();
    small.particle_counts = vec![50];
    small.schemes = vec![SelectionScheme::KL_W, SelectionScheme::TV_W];
    let mut large = base;
    large.particle_counts = vec![500];
    large.schemes = vec![SelectionScheme::STRATIFIED, SelectionScheme::SYSTEMATIC];

    let small_rows = run_sv_loss(&small).expect("small-population grid runs");
    let large_rows = run_sv_loss(&large).expect("large-population grid runs");

    let kl_w = mean(&replicate_values(
        &small_rows,
        SelectionScheme::KL_W,
        50,
        EstimatorKind::Sampled,
        LossName::Squared,
    ));
    let tv_w = mean(&replicate_values(
        &small_rows,
        SelectionScheme::TV_W,
        50,
        EstimatorKind::Sampled,
        LossName::Squared,
    ));
    let stratified = mean(&replicate_values(
        &large_rows,
        SelectionScheme::STRATIFIED,
        500,
        EstimatorKind::Sampled,
        LossName::Squared,
    ));
    let systematic = mean(&replicate_values(
        &large_rows,
        SelectionScheme::SYSTEMATIC,
        500,
        EstimatorKind::Sampled,
        LossName::Squared,
    ));

    let baseline = stratified.min(systematic);
    assert!(
        tv_w < baseline,
        "sampled-trajectory loss: tv_w at 50 particles ({tv_w:.4}) should undercut the \
         stochastic baselines at 500 (stratified {stratified:.4}, systematic \
         {systematic:.4})"
    );
    assert!(
        kl_w < baseline * 1.02,
        "sampled-trajectory loss: kl_w at 50 particles ({kl_w:.4}) should at least match \
         the stochastic baselines at 500 (stratified {stratified:.4}, systematic \
         {systematic:.4})"
    );
    assert!(
        (kl_w + tv_w) / 2.0 < baseline,
        "sampled-trajectory loss: the deterministic pair at 50 particles (mean {:.4}) \
         should undercut the stochastic baselines at 500 ({baseline:.4})",
        (kl_w + tv_w) / 2.0
    );
    println!(
        "PASS criterion 6: deterministic selection with 50 particles matches stochastic \
         baselines with 500 (kl_w {kl_w:.4}, tv_w {tv_w:.4} vs {baseline:.4})"
    );
}

#[test]
fn criterion_07_pointwise_ml_fails_on_multimodal_data() {
    let mut config = ExperimentConfig::new(ExperimentKind::NlLoss);
    config.seed = 0;
    config.replicates = 10;
    config.particle_counts = vec![500];
    config.step_counts = vec![100];
    config.schemes = vec![SelectionScheme::ML, SelectionScheme::TV_P];
    config.estimators = vec![EstimatorKind::Mmae];
    config.losses = vec![LossName::Absolute];
    config.nl.thetas = vec![[1.0, 1.0]];
    config.nl.state_dump = None;
    let (rows, _) = run_nl_loss(&config).expect("nonlinear grid runs");

    let ml = replicate_values(&rows, SelectionScheme::ML, 500, EstimatorKind::Mmae, LossName::Absolute);
    let tv_p =
        replicate_values(&rows, SelectionScheme::TV_P, 500, EstimatorKind::Mmae, LossName::Absolute);
    let wins = ml.iter().zip(&tv_p).filter(|(m, t)| m > t).count();
    assert!(
        wins >= 9,
        "ml exceeded tv_p absolute loss in only {wins}/10 replicates \
         (ml mean {:.4}, tv_p mean {:.4})",
        mean(&ml),
        mean(&tv_p)
    );
    println!(
        "PASS criterion 7: greedy likelihood collapse loses to TV selection on the \
         multimodal benchmark in {wins}/10 replicates (ml {:.4} vs tv_p {:.4})",
        mean(&ml),
        mean(&tv_p)
    );
}

#[test]
fn criterion_08_small_population_tv_collapses_the_variance_chain() {
    let model = SvModel::new(1.0, 0.5, 0.91).expect("parameters are valid");
    let mut collapsed = 0;
    let mut medians = Vec::new();
    for seed in 0..10 {
        let (_, observations) =
            simulate(&model, 100, &mut data_stream(seed, 0).rng()).expect("simulation runs");
        let mut config = PgConfig::new(10, 1000, SelectionScheme::TV_P);
        config.burn_in = 0;
        let mut rng = filter_stream(seed, 0, SelectionScheme::TV_P).rng();
        let record = particle_gibbs(&observations, &config, &PgPriors::default(), &mut rng)
            .expect("chain runs");
        let median =
            chain_median(&record.sigma2, record.sigma2.len()).expect("chain is non-empty");
        medians.push(median);
        if median < 0.1 {
            collapsed += 1;
        }
    }
    assert!(
        collapsed >= 9,
        "variance chain collapsed below 0.1 in only {collapsed}/10 seeds \
         (true value 1.0, medians {medians:.3?})"
    );
    println!(
        "PASS criterion 8: ten-particle TV selection collapses the Gibbs variance chain \
         far below the true value in {collapsed}/10 seeds"
    );
}

#[test]
fn criterion_09_variance_draws_match_the_conjugate_posterior() {
    let prior = IgPrior::default();
    let (shape, rate) = sigma2_posterior(&[1.0, 0.5], 0.5, &prior).expect("posterior is defined");
    assert_eq!(shape, 1.001, "worked-example shape");
    assert_eq!(rate, 0.376, "worked-example rate");

    let mut rng = RngStream::new(1234, 0).rng();
    let trajectory: Vec<f64> = (0..40)
        .map(|_| 2.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let phi = 0.5;
    let (shape, rate) = sigma2_posterior(&trajectory, phi, &prior).expect("posterior is defined");
    let analytic = InverseGamma::new(shape, rate).expect("posterior parameters are positive");

    let mut draws: Vec<f64> = (0..10_000)
        .map(|_| sample_sigma2(&trajectory, phi, &prior, &mut rng).expect("draw succeeds"))
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
    let n = draws.len() as f64;
    let mut statistic: f64 = 0.0;
    for (i, &x) in draws.iter().enumerate() {
        let cdf = analytic.cdf(x);
        statistic = statistic
            .max((cdf - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - cdf).abs());
    }
    assert!(
        statistic < KS_CRITICAL_N_1E4,
        "KS statistic {statistic:.5} exceeds the 1% critical value {KS_CRITICAL_N_1E4}"
    );
    println!(
        "PASS criterion 9: 10000 variance draws pass the KS test against the analytic \
         inverse gamma posterior (D {statistic:.5} < {KS_CRITICAL_N_1E4}) and the worked \
         example is exact"
    );
}

#[test]
fn criterion_10_conditional_sweep_pins_the_reference() {
    let mut rng = RngStream::new(77, 0).rng();
    let schemes = SelectionScheme::all();
    for case in 0..100 {
        let sigma = rng.random_range(0.3..2.0);
        let beta = rng.random_range(0.2..1.5);
        let phi = rng.random_range(-0.95..0.95);
        let model = SvModel::new(sigma, beta, phi).expect("parameters are valid");
        let steps = rng.random_range(2..=30);
        let particles = rng.random_range(1..=16);
        let scheme = schemes[rng.random_range(0..schemes.len())];
        let (_, observations) = simulate(&model, steps, &mut rng).expect("simulation runs");
        let (reference, _) = simulate(&model, steps, &mut rng).expect("simulation runs");

        let config = FilterConfig::new(particles, scheme);
        let (trajectory, output) =
            csmc_sweep(&model, &observations, &config, &reference, &mut rng)
                .expect("conditional sweep runs");
        for (step, &value) in reference.iter().enumerate() {
            assert_eq!(
                output.stored_states[step][particles - 1],
                value,
                "case {case} ({scheme}, {particles} particles): conditioned slot moved at \
                 step {step}"
            );
        }
        if particles == 1 {
            assert_eq!(trajectory, reference, "case {case}: lone particle must replay");
        }
    }

    let model = SvModel::new(1.0, 0.5, 0.91).expect("parameters are valid");
    for scheme in schemes {
        let (_, observations) = simulate(&model, 12, &mut rng).expect("simulation runs");
        let (reference, _) = simulate(&model, 12, &mut rng).expect("simulation runs");
        let config = FilterConfig::new(1, scheme);
        let (trajectory, _) = csmc_sweep(&model, &observations, &config, &reference, &mut rng)
            .expect("conditional sweep runs");
        assert_eq!(trajectory, reference, "{scheme}: lone particle must replay");
    }
    println!(
        "PASS criterion 10: the conditioned slot replays the reference at every step over \
         100 random sweeps, and single-particle sweeps return it verbatim for all schemes"
    );
}

#[test]
fn criterion_11_gibbs_chain_recovers_plausible_volatility_parameters() {
    let start = Instant::now();
    let model = SvModel::new(1.0, 0.5, 0.91).expect("parameters are valid");
    let (_, observations) =
        simulate(&model, 100, &mut data_stream(3, 0).rng()).expect("simulation runs");
    let config = PgConfig::new(100, 2000, SelectionScheme::KL_W);
    let mut rng = filter_stream(3, 0, SelectionScheme::KL_W).rng();
    let record =
        particle_gibbs(&observations, &config, &PgPriors::default(), &mut rng).expect("chain runs");

    for (name, chain) in [
        ("sigma2", &record.sigma2),
        ("beta2", &record.beta2),
        ("phi", &record.phi),
    ] {
        assert!(
            chain.iter().all(|value| value.is_finite()),
            "{name} chain contains a non-finite draw"
        );
        let rho = acf(chain, 10).expect("chain autocorrelation is defined");
        assert_eq!(rho[0], 1.0, "{name} autocorrelation at lag 0");
    }
    let sigma2_median =
        chain_median(&record.sigma2, record.sigma2.len()).expect("chain is non-empty");
    let phi_median = chain_median(&record.phi, record.phi.len()).expect("chain is non-empty");
    assert!(
        sigma2_median > 0.1 && sigma2_median < 10.0,
        "sigma2 median {sigma2_median:.3} left the plausible band (0.1, 10)"
    );
    assert!(
        phi_median > 0.5 && phi_median < 1.0,
        "phi median {phi_median:.3} left the plausible band (0.5, 1)"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 600.0,
        "Gibbs run took {elapsed:?}, budget is 10 min"
    );
    println!(
        "PASS criterion 11: the Gibbs chain stays finite and lands in plausible bands \
         (sigma2 median {sigma2_median:.3}, phi median {phi_median:.3}; {elapsed:?})"
    );
}

#[test]
fn criterion_12_autocorrelation_suite() {
    let arbitrary = [0.3, 1.7, -0.4, 2.2, 0.9, -1.1, 0.5];
    let rho = acf(&arbitrary, 3).expect("chain autocorrelation is defined");
    assert_eq!(rho[0], 1.0, "lag-0 autocorrelation");

    let length = 1000;
    let alternating: Vec<f64> = (0..length).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let rho = acf(&alternating, 1).expect("chain autocorrelation is defined");
    assert!(
        (rho[1] + 1.0).abs() <= 2.0 / length as f64,
        "alternating-series lag-1 autocorrelation {:.6} is not within 2/M of -1",
        rho[1]
    );

    let mut rng = RngStream::new(9, 0).rng();
    let noise: Vec<f64> = (0..100_000)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let rho = acf(&noise, 20).expect("chain autocorrelation is defined");
    for (lag, &value) in rho.iter().enumerate().skip(1) {
        assert!(
            value.abs() < 0.02,
            "white-noise autocorrelation at lag {lag} is {value:.4}"
        );
    }
    println!(
        "PASS criterion 12: autocorrelation is exactly 1 at lag 0, -1 within 2/M on an \
         alternating series, and below 0.02 through lag 20 on white noise"
    );
}
