use approx::assert_relative_eq;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_bht::baselines::{matching_pursuit, orthogonal_matching_pursuit, GreedyConfig};
use sparse_bht::bhta::{hard_bhta, soft_bhta, SolverConfig};
use sparse_bht::codec::{
    corrupt, decode, decode_with_dictionary, decoder_dictionary, encode, make_code,
};
use sparse_bht::error::Error;
use sparse_bht::model::SpikyPrior;
use sparse_bht::operators::min_l2_solution;

fn random_message(len: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(len, |_| 2.0 * rng.random::<f64>() - 1.0)
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn max_abs2(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn greedy_budget(max_atoms: usize) -> GreedyConfig<f64> {
    GreedyConfig {
        max_atoms,
        residual_tol: 1e-10,
    }
}

// -------------------------------------------------------------- construction

#[test]
fn make_code_produces_a_consistent_triple() {
    let code = make_code::<f64>(64, 128, 7).unwrap();
    assert_eq!(code.msg_len(), 64);
    assert_eq!(code.codeword_len(), 128);
    assert_eq!(code.g.dim(), (128, 64));
    assert_eq!(code.h_pc.dim(), (64, 128));
    assert_eq!(code.g_pinv.dim(), (64, 128));
    assert_eq!(code.seed, 7);

    // Parity check annihilates the generator.
    let hg = code.h_pc.dot(&code.g);
    assert!(max_abs2(&hg) <= 1e-10, "parity check does not annihilate G");

    // Left inverse on message space.
    let pg = code.g_pinv.dot(&code.g);
    assert!(max_abs2(&(&pg - &Array2::<f64>::eye(64))) < 1e-8);

    // Orthonormal parity-check rows.
    let hht = code.h_pc.dot(&code.h_pc.t());
    assert!(max_abs2(&(&hht - &Array2::<f64>::eye(64))) < 1e-10);
}

#[test]
fn make_code_is_deterministic_per_seed() {
    let a = make_code::<f64>(16, 32, 40).unwrap();
    let b = make_code::<f64>(16, 32, 40).unwrap();
    assert_eq!(a.g, b.g);
    assert_eq!(a.h_pc, b.h_pc);
    let c = make_code::<f64>(16, 32, 41).unwrap();
    assert_ne!(a.g, c.g);
}

#[test]
fn make_code_validates_dimensions() {
    assert!(matches!(
        make_code::<f64>(0, 8, 0),
        Err(Error::InvalidParameter { name: "msg_len", .. })
    ));
    assert!(matches!(
        make_code::<f64>(8, 8, 0),
        Err(Error::InvalidParameter { name: "codeword_len", .. })
    ));
    assert!(make_code::<f64>(16, 8, 0).is_err());
}

// -------------------------------------------------------------------- encode

#[test]
fn encode_is_linear_and_checks_lengths() {
    let code = make_code::<f64>(16, 32, 42).unwrap();
    let s1 = random_message(16, 1);
    let s2 = random_message(16, 2);
    let both = encode(&code, &(&s1 + &s2)).unwrap();
    let sum = encode(&code, &s1).unwrap() + encode(&code, &s2).unwrap();
    assert!(max_abs(&(&both - &sum)) < 1e-12);

    let zero = encode(&code, &Array1::zeros(16)).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));

    assert!(matches!(
        encode(&code, &Array1::zeros(15)),
        Err(Error::DimMismatch { expected: 16, found: 15, .. })
    ));
}

// ------------------------------------------------------------------- channel

#[test]
fn corrupt_is_deterministic_and_respects_the_prior() {
    let code = make_code::<f64>(16, 32, 43).unwrap();
    let cw = encode(&code, &random_message(16, 3)).unwrap();

    // A prior with essentially certain inactivity and no background leaves
    // the codeword untouched.
    let silent = SpikyPrior::new(1.0 - 1e-12, 1.0).unwrap();
    let (received, channel) = corrupt(&cw, &silent, 0.0, 44).unwrap();
    assert!(channel.impulse_errors.iter().all(|&v| v == 0.0));
    assert!(channel.background.iter().all(|&v| v == 0.0));
    assert_eq!(received, cw);

    // Same seed, same draw; different seed, different draw.
    let noisy = SpikyPrior::new(0.8, 1.0).unwrap();
    let (r1, _) = corrupt(&cw, &noisy, 0.1, 45).unwrap();
    let (r2, _) = corrupt(&cw, &noisy, 0.1, 45).unwrap();
    assert_eq!(r1, r2);
    let (r3, _) = corrupt(&cw, &noisy, 0.1, 46).unwrap();
    assert_ne!(r1, r3);

    assert!(corrupt(&cw, &noisy, -0.1, 45).is_err());
}

#[test]
fn impulse_rate_tracks_the_prior_over_many_blocks() {
    let cw = Array1::<f64>::zeros(128);
    let prior = SpikyPrior::new(0.8, 1.0).unwrap();
    let mut total = 0usize;
    let blocks = 1000;
    for seed in 0..blocks {
        let (_, channel) = corrupt(&cw, &prior, 0.0, seed).unwrap();
        total += channel.impulse_errors.iter().filter(|&&v| v != 0.0).count();
    }
    let mean = total as f64 / blocks as f64;
    // 128 positions at activity 0.2: mean 25.6, standard error ~0.143.
    assert!(
        (mean - 25.6).abs() < 0.6,
        "mean impulse count {mean} departs from 25.6"
    );
}

// -------------------------------------------------------------------- decode

#[test]
fn clean_blocks_decode_exactly_with_every_solver() {
    let code = make_code::<f64>(16, 32, 47).unwrap();
    let s = random_message(16, 4);
    let received = encode(&code, &s).unwrap();

    let solvers: Vec<(&str, Box<dyn Fn(&sparse_bht::model::ProblemInstance<f64>) -> sparse_bht::error::Result<Array1<f64>>>)> = vec![
        (
            "hard",
            Box::new(|inst| hard_bhta(inst, &SolverConfig::default()).map(|r| r.y_hat)),
        ),
        (
            "soft",
            Box::new(|inst| {
                let mut config = SolverConfig::default();
                config.variant = sparse_bht::bhta::SolverVariant::Soft;
                soft_bhta(inst, &config).map(|r| r.y_hat)
            }),
        ),
        (
            "mp",
            Box::new(|inst| matching_pursuit(inst, &greedy_budget(8))),
        ),
        (
            "omp",
            Box::new(|inst| orthogonal_matching_pursuit(inst, &greedy_budget(8))),
        ),
        (
            "minl2",
            Box::new(|inst| min_l2_solution(&inst.dictionary, &inst.x)),
        ),
    ];
    for (name, solve) in solvers {
        let s_hat = decode(&received, &code, solve).unwrap();
        let err = max_abs(&(&s_hat - &s));
        assert!(err < 1e-6, "{name} decoder error {err} on a clean block");
    }
}

#[test]
fn single_impulses_are_corrected_at_every_position() {
    let code = make_code::<f64>(128, 256, 48).unwrap();
    let s = random_message(128, 5);
    let clean = encode(&code, &s).unwrap();
    let (dict, norms) = decoder_dictionary(&code).unwrap();

    let omp = |inst: &sparse_bht::model::ProblemInstance<f64>| {
        orthogonal_matching_pursuit(inst, &greedy_budget(4))
    };
    for pos in 0..256 {
        let mut received = clean.clone();
        received[pos] += if pos % 2 == 0 { 3.0 } else { -2.0 };
        let s_hat = decode_with_dictionary(&received, &code, &dict, &norms, omp).unwrap();
        let err = max_abs(&(&s_hat - &s));
        assert!(err < 1e-6, "impulse at {pos} left error {err}");
    }
}

#[test]
fn single_impulses_are_corrected_by_the_hypothesis_solver() {
    let code = make_code::<f64>(128, 256, 48).unwrap();
    let s = random_message(128, 6);
    let clean = encode(&code, &s).unwrap();
    let (dict, norms) = decoder_dictionary(&code).unwrap();

    let hard = |inst: &sparse_bht::model::ProblemInstance<f64>| {
        hard_bhta(inst, &SolverConfig::default()).map(|r| r.y_hat)
    };
    for (i, pos) in [0usize, 50, 128, 200, 255].into_iter().enumerate() {
        let mut received = clean.clone();
        received[pos] += if i % 2 == 0 { 1.0 } else { -1.0 };
        let s_hat = decode_with_dictionary(&received, &code, &dict, &norms, hard).unwrap();
        let err = max_abs(&(&s_hat - &s));
        assert!(err < 1e-6, "impulse at {pos} left error {err}");
    }
}

#[test]
fn decoding_commutes_with_message_translation() {
    let code = make_code::<f64>(16, 32, 49).unwrap();
    let s = random_message(16, 7);
    let prior = SpikyPrior::new(0.9, 1.0).unwrap();
    let (received, _) = corrupt(&encode(&code, &s).unwrap(), &prior, 0.0, 50).unwrap();

    let omp = |inst: &sparse_bht::model::ProblemInstance<f64>| {
        orthogonal_matching_pursuit(inst, &greedy_budget(8))
    };
    let base = decode(&received, &code, omp).unwrap();

    let delta = random_message(16, 8);
    let shifted = &received + &encode(&code, &delta).unwrap();
    let translated = decode(&shifted, &code, omp).unwrap();
    let err = max_abs(&(&translated - &(&base + &delta)));
    assert!(err < 1e-8, "translation broke decoding by {err}");
}

#[test]
fn background_noise_passes_through_an_identity_correction() {
    let code = make_code::<f64>(16, 32, 51).unwrap();
    let s = random_message(16, 9);
    let cw = encode(&code, &s).unwrap();
    let silent = SpikyPrior::new(1.0 - 1e-12, 1.0).unwrap();
    let (received, channel) = corrupt(&cw, &silent, 0.3, 52).unwrap();

    // A solver that never corrects anything exposes the raw projection:
    // the message error is exactly the projected background.
    let null_solver =
        |_: &sparse_bht::model::ProblemInstance<f64>| Ok(Array1::<f64>::zeros(32));
    let s_hat = decode(&received, &code, null_solver).unwrap();
    let expected = &s + &code.g_pinv.dot(&channel.background);
    for i in 0..16 {
        assert_relative_eq!(s_hat[i], expected[i], max_relative = 1e-10, epsilon = 1e-12);
    }
}

#[test]
fn decode_rejects_wrong_block_lengths() {
    let code = make_code::<f64>(16, 32, 53).unwrap();
    let short = Array1::<f64>::zeros(31);
    let omp = |inst: &sparse_bht::model::ProblemInstance<f64>| {
        orthogonal_matching_pursuit(inst, &greedy_budget(8))
    };
    assert!(matches!(
        decode(&short, &code, omp),
        Err(Error::DimMismatch { expected: 32, found: 31, .. })
    ));
}
