use std::collections::HashSet;

use approx::assert_relative_eq;
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_bht::baselines::{
    exhaustive_oracle, matching_pursuit, orthogonal_matching_pursuit,
    orthogonal_matching_pursuit_detailed, GreedyConfig,
};
use sparse_bht::error::Error;
use sparse_bht::linalg::norm2;
use sparse_bht::model::{dct_matrix, sample_dictionary, Dictionary, ProblemInstance};

fn instance_from(dictionary: Dictionary<f64>, x: Array1<f64>) -> ProblemInstance<f64> {
    ProblemInstance {
        dictionary,
        x,
        truth: None,
        seed: 0,
    }
}

fn random_vector(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(n, |_| 2.0 * rng.random::<f64>() - 1.0)
}

fn budget(max_atoms: usize) -> GreedyConfig<f64> {
    GreedyConfig {
        max_atoms,
        residual_tol: 0.0,
    }
}

fn residual_norm(inst: &ProblemInstance<f64>, y: &Array1<f64>) -> f64 {
    norm2(&(&inst.x - &inst.dictionary.phi().dot(y)))
}

// --------------------------------------------------------- matching pursuit

#[test]
fn matching_pursuit_recovers_a_single_atom_in_one_step() {
    let dict = sample_dictionary::<f64>(8, 12, 11).unwrap();
    let x = dict.atom(5).to_owned() * 2.0;
    let inst = instance_from(dict, x);
    // A tiny residual tolerance stops the pursuit once the atom is fitted;
    // with an exact zero tolerance it would keep chasing rounding residue.
    let config = GreedyConfig {
        max_atoms: 12,
        residual_tol: 1e-12,
    };
    let y = matching_pursuit(&inst, &config).unwrap();
    assert_relative_eq!(y[5], 2.0, max_relative = 1e-12);
    for j in (0..12).filter(|&j| j != 5) {
        assert_eq!(y[j], 0.0);
    }
}

#[test]
fn matching_pursuit_on_orthonormal_atoms_reaches_the_analysis_coefficients() {
    let dict = Dictionary::new(dct_matrix::<f64>(8)).unwrap();
    let x = random_vector(8, 110);
    let z = dict.phi().t().dot(&x);
    let inst = instance_from(dict, x);
    let y = matching_pursuit(&inst, &budget(8)).unwrap();
    for j in 0..8 {
        assert_relative_eq!(y[j], z[j], max_relative = 1e-10, epsilon = 1e-12);
    }
    assert!(residual_norm(&inst, &y) < 1e-10);
}

#[test]
fn matching_pursuit_residual_never_grows_with_more_steps() {
    let dict = sample_dictionary::<f64>(8, 12, 12).unwrap();
    let inst = instance_from(dict, random_vector(8, 120));
    let mut last = norm2(&inst.x);
    for k in 1..=8 {
        let y = matching_pursuit(&inst, &budget(k)).unwrap();
        let r = residual_norm(&inst, &y);
        assert!(r <= last + 1e-12, "residual grew at step {k}: {r} > {last}");
        last = r;
    }
}

#[test]
fn matching_pursuit_breaks_ties_toward_the_lower_index() {
    let dict = Dictionary::new(Array2::<f64>::eye(4)).unwrap();
    let x = array![1.0, 1.0, 0.0, 0.0];
    let inst = instance_from(dict, x);
    let y = matching_pursuit(&inst, &budget(1)).unwrap();
    assert_eq!(y[0], 1.0, "tied correlations must resolve to the first atom");
    assert_eq!(y[1], 0.0);
}

#[test]
fn matching_pursuit_respects_the_selection_budget() {
    let dict = sample_dictionary::<f64>(8, 12, 13).unwrap();
    let inst = instance_from(dict, random_vector(8, 130));
    let y = matching_pursuit(&inst, &budget(3)).unwrap();
    let nonzero = y.iter().filter(|&&v| v != 0.0).count();
    assert!(nonzero <= 3, "budget 3 produced {nonzero} distinct atoms");
}

#[test]
fn greedy_config_rejects_bad_budgets() {
    let dict = sample_dictionary::<f64>(8, 12, 13).unwrap();
    let inst = instance_from(dict, random_vector(8, 131));
    assert!(matches!(
        matching_pursuit(&inst, &budget(13)),
        Err(Error::InvalidParameter { name: "max_atoms", .. })
    ));
    let bad_tol = GreedyConfig {
        max_atoms: 4,
        residual_tol: -1.0,
    };
    assert!(matches!(
        orthogonal_matching_pursuit(&inst, &bad_tol),
        Err(Error::InvalidParameter { name: "residual_tol", .. })
    ));
    let defaults = GreedyConfig::<f64>::default();
    assert_eq!(defaults.max_atoms, 102);
    assert_eq!(defaults.residual_tol, 0.0);
}

// ------------------------------------------------ orthogonal matching pursuit

#[test]
fn omp_recovers_a_single_atom_in_one_step() {
    let dict = sample_dictionary::<f64>(8, 12, 11).unwrap();
    let x = dict.atom(5).to_owned() * 2.0;
    let inst = instance_from(dict, x);
    let config = GreedyConfig {
        max_atoms: 12,
        residual_tol: 1e-12,
    };
    let out = orthogonal_matching_pursuit_detailed(&inst, &config).unwrap();
    assert_eq!(out.selected, vec![5]);
    assert!(out.skipped.is_empty());
    assert_relative_eq!(out.y_hat[5], 2.0, max_relative = 1e-12);
}

#[test]
fn omp_residual_is_orthogonal_to_the_selected_span() {
    let dict = sample_dictionary::<f64>(8, 12, 14).unwrap();
    let inst = instance_from(dict, random_vector(8, 140));
    let out = orthogonal_matching_pursuit_detailed(&inst, &budget(4)).unwrap();
    assert_eq!(out.selected.len(), 4);
    let resid = &inst.x - &inst.dictionary.phi().dot(&out.y_hat);
    for &j in &out.selected {
        let corr: f64 = inst.dictionary.atom(j).dot(&resid);
        assert!(
            corr.abs() < 1e-9,
            "atom {j} still correlates with the residual: {corr}"
        );
    }
}

#[test]
fn omp_never_reselects_and_keeps_shrinking_the_residual() {
    let dict = sample_dictionary::<f64>(8, 12, 15).unwrap();
    let inst = instance_from(dict, random_vector(8, 150));
    let mut last = norm2(&inst.x);
    let mut last_count = 0;
    for k in 1..=6 {
        let out = orthogonal_matching_pursuit_detailed(&inst, &budget(k)).unwrap();
        let distinct: HashSet<usize> = out.selected.iter().cloned().collect();
        assert_eq!(distinct.len(), out.selected.len(), "atom selected twice");
        let r = residual_norm(&inst, &out.y_hat);
        if out.selected.len() > last_count {
            assert!(r < last, "adding an atom must strictly shrink the residual");
        }
        last = r;
        last_count = out.selected.len();
    }
}

#[test]
fn omp_skips_candidates_that_collapse_the_active_gram() {
    // Two atoms whose float Gram is exactly singular: the second atom differs
    // from the first by 1e-9 in one coordinate, which rounds away in the
    // inner products. Selecting both must be refused, not mis-solved.
    let phi = array![[1.0, 1.0], [0.0, 1e-9]];
    let dict = Dictionary::new(phi).unwrap();
    let x = array![0.0, 1.0];
    let inst = instance_from(dict, x);
    let out = orthogonal_matching_pursuit_detailed(&inst, &budget(2)).unwrap();
    assert_eq!(out.selected, vec![1], "only the correlated atom may be kept");
    assert_eq!(out.skipped, vec![0], "the collapsing candidate must be recorded");
    assert_eq!(out.y_hat[0], 0.0);
}

#[test]
fn omp_matches_the_exhaustive_oracle_on_an_easy_instance() {
    let dict = sample_dictionary::<f64>(8, 12, 14).unwrap();
    let x = dict.atom(2).to_owned() * 1.0 + dict.atom(9).to_owned() * 0.8;
    let inst = instance_from(dict, x);
    let out = orthogonal_matching_pursuit_detailed(&inst, &budget(2)).unwrap();
    let mut greedy: Vec<usize> = out.selected.clone();
    greedy.sort_unstable();
    let (oracle_support, oracle_y) = exhaustive_oracle(&inst, 2, 1.0, 1e-6).unwrap();
    assert_eq!(greedy, oracle_support);
    assert_eq!(oracle_support, vec![2, 9]);
    for j in oracle_support {
        assert_relative_eq!(out.y_hat[j], oracle_y[j], max_relative = 1e-5);
    }
}

// ---------------------------------------------------------- exhaustive oracle

#[test]
fn exhaustive_oracle_finds_planted_supports() {
    let dict = sample_dictionary::<f64>(8, 12, 16).unwrap();

    let single = instance_from(dict.clone(), dict.atom(4).to_owned() * 3.0);
    let (support, y) = exhaustive_oracle(&single, 1, 1.0, 1e-6).unwrap();
    assert_eq!(support, vec![4]);
    assert_relative_eq!(y[4], 3.0, max_relative = 1e-5);

    let pair_x = dict.atom(1).to_owned() * 1.2 - dict.atom(7).to_owned() * 0.7;
    let pair = instance_from(dict, pair_x);
    let (support, y) = exhaustive_oracle(&pair, 2, 1.0, 1e-6).unwrap();
    assert_eq!(support, vec![1, 7]);
    assert_relative_eq!(y[1], 1.2, max_relative = 1e-5);
    assert_relative_eq!(y[7], -0.7, max_relative = 1e-5);
}

#[test]
fn exhaustive_oracle_keeps_the_empty_support_for_a_zero_observation() {
    let dict = sample_dictionary::<f64>(8, 12, 16).unwrap();
    let inst = instance_from(dict, Array1::zeros(8));
    let (support, y) = exhaustive_oracle(&inst, 2, 1.0, 1e-6).unwrap();
    assert!(support.is_empty());
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn exhaustive_oracle_enforces_its_size_caps() {
    let wide = sample_dictionary::<f64>(10, 21, 17).unwrap();
    let inst = instance_from(wide, random_vector(10, 170));
    assert!(matches!(
        exhaustive_oracle(&inst, 2, 1.0, 1e-6),
        Err(Error::SizeLimit { name: "m", max: 20, found: 21 })
    ));

    let dict = sample_dictionary::<f64>(8, 12, 16).unwrap();
    let inst = instance_from(dict, random_vector(8, 171));
    assert!(matches!(
        exhaustive_oracle(&inst, 5, 1.0, 1e-6),
        Err(Error::SizeLimit { name: "k_max", max: 4, found: 5 })
    ));
}
