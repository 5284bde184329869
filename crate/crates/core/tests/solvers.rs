use gbc_alloc::gen::{generate, generate_separable};
use gbc_alloc::model::{self, objective_value, Rule};
use gbc_alloc::oracle::{solve_bruteforce, solve_bruteforce_detailed, solve_exhaustive};
use gbc_alloc::qrap::QrapProblem;
use gbc_alloc::{
    solve, solve_binary, solve_separable_instance, solve_sequential, Algorithm, Error, Instance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn max_diff(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).fold(0.0, |d, (x, y)| d.max((x - y).abs()))
}

fn symmetric_pair() -> Instance {
    Instance::with_blocks(
        &[2],
        vec![1.0, 1.0],
        vec![0.0, 0.0],
        vec![1.0],
        vec![-1.0, -1.0],
        vec![1.0, 1.0],
        vec![-2.0],
        vec![2.0],
        1.0,
    )
    .unwrap()
}

#[test]
fn every_algorithm_solves_the_symmetric_pair() {
    for alg in [Algorithm::Seq, Algorithm::Bin, Algorithm::Oracle] {
        let sol = solve(&symmetric_pair(), alg).unwrap();
        assert!(max_diff(&sol.x, &[0.5, 0.5]) < 1e-12, "{alg:?}: {:?}", sol.x);
        assert!((sol.lambda_star + 1.5).abs() < 1e-12);
        assert!((sol.objective - 0.75).abs() < 1e-12);
    }
    assert!(matches!(
        solve(&symmetric_pair(), Algorithm::Separable),
        Err(Error::NotSeparable { .. })
    ));
}

#[test]
fn decomposed_oracle_matches_literal_enumeration() {
    for seed in 0..60 {
        let (c, m) = [(1, 1), (2, 1), (1, 3), (2, 2), (3, 2), (2, 3)][seed as usize % 6];
        let inst = generate(c, m, 300 + seed).instance;
        let fast = solve_bruteforce_detailed(&inst).unwrap();
        let slow = solve_exhaustive(&inst).unwrap();
        assert!(
            max_diff(&fast.solution.x, &slow.solution.x) < 1e-9,
            "seed {seed}: {:?} vs {:?}",
            fast.solution.x,
            slow.solution.x
        );
        assert!(fast.solution.kkt_residual <= 1e-9, "seed {seed}: {}", fast.solution.kkt_residual);
        assert!(slow.solution.kkt_residual <= 1e-9);
    }
}

#[test]
fn oracle_matches_solvers_with_up_to_twelve_variables() {
    for (c, m) in [(12, 1), (6, 2), (4, 3), (3, 4)] {
        for seed in 0..3 {
            let inst = generate(c, m, 40 + seed).instance;
            let oracle = solve_bruteforce(&inst).unwrap();
            let seq = solve_sequential(&inst).unwrap();
            let bin = solve_binary(&inst).unwrap();
            assert!(max_diff(&oracle.x, &seq.x) < 1e-6, "C={c} m={m}");
            assert!(max_diff(&oracle.x, &bin.x) < 1e-6, "C={c} m={m}");
        }
    }
}

/// Random feasible point: subset sums by projecting a random target onto
/// the resource simplex, then each subset's sum spread by a separable
/// allocation with random linear terms.
fn random_feasible(inst: &Instance, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let m = inst.m();
    let widths: Vec<f64> = (0..m).map(|j| inst.subset_upper()[j] - inst.subset_lower()[j]).collect();
    let zeros = vec![0.0; m];
    let ones = vec![1.0; m];
    let pull: Vec<f64> = widths.iter().map(|w| -rng.gen_range(0.0..=1.0) * w).collect();
    let slack = inst.resource() - inst.subset_lower().iter().sum::<f64>();
    let extra = QrapProblem::new(&ones, &pull, &zeros, &widths, slack).solve().unwrap().x;
    let mut x = vec![0.0; inst.n()];
    for (j, slack_j) in extra.iter().enumerate() {
        let idx = inst.members(j);
        let gather = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let k = idx.len();
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let target = inst.subset_lower()[j] + slack_j;
        let xj = QrapProblem::new(&vec![1.0; k], &b, &gather(inst.l()), &gather(inst.u()), target)
            .solve()
            .unwrap()
            .x;
        for (p, &i) in idx.iter().enumerate() {
            x[i] = xj[p];
        }
    }
    x
}

#[test]
fn oracle_beats_random_feasible_points() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for seed in 0..10 {
        let inst = generate(3, 3, 800 + seed).instance;
        let best = solve_bruteforce(&inst).unwrap().objective;
        for _ in 0..1000 {
            let x = random_feasible(&inst, &mut rng);
            let total: f64 = x.iter().sum();
            assert!((total - inst.resource()).abs() < 1e-8);
            let obj = objective_value(&inst, &x).unwrap();
            assert!(best <= obj + 1e-9 * obj.abs().max(1.0), "seed {seed}: {best} > {obj}");
        }
    }
}

#[test]
fn resource_at_extremes_gives_tightened_corner() {
    for seed in 0..20 {
        let base = generate(4, 5, 60 + seed).instance;
        for (resource, sums) in [
            (base.subset_upper().iter().sum::<f64>(), base.subset_upper().to_vec()),
            (base.subset_lower().iter().sum::<f64>(), base.subset_lower().to_vec()),
        ] {
            let inst = base.with_resource(resource);
            for sol in [solve_sequential(&inst).unwrap(), solve_binary(&inst).unwrap()] {
                let y = inst.subset_sums(&sol.x);
                assert!(max_diff(&y, &sums) < 1e-9, "seed {seed}");
                assert!(sol.kkt_residual <= 1e-8);
            }
        }
    }
}

#[test]
fn fixed_variables_and_flat_segments() {
    // Every variable fixed: the total is flat in the multiplier.
    let inst = Instance::with_blocks(
        &[2, 1],
        vec![1.0, 2.0, 3.0],
        vec![0.0, 1.0, -1.0],
        vec![0.5, -0.1],
        vec![1.0, -1.0, 2.0],
        vec![1.0, -1.0, 2.0],
        vec![0.0, 2.0],
        vec![0.0, 2.0],
        2.0,
    )
    .unwrap();
    for sol in [solve_sequential(&inst).unwrap(), solve_binary(&inst).unwrap()] {
        assert_eq!(sol.x, vec![1.0, -1.0, 2.0]);
    }

    // Equal coefficients produce tied breakpoints across subsets.
    let inst = Instance::with_blocks(
        &[2, 2, 2],
        vec![1.0; 6],
        vec![0.0; 6],
        vec![0.0, 0.0, 0.0],
        vec![0.0; 6],
        vec![1.0; 6],
        vec![0.0; 3],
        vec![2.0; 3],
        3.0,
    )
    .unwrap();
    for sol in [solve_sequential(&inst).unwrap(), solve_binary(&inst).unwrap()] {
        assert!(max_diff(&sol.x, &[0.5; 6]) < 1e-12, "{:?}", sol.x);
    }
}

#[test]
fn negative_coupling_with_positive_margin() {
    let inst = Instance::with_blocks(
        &[3, 3],
        vec![300.0; 6],
        vec![-50.0, 10.0, 0.0, 5.0, 5.0, -20.0],
        vec![-98.0, -98.0],
        vec![-3.0; 6],
        vec![3.0; 6],
        vec![0.0, 0.0],
        vec![6.0, 6.0],
        8.0,
    )
    .unwrap();
    assert!(model::validate(&inst).ok);
    let oracle = solve_bruteforce(&inst).unwrap();
    for sol in [solve_sequential(&inst).unwrap(), solve_binary(&inst).unwrap()] {
        assert!(max_diff(&sol.x, &oracle.x) < 1e-9);
        assert!(sol.kkt_residual <= 1e-8);
    }
}

#[test]
fn invalid_instances_are_refused() {
    let not_convex = Instance::with_blocks(
        &[3],
        vec![3.0; 3],
        vec![0.0; 3],
        vec![-1.0],
        vec![-1.0; 3],
        vec![1.0; 3],
        vec![-3.0],
        vec![3.0],
        0.0,
    )
    .unwrap();
    for alg in [Algorithm::Seq, Algorithm::Bin, Algorithm::Oracle] {
        match solve(&not_convex, alg) {
            Err(Error::Invalid(report)) => {
                assert!(report.violations.iter().any(|v| v.rule == Rule::NotStrictlyConvex && v.index == 0));
            }
            other => panic!("{alg:?}: expected validation failure, got {other:?}"),
        }
    }
    let infeasible = symmetric_pair().with_resource(5.0);
    assert!(matches!(solve_sequential(&infeasible), Err(Error::Invalid(_))));
}

#[test]
fn separable_instances_agree_with_general_solvers() {
    for seed in 0..30 {
        let inst = generate_separable(5, 8, seed);
        let sep = solve_separable_instance(&inst).unwrap();
        let seq = solve_sequential(&inst).unwrap();
        assert!(max_diff(&sep.x, &seq.x) < 1e-8);
        assert!(sep.kkt_residual <= 1e-8);
    }
}
