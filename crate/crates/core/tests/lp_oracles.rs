//! Hand-derived and greedy-fill oracle checks for the matching solver.

mod common;

use common::*;
use matchsp_core::lp::{
    check_complementary_slackness, is_degenerate, solve_matching, solve_matching_reference,
    solve_matching_sparse,
};
use matchsp_core::{Edge, Mat, MatchingInstance};

#[test]
fn geometric_family_matches_greedy_fill() {
    let inst = geometric_instance();
    let values = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625];
    let s = geometric_supply();
    for d in [0.0, 0.5, 1.5, 2.5, 3.5, 4.25, 5.5, 10.0] {
        let sol = solve_matching(&inst, &[d], &s).unwrap();
        let want = greedy_single_type(&values, &s, d);
        assert_close(sol.objective, want, 1e-12, &format!("phi at d={d}"));
    }
}

#[test]
fn geometric_mid_demand_duals() {
    let inst = geometric_instance();
    let sol = solve_matching(&inst, &[3.5], &geometric_supply()).unwrap();
    assert_close(sol.objective, 3.625, 1e-12, "objective");
    assert_close(sol.a[0], 0.25, 1e-12, "demand dual");
    for (j, want) in [1.75, 0.75, 0.25, 0.0, 0.0, 0.0].into_iter().enumerate() {
        assert_close(sol.b[j], want, 1e-12, &format!("supply dual {j}"));
    }
    assert!(!sol.degenerate);
    assert!(sol.dual_unique_hint);
    assert!(check_complementary_slackness(&inst, &sol.x, &sol.a, &sol.b, &[3.5], &geometric_supply()));
}

#[test]
fn two_by_one_hand_enumeration() {
    let inst = two_by_one();
    let (d, s) = (vec![2.0, 2.0], vec![3.0]);
    let sol = solve_matching(&inst, &d, &s).unwrap();
    assert_close(sol.objective, 5.0, 1e-12, "objective");
    assert_close(sol.x.at(0, 0), 2.0, 1e-12, "x[0][0]");
    assert_close(sol.x.at(1, 0), 1.0, 1e-12, "x[1][0]");
    assert_close(sol.a[0], 1.0, 1e-12, "a[0]");
    assert_close(sol.a[1], 0.0, 1e-12, "a[1]");
    assert_close(sol.b[0], 1.0, 1e-12, "b[0]");
    assert!(!sol.degenerate);
    assert!(sol.primal_unique_hint);
    assert!(check_complementary_slackness(&inst, &sol.x, &sol.a, &sol.b, &d, &s));
    assert!(!is_degenerate(&sol.x, &d, &s));
}

#[test]
fn zero_demand_is_trivial() {
    let inst = geometric_instance();
    let s = geometric_supply();
    let sol = solve_matching(&inst, &[0.0], &s).unwrap();
    assert_eq!(sol.objective, 0.0);
    assert!(sol.x.data().iter().all(|&x| x == 0.0));
    for (j, &b) in sol.b.iter().enumerate() {
        assert_close(b, 0.0, 1e-12, &format!("b[{j}] with slack supply"));
    }
    // Dual feasibility forces the demand dual up to the best edge value.
    assert!(sol.a[0] >= 2.0 - 1e-12, "a[0]={} below best value", sol.a[0]);
}

#[test]
fn forged_duals_fail_slackness() {
    let inst = two_by_one();
    let x = Mat::from_rows(&[vec![2.0], vec![1.0]]).unwrap();
    assert!(!check_complementary_slackness(
        &inst,
        &x,
        &[0.0, 0.0],
        &[2.0],
        &[2.0, 2.0],
        &[3.0]
    ));
}

#[test]
fn slackness_accepts_all_zero_on_empty_market() {
    let inst = two_by_one();
    let x = Mat::zeros(2, 1);
    assert!(check_complementary_slackness(
        &inst,
        &x,
        &[0.0, 0.0],
        &[0.0],
        &[0.0, 0.0],
        &[0.0]
    ));
}

#[test]
fn unit_types_perfect_matching_is_degenerate() {
    let inst = MatchingInstance::from_dense(&Mat::from_rows(&[vec![1.0]]).unwrap()).unwrap();
    let sol = solve_matching(&inst, &[1.0], &[1.0]).unwrap();
    assert_close(sol.objective, 1.0, 1e-12, "objective");
    assert!(sol.degenerate, "one positive entry vs two tight rows");
    assert!(!sol.dual_unique_hint);
    assert!(is_degenerate(&sol.x, &[1.0], &[1.0]));
}

#[test]
fn tied_values_make_degenerate_pooling() {
    let inst = MatchingInstance::from_dense(&Mat::from_rows(&[vec![1.0], vec![1.0]]).unwrap())
        .unwrap();
    let sol = solve_matching(&inst, &[1.0, 1.0], &[2.0]).unwrap();
    assert_close(sol.objective, 2.0, 1e-12, "objective");
    assert!(is_degenerate(&sol.x, &[1.0, 1.0], &[2.0]));
    assert!(sol.degenerate);
}

#[test]
fn interior_optimum_is_not_degenerate() {
    let inst = MatchingInstance::from_dense(&Mat::from_rows(&[vec![-1.0]]).unwrap()).unwrap();
    let sol = solve_matching(&inst, &[1.0], &[1.0]).unwrap();
    assert_eq!(sol.objective, 0.0);
    assert_eq!(sol.x.at(0, 0), 0.0);
    assert!(!is_degenerate(&sol.x, &[1.0], &[1.0]));
    assert!(!sol.degenerate);
}

#[test]
fn network_and_reference_routes_agree_on_hand_instances() {
    let cases: Vec<(MatchingInstance, Vec<f64>, Vec<f64>)> = vec![
        (geometric_instance(), vec![3.5], geometric_supply()),
        (geometric_instance(), vec![5.5], geometric_supply()),
        (two_by_one(), vec![2.0, 2.0], vec![3.0]),
        (two_by_one(), vec![1.0, 1.0], vec![1.0]),
    ];
    for (k, (inst, d, s)) in cases.into_iter().enumerate() {
        let net = solve_matching(&inst, &d, &s).unwrap();
        let dense = solve_matching_reference(&inst, &d, &s).unwrap();
        assert_close(net.objective, dense.objective, 1e-9, &format!("case {k} objective"));
        if net.dual_unique_hint {
            for i in 0..d.len() {
                assert_close(net.a[i], dense.a[i], 1e-9, &format!("case {k} a[{i}]"));
            }
            for j in 0..s.len() {
                assert_close(net.b[j], dense.b[j], 1e-9, &format!("case {k} b[{j}]"));
            }
        }
    }
}

#[test]
fn isolated_demand_type_prices_zero() {
    let inst = MatchingInstance::from_edges(2, 1, vec![Edge { i: 0, j: 0, value: 2.0 }]).unwrap();
    assert_eq!(inst.isolated_demand_types(), vec![1]);
    let sol = solve_matching_sparse(&inst, &[1.0, 5.0], &[3.0]).unwrap();
    assert_close(sol.objective, 2.0, 1e-12, "objective");
    assert_close(sol.a[1], 0.0, 1e-12, "isolated type dual");
}

#[test]
fn sparse_flows_densify_consistently() {
    let inst = two_by_one();
    let (d, s) = (vec![2.0, 2.0], vec![3.0]);
    let sparse = solve_matching_sparse(&inst, &d, &s).unwrap();
    let dense = solve_matching(&inst, &d, &s).unwrap();
    for (e, &f) in inst.edges().iter().zip(&sparse.flows) {
        assert_eq!(dense.x.at(e.i as usize, e.j as usize), f);
    }
    assert_eq!(sparse.objective, dense.objective);
}

#[test]
fn oversupplied_duals_hit_best_row_values() {
    let v = Mat::from_rows(&[vec![2.0, 0.5], vec![1.0, 3.0]]).unwrap();
    let inst = MatchingInstance::from_dense(&v).unwrap();
    let sol = solve_matching(&inst, &[1.0, 1.0], &[50.0, 50.0]).unwrap();
    assert_close(sol.objective, 5.0, 1e-12, "objective");
    assert_close(sol.a[0], 2.0, 1e-12, "a[0] = best value in row 0");
    assert_close(sol.a[1], 3.0, 1e-12, "a[1] = best value in row 1");
    assert_close(sol.b[0], 0.0, 1e-12, "slack supply dual");
    assert_close(sol.b[1], 0.0, 1e-12, "slack supply dual");
}

#[test]
fn repeat_solves_are_bitwise_identical() {
    let mut r = rng(41);
    for _ in 0..20 {
        let inst = random_instance(&mut r, 6, 10.0);
        let d = random_vector(&mut r, inst.n_demand(), 0.0, 5.0);
        let s = random_vector(&mut r, inst.n_supply(), 0.0, 5.0);
        let first = solve_matching(&inst, &d, &s).unwrap();
        let second = solve_matching(&inst, &d, &s).unwrap();
        assert_eq!(first.x, second.x);
        assert_eq!(first.a, second.a);
        assert_eq!(first.b, second.b);
        assert_eq!(first.objective, second.objective);
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let inst = two_by_one();
    assert!(solve_matching(&inst, &[1.0], &[1.0]).is_err());
    assert!(solve_matching(&inst, &[1.0, 1.0], &[1.0, 1.0]).is_err());
    assert!(solve_matching(&inst, &[-1.0, 1.0], &[1.0]).is_err());
}
