use proptest::prelude::*;

use stprbh::bnb::{solve_milp, SolveParams};
use stprbh::corpus::{random_instance, CorpusSpec};
use stprbh::instance::{parse_stp, write_stp};
use stprbh::model::{MilpModel, Sense, VarKind};
use stprbh::pop::{build_pop, encode_tree, starting_tree, ModelVariant};
use stprbh::simplex::{solve_lp, LpStatus};
use stprbh::solve::{relaxation_value, solve_instance};
use stprbh::verify::{brute_force, parse_solution, verify_arcs, verify_solution, write_solution, Violation};

fn small(seed: u64) -> stprbh::instance::Instance {
    random_instance(&CorpusSpec::SMALL, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stp_round_trip(seed in any::<u64>()) {
        let inst = small(seed);
        let text = write_stp(&inst);
        prop_assert_eq!(parse_stp(&text).unwrap(), inst);
    }

    #[test]
    fn oracle_is_monotone(seed in any::<u64>()) {
        let inst = small(seed);
        let base = brute_force(&inst).unwrap().objective;
        prop_assert!(base >= inst.revenue(inst.root()));
        let more_hops = brute_force(&inst.with_hop_limit(inst.hop_limit() + 1).unwrap()).unwrap().objective;
        let more_budget = brute_force(&inst.with_budget(inst.budget() + 3.0).unwrap()).unwrap().objective;
        prop_assert!(more_hops >= base);
        prop_assert!(more_budget >= base);
    }

    #[test]
    fn optimal_tree_has_an_assignment(seed in any::<u64>()) {
        let inst = small(seed);
        prop_assume!(inst.edge_count() > 0);
        let best = brute_force(&inst).unwrap();
        for variant in [ModelVariant::BASIC, ModelVariant::POP1, ModelVariant::POP2] {
            let (model, index) = build_pop(&inst, variant).unwrap();
            match encode_tree(&inst, &index, &model, &best) {
                Some(x) => prop_assert_eq!(model.objective_value(&x), best.objective),
                // only the root-only tree can fall outside the root cut
                None => prop_assert!(variant.use_root_cut && best.arcs.is_empty()),
            }
            let start = starting_tree(&inst, variant);
            prop_assert!(encode_tree(&inst, &index, &model, &start).is_some());
        }
    }

    #[test]
    fn relaxation_bounds_the_optimum(seed in any::<u64>()) {
        let inst = small(seed);
        let opt = solve_instance(&inst, ModelVariant::POP2, &SolveParams::default()).unwrap();
        for variant in [ModelVariant::BASIC, ModelVariant::POP1, ModelVariant::POP2, ModelVariant::POP2R] {
            let lp = relaxation_value(&inst, variant).unwrap();
            prop_assert!(lp >= opt.report.lb - 1e-6, "{} {} < {}", variant.name(), lp, opt.report.lb);
        }
    }

    #[test]
    fn solver_is_deterministic(seed in any::<u64>()) {
        let inst = small(seed);
        let a = solve_instance(&inst, ModelVariant::POP1R, &SolveParams::default()).unwrap();
        let b = solve_instance(&inst, ModelVariant::POP1R, &SolveParams::default()).unwrap();
        prop_assert_eq!(a.report.lb, b.report.lb);
        prop_assert_eq!(a.report.nodes, b.report.nodes);
        prop_assert_eq!(a.report.iterations, b.report.iterations);
        prop_assert_eq!(a.tree, b.tree);
    }

    #[test]
    fn parallel_search_matches_serial(seed in any::<u64>()) {
        let inst = small(seed);
        let serial = solve_instance(&inst, ModelVariant::POP2, &SolveParams::default()).unwrap();
        let parallel = solve_instance(&inst, ModelVariant::POP2, &SolveParams { threads: 4, ..SolveParams::default() }).unwrap();
        prop_assert_eq!(serial.report.status, parallel.report.status);
        prop_assert_eq!(serial.report.lb, parallel.report.lb);
    }

    #[test]
    fn solution_files_round_trip(seed in any::<u64>()) {
        let inst = small(seed);
        let tree = brute_force(&inst).unwrap();
        let parsed = parse_solution(&write_solution(&tree)).unwrap();
        let report = verify_arcs(&inst, &parsed.arcs, parsed.objective);
        prop_assert!(report.feasible, "{:?}", report.violations);
        prop_assert_eq!(report.objective, tree.objective);
    }

    #[test]
    fn verifier_catches_a_second_parent(seed in any::<u64>()) {
        let inst = small(seed);
        let tree = brute_force(&inst).unwrap();
        prop_assert!(verify_solution(&inst, &tree).feasible);
        // give some tree node a second parent through an unused edge
        let extra = tree.nodes().filter(|&v| v != inst.root()).find_map(|v| {
            inst.neighbors(v).iter().map(|&(w, _)| (w, v)).find(|&(w, v)| !tree.arcs.contains(&(w, v)) && !tree.arcs.contains(&(v, w)))
        });
        if let Some(arc) = extra {
            let mut arcs = tree.arcs.clone();
            arcs.push(arc);
            let report = verify_arcs(&inst, &arcs, None);
            let expected = Violation::MultipleParents { node: arc.1 };
            prop_assert!(report.violations.contains(&expected));
        }
    }

    #[test]
    fn lp_vertex_is_feasible_and_dominates_integer_points(
        coeffs in proptest::collection::vec(-5i32..=5, 12),
        rhs in proptest::collection::vec(0i32..=6, 3),
        obj in proptest::collection::vec(-4i32..=6, 4),
    ) {
        let mut m = MilpModel::new("rand");
        let cols: Vec<usize> = (0..4).map(|j| m.add_column(format!("x{j}"), VarKind::Binary, 0.0, 1.0).unwrap()).collect();
        for r in 0..3 {
            let terms: Vec<(usize, f64)> = (0..4).filter(|&j| coeffs[r * 4 + j] != 0).map(|j| (cols[j], coeffs[r * 4 + j] as f64)).collect();
            if !terms.is_empty() {
                let sense = [Sense::Le, Sense::Ge, Sense::Le][r];
                let rhs = if sense == Sense::Ge { -(rhs[r] as f64) } else { rhs[r] as f64 };
                m.add_row(format!("r{r}"), terms, sense, rhs).unwrap();
            }
        }
        m.set_objective((0..4).map(|j| (cols[j], obj[j] as f64)).collect(), 0.0).unwrap();
        let lp = solve_lp(&m).unwrap();
        let integer_best = (0..16u32)
            .map(|mask| (0..4).map(|j| ((mask >> j) & 1) as f64).collect::<Vec<_>>())
            .filter(|x| m.is_feasible(x, 1e-9))
            .map(|x| m.objective_value(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        match lp.status {
            LpStatus::Optimal => {
                prop_assert!(m.is_feasible(&lp.x, 1e-7));
                prop_assert!(lp.objective >= integer_best - 1e-9);
                let mip = solve_milp(&m, &SolveParams::default()).unwrap();
                prop_assert_eq!(mip.lb, integer_best);
            }
            LpStatus::Infeasible => prop_assert_eq!(integer_best, f64::NEG_INFINITY),
            LpStatus::Unbounded => prop_assert!(false, "bounded model reported unbounded"),
        }
    }
}
